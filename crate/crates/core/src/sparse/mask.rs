use std::fmt::Write as _;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary existence map over an `[out x in]` weight matrix.
///
/// Positions are addressed by flat row-major index `row * cols + col`, which
/// matches the memory layout of the weight matrices it masks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyMask {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
    count: usize,
    target_density: f64,
}

impl TopologyMask {
    pub fn full(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            bits: vec![true; rows * cols],
            count: rows * cols,
            target_density: 1.0,
        }
    }

    /// Build a mask from an explicit list of flat positions.
    pub fn from_positions(
        rows: usize,
        cols: usize,
        positions: impl IntoIterator<Item = usize>,
        target_density: f64,
    ) -> Result<Self> {
        let mut bits = vec![false; rows * cols];
        let mut count = 0;
        for p in positions {
            if p >= bits.len() {
                return Err(Error::usage(format!(
                    "mask position {p} out of range for shape ({rows}, {cols})"
                )));
            }
            if bits[p] {
                return Err(Error::usage(format!("duplicate mask position {p}")));
            }
            bits[p] = true;
            count += 1;
        }
        Ok(Self {
            rows,
            cols,
            bits,
            count,
            target_density,
        })
    }

    /// Random mask with exactly `connections` existing positions, chosen
    /// uniformly without replacement.
    pub fn random_with_count<R: Rng + ?Sized>(
        rows: usize,
        cols: usize,
        connections: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let total = rows * cols;
        if connections > total {
            return Err(Error::config(format!(
                "cannot place {connections} connections in a {rows}x{cols} layer"
            )));
        }
        let chosen = rand::seq::index::sample(rng, total, connections);
        let density = if total == 0 {
            1.0
        } else {
            connections as f64 / total as f64
        };
        Self::from_positions(rows, cols, chosen.into_iter(), density)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Number of existing connections.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn target_density(&self) -> f64 {
        self.target_density
    }

    pub(crate) fn set_target_density(&mut self, density: f64) {
        self.target_density = density;
    }

    pub fn density(&self) -> f64 {
        if self.bits.is_empty() {
            1.0
        } else {
            self.count as f64 / self.bits.len() as f64
        }
    }

    #[inline]
    pub fn get(&self, flat: usize) -> bool {
        self.bits[flat]
    }

    #[inline]
    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.cols + col]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub(crate) fn set(&mut self, flat: usize, value: bool) {
        if self.bits[flat] != value {
            self.bits[flat] = value;
            if value {
                self.count += 1;
            } else {
                self.count -= 1;
            }
        }
    }

    /// Flat indices of existing connections, ascending.
    pub fn existing(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    /// Flat indices of empty positions, ascending.
    pub fn empty_positions(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| (!b).then_some(i))
            .collect()
    }

    /// Column sums: the number of connections attached to each input neuron.
    pub fn connections_per_input(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.cols];
        for row in self.bits.chunks_exact(self.cols.max(1)) {
            for (c, &b) in counts.iter_mut().zip(row) {
                *c += b as usize;
            }
        }
        counts
    }

    /// Zero every weight at a position the mask marks as nonexistent.
    pub fn apply(&self, weights: &mut Array2<f64>) {
        debug_assert_eq!(weights.dim(), (self.rows, self.cols));
        for (w, &b) in weights.iter_mut().zip(&self.bits) {
            if !b {
                *w = 0.0;
            }
        }
    }

    /// Check that `weights` is exactly zero wherever the mask is empty.
    pub fn is_respected_by(&self, weights: &Array2<f64>) -> bool {
        weights.dim() == (self.rows, self.cols)
            && weights
                .iter()
                .zip(&self.bits)
                .all(|(&w, &b)| b || w == 0.0)
    }

    /// Text snapshot: a `# topology-mask` header line carrying the shape and
    /// target density, a `row,col` header, then one line per existing
    /// connection in ascending flat order.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(16 * self.count + 64);
        let _ = writeln!(
            out,
            "# topology-mask rows={} cols={} target_density={}",
            self.rows, self.cols, self.target_density
        );
        out.push_str("row,col\n");
        for p in self.existing() {
            let _ = writeln!(out, "{},{}", p / self.cols, p % self.cols);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format("empty mask snapshot"))?;
        let rest = header
            .strip_prefix("# topology-mask ")
            .ok_or_else(|| Error::format("missing '# topology-mask' header"))?;
        let (mut rows, mut cols, mut density) = (None, None, None);
        for field in rest.split_whitespace() {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| Error::format(format!("bad header field '{field}'")))?;
            let bad = |_| Error::format(format!("bad value in header field '{field}'"));
            match k {
                "rows" => rows = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "cols" => cols = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "target_density" => {
                    density = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?)
                }
                _ => return Err(Error::format(format!("unknown header field '{k}'"))),
            }
        }
        let (rows, cols, density) = match (rows, cols, density) {
            (Some(r), Some(c), Some(d)) => (r, c, d),
            _ => return Err(Error::format("incomplete mask header")),
        };
        match lines.next() {
            Some("row,col") => {}
            _ => return Err(Error::format("missing 'row,col' column header")),
        }
        let mut positions = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let parse = || -> Option<(usize, usize)> {
                let (r, c) = line.split_once(',')?;
                Some((r.trim().parse().ok()?, c.trim().parse().ok()?))
            };
            let (r, c) =
                parse().ok_or_else(|| Error::format(format!("line {}: bad entry '{line}'", i + 3)))?;
            if r >= rows || c >= cols {
                return Err(Error::format(format!(
                    "line {}: position ({r}, {c}) out of range",
                    i + 3
                )));
            }
            positions.push(r * cols + c);
        }
        Self::from_positions(rows, cols, positions, density)
    }
}
