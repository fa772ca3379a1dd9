use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of recorded states accepted by [`fit_histograms`].
pub const MIN_RECORDED_STATES: usize = 1000;

/// Piecewise-uniform distribution: a bin is drawn from `pmf`, then a value
/// uniformly within it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramDistribution {
    bin_edges: Vec<f64>,
    pmf: Vec<f64>,
}

impl HistogramDistribution {
    pub fn new(bin_edges: Vec<f64>, pmf: Vec<f64>) -> Result<Self> {
        if pmf.is_empty() || bin_edges.len() != pmf.len() + 1 {
            return Err(Error::config(format!(
                "histogram needs len(bin_edges) = len(pmf) + 1, got {} and {}",
                bin_edges.len(),
                pmf.len()
            )));
        }
        if bin_edges.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::config("histogram bin edges must be sorted"));
        }
        if pmf.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::config("histogram probabilities must be non-negative"));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!(
                "histogram probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { bin_edges, pmf })
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn bins(&self) -> usize {
        self.pmf.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut bin = self.pmf.len() - 1;
        for (i, &p) in self.pmf.iter().enumerate() {
            acc += p;
            if u < acc {
                bin = i;
                break;
            }
        }
        let (lo, hi) = (self.bin_edges[bin], self.bin_edges[bin + 1]);
        lo + rng.random::<f64>() * (hi - lo)
    }
}

/// Equal-width histogram of every feature (column) of `states`, spanning the
/// observed min..max. A constant feature yields one zero-width bin.
pub fn fit_histograms(states: &[Vec<f64>], bins: usize) -> Result<Vec<HistogramDistribution>> {
    if bins == 0 {
        return Err(Error::config("histogram bin count must be positive"));
    }
    if states.len() < MIN_RECORDED_STATES {
        return Err(Error::config(format!(
            "need at least {MIN_RECORDED_STATES} recorded states, got {}",
            states.len()
        )));
    }
    let dim = states[0].len();
    if let Some(bad) = states.iter().position(|s| s.len() != dim) {
        return Err(Error::config(format!(
            "recorded state {bad} has length {}, expected {dim}",
            states[bad].len()
        )));
    }
    (0..dim)
        .map(|j| {
            let (lo, hi) = states.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                (lo.min(s[j]), hi.max(s[j]))
            });
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::config(format!("feature {j} has non-finite values")));
            }
            if lo == hi {
                return HistogramDistribution::new(vec![lo, hi], vec![1.0]);
            }
            let width = (hi - lo) / bins as f64;
            let mut counts = vec![0usize; bins];
            for s in states {
                let k = (((s[j] - lo) / width) as usize).min(bins - 1);
                counts[k] += 1;
            }
            let mut edges: Vec<f64> = (0..bins).map(|k| lo + k as f64 * width).collect();
            edges.push(hi);
            let n = states.len() as f64;
            let mut pmf: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
            renormalize(&mut pmf);
            HistogramDistribution::new(edges, pmf)
        })
        .collect()
}

/// Push the rounding residue of a normalized pmf onto its largest entry.
fn renormalize(pmf: &mut [f64]) {
    let total: f64 = pmf.iter().sum();
    let (imax, _) = pmf
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty pmf");
    pmf[imax] += 1.0 - total;
}

/// `count` noise values; value `j` is drawn from histogram `j mod len`.
pub fn sample_imitated<R: Rng + ?Sized>(
    histograms: &[HistogramDistribution],
    count: usize,
    rng: &mut R,
) -> Vec<f64> {
    let mut out = vec![0.0; count];
    sample_imitated_into(histograms, &mut out, rng);
    out
}

pub(crate) fn sample_imitated_into<R: Rng + ?Sized>(
    histograms: &[HistogramDistribution],
    out: &mut [f64],
    rng: &mut R,
) {
    assert!(!histograms.is_empty(), "imitated noise needs histograms");
    for (j, x) in out.iter_mut().enumerate() {
        *x = histograms[j % histograms.len()].sample(rng);
    }
}

#[derive(Serialize, Deserialize)]
struct HistogramFile {
    format: String,
    version: u32,
    histograms: Vec<HistogramDistribution>,
}

const HISTOGRAM_FORMAT: &str = "anf-histograms";

/// JSON histogram file; floats are written in shortest round-trip form so a
/// write/read cycle is exact.
pub fn write_histograms(path: &Path, histograms: &[HistogramDistribution]) -> Result<()> {
    let file = HistogramFile {
        format: HISTOGRAM_FORMAT.into(),
        version: 1,
        histograms: histograms.to_vec(),
    };
    let text = serde_json::to_string_pretty(&file).map_err(|e| Error::format(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn read_histograms(path: &Path) -> Result<Vec<HistogramDistribution>> {
    let text = fs::read_to_string(path)?;
    let file: HistogramFile = serde_json::from_str(&text)
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
    if file.format != HISTOGRAM_FORMAT || file.version != 1 {
        return Err(Error::format(format!(
            "{}: not an {HISTOGRAM_FORMAT} v1 file",
            path.display()
        )));
    }
    // Re-validate: the file may have been edited by hand.
    file.histograms
        .into_iter()
        .map(|h| HistogramDistribution::new(h.bin_edges, h.pmf))
        .collect()
}

/// Recorded-rollout CSV: header `f0,f1,...`, then one state per row with
/// columns in feature order.
pub fn write_rollout(path: &Path, states: &[Vec<f64>]) -> Result<()> {
    let dim = states.first().map_or(0, Vec::len);
    let mut out = String::new();
    let header: Vec<String> = (0..dim).map(|j| format!("f{j}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for s in states {
        for (j, v) in s.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_rollout(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(format!("{}: empty rollout file", path.display())))?;
    let dim = header.split(',').count();
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let row: std::result::Result<Vec<f64>, _> = l.split(',').map(str::parse).collect();
            let row = row.map_err(|e| {
                Error::format(format!("{}:{}: {e}", path.display(), i + 2))
            })?;
            if row.len() != dim {
                return Err(Error::format(format!(
                    "{}:{}: expected {dim} columns, got {}",
                    path.display(),
                    i + 2,
                    row.len()
                )));
            }
            Ok(row)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn constant_feature_gives_single_bin() {
        let states = vec![vec![2.5, 0.0]; 1000];
        let h = fit_histograms(&states, 50).unwrap();
        assert_eq!(h[0].pmf(), &[1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(h[0].sample(&mut rng), 2.5);
        }
    }

    #[test]
    fn too_few_states_is_rejected() {
        assert!(fit_histograms(&vec![vec![1.0]; 999], 10).is_err());
    }

    #[test]
    fn single_unit_bin_samples_in_range() {
        let h = HistogramDistribution::new(vec![0.0, 1.0], vec![1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for x in sample_imitated(&[h], 10_000, &mut rng) {
            assert!((0.0..1.0).contains(&x));
        }
    }

    #[test]
    fn bin_frequency_matches_pmf() {
        // Binomial(1e5, 0.9): sd = 9.5e-4, so +-0.01 is > 10 sd.
        let h = HistogramDistribution::new(vec![0.0, 1.0, 2.0], vec![0.9, 0.1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let first = sample_imitated(&[h], n, &mut rng)
            .into_iter()
            .filter(|&x| x < 1.0)
            .count();
        assert!((first as f64 / n as f64 - 0.9).abs() < 0.01);
    }

    #[test]
    fn samples_cycle_through_features() {
        let hs: Vec<_> = (0..3)
            .map(|k| HistogramDistribution::new(vec![k as f64, k as f64 + 0.5], vec![1.0]).unwrap())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs = sample_imitated(&hs, 10, &mut rng);
        for (j, x) in xs.iter().enumerate() {
            assert_eq!(x.floor() as usize, j % 3);
        }
    }

    #[test]
    fn pmf_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let states: Vec<Vec<f64>> = (0..1234)
            .map(|_| vec![rng.sample::<f64, _>(StandardNormal).powi(3), rng.random::<f64>()])
            .collect();
        for bins in [1, 7, 50, 333] {
            for h in fit_histograms(&states, bins).unwrap() {
                assert!((h.pmf().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }
}
