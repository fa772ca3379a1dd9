use std::cmp::Ordering;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TopologyMask;
use crate::error::{check_dim, Result};

/// One topology update of a single layer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TopologyDelta {
    /// Flat positions removed, in drop order (smallest magnitude first).
    pub dropped: Vec<usize>,
    /// Flat positions added, ascending.
    pub grown: Vec<usize>,
    pub step: u64,
    /// Growth that could not be placed because too few positions were empty.
    pub shortfall: usize,
}

impl TopologyDelta {
    pub fn is_empty(&self) -> bool {
        self.dropped.is_empty() && self.grown.is_empty()
    }

    /// Dropped and grown positions together; both need fresh optimizer state.
    pub fn touched(&self) -> impl Iterator<Item = usize> + '_ {
        self.dropped.iter().chain(&self.grown).copied()
    }
}

/// Magnitude ordering with ties broken by lowest flat index.
fn magnitude_order(weights: &[f64], a: usize, b: usize) -> Ordering {
    weights[a]
        .abs()
        .total_cmp(&weights[b].abs())
        .then(a.cmp(&b))
}

/// Drop the `floor(drop_fraction * k)` smallest-magnitude existing
/// connections and grow the same number at positions that were empty before
/// the update, chosen uniformly at random. Dropped and grown weights are set
/// to zero. Positions in `protected` are never dropped.
pub fn evolve<R: Rng + ?Sized>(
    mask: &mut TopologyMask,
    weights: &mut Array2<f64>,
    drop_fraction: f64,
    protected: &[usize],
    step: u64,
    rng: &mut R,
) -> Result<TopologyDelta> {
    let (rows, cols) = mask.shape();
    check_dim("evolve weight rows", rows, weights.nrows())?;
    check_dim("evolve weight cols", cols, weights.ncols())?;

    let k = mask.count();
    let n_drop = (drop_fraction * k as f64).floor() as usize;
    let mut delta = TopologyDelta {
        step,
        ..Default::default()
    };
    if n_drop == 0 {
        return Ok(delta);
    }

    let flat = weights
        .as_slice_mut()
        .expect("weight matrices are standard layout");

    let mut candidates = mask.existing();
    if !protected.is_empty() {
        let mut shield = vec![false; mask.len()];
        for &p in protected {
            if p < shield.len() {
                shield[p] = true;
            }
        }
        candidates.retain(|&p| !shield[p]);
    }
    let n_drop = n_drop.min(candidates.len());
    if n_drop < candidates.len() {
        candidates.select_nth_unstable_by(n_drop, |&a, &b| magnitude_order(flat, a, b));
    }
    let mut dropped = candidates[..n_drop].to_vec();
    dropped.sort_unstable_by(|&a, &b| magnitude_order(flat, a, b));

    // Growth draws from positions empty before the update, so a connection
    // is never dropped and regrown in the same step.
    let empty = mask.empty_positions();
    let n_grow = n_drop.min(empty.len());
    let mut grown: Vec<usize> = rand::seq::index::sample(rng, empty.len(), n_grow)
        .into_iter()
        .map(|i| empty[i])
        .collect();
    grown.sort_unstable();

    for &p in &dropped {
        mask.set(p, false);
        flat[p] = 0.0;
    }
    for &p in &grown {
        mask.set(p, true);
        flat[p] = 0.0;
    }

    delta.shortfall = n_drop - n_grow;
    delta.dropped = dropped;
    delta.grown = grown;
    Ok(delta)
}
