use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeneConfig {
    /// Environment steps between permutations.
    pub permutation_period: u64,
    pub seed: u64,
}

/// Unannounced re-ordering of the full observation vector.
///
/// Period `p = floor(step / period)` uses permutation `perm_p`, with
/// `perm_0` the identity. Output position `i` carries input feature
/// `perm_p[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationSchedule {
    config: PeneConfig,
    dim: usize,
    cached_period: u64,
    cached: Vec<usize>,
}

impl PermutationSchedule {
    pub fn new(config: PeneConfig, dim: usize) -> Result<Self> {
        if config.permutation_period == 0 {
            return Err(Error::config("permutation_period must be positive"));
        }
        Ok(Self {
            config,
            dim,
            cached_period: 0,
            cached: (0..dim).collect(),
        })
    }

    pub fn config(&self) -> &PeneConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn period_of(&self, step: u64) -> u64 {
        step / self.config.permutation_period
    }

    /// Permutation for period `p`, independent of any other period.
    pub fn permutation_for_period(&self, p: u64) -> Vec<usize> {
        let mut perm: Vec<usize> = (0..self.dim).collect();
        if p > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
            rng.set_stream(p);
            perm.shuffle(&mut rng);
        }
        perm
    }

    /// Permutation in force at `step`.
    pub fn permutation_at(&mut self, step: u64) -> &[usize] {
        let p = self.period_of(step);
        if p != self.cached_period {
            self.cached = self.permutation_for_period(p);
            self.cached_period = p;
        }
        &self.cached
    }

    pub fn apply(&mut self, step: u64, state: &[f64]) -> Vec<f64> {
        assert_eq!(state.len(), self.dim, "state length differs from schedule");
        self.permutation_at(step).iter().map(|&j| state[j]).collect()
    }

    /// Undo [`PermutationSchedule::apply`] for the same step.
    pub fn invert(&mut self, step: u64, permuted: &[f64]) -> Vec<f64> {
        let perm = self.permutation_at(step);
        let mut out = vec![0.0; permuted.len()];
        for (i, &j) in perm.iter().enumerate() {
            out[j] = permuted[i];
        }
        out
    }

    /// Positions currently carrying the first `d_og` (task-relevant)
    /// features, ordered by original feature index.
    pub fn relevant_positions(&mut self, step: u64, d_og: usize) -> Vec<usize> {
        let perm = self.permutation_at(step);
        let mut pos = vec![0; d_og];
        for (i, &j) in perm.iter().enumerate() {
            if j < d_og {
                pos[j] = i;
            }
        }
        pos
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schedule(dim: usize) -> PermutationSchedule {
        PermutationSchedule::new(
            PeneConfig {
                permutation_period: 100,
                seed: 42,
            },
            dim,
        )
        .unwrap()
    }

    #[test]
    fn first_period_is_identity() {
        let mut s = schedule(20);
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        assert_eq!(s.apply(0, &x), x);
        assert_eq!(s.apply(99, &x), x);
    }

    #[test]
    fn invert_restores_state() {
        let mut s = schedule(30);
        let x: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        for step in [150, 250, 1234] {
            let y = s.apply(step, &x);
            assert_eq!(s.invert(step, &y), x);
        }
    }

    #[test]
    fn boundary_preserves_multiset_and_moves_positions() {
        let mut s = schedule(50);
        let x: Vec<f64> = (0..50).map(|i| i as f64 * 1.5).collect();
        let before = s.apply(99, &x);
        let after = s.apply(100, &x);
        assert_ne!(before, after);
        let mut a = before.clone();
        let mut b = after.clone();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
    }

    #[test]
    fn constant_within_period() {
        let mut s = schedule(40);
        let probe: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let first = s.apply(300, &probe);
        for step in 301..400 {
            assert_eq!(s.apply(step, &probe), first);
        }
    }

    #[test]
    fn relevant_positions_follow_permutation() {
        let mut s = schedule(25);
        assert_eq!(s.relevant_positions(5, 3), vec![0, 1, 2]);
        let perm = s.permutation_for_period(2);
        let pos = s.relevant_positions(250, 3);
        for (j, &i) in pos.iter().enumerate() {
            assert_eq!(perm[i], j);
        }
    }
}
