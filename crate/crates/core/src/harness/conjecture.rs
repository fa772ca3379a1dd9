//! Two-weight regression `f(x1, x2) = w1 x1 + w2 x2` fitted to `g = a x1`,
//! where `x2` is an irrelevant input with a possibly non-zero mean.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weights beyond this magnitude count as diverged.
const DIVERGENCE_LIMIT: f64 = 1e6;
pub const NOISE_WEIGHT_TOLERANCE: f64 = 1e-3;
pub const SIGNAL_WEIGHT_TOLERANCE: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjectureConfig {
    pub target_a: f64,
    pub noise_mean: f64,
    pub lr: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub init: (f64, f64),
    pub seed: u64,
}

impl Default for ConjectureConfig {
    fn default() -> Self {
        Self {
            target_a: 1.0,
            noise_mean: 0.0,
            lr: 0.01,
            steps: 5000,
            batch_size: 64,
            init: (0.0, 0.5),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjectureResult {
    /// `(step, w1, w2)`, starting with the initial weights at step 0.
    pub trajectory: Vec<(usize, f64, f64)>,
    pub w1: f64,
    pub w2: f64,
}

impl ConjectureResult {
    pub fn noise_weight_vanished(&self) -> bool {
        self.w2.abs() < NOISE_WEIGHT_TOLERANCE
    }

    pub fn signal_weight_recovered(&self, a: f64) -> bool {
        (self.w1 - a).abs() < SIGNAL_WEIGHT_TOLERANCE
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "w1", "w2"]).map_err(csv_err)?;
        for (s, w1, w2) in &self.trajectory {
            w.write_record([s.to_string(), w1.to_string(), w2.to_string()])
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::format(e.to_string())
}

/// Minibatch gradient descent on the mean squared error with fresh samples
/// `x1 ~ N(0, 1)`, `x2 ~ N(noise_mean, 1)` every step.
pub fn conjecture_oracle(cfg: &ConjectureConfig) -> Result<ConjectureResult> {
    if !(cfg.lr > 0.0) || cfg.batch_size == 0 {
        return Err(Error::config("lr must be positive and batch_size non-zero"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let x1_dist = Normal::new(0.0, 1.0).expect("unit normal");
    let x2_dist = Normal::new(cfg.noise_mean, 1.0)
        .map_err(|e| Error::config(format!("noise_mean: {e}")))?;
    let (mut w1, mut w2) = cfg.init;
    let mut trajectory = Vec::with_capacity(cfg.steps + 1);
    trajectory.push((0, w1, w2));
    let n = cfg.batch_size as f64;
    for step in 1..=cfg.steps {
        let (mut g1, mut g2) = (0.0, 0.0);
        for _ in 0..cfg.batch_size {
            let x1 = x1_dist.sample(&mut rng);
            let x2 = x2_dist.sample(&mut rng);
            let err = w1 * x1 + w2 * x2 - cfg.target_a * x1;
            g1 += 2.0 * err * x1 / n;
            g2 += 2.0 * err * x2 / n;
        }
        w1 -= cfg.lr * g1;
        w2 -= cfg.lr * g2;
        trajectory.push((step, w1, w2));
        if !(w1.abs() < DIVERGENCE_LIMIT && w2.abs() < DIVERGENCE_LIMIT) {
            return Err(Error::numerical(format!(
                "gradient descent diverged at step {step} (w1 = {w1:e}, w2 = {w2:e}); lower the learning rate"
            )));
        }
    }
    Ok(ConjectureResult { trajectory, w1, w2 })
}
