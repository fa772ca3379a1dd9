//! Desk-scale continuous-control tasks and the noisy-observation wrappers:
//! noise padding (Gaussian or histogram-imitated) and scheduled feature
//! permutation.

mod ene;
mod histogram;
mod pene;
mod toy;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ene::{ene_dim, EneConfig, NoiseDistribution, NoisyEnv};
pub use histogram::{
    fit_histograms, read_histograms, MIN_RECORDED_STATES, read_rollout, sample_imitated, write_histograms,
    write_rollout, HistogramDistribution,
};
pub use pene::{PeneConfig, PermutationSchedule};
pub use toy::{LinearTracker, PointMassReach};

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub state: Vec<f64>,
    pub reward: f64,
    /// True termination; bootstrapping stops here.
    pub terminated: bool,
    /// Episode cut by the time limit; not terminal for bootstrapping.
    pub truncated: bool,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

/// Vector-state continuous-control environment.
///
/// This is also the adapter surface for bridging an external simulator.
pub trait VectorEnv {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Per-dimension `(low, high)` action bounds.
    fn action_bounds(&self) -> Vec<(f64, f64)>;
    fn horizon(&self) -> usize;
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> StepResult;
    /// Hand-written reference policy used as a calibration baseline.
    fn scripted_action(&self) -> Vec<f64>;
}

/// The built-in tasks, as a closed set so environment state can be
/// checkpointed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ToyEnv {
    PointMassReach(PointMassReach),
    LinearTracker(LinearTracker),
}

pub const BUILTIN_ENVS: &[&str] = &["point_mass_reach", "linear_tracker"];

impl ToyEnv {
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "point_mass_reach" => Ok(ToyEnv::PointMassReach(PointMassReach::new())),
            "linear_tracker" => Ok(ToyEnv::LinearTracker(LinearTracker::new())),
            _ => Err(Error::config(format!(
                "unknown environment '{name}' (available: {})",
                BUILTIN_ENVS.join(", ")
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ToyEnv::PointMassReach(_) => "point_mass_reach",
            ToyEnv::LinearTracker(_) => "linear_tracker",
        }
    }

    fn inner(&self) -> &dyn VectorEnv {
        match self {
            ToyEnv::PointMassReach(e) => e,
            ToyEnv::LinearTracker(e) => e,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn VectorEnv {
        match self {
            ToyEnv::PointMassReach(e) => e,
            ToyEnv::LinearTracker(e) => e,
        }
    }
}

impl VectorEnv for ToyEnv {
    fn state_dim(&self) -> usize {
        self.inner().state_dim()
    }
    fn action_dim(&self) -> usize {
        self.inner().action_dim()
    }
    fn action_bounds(&self) -> Vec<(f64, f64)> {
        self.inner().action_bounds()
    }
    fn horizon(&self) -> usize {
        self.inner().horizon()
    }
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.inner_mut().reset(rng)
    }
    fn step(&mut self, action: &[f64]) -> StepResult {
        self.inner_mut().step(action)
    }
    fn scripted_action(&self) -> Vec<f64> {
        self.inner().scripted_action()
    }
}

/// Original state/action dimensions of the MuJoCo tasks, tabulated for
/// dimension arithmetic only (no simulator ships).
pub const MUJOCO_DIMS: &[(&str, usize, usize)] = &[
    ("Humanoid-v3", 376, 17),
    ("HalfCheetah-v3", 17, 6),
    ("Walker2d-v3", 17, 6),
    ("Hopper-v3", 11, 3),
];

/// Noise fractions of the noise sweep.
pub const NOISE_FRACTIONS: &[f64] = &[0.8, 0.9, 0.95, 0.98, 0.99];

/// Map an action from the policy range `[-1, 1]` to the environment bounds.
pub fn scale_action(action: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    action
        .iter()
        .zip(bounds)
        .map(|(&a, &(lo, hi))| lo + (a.clamp(-1.0, 1.0) + 1.0) * 0.5 * (hi - lo))
        .collect()
}

/// Inverse of [`scale_action`].
pub fn unscale_action(action: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    action
        .iter()
        .zip(bounds)
        .map(|(&a, &(lo, hi))| 2.0 * (a - lo) / (hi - lo) - 1.0)
        .collect()
}
