use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::histogram::{sample_imitated_into, HistogramDistribution};
use super::{StepResult, VectorEnv};
use crate::error::{Error, Result};

/// `ceil(d_og / (1 - n_f))`.
///
/// The quotient is snapped to the nearest integer when within floating-point
/// error of it, so e.g. `17 / (1 - 0.8)` gives 85 rather than 86.
pub fn ene_dim(d_og: usize, noise_fraction: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&noise_fraction) {
        return Err(Error::config(format!(
            "noise fraction must be in [0, 1), got {noise_fraction}"
        )));
    }
    let exact = d_og as f64 / (1.0 - noise_fraction);
    let nearest = exact.round();
    if (exact - nearest).abs() <= 1e-9 * exact.max(1.0) {
        Ok(nearest as usize)
    } else {
        Ok(exact.ceil() as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseDistribution {
    Gaussian,
    Imitate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EneConfig {
    pub noise_fraction: f64,
    pub noise_mean: f64,
    pub noise_amplitude: f64,
    pub distribution: NoiseDistribution,
    /// One histogram per original feature; required for `Imitate`.
    #[serde(default)]
    pub histograms: Option<Vec<HistogramDistribution>>,
}

impl Default for EneConfig {
    fn default() -> Self {
        Self {
            noise_fraction: 0.0,
            noise_mean: 0.0,
            noise_amplitude: 1.0,
            distribution: NoiseDistribution::Gaussian,
            histograms: None,
        }
    }
}

impl EneConfig {
    pub fn gaussian(noise_fraction: f64) -> Self {
        Self {
            noise_fraction,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.noise_fraction) {
            return Err(Error::config(format!(
                "noise_fraction must be in [0, 1), got {}",
                self.noise_fraction
            )));
        }
        if !(self.noise_amplitude > 0.0 && self.noise_amplitude.is_finite()) {
            return Err(Error::config("noise_amplitude must be positive"));
        }
        if !self.noise_mean.is_finite() {
            return Err(Error::config("noise_mean must be finite"));
        }
        if self.distribution == NoiseDistribution::Imitate
            && self.histograms.as_ref().is_none_or(Vec::is_empty)
        {
            return Err(Error::config(
                "distribution = imitate requires at least one histogram",
            ));
        }
        Ok(())
    }

    /// Fill `out` with fresh i.i.d. noise features.
    pub fn sample_noise<R: Rng + ?Sized>(&self, out: &mut [f64], rng: &mut R) {
        match self.distribution {
            NoiseDistribution::Gaussian => {
                for x in out {
                    let z: f64 = rng.sample(StandardNormal);
                    *x = self.noise_mean + self.noise_amplitude * z;
                }
            }
            NoiseDistribution::Imitate => {
                let hists = self.histograms.as_deref().unwrap_or_default();
                sample_imitated_into(hists, out, rng);
            }
        }
    }
}

/// Wraps an environment and appends `d_ene - d_og` noise features to every
/// observation. Rewards and termination flags pass through unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyEnv<E> {
    inner: E,
    config: EneConfig,
    d_ene: usize,
}

impl<E: VectorEnv> NoisyEnv<E> {
    pub fn new(inner: E, config: EneConfig) -> Result<Self> {
        config.validate()?;
        let d_ene = ene_dim(inner.state_dim(), config.noise_fraction)?;
        Ok(Self {
            inner,
            config,
            d_ene,
        })
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }

    pub fn config(&self) -> &EneConfig {
        &self.config
    }

    pub fn original_dim(&self) -> usize {
        self.inner.state_dim()
    }

    pub fn state_dim(&self) -> usize {
        self.d_ene
    }

    pub fn action_dim(&self) -> usize {
        self.inner.action_dim()
    }

    pub fn augment<R: Rng + ?Sized>(&self, original: Vec<f64>, rng: &mut R) -> Vec<f64> {
        let d_og = original.len();
        let mut state = original;
        state.resize(self.d_ene.max(d_og), 0.0);
        self.config.sample_noise(&mut state[d_og..], rng);
        state
    }

    pub fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        let original = self.inner.reset(rng);
        self.augment(original, rng)
    }

    pub fn step(&mut self, action: &[f64], rng: &mut dyn RngCore) -> StepResult {
        let mut out = self.inner.step(action);
        out.state = self.augment(std::mem::take(&mut out.state), rng);
        out
    }

    pub fn scripted_action(&self) -> Vec<f64> {
        self.inner.scripted_action()
    }
}
