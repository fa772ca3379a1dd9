use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Keeps `log(1 - tanh(u)^2 + eps)` finite at saturation.
pub const TANH_EPSILON: f64 = 1e-6;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicyOutput {
    pub mean: Vec<f64>,
    /// Clamped to `[LOG_STD_MIN, LOG_STD_MAX]`.
    pub log_std: Vec<f64>,
    /// Standard-normal draw used for the reparameterized sample.
    pub noise: Vec<f64>,
    /// `mean + std * noise`, before squashing.
    pub pre_tanh: Vec<f64>,
    /// `tanh(pre_tanh)`, in `[-1, 1]`.
    pub sampled_action: Vec<f64>,
    pub log_prob: f64,
}

pub fn clamp_log_std(x: f64) -> f64 {
    x.clamp(LOG_STD_MIN, LOG_STD_MAX)
}

/// Log-density of `tanh(u)` where `u ~ N(mean, exp(log_std)^2)`, including
/// the tanh change-of-variables correction.
pub fn tanh_gaussian_log_prob(mean: &[f64], log_std: &[f64], pre_tanh: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(pre_tanh)
        .map(|((&mu, &ls), &u)| {
            let ls = clamp_log_std(ls);
            let z = (u - mu) / ls.exp();
            let a = u.tanh();
            -0.5 * z * z - ls - HALF_LN_2PI - (1.0 - a * a + TANH_EPSILON).ln()
        })
        .sum()
}

/// Reparameterized tanh-Gaussian sample with an explicit noise vector.
pub fn gaussian_head_with_noise(mean: &[f64], log_std: &[f64], noise: &[f64]) -> GaussianPolicyOutput {
    assert_eq!(mean.len(), log_std.len());
    assert_eq!(mean.len(), noise.len());
    let log_std: Vec<f64> = log_std.iter().map(|&x| clamp_log_std(x)).collect();
    let pre_tanh: Vec<f64> = mean
        .iter()
        .zip(&log_std)
        .zip(noise)
        .map(|((&mu, &ls), &xi)| mu + ls.exp() * xi)
        .collect();
    let sampled_action = pre_tanh.iter().map(|u| u.tanh()).collect();
    let log_prob = tanh_gaussian_log_prob(mean, &log_std, &pre_tanh);
    GaussianPolicyOutput {
        mean: mean.to_vec(),
        log_std,
        noise: noise.to_vec(),
        pre_tanh,
        sampled_action,
        log_prob,
    }
}

pub fn gaussian_head<R: Rng + ?Sized>(
    mean: &[f64],
    log_std: &[f64],
    rng: &mut R,
) -> GaussianPolicyOutput {
    let noise: Vec<f64> = (0..mean.len()).map(|_| rng.sample(StandardNormal)).collect();
    gaussian_head_with_noise(mean, log_std, &noise)
}
