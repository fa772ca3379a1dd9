//! Loss values and parameter gradients for the critic and actor updates.
//! Each function is pure: it reads networks and a batch and returns
//! gradients without touching optimizer state.

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{check_dim, Result};
use crate::nn::{clamp_log_std, Gradients, Mlp, LOG_STD_MAX, LOG_STD_MIN, TANH_EPSILON};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `[states | actions]`, the critic input layout.
pub fn critic_input(states: ArrayView2<f64>, actions: ArrayView2<f64>) -> Array2<f64> {
    concatenate![Axis(1), states, actions]
}

#[derive(Debug, Clone)]
pub struct CriticLoss {
    /// `mean((Q - y)^2)`
    pub loss: f64,
    pub mean_q: f64,
    pub grads: Gradients,
}

pub fn critic_loss_and_grads(
    critic: &Mlp,
    inputs: ArrayView2<f64>,
    targets: ArrayView1<f64>,
) -> Result<CriticLoss> {
    check_dim("critic targets", inputs.nrows(), targets.len())?;
    let n = inputs.nrows() as f64;
    let (q, cache) = critic.forward_batch(inputs)?;
    let q = q.column(0);
    let diff = &q - &targets;
    let loss = diff.mapv(|d| d * d).sum() / n;
    let dq = (&diff * (2.0 / n)).insert_axis(Axis(1));
    let (grads, _) = critic.backward(&cache, dq.view())?;
    Ok(CriticLoss {
        loss,
        mean_q: q.mean().unwrap_or(0.0),
        grads,
    })
}

/// Deterministic-policy loss `-mean Q(s, tanh(actor(s)))`, differentiated
/// through the critic into the actor parameters.
pub fn td3_actor_loss_and_grads(
    actor: &Mlp,
    critic: &Mlp,
    states: ArrayView2<f64>,
) -> Result<(f64, Gradients)> {
    let n = states.nrows();
    let (z, actor_cache) = actor.forward_batch(states)?;
    let a = z.mapv(f64::tanh);
    let inputs = critic_input(states, a.view());
    let (q, critic_cache) = critic.forward_batch(inputs.view())?;
    let loss = -q.sum() / n as f64;
    let dq = Array2::from_elem((n, 1), -1.0 / n as f64);
    let (_, dinput) = critic.backward(&critic_cache, dq.view())?;
    let ds = states.ncols();
    let mut dz = dinput.slice(s![.., ds..]).to_owned();
    dz.zip_mut_with(&a, |g, &av| *g *= 1.0 - av * av);
    let (grads, _) = actor.backward(&actor_cache, dz.view())?;
    Ok((loss, grads))
}

/// Reparameterized tanh-Gaussian samples for a batch of actor outputs
/// (`[mean | log_std]` per row) and standard-normal `noise`.
#[derive(Debug, Clone)]
pub struct SquashedSample {
    pub actions: Array2<f64>,
    pub log_probs: Array1<f64>,
    /// Clamped log standard deviations.
    pub log_std: Array2<f64>,
}

pub fn squashed_sample(actor_out: ArrayView2<f64>, noise: ArrayView2<f64>) -> Result<SquashedSample> {
    let k = noise.ncols();
    check_dim("actor output width", 2 * k, actor_out.ncols())?;
    check_dim("noise rows", actor_out.nrows(), noise.nrows())?;
    let mean = actor_out.slice(s![.., ..k]);
    let log_std = actor_out.slice(s![.., k..]).mapv(clamp_log_std);
    let u = &mean + &(log_std.mapv(f64::exp) * noise);
    let actions = u.mapv(f64::tanh);
    let mut log_probs = Array1::zeros(noise.nrows());
    for i in 0..noise.nrows() {
        let mut lp = 0.0;
        for j in 0..k {
            let xi = noise[(i, j)];
            let a = actions[(i, j)];
            lp += -0.5 * xi * xi - log_std[(i, j)] - HALF_LN_2PI - (1.0 - a * a + TANH_EPSILON).ln();
        }
        log_probs[i] = lp;
    }
    Ok(SquashedSample {
        actions,
        log_probs,
        log_std,
    })
}

/// Maximum-entropy policy loss `mean(alpha * log_pi - min(Q1, Q2))` for a
/// fixed noise draw, differentiated into the actor parameters.
pub fn sac_actor_loss_and_grads(
    actor: &Mlp,
    critics: [&Mlp; 2],
    states: ArrayView2<f64>,
    noise: ArrayView2<f64>,
    alpha: f64,
) -> Result<(f64, Gradients)> {
    let n = states.nrows();
    let k = noise.ncols();
    let (out, actor_cache) = actor.forward_batch(states)?;
    let sample = squashed_sample(out.view(), noise)?;
    let inputs = critic_input(states, sample.actions.view());
    let (q1, c1) = critics[0].forward_batch(inputs.view())?;
    let (q2, c2) = critics[1].forward_batch(inputs.view())?;

    let mut loss = 0.0;
    let mut dq1 = Array2::zeros((n, 1));
    let mut dq2 = Array2::zeros((n, 1));
    for i in 0..n {
        let (a, b) = (q1[(i, 0)], q2[(i, 0)]);
        loss += alpha * sample.log_probs[i] - a.min(b);
        if a <= b {
            dq1[(i, 0)] = -1.0 / n as f64;
        } else {
            dq2[(i, 0)] = -1.0 / n as f64;
        }
    }
    loss /= n as f64;

    let ds = states.ncols();
    let (_, g1) = critics[0].backward(&c1, dq1.view())?;
    let (_, g2) = critics[1].backward(&c2, dq2.view())?;
    let da = &g1.slice(s![.., ds..]) + &g2.slice(s![.., ds..]);

    let mut dout = Array2::zeros((n, 2 * k));
    let scale = alpha / n as f64;
    for i in 0..n {
        for j in 0..k {
            let a = sample.actions[(i, j)];
            let one_minus = 1.0 - a * a;
            // d log_pi / d u through the squashing correction term.
            let c = 2.0 * a * one_minus / (one_minus + TANH_EPSILON);
            let du = da[(i, j)] * one_minus + scale * c;
            let sigma_xi = sample.log_std[(i, j)].exp() * noise[(i, j)];
            dout[(i, j)] = du;
            let raw = out[(i, k + j)];
            if (LOG_STD_MIN..=LOG_STD_MAX).contains(&raw) {
                dout[(i, k + j)] = du * sigma_xi - scale;
            }
        }
    }
    let (grads, _) = actor.backward(&actor_cache, dout.view())?;
    Ok((loss, grads))
}
