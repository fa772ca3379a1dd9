use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, Mlp};
use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    /// L2 coefficient added to the gradient of existing weights (biases are
    /// not decayed).
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            weight_decay: 2e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

/// Adam running averages for every layer of one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    /// First moment.
    pub m: Vec<Moments>,
    /// Second raw moment.
    pub v: Vec<Moments>,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(net: &Mlp, config: AdamConfig) -> Self {
        let zeros = || {
            net.layers()
                .iter()
                .map(|l| Moments {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    biases: Array1::zeros(l.biases.len()),
                })
                .collect::<Vec<_>>()
        };
        Self {
            config,
            m: zeros(),
            v: zeros(),
            step_count: 0,
        }
    }

    /// One bias-corrected Adam update of `net`. Masked weights stay exactly
    /// zero and their moments stay zero.
    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        check_dim("adam layer count", self.m.len(), grads.layers.len())?;
        check_dim("adam layer count", self.m.len(), net.layers().len())?;
        for (g, m) in grads.layers.iter().zip(&self.m) {
            if g.weights.dim() != m.weights.dim() || g.biases.len() != m.biases.len() {
                return Err(Error::usage("gradient shape differs from parameter shape"));
            }
        }

        self.step_count += 1;
        let AdamConfig {
            lr,
            weight_decay,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step_count as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);

        // Moments of parameters with vanishing gradients (biases of dead
        // units) decay geometrically into subnormals, where float arithmetic
        // is orders of magnitude slower; those are flushed to zero.
        let flush = |x: f64| if x.abs() < f64::MIN_POSITIVE { 0.0 } else { x };
        let update = |w: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = flush(beta1 * *m + (1.0 - beta1) * g);
            *v = flush(beta2 * *v + (1.0 - beta2) * g * g);
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *w -= lr * m_hat / (v_hat.sqrt() + epsilon);
        };

        for (((layer, g), m), v) in net
            .layers_mut()
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            let w = layer.weights.as_slice_mut().expect("standard layout");
            let gw = g.weights.as_slice().expect("standard layout");
            let mw = m.weights.as_slice_mut().expect("standard layout");
            let vw = v.weights.as_slice_mut().expect("standard layout");
            match &layer.mask {
                Some(mask) => {
                    for (i, &exists) in mask.bits().iter().enumerate() {
                        if exists {
                            let gi = gw[i] + weight_decay * w[i];
                            update(&mut w[i], gi, &mut mw[i], &mut vw[i]);
                        } else {
                            w[i] = 0.0;
                            mw[i] = 0.0;
                            vw[i] = 0.0;
                        }
                    }
                }
                None => {
                    for i in 0..w.len() {
                        let gi = gw[i] + weight_decay * w[i];
                        update(&mut w[i], gi, &mut mw[i], &mut vw[i]);
                    }
                }
            }
            for (((b, &gb), mb), vb) in layer
                .biases
                .iter_mut()
                .zip(&g.biases)
                .zip(&mut m.biases)
                .zip(&mut v.biases)
            {
                update(b, gb, mb, vb);
            }
        }
        Ok(())
    }

    /// Reset both moments of the listed flat weight positions of one layer.
    pub fn zero_moments(&mut self, layer: usize, positions: &[usize]) -> Result<()> {
        let n_layers = self.m.len();
        let (m, v) = match (self.m.get_mut(layer), self.v.get_mut(layer)) {
            (Some(m), Some(v)) => (m, v),
            _ => {
                return Err(Error::usage(format!(
                    "layer {layer} out of range ({n_layers} layers)"
                )))
            }
        };
        let len = m.weights.len();
        if let Some(&bad) = positions.iter().find(|&&p| p >= len) {
            return Err(Error::usage(format!(
                "position {bad} out of range for layer {layer} with {len} weights"
            )));
        }
        let mw = m.weights.as_slice_mut().expect("standard layout");
        let vw = v.weights.as_slice_mut().expect("standard layout");
        for &p in positions {
            mw[p] = 0.0;
            vw[p] = 0.0;
        }
        Ok(())
    }

    /// True when every masked-out weight of `net` has zero moments.
    pub fn moments_respect_masks(&self, net: &Mlp) -> bool {
        net.layers()
            .iter()
            .zip(self.m.iter().zip(&self.v))
            .all(|(l, (m, v))| match &l.mask {
                None => true,
                Some(mask) => mask
                    .bits()
                    .iter()
                    .zip(m.weights.iter().zip(&v.weights))
                    .all(|(&b, (&mi, &vi))| b || (mi == 0.0 && vi == 0.0)),
            })
    }
}
