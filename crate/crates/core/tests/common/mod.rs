#![allow(dead_code)]

use anf_core::nn::Mlp;
use anf_core::sparse::{init_mask, TopologyMask};
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn normal_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

pub fn random_mask<R: Rng>(shape: (usize, usize), sparsity: f64, rng: &mut R) -> TopologyMask {
    init_mask(shape, sparsity, rng).unwrap()
}

/// Central-difference derivative of `f` with respect to one parameter.
/// `which = (layer, is_bias, flat index)`.
pub fn numeric_param_grad(
    net: &Mlp,
    which: (usize, bool, usize),
    h: f64,
    f: &dyn Fn(&Mlp) -> f64,
) -> f64 {
    let eval = |delta: f64| {
        let mut n = net.clone();
        let layer = &mut n.layers_mut()[which.0];
        if which.1 {
            layer.biases[which.2] += delta;
        } else {
            layer.weights.as_slice_mut().unwrap()[which.2] += delta;
        }
        f(&n)
    };
    (eval(h) - eval(-h)) / (2.0 * h)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-6)
}
