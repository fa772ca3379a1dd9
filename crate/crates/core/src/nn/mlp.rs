use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::sparse::TopologyMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, output_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dims,
            output_dim,
            activation: Activation::Relu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dims.is_empty() {
            return Err(Error::config("an MLP needs at least one hidden layer"));
        }
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::config("MLP layer widths must be positive"));
        }
        Ok(())
    }

    /// `[out x in]` shape of every weight matrix, input layer first.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(self.output_dim);
        dims.windows(2).map(|w| (w[1], w[0])).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    /// `[out x in]`
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    /// `None` means the layer is dense.
    pub mask: Option<TopologyMask>,
}

impl LayerParams {
    /// `x W^T + b` for a `[batch x in]` input.
    pub fn affine(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_dim("affine input", self.weights.ncols(), x.ncols())?;
        Ok(affine(&x, self))
    }

    pub fn is_consistent(&self) -> bool {
        self.mask
            .as_ref()
            .is_none_or(|m| m.is_respected_by(&self.weights))
    }
}

/// Activation record of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input of every layer (network input, then hidden activations).
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of every hidden layer.
    pre_activations: Vec<Array2<f64>>,
    version: u64,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.inputs[0].nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    biases: Array1::zeros(l.biases.len()),
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights += &b.weights;
            a.biases += &b.biases;
        }
    }
}

/// Multi-layer perceptron with ReLU hidden layers and a linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    spec: MlpSpec,
    layers: Vec<LayerParams>,
    /// Bumped on every parameter mutation; used to reject stale caches.
    #[serde(default)]
    version: u64,
}

impl Mlp {
    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` initialization for weights
    /// and biases, the usual default for linear layers.
    pub fn new<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .layer_shapes()
            .into_iter()
            .map(|(out, inp)| {
                let bound = 1.0 / (inp as f64).sqrt();
                LayerParams {
                    weights: Array2::from_shape_simple_fn((out, inp), || {
                        rng.random_range(-bound..bound)
                    }),
                    biases: Array1::from_shape_simple_fn(out, || rng.random_range(-bound..bound)),
                    mask: None,
                }
            })
            .collect();
        Ok(Self {
            spec,
            layers,
            version: 0,
        })
    }

    pub fn from_layers(spec: MlpSpec, layers: Vec<LayerParams>) -> Result<Self> {
        spec.validate()?;
        let shapes = spec.layer_shapes();
        check_dim("layer count", shapes.len(), layers.len())?;
        for (l, &(out, inp)) in layers.iter().zip(&shapes) {
            check_dim("layer rows", out, l.weights.nrows())?;
            check_dim("layer cols", inp, l.weights.ncols())?;
            check_dim("bias length", out, l.biases.len())?;
            if let Some(m) = &l.mask {
                if m.shape() != (out, inp) {
                    return Err(Error::config("mask shape differs from weight shape"));
                }
            }
        }
        let mut net = Self {
            spec,
            layers,
            version: 0,
        };
        net.enforce_masks();
        Ok(net)
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    /// Mutable access to the parameters. Invalidates outstanding caches;
    /// callers must keep masked weights at zero.
    pub fn layers_mut(&mut self) -> &mut [LayerParams] {
        self.version += 1;
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim
    }

    pub fn set_mask(&mut self, layer: usize, mask: Option<TopologyMask>) -> Result<()> {
        let l = self
            .layers
            .get_mut(layer)
            .ok_or_else(|| Error::usage(format!("no layer {layer}")))?;
        if let Some(m) = &mask {
            if m.shape() != l.weights.dim() {
                return Err(Error::config("mask shape differs from weight shape"));
            }
            m.apply(&mut l.weights);
        }
        l.mask = mask;
        self.version += 1;
        Ok(())
    }

    /// Zero every masked-out weight.
    pub fn enforce_masks(&mut self) {
        for l in &mut self.layers {
            if let Some(m) = &l.mask {
                m.apply(&mut l.weights);
            }
        }
        self.version += 1;
    }

    pub fn masks_consistent(&self) -> bool {
        self.layers.iter().all(LayerParams::is_consistent)
    }

    /// Number of existing weights (biases excluded).
    pub fn weight_count(&self) -> usize {
        crate::sparse::weight_counts(&self.layers).0
    }

    /// Forward pass for a single input vector.
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        check_dim("forward input", self.spec.input_dim, input.len())?;
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
        let (out, cache) = self.forward_batch(x)?;
        Ok((out.into_raw_vec_and_offset().0, cache))
    }

    /// Forward pass over a `[batch x input_dim]` matrix, keeping the
    /// activation record for [`Mlp::backward`].
    pub fn forward_batch(&self, input: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        check_dim("forward input", self.spec.input_dim, input.ncols())?;
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut pre_activations = Vec::with_capacity(n - 1);
        let mut h = input.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = affine(&h, layer);
            inputs.push(h);
            if i + 1 < n {
                h = z.mapv(relu);
                pre_activations.push(z);
            } else {
                h = z;
            }
        }
        Ok((
            h,
            ForwardCache {
                inputs,
                pre_activations,
                version: self.version,
            },
        ))
    }

    /// Forward pass without an activation record.
    pub fn predict(&self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_dim("predict input", self.spec.input_dim, input.ncols())?;
        let mut h = affine(&input, &self.layers[0]);
        for layer in &self.layers[1..] {
            h.mapv_inplace(relu);
            h = affine(&h, layer);
        }
        Ok(h)
    }

    /// Back-propagate `output_grad` (dL/d output, `[batch x output_dim]`).
    /// Returns parameter gradients, zeroed at masked positions, and
    /// dL/d input.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        output_grad: ArrayView2<f64>,
    ) -> Result<(Gradients, Array2<f64>)> {
        if cache.version != self.version || cache.inputs.len() != self.layers.len() {
            return Err(Error::usage(
                "forward cache is stale: parameters changed since the forward pass",
            ));
        }
        check_dim("output gradient rows", cache.batch_size(), output_grad.nrows())?;
        check_dim("output gradient cols", self.spec.output_dim, output_grad.ncols())?;

        let n = self.layers.len();
        let mut grads: Vec<LayerGrad> = Vec::with_capacity(n);
        let mut dz = output_grad.to_owned();
        for i in (0..n).rev() {
            let layer = &self.layers[i];
            let mut dw = dz.t().dot(&cache.inputs[i]).as_standard_layout().into_owned();
            if let Some(m) = &layer.mask {
                m.apply(&mut dw);
            }
            let db = dz.sum_axis(Axis(0));
            let dx = dz.dot(&layer.weights);
            grads.push(LayerGrad {
                weights: dw,
                biases: db,
            });
            if i > 0 {
                let z = &cache.pre_activations[i - 1];
                dz = dx;
                dz.zip_mut_with(z, |g, &zv| {
                    if zv <= 0.0 {
                        *g = 0.0;
                    }
                });
            } else {
                dz = dx;
            }
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, dz))
    }

    /// `self <- tau * source + (1 - tau) * self`, elementwise.
    pub fn polyak_update(&mut self, source: &Mlp, tau: f64) {
        for (t, s) in self.layers.iter_mut().zip(&source.layers) {
            t.weights.zip_mut_with(&s.weights, |a, &b| *a = tau * b + (1.0 - tau) * *a);
            t.biases.zip_mut_with(&s.biases, |a, &b| *a = tau * b + (1.0 - tau) * *a);
        }
        self.version += 1;
    }
}

#[inline]
fn relu(x: f64) -> f64 {
    x.max(0.0)
}

fn affine<S: ndarray::Data<Elem = f64>>(
    x: &ndarray::ArrayBase<S, ndarray::Ix2>,
    layer: &LayerParams,
) -> Array2<f64> {
    let mut z = x.dot(&layer.weights.t());
    z += &layer.biases;
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stale_cache_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = Mlp::new(MlpSpec::new(3, vec![4], 2), &mut rng).unwrap();
        let (_, cache) = net.forward(&[0.1, 0.2, 0.3]).unwrap();
        net.layers_mut()[0].weights[[0, 0]] += 1.0;
        let err = net.backward(&cache, array![[1.0, 1.0]].view()).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn input_dimension_is_checked() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = Mlp::new(MlpSpec::new(3, vec![4], 2), &mut rng).unwrap();
        assert!(matches!(
            net.forward(&[1.0, 2.0]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn empty_hidden_list_is_a_config_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            Mlp::new(MlpSpec::new(3, vec![], 2), &mut rng),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn predict_matches_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Mlp::new(MlpSpec::new(5, vec![7, 6], 3), &mut rng).unwrap();
        let x = Array2::from_shape_fn((4, 5), |(i, j)| (i as f64 - j as f64) * 0.3);
        let (a, _) = net.forward_batch(x.view()).unwrap();
        let b = net.predict(x.view()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn polyak_moves_toward_source() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let src = Mlp::new(MlpSpec::new(2, vec![3], 1), &mut rng).unwrap();
        let mut tgt = Mlp::new(MlpSpec::new(2, vec![3], 1), &mut rng).unwrap();
        let before = tgt.clone();
        tgt.polyak_update(&src, 0.25);
        for ((t, s), b) in tgt.layers.iter().zip(&src.layers).zip(&before.layers) {
            for ((&tv, &sv), &bv) in t.weights.iter().zip(&s.weights).zip(&b.weights) {
                assert!((tv - (0.25 * sv + 0.75 * bv)).abs() < 1e-15);
            }
        }
    }
}
