//! Sparse topology lifecycle: random initialization, magnitude-drop /
//! random-grow evolution, and sparsity accounting.

mod alloc;
mod evolve;
mod mask;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::LayerParams;

pub use alloc::{uniform_allocation, LayerAllocation};
pub use evolve::{evolve, TopologyDelta};
pub use mask::TopologyMask;

/// Whether the topology is updated during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyMode {
    Dynamic,
    Static,
}

/// Which layers of each network carry a mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SparseLayers {
    InputOnly,
    InputAndHidden,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityConfig {
    pub input_layer_sparsity: f64,
    pub drop_fraction: f64,
    /// Topology-change period in environment steps.
    pub topology_period: u64,
    pub mode: TopologyMode,
    pub sparse_layers: SparseLayers,
    /// Target global sparsity; required when hidden layers are sparse.
    pub global_sparsity: Option<f64>,
    /// Exclude connections grown at update t from the drop candidates at t+1.
    pub protect_new_connections: bool,
}

impl Default for SparsityConfig {
    fn default() -> Self {
        Self {
            input_layer_sparsity: 0.8,
            drop_fraction: 0.05,
            topology_period: 1000,
            mode: TopologyMode::Dynamic,
            sparse_layers: SparseLayers::InputOnly,
            global_sparsity: None,
            protect_new_connections: false,
        }
    }
}

impl SparsityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.input_layer_sparsity) {
            return Err(Error::config(format!(
                "input_layer_sparsity must be in [0, 1), got {}",
                self.input_layer_sparsity
            )));
        }
        if !(self.drop_fraction > 0.0 && self.drop_fraction < 1.0) {
            return Err(Error::config(format!(
                "drop_fraction must be in (0, 1), got {}",
                self.drop_fraction
            )));
        }
        if self.topology_period == 0 {
            return Err(Error::config("topology_period must be positive"));
        }
        let s = self.input_layer_sparsity;
        let evolves_input = self.mode == TopologyMode::Dynamic && self.sparse_layers == SparseLayers::InputOnly;
        if evolves_input && self.drop_fraction * (1.0 - s) > s {
            return Err(Error::config(format!(
                "drop_fraction {} needs more empty input positions than sparsity {s} leaves",
                self.drop_fraction
            )));
        }
        match (self.sparse_layers, self.global_sparsity) {
            (SparseLayers::InputAndHidden, None) => Err(Error::config(
                "sparse_layers = input_and_hidden requires global_sparsity",
            )),
            (_, Some(s)) if !(0.0..1.0).contains(&s) => Err(Error::config(format!(
                "global_sparsity must be in [0, 1), got {s}"
            ))),
            _ => Ok(()),
        }
    }

    /// Per-layer connection budgets for a network with the given weight
    /// shapes (`[out x in]`, input layer first). `None` marks a dense layer.
    pub fn layer_connections(&self, shapes: &[(usize, usize)]) -> Result<Vec<Option<usize>>> {
        self.validate()?;
        match self.sparse_layers {
            SparseLayers::InputOnly => Ok(shapes
                .iter()
                .enumerate()
                .map(|(i, &(o, n))| (i == 0).then(|| density_count(o * n, self.input_layer_sparsity)))
                .collect()),
            SparseLayers::InputAndHidden => {
                let target = self.global_sparsity.expect("validated above");
                let alloc = uniform_allocation(target, shapes, true)?;
                Ok(alloc
                    .iter()
                    .zip(shapes)
                    .enumerate()
                    .map(|(i, (a, _))| (i + 1 < shapes.len()).then_some(a.connections))
                    .collect())
            }
        }
    }
}

pub(crate) fn density_count(total: usize, sparsity: f64) -> usize {
    ((1.0 - sparsity) * total as f64).round() as usize
}

/// Random sparse mask: exactly `round((1 - sparsity) * out * in)` positions,
/// chosen uniformly without replacement.
pub fn init_mask<R: Rng + ?Sized>(
    shape: (usize, usize),
    sparsity: f64,
    rng: &mut R,
) -> Result<TopologyMask> {
    if !(0.0..1.0).contains(&sparsity) {
        return Err(Error::config(format!(
            "sparsity must be in [0, 1), got {sparsity}"
        )));
    }
    let (rows, cols) = shape;
    let mut mask =
        TopologyMask::random_with_count(rows, cols, density_count(rows * cols, sparsity), rng)?;
    mask.set_target_density(1.0 - sparsity);
    Ok(mask)
}

/// `1 - existing / possible` over all weight matrices. Biases are excluded.
pub fn global_sparsity(layers: &[LayerParams]) -> f64 {
    let (existing, total) = weight_counts(layers);
    if total == 0 {
        0.0
    } else {
        1.0 - existing as f64 / total as f64
    }
}

/// (existing weights, possible weights) summed over layers.
pub fn weight_counts(layers: &[LayerParams]) -> (usize, usize) {
    layers.iter().fold((0, 0), |(e, t), l| {
        let size = l.weights.len();
        let existing = l.mask.as_ref().map_or(size, TopologyMask::count);
        (e + existing, t + size)
    })
}

/// Column sums of a mask; see [`TopologyMask::connections_per_input`].
pub fn connections_per_input(mask: &TopologyMask) -> Vec<usize> {
    mask.connections_per_input()
}
