//! Input-layer connectivity instrumentation: how many connections each
//! input feature keeps, split into task-relevant and noise features.

mod export;

use serde::{Deserialize, Serialize};

use crate::agents::{Agent, NetworkKind};

pub use export::{
    learning_curve_svg, read_snapshot_csv, read_timeline_csv, snapshot_svg, timeline_svg,
    write_snapshot_csv, write_timeline_csv,
};

/// Mean input-layer connections per relevant and per noise feature over
/// time, for one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityTimeline {
    pub network: NetworkKind,
    pub steps: Vec<u64>,
    pub relevant_mean: Vec<f64>,
    /// `None` when every state feature counts as relevant.
    pub noise_mean: Vec<Option<f64>>,
}

impl ConnectivityTimeline {
    pub fn new(network: NetworkKind) -> Self {
        Self {
            network,
            steps: Vec::new(),
            relevant_mean: Vec::new(),
            noise_mean: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn push(&mut self, step: u64, relevant_mean: f64, noise_mean: Option<f64>) {
        self.steps.push(step);
        self.relevant_mean.push(relevant_mean);
        self.noise_mean.push(noise_mean);
    }

    /// Relevant-to-noise ratio at the last sample.
    pub fn final_ratio(&self) -> Option<f64> {
        let r = *self.relevant_mean.last()?;
        let n = (*self.noise_mean.last()?)?;
        Some(if n > 0.0 { r / n } else { f64::INFINITY })
    }
}

/// Connection counts per input neuron of one network at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronSnapshot {
    pub network: NetworkKind,
    pub step: u64,
    /// One count per input column. For critics the trailing columns are the
    /// action inputs.
    pub counts: Vec<usize>,
    /// Input positions currently carrying task-relevant features.
    pub relevant: Vec<usize>,
}

impl NeuronSnapshot {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn is_relevant(&self, neuron: usize) -> bool {
        self.relevant.contains(&neuron)
    }

    /// Indices of the `k` most-connected neurons, ties to the lower index.
    pub fn top_k(&self, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.counts.len()).collect();
        idx.sort_by(|&a, &b| self.counts[b].cmp(&self.counts[a]).then(a.cmp(&b)));
        idx.truncate(k);
        idx
    }
}

/// Means of `counts` over the relevant positions and over the remaining
/// state positions (`0..state_dim`).
pub fn split_means(counts: &[usize], relevant: &[usize], state_dim: usize) -> (f64, Option<f64>) {
    let mut is_rel = vec![false; state_dim];
    for &r in relevant {
        if r < state_dim {
            is_rel[r] = true;
        }
    }
    let (mut rs, mut rn, mut ns, mut nn) = (0usize, 0usize, 0usize, 0usize);
    for (i, &c) in counts.iter().take(state_dim).enumerate() {
        if is_rel[i] {
            rs += c;
            rn += 1;
        } else {
            ns += c;
            nn += 1;
        }
    }
    let relevant_mean = if rn > 0 { rs as f64 / rn as f64 } else { 0.0 };
    let noise_mean = (nn > 0).then(|| ns as f64 / nn as f64);
    (relevant_mean, noise_mean)
}

/// Column counts of the input-layer mask of one network, if it is sparse.
pub fn input_counts(agent: &Agent, network: NetworkKind) -> Option<Vec<usize>> {
    agent.network(network).online.layers()[0]
        .mask
        .as_ref()
        .map(|m| m.connections_per_input())
}

pub fn snapshot_neurons(
    agent: &Agent,
    network: NetworkKind,
    step: u64,
    relevant: &[usize],
) -> Option<NeuronSnapshot> {
    Some(NeuronSnapshot {
        network,
        step,
        counts: input_counts(agent, network)?,
        relevant: relevant.to_vec(),
    })
}

/// One timeline per network, filled by [`ConnectivityRecorder::record`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityRecorder {
    pub timelines: Vec<ConnectivityTimeline>,
}

impl Default for ConnectivityRecorder {
    fn default() -> Self {
        Self {
            timelines: NetworkKind::ALL.iter().map(|&k| ConnectivityTimeline::new(k)).collect(),
        }
    }
}

impl ConnectivityRecorder {
    /// Append one sample per network. Returns `false`, recording nothing,
    /// when the agent has no sparse input layer.
    pub fn record(&mut self, agent: &Agent, step: u64, relevant: &[usize]) -> bool {
        let mut any = false;
        for tl in &mut self.timelines {
            if let Some(counts) = input_counts(agent, tl.network) {
                let (r, n) = split_means(&counts, relevant, agent.state_dim());
                tl.push(step, r, n);
                any = true;
            }
        }
        any
    }

    pub fn timeline(&self, network: NetworkKind) -> Option<&ConnectivityTimeline> {
        self.timelines.iter().find(|t| t.network == network)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_means_by_hand() {
        let counts = [4, 2, 1, 1, 0, 9];
        let (r, n) = split_means(&counts, &[0, 1], 5);
        assert_eq!(r, 3.0);
        assert_eq!(n, Some(2.0 / 3.0));
    }

    #[test]
    fn all_relevant_leaves_noise_absent() {
        let (r, n) = split_means(&[3, 5], &[0, 1], 2);
        assert_eq!(r, 4.0);
        assert_eq!(n, None);
    }

    #[test]
    fn top_k_prefers_lower_index_on_ties() {
        let s = NeuronSnapshot {
            network: NetworkKind::Actor,
            step: 0,
            counts: vec![1, 5, 5, 0, 7],
            relevant: vec![],
        };
        assert_eq!(s.top_k(3), vec![4, 1, 2]);
        assert_eq!(s.total(), 18);
    }
}
