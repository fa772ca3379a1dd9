//! Off-policy actor-critic agents (TD3 and SAC) with optional sparse input
//! layers whose topology evolves during training.

mod losses;
mod replay;

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::nn::{gaussian_head, AdamConfig, AdamState, Mlp, MlpSpec};
use crate::sparse::{evolve, SparsityConfig, TopologyDelta, TopologyMask, TopologyMode};

pub use losses::{
    critic_input, critic_loss_and_grads, sac_actor_loss_and_grads, squashed_sample,
    td3_actor_loss_and_grads, CriticLoss, SquashedSample,
};
pub use replay::{Batch, ReplayBuffer, Transition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Td3,
    Sac,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Td3 => "td3",
            Algorithm::Sac => "sac",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentHyperparams {
    pub gamma: f64,
    pub tau: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Environment steps of uniform random actions before learning starts.
    pub initial_collect: u64,
    /// Critic updates happen every `critic_period` environment steps.
    pub critic_period: u64,
    /// Actor update every `actor_period` critic updates.
    pub actor_period: u64,
    /// Target network update every `target_period` critic updates.
    pub target_period: u64,
    /// SAC entropy temperature (fixed).
    pub alpha: f64,
    /// TD3 exploration noise std in normalized action units.
    pub exploration_noise: f64,
    /// TD3 target policy smoothing noise std and clip.
    pub target_noise: f64,
    pub target_noise_clip: f64,
    pub hidden_dims: Vec<usize>,
}

impl AgentHyperparams {
    pub fn for_algorithm(algorithm: Algorithm) -> Self {
        let (actor_period, target_period) = match algorithm {
            Algorithm::Td3 => (2, 2),
            Algorithm::Sac => (1, 1),
        };
        Self {
            gamma: 0.99,
            tau: 0.005,
            lr: 1e-3,
            weight_decay: 2e-4,
            batch_size: 100,
            buffer_capacity: 1_000_000,
            initial_collect: 25_000,
            critic_period: 1,
            actor_period,
            target_period,
            alpha: 0.2,
            exploration_noise: 0.1,
            target_noise: 0.2,
            target_noise_clip: 0.5,
            hidden_dims: vec![256, 256],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::config(m.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail("gamma must be in [0, 1]");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return fail("tau must be in (0, 1]");
        }
        if !(self.lr > 0.0) || self.weight_decay < 0.0 {
            return fail("lr must be positive and weight_decay non-negative");
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 {
            return fail("batch_size and buffer_capacity must be positive");
        }
        if self.critic_period == 0 || self.actor_period == 0 || self.target_period == 0 {
            return fail("update periods must be positive");
        }
        if self.alpha < 0.0 || self.exploration_noise < 0.0 || self.target_noise < 0.0 {
            return fail("alpha and noise scales must be non-negative");
        }
        if self.hidden_dims.is_empty() || self.hidden_dims.contains(&0) {
            return fail("hidden_dims must list at least one positive width");
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKind {
    Actor,
    Critic1,
    Critic2,
}

impl NetworkKind {
    pub const ALL: [NetworkKind; 3] = [NetworkKind::Actor, NetworkKind::Critic1, NetworkKind::Critic2];

    pub fn name(self) -> &'static str {
        match self {
            NetworkKind::Actor => "actor",
            NetworkKind::Critic1 => "critic1",
            NetworkKind::Critic2 => "critic2",
        }
    }
}

/// An online network, its optional target copy and its optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub online: Mlp,
    pub target: Option<Mlp>,
    pub optimizer: AdamState,
    /// Positions grown at the previous topology update, per layer.
    last_grown: Vec<Vec<usize>>,
}

impl Network {
    fn new<R: Rng + ?Sized>(
        spec: MlpSpec,
        sparsity: Option<&SparsityConfig>,
        with_target: bool,
        adam: AdamConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let mut online = Mlp::new(spec, rng)?;
        if let Some(cfg) = sparsity {
            let shapes = online.spec().layer_shapes();
            for (l, budget) in cfg.layer_connections(&shapes)?.into_iter().enumerate() {
                if let Some(c) = budget {
                    let (rows, cols) = shapes[l];
                    let mut mask = TopologyMask::random_with_count(rows, cols, c, rng)?;
                    mask.set_target_density(c as f64 / (rows * cols) as f64);
                    online.set_mask(l, Some(mask))?;
                }
            }
        }
        let layers = online.layers().len();
        Ok(Self {
            target: with_target.then(|| online.clone()),
            optimizer: AdamState::new(&online, adam),
            online,
            last_grown: vec![Vec::new(); layers],
        })
    }

    fn evolve_topology<R: Rng + ?Sized>(
        &mut self,
        cfg: &SparsityConfig,
        step: u64,
        rng: &mut R,
    ) -> Result<Vec<(usize, TopologyDelta)>> {
        let mut out = Vec::new();
        let n_layers = self.online.layers().len();
        for l in 0..n_layers {
            if self.online.layers()[l].mask.is_none() {
                continue;
            }
            let protected = if cfg.protect_new_connections {
                std::mem::take(&mut self.last_grown[l])
            } else {
                Vec::new()
            };
            let layer = &mut self.online.layers_mut()[l];
            let mask = layer.mask.as_mut().expect("checked above");
            let delta = evolve(mask, &mut layer.weights, cfg.drop_fraction, &protected, step, rng)?;
            let mask = mask.clone();
            let touched: Vec<usize> = delta.touched().collect();
            self.optimizer.zero_moments(l, &touched)?;
            if let Some(target) = &mut self.target {
                target.set_mask(l, Some(mask))?;
                let w = target.layers_mut()[l]
                    .weights
                    .as_slice_mut()
                    .expect("standard layout");
                for &p in &delta.grown {
                    w[p] = 0.0;
                }
            }
            self.last_grown[l] = delta.grown.clone();
            out.push((l, delta));
        }
        Ok(out)
    }
}

/// Per-update training diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean of the two critics' regression losses, before the update.
    pub critic_loss: f64,
    pub mean_q: f64,
    /// Present on steps where the actor was updated.
    pub actor_loss: Option<f64>,
    pub targets_updated: bool,
}

/// Topology change of one sparse layer of one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDelta {
    pub network: NetworkKind,
    pub layer: usize,
    pub delta: TopologyDelta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    algorithm: Algorithm,
    hyperparams: AgentHyperparams,
    sparsity: Option<SparsityConfig>,
    state_dim: usize,
    action_dim: usize,
    actor: Network,
    critics: [Network; 2],
    train_calls: u64,
}

impl Agent {
    /// `sparsity = None` builds dense networks.
    pub fn new<R: Rng + ?Sized>(
        algorithm: Algorithm,
        state_dim: usize,
        action_dim: usize,
        hyperparams: AgentHyperparams,
        sparsity: Option<SparsityConfig>,
        rng: &mut R,
    ) -> Result<Self> {
        hyperparams.validate()?;
        if let Some(cfg) = &sparsity {
            cfg.validate()?;
        }
        if state_dim == 0 || action_dim == 0 {
            return Err(Error::config("state and action dimensions must be positive"));
        }
        let hidden = hyperparams.hidden_dims.clone();
        let actor_out = match algorithm {
            Algorithm::Td3 => action_dim,
            Algorithm::Sac => 2 * action_dim,
        };
        let adam = hyperparams.adam();
        let actor = Network::new(
            MlpSpec::new(state_dim, hidden.clone(), actor_out),
            sparsity.as_ref(),
            algorithm == Algorithm::Td3,
            adam,
            rng,
        )?;
        let critic_spec = MlpSpec::new(state_dim + action_dim, hidden, 1);
        let c1 = Network::new(critic_spec.clone(), sparsity.as_ref(), true, adam, rng)?;
        let c2 = Network::new(critic_spec, sparsity.as_ref(), true, adam, rng)?;
        Ok(Self {
            algorithm,
            hyperparams,
            sparsity,
            state_dim,
            action_dim,
            actor,
            critics: [c1, c2],
            train_calls: 0,
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn hyperparams(&self) -> &AgentHyperparams {
        &self.hyperparams
    }

    pub fn sparsity(&self) -> Option<&SparsityConfig> {
        self.sparsity.as_ref()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn train_calls(&self) -> u64 {
        self.train_calls
    }

    pub fn network(&self, kind: NetworkKind) -> &Network {
        match kind {
            NetworkKind::Actor => &self.actor,
            NetworkKind::Critic1 => &self.critics[0],
            NetworkKind::Critic2 => &self.critics[1],
        }
    }

    pub fn network_mut(&mut self, kind: NetworkKind) -> &mut Network {
        match kind {
            NetworkKind::Actor => &mut self.actor,
            NetworkKind::Critic1 => &mut self.critics[0],
            NetworkKind::Critic2 => &mut self.critics[1],
        }
    }

    /// Existing weights plus biases over actor and both critics.
    pub fn parameter_count(&self) -> usize {
        NetworkKind::ALL
            .iter()
            .map(|&k| {
                let net = &self.network(k).online;
                net.weight_count() + net.layers().iter().map(|l| l.biases.len()).sum::<usize>()
            })
            .sum()
    }

    /// Existing actor weights, biases excluded. This is the parameter count
    /// reported in result tables.
    pub fn actor_weight_count(&self) -> usize {
        self.actor.online.weight_count()
    }

    /// Action in normalized `[-1, 1]` units. Exploration adds Gaussian noise
    /// (TD3) or samples the policy (SAC); otherwise the policy mean is used.
    pub fn select_action<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        explore: bool,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        check_dim("agent state", self.state_dim, state.len())?;
        let x = ArrayView2::from_shape((1, state.len()), state).expect("row vector");
        let out = self.actor.online.predict(x)?;
        let out = out.row(0);
        let k = self.action_dim;
        let action = match self.algorithm {
            Algorithm::Td3 => {
                let a: Vec<f64> = out.iter().map(|z| z.tanh()).collect();
                if explore {
                    let noise: Vec<f64> = (0..k)
                        .map(|_| self.hyperparams.exploration_noise * rng.sample::<f64, _>(StandardNormal))
                        .collect();
                    perturb_action(&a, &noise)
                } else {
                    a
                }
            }
            Algorithm::Sac => {
                let mean = out.slice(ndarray::s![..k]).to_vec();
                if explore {
                    let log_std = out.slice(ndarray::s![k..]).to_vec();
                    gaussian_head(&mean, &log_std, rng).sampled_action
                } else {
                    mean.iter().map(|m| m.tanh()).collect()
                }
            }
        };
        Ok(action)
    }

    /// One gradient update from a sampled minibatch. Returns `None` while
    /// the buffer holds fewer transitions than a batch.
    pub fn train_step<R: Rng + ?Sized>(
        &mut self,
        buffer: &ReplayBuffer,
        rng: &mut R,
    ) -> Result<Option<TrainReport>> {
        if buffer.len() < self.hyperparams.batch_size {
            return Ok(None);
        }
        let batch = buffer.sample(self.hyperparams.batch_size, rng);
        self.update(&batch, rng).map(Some)
    }

    /// One gradient update on a given batch.
    pub fn update<R: Rng + ?Sized>(&mut self, batch: &Batch, rng: &mut R) -> Result<TrainReport> {
        check_dim("batch state width", self.state_dim, batch.states.ncols())?;
        check_dim("batch action width", self.action_dim, batch.actions.ncols())?;
        self.train_calls += 1;
        let hp = &self.hyperparams;
        let n = batch.len();
        let k = self.action_dim;

        let next_value = match self.algorithm {
            Algorithm::Td3 => {
                let target_actor = self.actor.target.as_ref().expect("TD3 keeps a target actor");
                let mut a = target_actor.predict(batch.next_states.view())?.mapv(f64::tanh);
                let c = hp.target_noise_clip;
                a.mapv_inplace(|v| {
                    let eps: f64 = rng.sample::<f64, _>(StandardNormal) * hp.target_noise;
                    (v + eps.clamp(-c, c)).clamp(-1.0, 1.0)
                });
                self.min_target_q(batch.next_states.view(), a.view())?
            }
            Algorithm::Sac => {
                let out = self.actor.online.predict(batch.next_states.view())?;
                let noise = standard_normal((n, k), rng);
                let sample = squashed_sample(out.view(), noise.view())?;
                let q = self.min_target_q(batch.next_states.view(), sample.actions.view())?;
                q - &(sample.log_probs * hp.alpha)
            }
        };
        let targets: Array1<f64> =
            &batch.rewards + &((1.0 - &batch.dones) * &next_value * hp.gamma);

        let inputs = critic_input(batch.states.view(), batch.actions.view());
        let mut critic_loss = 0.0;
        let mut mean_q = 0.0;
        for critic in &mut self.critics {
            let out = critic_loss_and_grads(&critic.online, inputs.view(), targets.view())?;
            if !out.loss.is_finite() {
                return Err(Error::numerical(format!(
                    "critic loss became non-finite at update {}",
                    self.train_calls
                )));
            }
            critic.optimizer.step(&mut critic.online, &out.grads)?;
            critic_loss += out.loss / 2.0;
            mean_q += out.mean_q / 2.0;
        }

        let mut actor_loss = None;
        if self.train_calls % hp.actor_period == 0 {
            let (loss, grads) = match self.algorithm {
                Algorithm::Td3 => td3_actor_loss_and_grads(
                    &self.actor.online,
                    &self.critics[0].online,
                    batch.states.view(),
                )?,
                Algorithm::Sac => {
                    let noise = standard_normal((n, k), rng);
                    sac_actor_loss_and_grads(
                        &self.actor.online,
                        [&self.critics[0].online, &self.critics[1].online],
                        batch.states.view(),
                        noise.view(),
                        hp.alpha,
                    )?
                }
            };
            if !loss.is_finite() {
                return Err(Error::numerical(format!(
                    "actor loss became non-finite at update {}",
                    self.train_calls
                )));
            }
            self.actor.optimizer.step(&mut self.actor.online, &grads)?;
            actor_loss = Some(loss);
        }

        let targets_updated = self.train_calls % hp.target_period == 0;
        if targets_updated {
            let tau = hp.tau;
            for net in std::iter::once(&mut self.actor).chain(self.critics.iter_mut()) {
                if let Some(t) = &mut net.target {
                    t.polyak_update(&net.online, tau);
                }
            }
        }
        Ok(TrainReport {
            critic_loss,
            mean_q,
            actor_loss,
            targets_updated,
        })
    }

    fn min_target_q(&self, states: ArrayView2<f64>, actions: ArrayView2<f64>) -> Result<Array1<f64>> {
        let inputs = critic_input(states, actions);
        let t1 = self.critics[0].target.as_ref().expect("critics keep targets");
        let t2 = self.critics[1].target.as_ref().expect("critics keep targets");
        let q1 = t1.predict(inputs.view())?;
        let q2 = t2.predict(inputs.view())?;
        Ok(q1.column(0).iter().zip(q2.column(0)).map(|(a, b)| a.min(*b)).collect())
    }

    /// Topology update at environment step `env_step`: runs only for dynamic
    /// sparse agents, on positive multiples of the topology period.
    pub fn maybe_evolve_topology<R: Rng + ?Sized>(
        &mut self,
        env_step: u64,
        rng: &mut R,
    ) -> Result<Vec<NetworkDelta>> {
        let cfg = match &self.sparsity {
            Some(cfg) if cfg.mode == TopologyMode::Dynamic => cfg.clone(),
            _ => return Ok(Vec::new()),
        };
        if env_step == 0 || env_step % cfg.topology_period != 0 {
            return Ok(Vec::new());
        }
        self.evolve_topology(&cfg, env_step, rng)
    }

    /// Unconditional topology update of every sparse layer.
    pub fn evolve_topology<R: Rng + ?Sized>(
        &mut self,
        cfg: &SparsityConfig,
        env_step: u64,
        rng: &mut R,
    ) -> Result<Vec<NetworkDelta>> {
        let mut out = Vec::new();
        for kind in NetworkKind::ALL {
            for (layer, delta) in self.network_mut(kind).evolve_topology(cfg, env_step, rng)? {
                out.push(NetworkDelta {
                    network: kind,
                    layer,
                    delta,
                });
            }
        }
        Ok(out)
    }

    /// Structural invariants: masked weights are zero in online and target
    /// networks, targets share the online masks, and masked optimizer
    /// moments are zero.
    pub fn invariants_hold(&self) -> bool {
        NetworkKind::ALL.iter().all(|&k| {
            let net = self.network(k);
            let target_ok = net.target.as_ref().is_none_or(|t| {
                t.masks_consistent()
                    && t.layers()
                        .iter()
                        .zip(net.online.layers())
                        .all(|(a, b)| a.mask == b.mask)
            });
            net.online.masks_consistent() && target_ok && net.optimizer.moments_respect_masks(&net.online)
        })
    }
}

/// TD3 exploration: add `noise` and clip to the action box.
pub fn perturb_action(action: &[f64], noise: &[f64]) -> Vec<f64> {
    action
        .iter()
        .zip(noise)
        .map(|(a, e)| (a + e).clamp(-1.0, 1.0))
        .collect()
}

fn standard_normal<R: Rng + ?Sized>(shape: (usize, usize), rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn(shape, || rng.sample(StandardNormal))
}
