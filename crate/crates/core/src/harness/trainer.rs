use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::metrics::{EvalRecord, MetricsLog};
use crate::agents::{Agent, NetworkKind, ReplayBuffer, TrainReport, Transition};
use crate::analytics::snapshot_neurons;
use crate::envs::{
    fit_histograms, read_histograms, scale_action, EneConfig, HistogramDistribution,
    NoiseDistribution, NoisyEnv, PeneConfig, PermutationSchedule, ToyEnv, VectorEnv,
};
use crate::error::{Error, Result};
use crate::sparse::{global_sparsity, TopologyMode};

/// Independent random streams of one run. PENE permutations use the low
/// stream numbers of the run seed, so these start far above them.
const STREAM_BASE: u64 = 1 << 40;
const STREAM_AGENT_INIT: u64 = STREAM_BASE;
const STREAM_ENV: u64 = STREAM_BASE + 1;
const STREAM_EVAL: u64 = STREAM_BASE + 2;
const STREAM_ACTION: u64 = STREAM_BASE + 3;
const STREAM_TRAIN: u64 = STREAM_BASE + 4;
const STREAM_TOPOLOGY: u64 = STREAM_BASE + 5;
const STREAM_HISTOGRAM: u64 = STREAM_BASE + 6;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Fit per-feature histograms to states visited by the scripted controller.
pub fn scripted_histograms(
    env_name: &str,
    states: usize,
    bins: usize,
    seed: u64,
) -> Result<Vec<HistogramDistribution>> {
    let mut env = ToyEnv::by_name(env_name)?;
    let mut rng = stream_rng(seed, STREAM_HISTOGRAM);
    let mut recorded = Vec::with_capacity(states);
    let mut s = env.reset(&mut rng);
    while recorded.len() < states {
        recorded.push(s.clone());
        let a = env.scripted_action();
        let out = env.step(&a);
        s = if out.done() { env.reset(&mut rng) } else { out.state };
    }
    fit_histograms(&recorded, bins)
}

pub fn build_env(config: &ExperimentConfig, seed: u64) -> Result<NoisyEnv<ToyEnv>> {
    let e = &config.ene;
    let histograms = match e.distribution {
        NoiseDistribution::Gaussian => None,
        NoiseDistribution::Imitate => Some(match &e.histogram_file {
            Some(path) => read_histograms(path)?,
            None => scripted_histograms(&config.env.name, e.imitate_states, e.histogram_bins, seed)?,
        }),
    };
    let ene = EneConfig {
        noise_fraction: e.noise_fraction,
        noise_mean: e.noise_mean,
        noise_amplitude: e.noise_amplitude,
        distribution: e.distribution,
        histograms,
    };
    NoisyEnv::new(ToyEnv::by_name(&config.env.name)?, ene)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct UpdateStats {
    critic_sum: f64,
    q_sum: f64,
    updates: u64,
    actor_sum: f64,
    actor_updates: u64,
}

impl UpdateStats {
    fn add(&mut self, r: &TrainReport) {
        self.critic_sum += r.critic_loss;
        self.q_sum += r.mean_q;
        self.updates += 1;
        if let Some(a) = r.actor_loss {
            self.actor_sum += a;
            self.actor_updates += 1;
        }
    }

    fn mean(sum: f64, n: u64) -> Option<f64> {
        (n > 0).then(|| sum / n as f64)
    }
}

/// Complete state of one training run. Serializing it mid-run and resuming
/// gives the same result as an uninterrupted run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trainer {
    config: ExperimentConfig,
    seed: u64,
    step: u64,
    agent: Agent,
    buffer: ReplayBuffer,
    env: NoisyEnv<ToyEnv>,
    eval_env: NoisyEnv<ToyEnv>,
    schedule: Option<PermutationSchedule>,
    /// Current observation, already permuted.
    obs: Vec<f64>,
    rng_env: ChaCha8Rng,
    rng_eval: ChaCha8Rng,
    rng_action: ChaCha8Rng,
    rng_train: ChaCha8Rng,
    rng_topology: ChaCha8Rng,
    stats: UpdateStats,
    gradient_steps: u64,
    log: MetricsLog,
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"ANFCKPT\0";
const CHECKPOINT_VERSION: u32 = 1;

impl Trainer {
    pub fn new(config: &ExperimentConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let env = build_env(config, seed)?;
        let eval_env = env.clone();
        let d = env.state_dim();
        let schedule = config
            .pene
            .permutation_period
            .map(|p| {
                PermutationSchedule::new(
                    PeneConfig {
                        permutation_period: p,
                        seed,
                    },
                    d,
                )
            })
            .transpose()?;
        let hp = config.agent.hyperparams();
        let buffer = ReplayBuffer::new(hp.buffer_capacity, d, env.action_dim());
        let agent = Agent::new(
            config.agent.algorithm,
            d,
            env.action_dim(),
            hp,
            config.sparsity.to_config(),
            &mut stream_rng(seed, STREAM_AGENT_INIT),
        )?;
        let mut t = Self {
            config: config.clone(),
            seed,
            step: 0,
            agent,
            buffer,
            env,
            eval_env,
            schedule,
            obs: Vec::new(),
            rng_env: stream_rng(seed, STREAM_ENV),
            rng_eval: stream_rng(seed, STREAM_EVAL),
            rng_action: stream_rng(seed, STREAM_ACTION),
            rng_train: stream_rng(seed, STREAM_TRAIN),
            rng_topology: stream_rng(seed, STREAM_TOPOLOGY),
            stats: UpdateStats::default(),
            gradient_steps: 0,
            log: MetricsLog::new(config.run.total_steps),
        };
        let s = t.env.reset(&mut t.rng_env);
        t.obs = t.observe(0, s);
        t.record_analytics(0);
        Ok(t)
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn log(&self) -> &MetricsLog {
        &self.log
    }

    pub fn state_dim(&self) -> usize {
        self.env.state_dim()
    }

    pub fn original_dim(&self) -> usize {
        self.env.original_dim()
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.config.run.total_steps
    }

    fn observe(&mut self, step: u64, state: Vec<f64>) -> Vec<f64> {
        match &mut self.schedule {
            Some(s) => s.apply(step, &state),
            None => state,
        }
    }

    /// Input positions holding task-relevant features at `step`.
    pub fn relevant_positions(&mut self, step: u64) -> Vec<usize> {
        let d_og = self.env.original_dim();
        match &mut self.schedule {
            Some(s) => s.relevant_positions(step, d_og),
            None => (0..d_og).collect(),
        }
    }

    fn is_snapshot_step(&self, step: u64) -> bool {
        step == 0
            || step == self.config.run.total_steps
            || self
                .config
                .pene
                .permutation_period
                .is_some_and(|p| step % p == 0)
    }

    fn record_analytics(&mut self, step: u64) {
        if !self.config.run.record_connectivity {
            return;
        }
        let sparse = self.agent.sparsity().map(|s| s.topology_period);
        let Some(period) = sparse else { return };
        let on_grid = step % period == 0;
        let snap = self.is_snapshot_step(step);
        if !on_grid && !snap {
            return;
        }
        let relevant = self.relevant_positions(step);
        if on_grid {
            self.log.connectivity.record(&self.agent, step, &relevant);
        }
        if snap {
            for kind in NetworkKind::ALL {
                if let Some(s) = snapshot_neurons(&self.agent, kind, step, &relevant) {
                    self.log.snapshots.push(s);
                }
            }
        }
    }

    /// Advance one environment step: act, store, learn, evolve, record,
    /// evaluate.
    pub fn step_once(&mut self) -> Result<()> {
        if self.is_finished() {
            return Err(Error::usage("training already reached run.total_steps"));
        }
        let t = self.step + 1;
        let hp = self.agent.hyperparams().clone();
        let k = self.env.action_dim();
        let action: Vec<f64> = if t <= hp.initial_collect {
            (0..k).map(|_| self.rng_action.random_range(-1.0..=1.0)).collect()
        } else {
            self.agent.select_action(&self.obs, true, &mut self.rng_action)?
        };
        let bounds = self.env.inner().action_bounds();
        let out = self.env.step(&scale_action(&action, &bounds), &mut self.rng_env);
        let done = out.done();
        let next_obs = self.observe(t, out.state);
        self.buffer.push(&Transition {
            state: std::mem::take(&mut self.obs),
            action,
            reward: out.reward,
            next_state: next_obs.clone(),
            done: out.terminated,
        })?;
        self.obs = if done {
            let s = self.env.reset(&mut self.rng_env);
            self.observe(t, s)
        } else {
            next_obs
        };

        if t > hp.initial_collect && t % hp.critic_period == 0 {
            if let Some(report) = self.agent.train_step(&self.buffer, &mut self.rng_train)? {
                self.stats.add(&report);
                self.gradient_steps += 1;
            }
        }
        let deltas = self.agent.maybe_evolve_topology(t, &mut self.rng_topology)?;
        if !deltas.is_empty() {
            self.log.topology_updates += 1;
        }
        self.step = t;
        self.record_analytics(t);
        if t % self.config.run.eval_interval == 0 {
            self.evaluate_and_record(t)?;
        }
        Ok(())
    }

    /// Run until `step` (capped at `run.total_steps`).
    pub fn run_until(&mut self, step: u64) -> Result<()> {
        let stop = step.min(self.config.run.total_steps);
        let start = Instant::now();
        while self.step < stop {
            self.step_once()?;
        }
        self.log.wall_clock_seconds += start.elapsed().as_secs_f64();
        Ok(())
    }

    /// Mean and population std of `eval_episodes` deterministic-policy
    /// returns on the evaluation environment. Touches neither the replay
    /// buffer nor the training step counter.
    pub fn evaluate(&mut self, step: u64) -> Result<(f64, f64)> {
        let episodes = self.config.run.eval_episodes;
        let bounds = self.eval_env.inner().action_bounds();
        let mut returns = Vec::with_capacity(episodes);
        for _ in 0..episodes {
            let mut raw = self.eval_env.reset(&mut self.rng_eval);
            let mut total = 0.0;
            loop {
                let obs = match &mut self.schedule {
                    Some(s) => s.apply(step, &raw),
                    None => raw,
                };
                let a = self.agent.select_action(&obs, false, &mut self.rng_eval)?;
                let out = self.eval_env.step(&scale_action(&a, &bounds), &mut self.rng_eval);
                total += out.reward;
                if out.done() {
                    break;
                }
                raw = out.state;
            }
            returns.push(total);
        }
        let n = returns.len() as f64;
        let mean = returns.iter().sum::<f64>() / n;
        let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
        if !mean.is_finite() {
            return Err(Error::numerical(format!("non-finite evaluation return at step {step}")));
        }
        Ok((mean, var.sqrt()))
    }

    fn evaluate_and_record(&mut self, t: u64) -> Result<()> {
        let (mean, std) = self.evaluate(t)?;
        let stats = std::mem::take(&mut self.stats);
        let critic_sparsity = (global_sparsity(self.agent.network(NetworkKind::Critic1).online.layers())
            + global_sparsity(self.agent.network(NetworkKind::Critic2).online.layers()))
            / 2.0;
        self.log.evals.push(EvalRecord {
            step: t,
            mean_return: mean,
            std_return: std,
            critic_loss: UpdateStats::mean(stats.critic_sum, stats.updates),
            actor_loss: UpdateStats::mean(stats.actor_sum, stats.actor_updates),
            mean_q: UpdateStats::mean(stats.q_sum, stats.updates),
            gradient_steps: self.gradient_steps,
            actor_sparsity: global_sparsity(self.agent.network(NetworkKind::Actor).online.layers()),
            critic_sparsity,
        });
        Ok(())
    }

    pub fn into_log(self) -> MetricsLog {
        self.log
    }

    /// Whether the topology of this run ever changes.
    pub fn is_dynamic(&self) -> bool {
        self.agent
            .sparsity()
            .is_some_and(|s| s.mode == TopologyMode::Dynamic)
    }

    pub fn to_checkpoint_bytes(&self) -> Result<Vec<u8>> {
        let mut out = CHECKPOINT_MAGIC.to_vec();
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let body = bincode::serialize(self).map_err(|e| Error::format(e.to_string()))?;
        out.extend_from_slice(&body);
        Ok(out)
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(Error::format("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(Error::format(format!("unsupported checkpoint version {version}")));
        }
        bincode::deserialize(&bytes[12..]).map_err(|e| Error::format(e.to_string()))
    }

    /// Write atomically: a temporary file renamed over the target.
    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_checkpoint_bytes()?)?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load_checkpoint(path: &Path) -> Result<Self> {
        Self::from_checkpoint_bytes(&std::fs::read(path)?)
    }
}

/// Train one seed to completion and return its metrics.
pub fn run_training(config: &ExperimentConfig, seed: u64) -> Result<MetricsLog> {
    let mut t = Trainer::new(config, seed)?;
    t.run_until(config.run.total_steps)?;
    Ok(t.into_log())
}

/// Mean episode return of the scripted controller on the noise-free task.
pub fn scripted_return(env_name: &str, episodes: usize, seed: u64) -> Result<f64> {
    let mut env = ToyEnv::by_name(env_name)?;
    let mut rng = stream_rng(seed, STREAM_EVAL);
    let mut total = 0.0;
    for _ in 0..episodes {
        env.reset(&mut rng);
        loop {
            let a = env.scripted_action();
            let out = env.step(&a);
            total += out.reward;
            if out.done() {
                break;
            }
        }
    }
    Ok(total / episodes as f64)
}
