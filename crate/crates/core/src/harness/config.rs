use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::presets;
use crate::agents::{AgentHyperparams, Algorithm};
use crate::envs::{ene_dim, NoiseDistribution, ToyEnv, VectorEnv};
use crate::error::{Error, Result};
use crate::sparse::{SparseLayers, SparsityConfig, TopologyMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    pub name: String,
}

impl Default for EnvSection {
    fn default() -> Self {
        Self {
            name: "point_mass_reach".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EneSection {
    pub noise_fraction: f64,
    pub noise_mean: f64,
    pub noise_amplitude: f64,
    pub distribution: NoiseDistribution,
    /// Histogram file for `imitate`; when absent the histograms are fitted
    /// to scripted-controller rollouts of the environment.
    pub histogram_file: Option<PathBuf>,
    pub histogram_bins: usize,
    pub imitate_states: usize,
}

impl Default for EneSection {
    fn default() -> Self {
        Self {
            noise_fraction: 0.9,
            noise_mean: 0.0,
            noise_amplitude: 1.0,
            distribution: NoiseDistribution::Gaussian,
            histogram_file: None,
            histogram_bins: 20,
            imitate_states: 5000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeneSection {
    /// Steps between feature permutations; absent disables permutation.
    pub permutation_period: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSection {
    pub algorithm: Algorithm,
    pub gamma: f64,
    pub tau: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub initial_collect: u64,
    pub critic_period: u64,
    /// Defaults to 2 for TD3 and 1 for SAC.
    pub actor_period: Option<u64>,
    /// Defaults to 2 for TD3 and 1 for SAC.
    pub target_period: Option<u64>,
    pub alpha: f64,
    pub exploration_noise: f64,
    pub target_noise: f64,
    pub target_noise_clip: f64,
    pub hidden_dims: Vec<usize>,
}

impl Default for AgentSection {
    fn default() -> Self {
        let hp = AgentHyperparams::for_algorithm(Algorithm::Td3);
        Self {
            algorithm: Algorithm::Td3,
            gamma: hp.gamma,
            tau: hp.tau,
            lr: hp.lr,
            weight_decay: hp.weight_decay,
            batch_size: hp.batch_size,
            buffer_capacity: 100_000,
            initial_collect: 2_000,
            critic_period: hp.critic_period,
            actor_period: None,
            target_period: None,
            alpha: hp.alpha,
            exploration_noise: hp.exploration_noise,
            target_noise: hp.target_noise,
            target_noise_clip: hp.target_noise_clip,
            hidden_dims: hp.hidden_dims,
        }
    }
}

impl AgentSection {
    pub fn hyperparams(&self) -> AgentHyperparams {
        let d = AgentHyperparams::for_algorithm(self.algorithm);
        AgentHyperparams {
            gamma: self.gamma,
            tau: self.tau,
            lr: self.lr,
            weight_decay: self.weight_decay,
            batch_size: self.batch_size,
            buffer_capacity: self.buffer_capacity,
            initial_collect: self.initial_collect,
            critic_period: self.critic_period,
            actor_period: self.actor_period.unwrap_or(d.actor_period),
            target_period: self.target_period.unwrap_or(d.target_period),
            alpha: self.alpha,
            exploration_noise: self.exploration_noise,
            target_noise: self.target_noise,
            target_noise_clip: self.target_noise_clip,
            hidden_dims: self.hidden_dims.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SparsityMode {
    Dense,
    Anf,
    StaticAnf,
    SparserAnf,
}

impl SparsityMode {
    pub fn name(self) -> &'static str {
        match self {
            SparsityMode::Dense => "dense",
            SparsityMode::Anf => "anf",
            SparsityMode::StaticAnf => "static_anf",
            SparsityMode::SparserAnf => "sparser_anf",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SparsitySection {
    pub mode: SparsityMode,
    pub input_layer_sparsity: f64,
    pub drop_fraction: f64,
    pub topology_period: u64,
    /// Required for `sparser_anf`.
    pub global_sparsity: Option<f64>,
    pub protect_new_connections: bool,
}

impl Default for SparsitySection {
    fn default() -> Self {
        let d = SparsityConfig::default();
        Self {
            mode: SparsityMode::Anf,
            input_layer_sparsity: d.input_layer_sparsity,
            drop_fraction: d.drop_fraction,
            topology_period: d.topology_period,
            global_sparsity: None,
            protect_new_connections: d.protect_new_connections,
        }
    }
}

impl SparsitySection {
    /// `None` for dense networks.
    pub fn to_config(&self) -> Option<SparsityConfig> {
        let base = SparsityConfig {
            input_layer_sparsity: self.input_layer_sparsity,
            drop_fraction: self.drop_fraction,
            topology_period: self.topology_period,
            mode: TopologyMode::Dynamic,
            sparse_layers: SparseLayers::InputOnly,
            global_sparsity: None,
            protect_new_connections: self.protect_new_connections,
        };
        match self.mode {
            SparsityMode::Dense => None,
            SparsityMode::Anf => Some(base),
            SparsityMode::StaticAnf => Some(SparsityConfig {
                mode: TopologyMode::Static,
                ..base
            }),
            SparsityMode::SparserAnf => Some(SparsityConfig {
                sparse_layers: SparseLayers::InputAndHidden,
                global_sparsity: self.global_sparsity,
                ..base
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub total_steps: u64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Steps between checkpoints; 0 writes only the final checkpoint.
    pub checkpoint_interval: u64,
    pub record_connectivity: bool,
    pub svg: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            total_steps: 60_000,
            eval_interval: 1_000,
            eval_episodes: 10,
            seeds: (0..5).collect(),
            output_dir: PathBuf::from("runs"),
            checkpoint_interval: 0,
            record_connectivity: true,
            svg: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvSection,
    pub ene: EneSection,
    pub pene: PeneSection,
    pub agent: AgentSection,
    pub sparsity: SparsitySection,
    pub run: RunSection,
}

/// Every config key with a one-line description, in file order.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("env.name", "task: point_mass_reach | linear_tracker"),
    ("ene.noise_fraction", "fraction n_f of observation features that are noise, in [0, 1)"),
    ("ene.noise_mean", "mean of Gaussian noise features"),
    ("ene.noise_amplitude", "standard deviation of Gaussian noise features"),
    ("ene.distribution", "gaussian | imitate"),
    ("ene.histogram_file", "histogram JSON for imitate (optional; fitted from scripted rollouts when absent)"),
    ("ene.histogram_bins", "bins per feature when fitting histograms"),
    ("ene.imitate_states", "recorded states used to fit histograms"),
    ("pene.permutation_period", "steps between feature permutations (optional; absent = no permutation)"),
    ("agent.algorithm", "td3 | sac"),
    ("agent.gamma", "discount factor"),
    ("agent.tau", "Polyak coefficient for target networks"),
    ("agent.lr", "Adam learning rate"),
    ("agent.weight_decay", "L2 coefficient on weights"),
    ("agent.batch_size", "minibatch size"),
    ("agent.buffer_capacity", "replay buffer size"),
    ("agent.initial_collect", "random-action steps before learning starts"),
    ("agent.critic_period", "environment steps per critic update"),
    ("agent.actor_period", "critic updates per actor update (default td3 2, sac 1)"),
    ("agent.target_period", "critic updates per target update (default td3 2, sac 1)"),
    ("agent.alpha", "SAC entropy temperature"),
    ("agent.exploration_noise", "TD3 exploration noise std"),
    ("agent.target_noise", "TD3 target smoothing noise std"),
    ("agent.target_noise_clip", "TD3 target smoothing noise clip"),
    ("agent.hidden_dims", "hidden layer widths"),
    ("sparsity.mode", "dense | anf | static_anf | sparser_anf"),
    ("sparsity.input_layer_sparsity", "fraction of input-layer connections absent"),
    ("sparsity.drop_fraction", "fraction of connections dropped and regrown per topology update"),
    ("sparsity.topology_period", "environment steps between topology updates"),
    ("sparsity.global_sparsity", "target sparsity over all weights (sparser_anf only)"),
    ("sparsity.protect_new_connections", "never drop connections grown at the previous update"),
    ("run.total_steps", "environment steps"),
    ("run.eval_interval", "environment steps between evaluations"),
    ("run.eval_episodes", "episodes per evaluation"),
    ("run.seeds", "seeds run by suites"),
    ("run.output_dir", "artifact root directory"),
    ("run.checkpoint_interval", "steps between checkpoints (0 = none)"),
    ("run.record_connectivity", "record input-layer connectivity timelines and snapshots"),
    ("run.svg", "also write SVG charts"),
];

/// `key = default  # description` for every config key.
pub fn config_reference() -> String {
    let defaults = toml::Table::try_from(ExperimentConfig::default()).expect("config serializes");
    let mut out = String::new();
    for (key, doc) in CONFIG_KEYS {
        let (section, field) = key.split_once('.').expect("dotted key");
        let value = defaults
            .get(section)
            .and_then(|s| s.get(field))
            .map_or_else(|| "(unset)".to_string(), |v| v.to_string());
        out.push_str(&format!("  {key} = {value}\n      {doc}\n"));
    }
    out
}

/// Parse `section.key=value` and set it in `table`. The value is read as a
/// TOML value, falling back to a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::usage(format!("override {assignment:?} is not of the form key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let (section, field) = key
        .split_once('.')
        .ok_or_else(|| Error::usage(format!("override key {key:?} must be section.key")))?;
    if !CONFIG_KEYS.iter().any(|(k, _)| *k == key) {
        return Err(Error::usage(format!("unknown config key {key:?}")));
    }
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let sec = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match sec {
        toml::Value::Table(t) => {
            t.insert(field.to_string(), value);
            Ok(())
        }
        _ => Err(Error::config(format!("[{section}] is not a table"))),
    }
}

impl ExperimentConfig {
    /// Parse TOML text. Syntax and schema errors carry line and column.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse TOML text, then apply `key=value` overrides on top.
    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        if overrides.is_empty() {
            return Self::from_toml_str(text);
        }
        // Parse once untouched so file errors keep their line numbers.
        Self::from_toml_str(text)?;
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(format!("after overrides: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load a config file, or a built-in preset when `source` names one and
    /// no such file exists.
    pub fn load(source: &str, overrides: &[String]) -> Result<(Self, String)> {
        let path = Path::new(source);
        let (text, name) = if path.exists() {
            let text = std::fs::read_to_string(path)?;
            let name = path
                .file_stem()
                .map_or_else(|| "run".to_string(), |s| s.to_string_lossy().into_owned());
            (text, name)
        } else if let Some(text) = presets::preset(source) {
            (text.to_string(), source.to_string())
        } else {
            return Err(Error::config(format!(
                "config {source:?} is neither a file nor a preset (presets: {})",
                presets::PRESET_NAMES.join(", ")
            )));
        };
        let cfg = Self::from_toml_with_overrides(&text, overrides)
            .map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("{source}: {m}")),
                other => other,
            })?;
        Ok((cfg, name))
    }

    pub fn validate(&self) -> Result<()> {
        let env = ToyEnv::by_name(&self.env.name)?;
        let e = &self.ene;
        if !(0.0..1.0).contains(&e.noise_fraction) {
            return Err(Error::config(format!(
                "ene.noise_fraction must be in [0, 1), got {}",
                e.noise_fraction
            )));
        }
        if !(e.noise_amplitude > 0.0) || !e.noise_mean.is_finite() {
            return Err(Error::config("ene.noise_amplitude must be positive and ene.noise_mean finite"));
        }
        if e.histogram_bins == 0 {
            return Err(Error::config("ene.histogram_bins must be positive"));
        }
        if e.distribution == NoiseDistribution::Imitate
            && e.histogram_file.is_none()
            && e.imitate_states < crate::envs::MIN_RECORDED_STATES
        {
            return Err(Error::config(format!(
                "ene.imitate_states must be at least {}",
                crate::envs::MIN_RECORDED_STATES
            )));
        }
        self.agent.hyperparams().validate()?;
        let r = &self.run;
        if r.total_steps == 0 || r.eval_interval == 0 || r.eval_episodes == 0 {
            return Err(Error::config(
                "run.total_steps, run.eval_interval and run.eval_episodes must be positive",
            ));
        }
        if r.eval_interval > r.total_steps {
            return Err(Error::config("run.eval_interval exceeds run.total_steps"));
        }
        if r.seeds.is_empty() {
            return Err(Error::config("run.seeds must list at least one seed"));
        }
        if r.seeds.iter().collect::<HashSet<_>>().len() != r.seeds.len() {
            return Err(Error::config("run.seeds must be distinct"));
        }
        if let Some(p) = self.pene.permutation_period {
            if p == 0 || p >= r.total_steps {
                return Err(Error::config(
                    "pene.permutation_period must be positive and below run.total_steps",
                ));
            }
        }
        if let Some(sp) = self.sparsity.to_config() {
            sp.validate()?;
            if sp.mode == TopologyMode::Dynamic && sp.topology_period > r.total_steps {
                return Err(Error::config("sparsity.topology_period exceeds run.total_steps"));
            }
            if self.sparsity.mode == SparsityMode::SparserAnf {
                // Surfaces infeasible budgets before any training starts.
                let d = self.ene_dim()?;
                let hp = self.agent.hyperparams();
                let actor_out = match self.agent.algorithm {
                    Algorithm::Td3 => env.action_dim(),
                    Algorithm::Sac => 2 * env.action_dim(),
                };
                let spec = crate::nn::MlpSpec::new(d, hp.hidden_dims.clone(), actor_out);
                sp.layer_connections(&spec.layer_shapes())?;
            }
        }
        Ok(())
    }

    pub fn ene_dim(&self) -> Result<usize> {
        ene_dim(ToyEnv::by_name(&self.env.name)?.state_dim(), self.ene.noise_fraction)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Short label such as `td3/anf/point_mass_reach`.
    pub fn label(&self) -> String {
        format!(
            "{}/{}/{}",
            self.agent.algorithm.name(),
            self.sparsity.mode.name(),
            self.env.name
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.agent.hyperparams().actor_period, 2);
    }

    #[test]
    fn sac_period_defaults() {
        let cfg = ExperimentConfig::from_toml_str("[agent]\nalgorithm = \"sac\"\n").unwrap();
        let hp = cfg.agent.hyperparams();
        assert_eq!((hp.actor_period, hp.target_period), (1, 1));
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_line() {
        let err = ExperimentConfig::from_toml_str("[run]\ntotal_steps = 10\nbogus = 1\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bogus") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn overrides_take_precedence() {
        let cfg = ExperimentConfig::from_toml_with_overrides(
            "[ene]\nnoise_fraction = 0.5\n",
            &["ene.noise_fraction=0.95".into(), "agent.algorithm=sac".into()],
        )
        .unwrap();
        assert_eq!(cfg.ene.noise_fraction, 0.95);
        assert_eq!(cfg.agent.algorithm, Algorithm::Sac);
        assert_eq!(cfg.ene_dim().unwrap(), 160);
    }

    #[test]
    fn bad_overrides_are_usage_errors() {
        for o in ["nonsense", "run.nope=1", "flat=1"] {
            assert!(matches!(
                ExperimentConfig::from_toml_with_overrides("", &[o.into()]),
                Err(Error::Usage(_))
            ));
        }
    }

    #[test]
    fn reference_lists_every_key() {
        let r = config_reference();
        for (k, _) in CONFIG_KEYS {
            assert!(r.contains(k));
        }
        assert!(r.contains("agent.gamma = 0.99"));
        assert!(r.contains("agent.tau = 0.005"));
    }

    #[test]
    fn every_default_key_is_documented() {
        let t = toml::Table::try_from(ExperimentConfig::default()).unwrap();
        for (section, fields) in &t {
            for field in fields.as_table().unwrap().keys() {
                let key = format!("{section}.{field}");
                assert!(CONFIG_KEYS.iter().any(|(k, _)| *k == key), "{key}");
            }
        }
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.run.total_steps += 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn infeasible_sparser_budget_is_a_config_error() {
        let text = "[agent]\nalgorithm = \"sac\"\nhidden_dims = [4, 4]\n[sparsity]\nmode = \"sparser_anf\"\nglobal_sparsity = 0.99\n";
        assert!(matches!(ExperimentConfig::from_toml_str(text), Err(Error::Config(_))));
    }
}
