//! Experiment orchestration: configuration, the training loop, evaluation,
//! seed aggregation, suites and the noise-weight regression check.

mod config;
mod conjecture;
mod metrics;
pub mod presets;
mod run;
mod suite;
mod trainer;

pub use config::{
    apply_override, config_reference, AgentSection, EneSection, EnvSection, ExperimentConfig,
    PeneSection, RunSection, SparsityMode, SparsitySection, CONFIG_KEYS,
};
pub use conjecture::{
    conjecture_oracle, ConjectureConfig, ConjectureResult, NOISE_WEIGHT_TOLERANCE,
    SIGNAL_WEIGHT_TOLERANCE,
};
pub use metrics::{
    aggregate_curves, aggregate_seeds, final_score_of, mean_ci, read_metrics_csv, sample_std,
    write_metrics_csv, AggregateCurve, EvalRecord, MeanCi, MetricsLog, METRICS_HEADER,
    MIN_EVAL_POINTS,
};
pub use run::{
    append_manifest, execute_run, read_manifest, run_dir, write_run_artifacts, ManifestRecord,
    RunStatus, RunSummary, CHECKPOINT_FILE, CONFIG_FILE, CONNECTIVITY_FILE, MANIFEST_FILE,
    METRICS_FILE,
};
pub use suite::{
    run_suite, suite_entries, SuiteEntry, SuiteFailure, SuiteReport, SuiteRow, SuiteSummary,
    GLOBAL_SPARSITIES, NOISE_AMPLITUDES, NOISE_MEANS, SUITE_NAMES,
};
pub use trainer::{
    build_env, run_training, scripted_histograms, scripted_return, stream_rng, Trainer,
};
