use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SparsityMode};
use super::metrics::mean_ci;
use super::run::{execute_run, RunSummary};
use crate::envs::{NoiseDistribution, NOISE_FRACTIONS};
use crate::error::{Error, Result};

pub const SUITE_NAMES: &[&str] = &[
    "noise-sweep",
    "pene",
    "louder-noise",
    "imitate",
    "static-ablation",
    "sparsity-sweep",
    "noise-mean",
    "matching-sparsity",
];

pub const NOISE_AMPLITUDES: &[f64] = &[1.0, 2.0, 4.0, 8.0, 16.0];
pub const GLOBAL_SPARSITIES: &[f64] = &[0.8, 0.9, 0.95, 0.98];
pub const NOISE_MEANS: &[f64] = &[0.0, 1.0, -2.0, 4.0];

/// One configuration of a suite. `label` doubles as its directory name.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteEntry {
    pub label: String,
    pub config: ExperimentConfig,
}

fn with_mode(base: &ExperimentConfig, mode: SparsityMode) -> ExperimentConfig {
    let mut c = base.clone();
    c.sparsity.mode = mode;
    c
}

fn anf_and_dense(
    base: &ExperimentConfig,
    tag: &str,
    edit: impl Fn(&mut ExperimentConfig),
) -> Vec<SuiteEntry> {
    [SparsityMode::Anf, SparsityMode::Dense]
        .into_iter()
        .map(|mode| {
            let mut config = with_mode(base, mode);
            edit(&mut config);
            SuiteEntry {
                label: format!("{}_{tag}", mode.name()),
                config,
            }
        })
        .collect()
}

/// Expand a suite into its configurations, all derived from `base`.
pub fn suite_entries(name: &str, base: &ExperimentConfig) -> Result<Vec<SuiteEntry>> {
    let entries = match name {
        "noise-sweep" => NOISE_FRACTIONS
            .iter()
            .flat_map(|&nf| anf_and_dense(base, &format!("nf{nf}"), |c| c.ene.noise_fraction = nf))
            .collect(),
        "pene" => {
            let period = (base.run.total_steps / 4).max(1);
            anf_and_dense(base, &format!("tp{period}"), |c| {
                c.pene.permutation_period = Some(period)
            })
        }
        "louder-noise" => NOISE_AMPLITUDES
            .iter()
            .flat_map(|&a| anf_and_dense(base, &format!("sigma{a}"), |c| c.ene.noise_amplitude = a))
            .collect(),
        "imitate" => anf_and_dense(base, "imitate", |c| {
            c.ene.distribution = NoiseDistribution::Imitate
        }),
        "static-ablation" => [SparsityMode::Anf, SparsityMode::StaticAnf, SparsityMode::Dense]
            .into_iter()
            .map(|mode| SuiteEntry {
                label: mode.name().to_string(),
                config: with_mode(base, mode),
            })
            .collect(),
        "sparsity-sweep" => GLOBAL_SPARSITIES
            .iter()
            .map(|&g| {
                let mut config = with_mode(base, SparsityMode::SparserAnf);
                config.sparsity.global_sparsity = Some(g);
                SuiteEntry {
                    label: format!("sparser_anf_g{g}"),
                    config,
                }
            })
            .collect(),
        "noise-mean" => NOISE_MEANS
            .iter()
            .flat_map(|&mu| anf_and_dense(base, &format!("mu{mu}"), |c| c.ene.noise_mean = mu))
            .collect(),
        "matching-sparsity" => NOISE_FRACTIONS
            .iter()
            .flat_map(|&nf| {
                let mut fixed = with_mode(base, SparsityMode::Anf);
                fixed.ene.noise_fraction = nf;
                let mut matched = fixed.clone();
                matched.sparsity.input_layer_sparsity = nf;
                [
                    SuiteEntry {
                        label: format!("anf_nf{nf}_si{}", fixed.sparsity.input_layer_sparsity),
                        config: fixed,
                    },
                    SuiteEntry {
                        label: format!("anf_nf{nf}_si{nf}"),
                        config: matched,
                    },
                ]
            })
            .collect(),
        other => {
            return Err(Error::usage(format!(
                "unknown suite {other:?}; available: {}",
                SUITE_NAMES.join(", ")
            )))
        }
    };
    Ok(entries)
}

/// Final score of one (config, seed) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub label: String,
    pub algorithm: String,
    pub env: String,
    pub seed: u64,
    pub final_score: f64,
    pub actor_params: usize,
    pub d_ene: usize,
}

/// Seed aggregate of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub label: String,
    pub algorithm: String,
    pub env: String,
    pub seeds: usize,
    pub mean: f64,
    pub half_width: f64,
    pub actor_params: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteFailure {
    pub label: String,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub rows: Vec<SuiteRow>,
    pub summary: Vec<SuiteSummary>,
    pub failures: Vec<SuiteFailure>,
}

impl SuiteReport {
    /// Plain-text table: one line per configuration, then failures.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "suite {}", self.suite);
        let _ = writeln!(
            out,
            "{:<28} {:<10} {:<18} {:>5} {:>22} {:>10}",
            "config", "algorithm", "env", "seeds", "return (95% CI)", "# params"
        );
        for s in &self.summary {
            let ret = format!("{:.2} ± {:.2}", s.mean, s.half_width);
            let _ = writeln!(
                out,
                "{:<28} {:<10} {:<18} {:>5} {:>22} {:>10}",
                s.label, s.algorithm, s.env, s.seeds, ret, s.actor_params
            );
        }
        for f in &self.failures {
            let _ = writeln!(out, "failed {} seed {}: {}", f.label, f.seed, f.error);
        }
        out
    }
}

/// Run every entry of `name` for every seed in `base.run.seeds` on a pool
/// of `threads` workers (0 = rayon default). Failed runs are recorded and
/// the rest continue. Artifacts go under `<output_dir>/<suite>/<label>`.
pub fn run_suite(name: &str, base: &ExperimentConfig, threads: usize) -> Result<SuiteReport> {
    let entries = suite_entries(name, base)?;
    let suite_dir = base.run.output_dir.join(name);
    let jobs: Vec<(usize, u64)> = (0..entries.len())
        .flat_map(|i| base.run.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::usage(e.to_string()))?;
    let results: Vec<(usize, u64, Result<RunSummary>)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, seed)| {
                let mut config = entries[i].config.clone();
                config.run.output_dir = suite_dir.clone();
                (i, seed, execute_run(&config, &entries[i].label, seed, false))
            })
            .collect()
    });
    Ok(collect_report(name, &entries, results))
}

fn collect_report(
    name: &str,
    entries: &[SuiteEntry],
    results: Vec<(usize, u64, Result<RunSummary>)>,
) -> SuiteReport {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut per_entry: Vec<Vec<&RunSummary>> = vec![Vec::new(); entries.len()];
    for (i, seed, r) in &results {
        let e = &entries[*i];
        match r {
            Ok(s) => {
                rows.push(SuiteRow {
                    label: e.label.clone(),
                    algorithm: e.config.agent.algorithm.name().to_string(),
                    env: e.config.env.name.clone(),
                    seed: *seed,
                    final_score: s.final_score,
                    actor_params: s.actor_params,
                    d_ene: s.d_ene,
                });
                per_entry[*i].push(s);
            }
            Err(err) => failures.push(SuiteFailure {
                label: e.label.clone(),
                seed: *seed,
                error: err.to_string(),
            }),
        }
    }
    let summary = entries
        .iter()
        .zip(&per_entry)
        .filter(|(_, runs)| !runs.is_empty())
        .map(|(e, runs)| {
            let scores: Vec<f64> = runs.iter().map(|r| r.final_score).collect();
            let ci = mean_ci(&scores);
            SuiteSummary {
                label: e.label.clone(),
                algorithm: e.config.agent.algorithm.name().to_string(),
                env: e.config.env.name.clone(),
                seeds: runs.len(),
                mean: ci.mean,
                half_width: ci.half_width,
                actor_params: runs[0].actor_params,
            }
        })
        .collect();
    SuiteReport {
        suite: name.to_string(),
        rows,
        summary,
        failures,
    }
}
