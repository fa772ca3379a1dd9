use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::metrics::{write_metrics_csv, MetricsLog};
use super::trainer::Trainer;
use crate::agents::NetworkKind;
use crate::analytics::{learning_curve_svg, timeline_svg, write_snapshot_csv, write_timeline_csv};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CONNECTIVITY_FILE: &str = "connectivity.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const CONFIG_FILE: &str = "config.toml";

/// Appends from concurrent suite workers must not interleave.
static MANIFEST_LOCK: Mutex<()> = Mutex::new(());

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Started,
    Completed,
    Aborted,
}

/// One line of `manifest.jsonl`. A run appends `started` before its first
/// step and `completed` or `aborted` when it stops, so a crashed run shows
/// up as a lone `started` record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub status: RunStatus,
    pub name: String,
    pub label: String,
    pub config_hash: String,
    pub seed: u64,
    pub d_ene: usize,
    pub actor_params: usize,
    pub step: u64,
    pub final_score: Option<f64>,
    pub wall_clock_seconds: Option<f64>,
    pub run_dir: String,
    pub error: Option<String>,
}

pub fn append_manifest(path: &Path, record: &ManifestRecord) -> Result<()> {
    let line = serde_json::to_string(record).map_err(|e| Error::format(e.to_string()))?;
    let _guard = MANIFEST_LOCK.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{line}")?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>> {
    let f = File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::format(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub seed: u64,
    pub final_score: f64,
    pub actor_params: usize,
    pub d_ene: usize,
    pub wall_clock_seconds: f64,
    pub run_dir: PathBuf,
}

/// `<output_dir>/<name>/seed_<seed>`.
pub fn run_dir(config: &ExperimentConfig, name: &str, seed: u64) -> PathBuf {
    config.run.output_dir.join(name).join(format!("seed_{seed}"))
}

/// Write metrics, connectivity, snapshots and (optionally) SVG plots of one
/// run into `dir`.
pub fn write_run_artifacts(dir: &Path, log: &MetricsLog, svg: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_metrics_csv(BufWriter::new(File::create(dir.join(METRICS_FILE))?), &log.evals)?;
    let timelines: Vec<_> = log
        .connectivity
        .timelines
        .iter()
        .filter(|t| !t.is_empty())
        .cloned()
        .collect();
    if !timelines.is_empty() {
        write_timeline_csv(BufWriter::new(File::create(dir.join(CONNECTIVITY_FILE))?), &timelines)?;
    }
    for kind in NetworkKind::ALL {
        let snaps: Vec<_> = log.snapshots.iter().filter(|s| s.network == kind).cloned().collect();
        if !snaps.is_empty() {
            let path = dir.join(format!("snapshots_{}.csv", kind.name()));
            write_snapshot_csv(BufWriter::new(File::create(path)?), &snaps)?;
        }
    }
    if svg {
        let steps: Vec<u64> = log.evals.iter().map(|e| e.step).collect();
        let returns: Vec<f64> = log.evals.iter().map(|e| e.mean_return).collect();
        let curve = learning_curve_svg(&steps, &[("return".to_string(), returns, None)]);
        fs::write(dir.join("learning_curve.svg"), curve)?;
        if !timelines.is_empty() {
            fs::write(dir.join("connectivity.svg"), timeline_svg(&timelines))?;
        }
    }
    Ok(())
}

/// Train one seed with all on-disk side effects: manifest records, the
/// config copy, periodic checkpoints and final artifacts. With `resume`, an
/// existing checkpoint of the same config and seed is continued.
pub fn execute_run(config: &ExperimentConfig, name: &str, seed: u64, resume: bool) -> Result<RunSummary> {
    config.validate()?;
    let dir = run_dir(config, name, seed);
    let manifest = config.run.output_dir.join(MANIFEST_FILE);
    let checkpoint = dir.join(CHECKPOINT_FILE);
    let hash = config.hash();

    let mut trainer = if resume && checkpoint.exists() {
        let t = Trainer::load_checkpoint(&checkpoint)?;
        if t.config().hash() != hash || t.seed() != seed {
            return Err(Error::config(format!(
                "checkpoint {} belongs to a different config or seed",
                checkpoint.display()
            )));
        }
        t
    } else {
        Trainer::new(config, seed)?
    };
    let d_ene = trainer.state_dim();
    let actor_params = trainer.agent().actor_weight_count();
    let record = |status, step, final_score, wall, error| ManifestRecord {
        status,
        name: name.to_string(),
        label: config.label(),
        config_hash: hash.clone(),
        seed,
        d_ene,
        actor_params,
        step,
        final_score,
        wall_clock_seconds: wall,
        run_dir: dir.display().to_string(),
        error,
    };

    fs::create_dir_all(&dir)?;
    append_manifest(&manifest, &record(RunStatus::Started, trainer.step(), None, None, None))?;
    fs::write(dir.join(CONFIG_FILE), config.to_toml_string())?;

    let outcome = drive(&mut trainer, &checkpoint).and_then(|()| trainer.log().final_score());
    let log = trainer.log();
    match outcome {
        Ok(score) => {
            write_run_artifacts(&dir, log, config.run.svg)?;
            append_manifest(
                &manifest,
                &record(
                    RunStatus::Completed,
                    trainer.step(),
                    Some(score),
                    Some(log.wall_clock_seconds),
                    None,
                ),
            )?;
            Ok(RunSummary {
                name: name.to_string(),
                seed,
                final_score: score,
                actor_params,
                d_ene,
                wall_clock_seconds: log.wall_clock_seconds,
                run_dir: dir,
            })
        }
        Err(e) => {
            // Partial metrics help diagnose the abort; the error itself wins
            // over any secondary write failure.
            let _ = write_run_artifacts(&dir, log, false);
            let _ = append_manifest(
                &manifest,
                &record(
                    RunStatus::Aborted,
                    trainer.step(),
                    None,
                    Some(log.wall_clock_seconds),
                    Some(e.to_string()),
                ),
            );
            Err(e)
        }
    }
}

fn drive(trainer: &mut Trainer, checkpoint: &Path) -> Result<()> {
    let total = trainer.config().run.total_steps;
    let every = trainer.config().run.checkpoint_interval;
    while !trainer.is_finished() {
        let next = if every == 0 { total } else { (trainer.step() / every + 1) * every };
        trainer.run_until(next)?;
        if every > 0 {
            trainer.save_checkpoint(checkpoint)?;
        }
    }
    Ok(())
}
