use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::analytics::{ConnectivityRecorder, NeuronSnapshot};
use crate::error::{Error, Result};

/// Evaluation result plus training diagnostics accumulated since the
/// previous evaluation point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub step: u64,
    pub mean_return: f64,
    pub std_return: f64,
    pub critic_loss: Option<f64>,
    pub actor_loss: Option<f64>,
    pub mean_q: Option<f64>,
    pub gradient_steps: u64,
    pub actor_sparsity: f64,
    pub critic_sparsity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsLog {
    pub total_steps: u64,
    pub evals: Vec<EvalRecord>,
    pub connectivity: ConnectivityRecorder,
    pub snapshots: Vec<NeuronSnapshot>,
    pub topology_updates: u64,
    /// Excluded from every emitted file so that outputs stay reproducible.
    pub wall_clock_seconds: f64,
}

impl MetricsLog {
    pub fn new(total_steps: u64) -> Self {
        Self {
            total_steps,
            evals: Vec::new(),
            connectivity: ConnectivityRecorder::default(),
            snapshots: Vec::new(),
            topology_updates: 0,
            wall_clock_seconds: 0.0,
        }
    }

    pub fn eval_points(&self) -> Vec<(u64, f64)> {
        self.evals.iter().map(|e| (e.step, e.mean_return)).collect()
    }

    pub fn final_score(&self) -> Result<f64> {
        final_score_of(&self.eval_points(), self.total_steps)
    }
}

pub const MIN_EVAL_POINTS: usize = 10;

/// Mean return over evaluation points strictly after `0.9 * total_steps`.
pub fn final_score_of(points: &[(u64, f64)], total_steps: u64) -> Result<f64> {
    if points.len() < MIN_EVAL_POINTS {
        return Err(Error::usage(format!(
            "final score needs at least {MIN_EVAL_POINTS} evaluation points, got {}",
            points.len()
        )));
    }
    let cut = 0.9 * total_steps as f64;
    let window: Vec<f64> = points
        .iter()
        .filter(|(s, _)| *s as f64 > cut)
        .map(|p| p.1)
        .collect();
    if window.is_empty() {
        return Err(Error::usage("no evaluation point falls in the last 10% of training"));
    }
    Ok(window.iter().sum::<f64>() / window.len() as f64)
}

/// Sample mean and normal-approximation 95% half-width `1.96 s / sqrt(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub half_width: f64,
    pub n: usize,
}

impl MeanCi {
    pub fn lower(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }
}

pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

pub fn mean_ci(values: &[f64]) -> MeanCi {
    let n = values.len();
    let mean = if n == 0 { f64::NAN } else { values.iter().sum::<f64>() / n as f64 };
    let half_width = if n < 2 { 0.0 } else { 1.96 * sample_std(values) / (n as f64).sqrt() };
    MeanCi { mean, half_width, n }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCurve {
    pub steps: Vec<u64>,
    pub mean: Vec<f64>,
    pub half_width: Vec<f64>,
}

/// Pointwise mean and 95% band over seeds.
pub fn aggregate_seeds(logs: &[MetricsLog]) -> Result<AggregateCurve> {
    let curves: Vec<Vec<(u64, f64)>> = logs.iter().map(MetricsLog::eval_points).collect();
    aggregate_curves(&curves)
}

pub fn aggregate_curves(curves: &[Vec<(u64, f64)>]) -> Result<AggregateCurve> {
    if curves.len() < 2 {
        return Err(Error::usage(format!(
            "aggregation needs at least 2 runs, got {}",
            curves.len()
        )));
    }
    let steps: Vec<u64> = curves[0].iter().map(|p| p.0).collect();
    for (i, c) in curves.iter().enumerate().skip(1) {
        if c.len() != steps.len() || c.iter().zip(&steps).any(|(p, s)| p.0 != *s) {
            return Err(Error::usage(format!(
                "run {i} has a different evaluation grid from run 0"
            )));
        }
    }
    let mut mean = Vec::with_capacity(steps.len());
    let mut half_width = Vec::with_capacity(steps.len());
    for j in 0..steps.len() {
        let vals: Vec<f64> = curves.iter().map(|c| c[j].1).collect();
        let ci = mean_ci(&vals);
        mean.push(ci.mean);
        half_width.push(ci.half_width);
    }
    Ok(AggregateCurve {
        steps,
        mean,
        half_width,
    })
}

pub const METRICS_HEADER: [&str; 9] = [
    "step",
    "eval_return",
    "eval_return_std",
    "critic_loss",
    "actor_loss",
    "mean_q",
    "gradient_steps",
    "actor_sparsity",
    "critic_sparsity",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per evaluation point.
pub fn write_metrics_csv<W: Write>(out: W, evals: &[EvalRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::format(e.to_string());
    w.write_record(METRICS_HEADER).map_err(wrap)?;
    for e in evals {
        w.write_record([
            e.step.to_string(),
            e.mean_return.to_string(),
            e.std_return.to_string(),
            opt(e.critic_loss),
            opt(e.actor_loss),
            opt(e.mean_q),
            e.gradient_steps.to_string(),
            e.actor_sparsity.to_string(),
            e.critic_sparsity.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv<R: Read>(input: R) -> Result<Vec<EvalRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let wrap = |e: csv::Error| Error::format(e.to_string());
    let header = r.headers().map_err(wrap)?.clone();
    if header.iter().ne(METRICS_HEADER) {
        return Err(Error::format(format!("unexpected metrics header {header:?}")));
    }
    let num = |s: &str| -> Result<f64> {
        s.parse().map_err(|_| Error::format(format!("bad number {s:?}")))
    };
    let opt_num = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            num(s).map(Some)
        }
    };
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(wrap)?;
        out.push(EvalRecord {
            step: rec[0].parse().map_err(|_| Error::format("bad step"))?,
            mean_return: num(&rec[1])?,
            std_return: num(&rec[2])?,
            critic_loss: opt_num(&rec[3])?,
            actor_loss: opt_num(&rec[4])?,
            mean_q: opt_num(&rec[5])?,
            gradient_steps: rec[6].parse().map_err(|_| Error::format("bad gradient_steps"))?,
            actor_sparsity: num(&rec[7])?,
            critic_sparsity: num(&rec[8])?,
        });
    }
    Ok(out)
}
