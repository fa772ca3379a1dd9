use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anf_core::agents::NetworkKind;
use anf_core::analytics::{
    learning_curve_svg, read_snapshot_csv, read_timeline_csv, snapshot_svg, timeline_svg,
};
use anf_core::envs::{ene_dim, ToyEnv, VectorEnv, BUILTIN_ENVS, MUJOCO_DIMS, NOISE_FRACTIONS};
use anf_core::harness::{
    aggregate_curves, config_reference, conjecture_oracle, execute_run, final_score_of, mean_ci,
    read_metrics_csv, run_suite, ConjectureConfig, ExperimentConfig, MeanCi, RunSummary,
    CONFIG_FILE, CONNECTIVITY_FILE, METRICS_FILE, SUITE_NAMES,
};
use anf_core::Error;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "anf", version, about = "Sparse-input actor-critic experiments in noisy environments")]
#[command(after_long_help = long_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn long_help() -> String {
    format!(
        "Exit codes: 0 success, 2 usage or config error, 3 numerical abort, 4 IO or file format error.\n\n\
         Presets: {}\nSuites: {}\n\nConfig keys (with defaults):\n{}",
        anf_core::harness::presets::PRESET_NAMES.join(", "),
        SUITE_NAMES.join(", "),
        config_reference()
    )
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file (TOML) or preset name.
    #[arg(long, short, default_value = "toy_anf_td3")]
    config: String,
    /// `section.key=value`, applied after the file. Repeatable.
    #[arg(long = "override", short = 'o', value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Artifact root; replaces run.output_dir.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> anf_core::Result<(ExperimentConfig, String)> {
        let mut overrides = self.overrides.clone();
        if let Some(dir) = &self.output {
            let dir = dir.to_string_lossy().replace('\\', "\\\\").replace('"', "\\\"");
            overrides.push(format!("run.output_dir=\"{dir}\""));
        }
        ExperimentConfig::load(&self.config, &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train one or more seeds of a config and write run artifacts.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Seed to run; repeatable. Defaults to the first of run.seeds.
        #[arg(long)]
        seed: Vec<u64>,
        /// Continue from an existing checkpoint of the same config and seed.
        #[arg(long)]
        resume: bool,
        #[arg(long)]
        json: bool,
    },
    /// Run a named suite over seeds and print a comparison table.
    Suite {
        name: String,
        #[command(flatten)]
        config: ConfigArgs,
        /// Use seeds 0..N instead of run.seeds.
        #[arg(long)]
        seeds: Option<u64>,
        /// Worker threads (0 = one per CPU).
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long)]
        json: bool,
    },
    /// Summarize a run directory or a directory of seed_* runs.
    Analyze {
        path: PathBuf,
        /// Also write SVG charts next to the data.
        #[arg(long)]
        svg: bool,
        #[arg(long)]
        json: bool,
    },
    /// Print state and action dimensions with noise features added.
    EnvInfo {
        /// Built-in environment name.
        env: Option<String>,
        #[arg(long, default_value_t = 0.9)]
        noise_fraction: f64,
        /// Print the tabulated MuJoCo state dimensions for every noise fraction.
        #[arg(long)]
        table: bool,
        #[arg(long)]
        json: bool,
    },
    /// Fit w1 x1 + w2 x2 to a x1 and check that the noise weight w2 vanishes.
    Conjecture {
        /// Mean of the noise input x2.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        mu: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        target_a: f64,
        #[arg(long, default_value_t = 0.01)]
        lr: f64,
        #[arg(long, default_value_t = 5000)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the (step, w1, w2) trajectory here.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Usage(_) | Error::Dimension { .. } => 2,
        Error::Numerical(_) => 3,
        Error::Io(_) | Error::Format(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable output"));
}

fn run(command: Command) -> anf_core::Result<u8> {
    match command {
        Command::Train {
            config,
            seed,
            resume,
            json,
        } => train(&config, seed, resume, json),
        Command::Suite {
            name,
            config,
            seeds,
            threads,
            json,
        } => suite(&name, &config, seeds, threads, json),
        Command::Analyze { path, svg, json } => analyze(&path, svg, json),
        Command::EnvInfo {
            env,
            noise_fraction,
            table,
            json,
        } => env_info(env.as_deref(), noise_fraction, table, json),
        Command::Conjecture {
            mu,
            target_a,
            lr,
            steps,
            seed,
            trajectory,
            json,
        } => conjecture(
            &ConjectureConfig {
                target_a,
                noise_mean: mu,
                lr,
                steps,
                seed,
                ..Default::default()
            },
            trajectory.as_deref(),
            json,
        ),
    }
}

fn train(args: &ConfigArgs, seeds: Vec<u64>, resume: bool, json: bool) -> anf_core::Result<u8> {
    let (config, name) = args.load()?;
    config.validate()?;
    let seeds = if seeds.is_empty() { vec![config.run.seeds[0]] } else { seeds };
    let mut done: Vec<RunSummary> = Vec::new();
    for seed in seeds {
        let s = execute_run(&config, &name, seed, resume)?;
        if !json {
            println!(
                "{} seed {}: final score {:.3}, d_ene {}, actor params {}, {:.1}s -> {}",
                name,
                s.seed,
                s.final_score,
                s.d_ene,
                s.actor_params,
                s.wall_clock_seconds,
                s.run_dir.display()
            );
        }
        done.push(s);
    }
    if json {
        print_json(&done);
    }
    Ok(0)
}

fn suite(name: &str, args: &ConfigArgs, seeds: Option<u64>, threads: usize, json: bool) -> anf_core::Result<u8> {
    let (mut config, _) = args.load()?;
    if let Some(n) = seeds {
        if n == 0 {
            return Err(Error::usage("--seeds must be at least 1"));
        }
        config.run.seeds = (0..n).collect();
    }
    // Reject unknown suites before any run starts.
    anf_core::harness::suite_entries(name, &config)?;
    let report = run_suite(name, &config, threads)?;
    if json {
        print_json(&report);
    } else {
        print!("{}", report.to_text());
    }
    Ok(if report.rows.is_empty() && !report.failures.is_empty() { 3 } else { 0 })
}

#[derive(Serialize)]
struct RunAnalysis {
    dir: PathBuf,
    evals: usize,
    final_score: Option<f64>,
    /// Final relevant/noise connection ratio per network.
    connectivity_ratios: Vec<(String, Option<f64>)>,
}

#[derive(Serialize)]
struct AnalyzeReport {
    runs: Vec<RunAnalysis>,
    final_score: Option<MeanCi>,
}

fn run_dirs(path: &Path) -> anf_core::Result<Vec<PathBuf>> {
    if path.join(METRICS_FILE).exists() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(METRICS_FILE).exists())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::usage(format!(
            "{} holds no {METRICS_FILE}, directly or in a subdirectory",
            path.display()
        )));
    }
    Ok(dirs)
}

fn analyze(path: &Path, svg: bool, json: bool) -> anf_core::Result<u8> {
    let mut runs = Vec::new();
    let mut curves = Vec::new();
    for dir in run_dirs(path)? {
        let evals = read_metrics_csv(BufReader::new(File::open(dir.join(METRICS_FILE))?))?;
        let points: Vec<(u64, f64)> = evals.iter().map(|e| (e.step, e.mean_return)).collect();
        let total = match fs::read_to_string(dir.join(CONFIG_FILE)) {
            Ok(text) => ExperimentConfig::from_toml_str(&text)?.run.total_steps,
            Err(_) => points.last().map_or(0, |p| p.0),
        };
        let final_score = final_score_of(&points, total).ok();
        let timelines = match File::open(dir.join(CONNECTIVITY_FILE)) {
            Ok(f) => read_timeline_csv(BufReader::new(f))?,
            Err(_) => Vec::new(),
        };
        if svg {
            let steps: Vec<u64> = points.iter().map(|p| p.0).collect();
            let returns: Vec<f64> = points.iter().map(|p| p.1).collect();
            fs::write(
                dir.join("learning_curve.svg"),
                learning_curve_svg(&steps, &[("return".to_string(), returns, None)]),
            )?;
            if !timelines.is_empty() {
                fs::write(dir.join("connectivity.svg"), timeline_svg(&timelines))?;
            }
            for kind in NetworkKind::ALL {
                let file = dir.join(format!("snapshots_{}.csv", kind.name()));
                if let Ok(f) = File::open(&file) {
                    for s in read_snapshot_csv(BufReader::new(f), kind)? {
                        let out = dir.join(format!("snapshot_{}_{}.svg", kind.name(), s.step));
                        fs::write(out, snapshot_svg(&s))?;
                    }
                }
            }
        }
        runs.push(RunAnalysis {
            dir: dir.clone(),
            evals: evals.len(),
            final_score,
            connectivity_ratios: timelines
                .iter()
                .map(|t| (t.network.name().to_string(), t.final_ratio()))
                .collect(),
        });
        curves.push(points);
    }
    let scores: Vec<f64> = runs.iter().filter_map(|r| r.final_score).collect();
    let summary = (!scores.is_empty()).then(|| mean_ci(&scores));
    if svg && curves.len() > 1 {
        if let Ok(agg) = aggregate_curves(&curves) {
            fs::write(
                path.join("learning_curve.svg"),
                learning_curve_svg(&agg.steps, &[("mean return".to_string(), agg.mean, Some(agg.half_width))]),
            )?;
        }
    }
    let report = AnalyzeReport {
        runs,
        final_score: summary,
    };
    if json {
        print_json(&report);
    } else {
        for r in &report.runs {
            let score = r.final_score.map_or("n/a".to_string(), |s| format!("{s:.3}"));
            let ratios: Vec<String> = r
                .connectivity_ratios
                .iter()
                .map(|(n, v)| format!("{n} {}", v.map_or("n/a".to_string(), |v| format!("{v:.2}"))))
                .collect();
            println!(
                "{}: {} evals, final score {}{}",
                r.dir.display(),
                r.evals,
                score,
                if ratios.is_empty() { String::new() } else { format!(", relevant/noise {}", ratios.join(", ")) }
            );
        }
        if let Some(s) = report.final_score {
            println!("final score over {} runs: {:.3} ± {:.3} (95% CI)", s.n, s.mean, s.half_width);
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct EnvDims {
    env: String,
    noise_fraction: f64,
    d_og: usize,
    action_dim: usize,
    d_ene: usize,
}

fn env_info(env: Option<&str>, noise_fraction: f64, table: bool, json: bool) -> anf_core::Result<u8> {
    let mut rows = Vec::new();
    if table {
        for &(name, d_og, action_dim) in MUJOCO_DIMS {
            for &nf in NOISE_FRACTIONS {
                rows.push(EnvDims {
                    env: name.to_string(),
                    noise_fraction: nf,
                    d_og,
                    action_dim,
                    d_ene: ene_dim(d_og, nf)?,
                });
            }
        }
    }
    let names: Vec<&str> = match env {
        Some(name) => vec![name],
        None if table => Vec::new(),
        None => BUILTIN_ENVS.to_vec(),
    };
    for name in names {
        let e = ToyEnv::by_name(name)?;
        rows.push(EnvDims {
            env: name.to_string(),
            noise_fraction,
            d_og: e.state_dim(),
            action_dim: e.action_dim(),
            d_ene: ene_dim(e.state_dim(), noise_fraction)?,
        });
    }
    if json {
        print_json(&rows);
    } else {
        println!("{:<18} {:>6} {:>6} {:>8} {:>8}", "env", "n_f", "d_og", "actions", "d_ene");
        for r in &rows {
            println!(
                "{:<18} {:>6} {:>6} {:>8} {:>8}",
                r.env, r.noise_fraction, r.d_og, r.action_dim, r.d_ene
            );
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct ConjectureOutcome {
    mu: f64,
    target_a: f64,
    w1: f64,
    w2: f64,
    passed: bool,
}

fn conjecture(cfg: &ConjectureConfig, trajectory: Option<&Path>, json: bool) -> anf_core::Result<u8> {
    let r = conjecture_oracle(cfg)?;
    if let Some(path) = trajectory {
        r.write_csv(File::create(path)?)?;
    }
    let passed = r.noise_weight_vanished();
    if json {
        print_json(&ConjectureOutcome {
            mu: cfg.noise_mean,
            target_a: cfg.target_a,
            w1: r.w1,
            w2: r.w2,
            passed,
        });
    } else {
        println!(
            "mu {} a {}: w1 = {:.6}, w2 = {:.3e} -> {}",
            cfg.noise_mean,
            cfg.target_a,
            r.w1,
            r.w2,
            if passed { "pass" } else { "fail" }
        );
    }
    if passed {
        Ok(0)
    } else {
        Err(Error::numerical(format!(
            "noise weight did not vanish: |w2| = {:.3e}",
            r.w2.abs()
        )))
    }
}
