use std::path::Path;
use std::process::{Command, Output};

const TINY: &[&str] = &[
    "-o", "agent.hidden_dims=[8, 8]",
    "-o", "agent.initial_collect=200",
    "-o", "agent.batch_size=16",
    "-o", "agent.buffer_capacity=2000",
    "-o", "run.total_steps=1000",
    "-o", "run.eval_interval=100",
    "-o", "run.eval_episodes=1",
    "-o", "sparsity.topology_period=100",
];

fn anf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anf")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn train(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--config", "toy_anf_td3", "--seed", "1", "--output", dir.to_str().unwrap()];
    args.extend_from_slice(TINY);
    args.extend_from_slice(extra);
    anf(&args)
}

#[test]
fn help_lists_subcommands_and_config_keys() {
    let o = anf(&["--help"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    for s in ["train", "suite", "analyze", "env-info", "conjecture", "agent.lr = 0.001", "agent.weight_decay = 0.0002", "sparsity.topology_period = 1000"] {
        assert!(text.contains(s), "missing {s}");
    }
}

#[test]
fn training_twice_gives_identical_metrics() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(code(&train(a.path(), &[])), 0);
    assert_eq!(code(&train(b.path(), &[])), 0);
    for f in ["metrics.csv", "connectivity.csv", "snapshots_critic1.csv"] {
        let fa = std::fs::read(a.path().join("toy_anf_td3/seed_1").join(f)).unwrap();
        let fb = std::fs::read(b.path().join("toy_anf_td3/seed_1").join(f)).unwrap();
        assert_eq!(fa, fb, "{f}");
    }
}

#[test]
fn manifest_records_noise_dimension() {
    let d = tempfile::tempdir().unwrap();
    let o = train(d.path(), &["-o", "ene.noise_fraction=0.95", "--json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = std::fs::read_to_string(d.path().join("manifest.jsonl")).unwrap();
    let records: Vec<serde_json::Value> = manifest.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 2);
    assert_eq!(records[0]["status"], "started");
    assert_eq!(records[1]["status"], "completed");
    assert_eq!(records[1]["d_ene"], 160);
    let out: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(out[0]["d_ene"], 160);
}

#[test]
fn config_errors_exit_2_without_artifacts() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("out");
    let o = anf(&["train", "--config", "/no/such/file.toml", "--output", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());

    let bad = d.path().join("bad.toml");
    std::fs::write(&bad, "[run]\ntotal_steps = 100\n\n[agent]\nlr = \"fast\"\n").unwrap();
    let o = anf(&["train", "--config", bad.to_str().unwrap(), "--output", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 5"), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());

    let o = train(d.path(), &["-o", "agent.nonsense=1"]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&anf(&["train", "--bogus-flag"])), 2);
}

#[test]
fn numerical_abort_exits_3() {
    let d = tempfile::tempdir().unwrap();
    let o = train(d.path(), &["-o", "agent.lr=1e300"]);
    assert_eq!(code(&o), 3);
    let manifest = std::fs::read_to_string(d.path().join("manifest.jsonl")).unwrap();
    assert!(manifest.lines().last().unwrap().contains("\"aborted\""));
}

#[test]
fn unreadable_checkpoint_exits_4() {
    let d = tempfile::tempdir().unwrap();
    let run = d.path().join("toy_anf_td3/seed_1");
    std::fs::create_dir_all(&run).unwrap();
    std::fs::write(run.join("checkpoint.bin"), b"garbage").unwrap();
    assert_eq!(code(&train(d.path(), &["--resume"])), 4);
}

#[test]
fn env_info_dimensions() {
    let o = anf(&["env-info", "point_mass_reach", "--noise-fraction", "0.9", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v[0]["d_og"], 8);
    assert_eq!(v[0]["d_ene"], 80);
    let o = anf(&["env-info", "linear_tracker", "--noise-fraction", "0", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v[0]["d_ene"], v[0]["d_og"]);
    let o = anf(&["env-info", "--table", "--json"]);
    let v: Vec<serde_json::Value> = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v.len(), 20);
    assert!(v.iter().any(|r| r["env"] == "Humanoid-v3" && r["d_ene"] == 37600));
    assert!(v.iter().any(|r| r["env"] == "Hopper-v3" && r["d_ene"] == 55));
    assert_eq!(code(&anf(&["env-info", "cartpole"])), 2);
}

#[test]
fn conjecture_passes_and_divergence_fails_cleanly() {
    let d = tempfile::tempdir().unwrap();
    let csv = d.path().join("traj.csv");
    for mu in ["0", "4", "-2"] {
        let o = anf(&["conjecture", "--mu", mu, "--trajectory", csv.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "mu {mu}");
        assert!(String::from_utf8_lossy(&o.stdout).contains("pass"));
    }
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("step,w1,w2\n0,0,0.5\n"));
    let o = anf(&["conjecture", "--lr", "10"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("diverged"));
}

#[test]
fn suite_table_and_analysis() {
    let d = tempfile::tempdir().unwrap();
    let mut args = vec!["suite", "static-ablation", "--seeds", "2", "--threads", "2", "--json", "--output", d.path().to_str().unwrap()];
    args.extend_from_slice(TINY);
    let o = anf(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 6);
    assert_eq!(report["summary"].as_array().unwrap().len(), 3);

    let anf_dir = d.path().join("static-ablation/anf");
    let o = anf(&["analyze", anf_dir.to_str().unwrap(), "--svg", "--json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let a: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(a["runs"].as_array().unwrap().len(), 2);
    assert_eq!(a["final_score"]["n"], 2);
    assert!(anf_dir.join("learning_curve.svg").exists());
    assert!(anf_dir.join("seed_0/connectivity.svg").exists());
    assert!(anf_dir.join("seed_0/snapshot_actor_0.svg").exists());

    assert_eq!(code(&anf(&["analyze", d.path().join("missing").to_str().unwrap()])), 4);
}
