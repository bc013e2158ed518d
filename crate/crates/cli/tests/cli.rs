use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_causal-cdr");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_config(dir: &Path) {
    let config = r#"{
        "source_events": "data/source.jsonl",
        "target_events": "data/target.jsonl",
        "output_dir": "out",
        "seeds": [1],
        "k": 8,
        "epochs_phase1": 1,
        "epochs_phase2": 1,
        "escalation": {"max_escalations": 0}
    }"#;
    fs::write(dir.join("run.json"), config).unwrap();
}

#[test]
fn bad_flags_exit_with_usage() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["train"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(run(dir.path(), &["frobnicate"]).status.code(), Some(2));
    write_config(dir.path());
    let out = run(dir.path(), &["ablate", "-c", "run.json", "--variant", "w/o everything"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["train", "-c", "missing.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.json"));

    write_config(dir.path());
    // no event files yet
    assert_eq!(run(dir.path(), &["prepare-data", "-c", "run.json"]).status.code(), Some(1));
    fs::write(dir.path().join("typo.json"), r#"{"epochs": 3}"#).unwrap();
    assert_eq!(run(dir.path(), &["train", "-c", "typo.json"]).status.code(), Some(1));
}

#[test]
fn end_to_end_with_mock_model() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_config(d);
    ok(d, &["prepare-data", "-c", "run.json", "--synthetic", "3"]);
    assert!(d.join("data/target.jsonl").exists());
    assert!(d.join("out/data/split_seed1.json").exists());
    assert!(d.join("out/data/candidates_seed1.json").exists());

    ok(d, &["discover-confounders", "-c", "run.json", "--mock-llm"]);
    for f in ["pool_target.json", "replay_target.jsonl", "subspace_target.json"] {
        assert!(d.join("out/confounders").join(f).exists(), "{f}");
    }
    let pool: serde_json::Value = serde_json::from_slice(&fs::read(d.join("out/confounders/pool_target.json")).unwrap()).unwrap();
    assert!(!pool.as_array().unwrap().is_empty());

    ok(d, &["train", "-c", "run.json", "--mock-llm"]);
    let ckpt = d.join("out/checkpoints/ratio_1/seed_1");
    for f in ["phase1.json", "phase1.bin", "final.json", "final.bin", "candidates.json", "split.json"] {
        assert!(ckpt.join(f).exists(), "{f}");
    }
    let metrics = fs::read_to_string(d.join("out/metrics.csv")).unwrap();
    let echoed: serde_json::Value = serde_json::from_slice(&fs::read(d.join("out/config.json")).unwrap()).unwrap();
    assert_eq!(echoed["k"], 8);
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(d.join("out/manifest_train.json")).unwrap()).unwrap();
    let hash = manifest["config_hash"].as_str().unwrap();
    assert_eq!(metrics.lines().next().unwrap(), format!("# config_hash={hash}"));
    assert_eq!(metrics.lines().nth(1).unwrap(), "setting,ratio,seed,hr10,ndcg10");
    let checkpoint: serde_json::Value = serde_json::from_slice(&fs::read(ckpt.join("final.json")).unwrap()).unwrap();
    assert_eq!(checkpoint["config_hash"].as_str().unwrap(), &hash[..16]);

    let ck = ckpt.join("final.json");
    let ck = ck.to_str().unwrap();
    ok(d, &["evaluate", "-c", "run.json", "--checkpoint", ck, "--output", "a.csv"]);
    ok(d, &["evaluate", "-c", "run.json", "--checkpoint", ck, "--output", "b.csv"]);
    assert_eq!(fs::read(d.join("a.csv")).unwrap(), fs::read(d.join("b.csv")).unwrap());

    let out = ok(d, &["replay-llm", "-c", "run.json"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("pools match"));
}

#[test]
fn ablate_writes_one_report_per_variant() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_config(d);
    ok(d, &["prepare-data", "-c", "run.json", "--synthetic", "5"]);
    ok(
        d,
        &["ablate", "-c", "run.json", "--mock-llm", "--variant", "w/o confounder", "--variant", "wo-dual-level"],
    );
    assert!(d.join("out/ablation_wo-confounder.csv").exists());
    assert!(d.join("out/ablation_wo-dual-level.csv").exists());
}
