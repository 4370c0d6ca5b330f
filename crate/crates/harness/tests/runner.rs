//! Runner contracts: deterministic outputs, file counts, digests, and CLI
//! exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use demem_core::env::{EnvConfig, RewardProfile};
use demem_harness::config::{AuditParams, BaselineParams, LearnerParams};
use demem_harness::experiments::run_experiment;
use demem_harness::methods::Method;
use demem_harness::{config_digest, ExperimentConfig, ExperimentKind};

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("demem-runner-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn small_config(kind: ExperimentKind) -> ExperimentConfig {
    ExperimentConfig {
        kind,
        env: EnvConfig {
            num_identities: 4,
            num_actions: 2,
            feature_dim: 2,
            num_contexts: 8,
            alpha: 0.5,
            noise_sigma: 0.1,
            horizon: 400,
            seed: 70,
            reward_profile: RewardProfile::Separated {
                top_min: 0.9,
                low_max: 0.2,
            },
        },
        k: 4,
        learner: LearnerParams {
            delta: 0.1,
            gamma: 1.2,
            restart_period: None,
        },
        baselines: BaselineParams::default(),
        methods: vec![Method::Demem, Method::FeatureKMeans],
        k_grid: vec![2, 4],
        alpha_grid: vec![0.0, 0.5],
        seeds: vec![0],
        change_round: None,
        audit: AuditParams {
            runs: 300,
            horizon: 60,
            deltas: [0.05, 0.1],
        },
    }
}

fn file_names(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

#[test]
fn regret_file_contract_and_determinism() {
    let config = small_config(ExperimentKind::Regret);
    let dir_a = tmp_dir("regret-a");
    let dir_b = tmp_dir("regret-b");
    run_experiment(&config, &dir_a, Some(2)).unwrap();
    run_experiment(&config, &dir_b, Some(1)).unwrap();

    // two methods, one seed: two per-round files, one demem epoch file,
    // one instance manifest, summary, manifest
    let names = file_names(&dir_a);
    assert_eq!(
        names,
        vec![
            "epochs_demem_seed0000.csv",
            "instance_seed0000.json",
            "manifest.json",
            "rounds_demem_seed0000.csv",
            "rounds_feature_kmeans_seed0000.csv",
            "summary.csv",
        ]
    );

    // byte-identical summaries regardless of thread count
    let summary_a = fs::read(dir_a.join("summary.csv")).unwrap();
    let summary_b = fs::read(dir_b.join("summary.csv")).unwrap();
    assert_eq!(summary_a, summary_b);
    for name in ["rounds_demem_seed0000.csv", "instance_seed0000.json"] {
        assert_eq!(
            fs::read(dir_a.join(name)).unwrap(),
            fs::read(dir_b.join(name)).unwrap()
        );
    }

    // every CSV carries the digest
    let digest = config_digest(&config);
    let summary = String::from_utf8(summary_a).unwrap();
    assert!(summary.starts_with(&format!("# manifest: {digest}")));
    let manifest = fs::read_to_string(dir_a.join("manifest.json")).unwrap();
    assert!(manifest.contains(&digest));

    let _ = fs::remove_dir_all(dir_a);
    let _ = fs::remove_dir_all(dir_b);
}

#[test]
fn budget_sweep_row_contract() {
    let config = small_config(ExperimentKind::BudgetSweep);
    let dir = tmp_dir("sweep");
    run_experiment(&config, &dir, Some(2)).unwrap();
    let summary = fs::read_to_string(dir.join("summary.csv")).unwrap();
    // one row per (method, K): 2 methods x 2 budgets, plus digest + header
    assert_eq!(summary.lines().count(), 2 + 4);
    let _ = fs::remove_dir_all(dir);
}

#[test]
fn oracle_validation_capacity_error() {
    let mut config = small_config(ExperimentKind::OracleValidation);
    config.env.num_contexts = 12;
    let dir = tmp_dir("cap");
    let err = run_experiment(&config, &dir, None).unwrap_err();
    assert!(err.is_capacity());
    let _ = fs::remove_dir_all(dir);
}

fn write_config(config: &ExperimentConfig, tag: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("demem-cfg-{tag}-{}.json", std::process::id()));
    fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path
}

#[test]
fn cli_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_demem");

    // success
    let config = small_config(ExperimentKind::Regret);
    let config_path = write_config(&config, "ok");
    let out = tmp_dir("cli-ok");
    let status = Command::new(bin)
        .args([
            "regret",
            "--config",
            config_path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--threads",
            "2",
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    // validation error: malformed alpha
    let mut bad = small_config(ExperimentKind::Regret);
    bad.env.alpha = 2.0;
    let bad_path = write_config(&bad, "bad");
    let status = Command::new(bin)
        .args([
            "regret",
            "--config",
            bad_path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // capacity error: oracle validation beyond the enumeration cap
    let mut big = small_config(ExperimentKind::OracleValidation);
    big.env.num_contexts = 12;
    let big_path = write_config(&big, "big");
    let status = Command::new(bin)
        .args([
            "oracle-validation",
            "--config",
            big_path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));

    let _ = fs::remove_dir_all(out);
    let _ = fs::remove_file(config_path);
    let _ = fs::remove_file(bad_path);
    let _ = fs::remove_file(big_path);
}

#[test]
fn cli_oracle_ops() {
    let bin = env!("CARGO_BIN_EXE_demem");
    let table_path = std::env::temp_dir().join(format!("demem-table-{}.json", std::process::id()));
    fs::write(
        &table_path,
        r#"{"n":2,"a":2,"values":[[1.0,0.8],[0.7,1.0]]}"#,
    )
    .unwrap();
    let output = Command::new(bin)
        .args([
            "oracle",
            "eps-star-inf",
            "--table",
            table_path.to_str().unwrap(),
            "--k",
            "1",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8(output.stdout).unwrap();
    let report: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let value = report["eps_star_inf"].as_f64().unwrap();
    assert!(
        (value - 0.2).abs() < 1e-12,
        "unexpected frontier value {value}"
    );

    let output = Command::new(bin)
        .args([
            "oracle",
            "covering",
            "--table",
            table_path.to_str().unwrap(),
            "--eps",
            "0.1",
        ])
        .output()
        .unwrap();
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("\"covering_number\": 2"));
    let _ = fs::remove_file(table_path);
}
