use std::fs;
use std::path::Path;
use std::process::Command;

use afmc_cli::run::{config_hash, output_paths};
use afmc_cli::{preset, run_experiment, ExperimentConfig};
use sha2::{Digest, Sha256};

fn afmc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_afmc"))
}

const SMALL: &str = r#"
seed = 5
[process]
kind = "walk"
n = 64
law = "rademacher"
[functional]
kind = "censored_point"
[estimate]
paths = 400
[compare]
reference = "half_normal"
metric = "ks"
tolerance = 0.2
"#;

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn run_writes_outputs_matching_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig::from_str(SMALL).unwrap();
    let out = dir.path().join("out");
    let outcome = run_experiment(&config, &out).unwrap();
    assert!(outcome.pass);
    for p in output_paths(&out) {
        assert!(p.exists(), "{p:?}");
    }
    for (name, digest) in &outcome.manifest.outputs {
        let bytes = fs::read(out.join(name)).unwrap();
        assert_eq!(&hex::encode(Sha256::digest(&bytes)), digest);
    }
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"], config_hash(&config));
    assert_eq!(manifest["seed"], 5);
    let samples = fs::read_to_string(out.join("samples.csv")).unwrap();
    assert!(samples.starts_with("path_index,value\n"));
    assert_eq!(samples.lines().count(), 401);
    let table = fs::read_to_string(out.join("characteristics.csv")).unwrap();
    assert!(table.starts_with("s,t,x_1,value,se,provenance,n,M\n"));
}

#[test]
fn digests_do_not_depend_on_workers_or_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ExperimentConfig::from_str(SMALL).unwrap();
    config.estimate.x = vec![afmc_cli::config::Point::Scalar(0.0), afmc_cli::config::Point::Scalar(0.25)];
    let mut digests = Vec::new();
    for (i, workers) in [1, 3, 1].into_iter().enumerate() {
        config.workers = workers;
        let out = dir.path().join(format!("w{i}"));
        digests.push(run_experiment(&config, &out).unwrap().manifest.outputs);
    }
    assert_eq!(digests[0], digests[1]);
    assert_eq!(digests[0], digests[2]);
    config.seed += 1;
    let other = run_experiment(&config, &dir.path().join("other")).unwrap().manifest.outputs;
    assert_ne!(other[2], digests[0][2]);
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");

    let ok = afmc().args(["run", "--config"]).arg(write_config(dir.path(), SMALL)).arg("--out").arg(&out).output().unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(String::from_utf8_lossy(&ok.stdout).starts_with("PASS"));

    let bad_t = SMALL.replace("paths = 400", "paths = 400\ns = 0.5\nt = 0.25");
    let r = afmc().args(["run", "--config"]).arg(write_config(dir.path(), &bad_t)).arg("--out").arg(&out).output().unwrap();
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("estimate.t"));

    let zero_tol = SMALL.replace("tolerance = 0.2", "tolerance = 0");
    let r = afmc().args(["run", "--config"]).arg(write_config(dir.path(), &zero_tol)).arg("--out").arg(&out).output().unwrap();
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("compare.tolerance"));

    let strict = SMALL.replace("tolerance = 0.2", "tolerance = 1e-6");
    let r = afmc().args(["run", "--config"]).arg(write_config(dir.path(), &strict)).arg("--out").arg(&out).output().unwrap();
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stdout).starts_with("FAIL"));

    // a = 1/x divides by zero at the start point: numeric failure
    let singular = r#"
[process]
kind = "sde_chain"
n = 16
law = "gaussian"
a = "1/x"
[functional]
kind = "doob_zero"
[estimate]
paths = 4
"#;
    let r = afmc().args(["run", "--config"]).arg(write_config(dir.path(), singular)).arg("--out").arg(&out).output().unwrap();
    assert_eq!(r.status.code(), Some(3), "{}", String::from_utf8_lossy(&r.stderr));

    let r = afmc().args(["preset", "nope", "--out"]).arg(&out).output().unwrap();
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("coupling_l2"));

    let r = afmc().args(["run", "--config"]).arg(dir.path().join("missing.toml")).arg("--out").arg(&out).output().unwrap();
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn list_presets_names_every_preset() {
    let r = afmc().arg("list-presets").output().unwrap();
    assert!(r.status.success());
    let text = String::from_utf8_lossy(&r.stdout);
    for name in afmc_cli::preset_names() {
        assert!(text.contains(name));
    }
}

#[test]
fn seed_and_workers_flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let run = |seed: &str, workers: &str, out: &str| {
        let r = afmc()
            .args(["run", "--config"])
            .arg(&config)
            .args(["--seed", seed, "--workers", workers, "--out"])
            .arg(dir.path().join(out))
            .output()
            .unwrap();
        assert!(r.status.success());
        fs::read_to_string(dir.path().join(out).join("samples.csv")).unwrap()
    };
    let a = run("9", "1", "a");
    let b = run("9", "2", "b");
    let c = run("10", "2", "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 9);
}

#[test]
fn json_configs_run_like_toml() {
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig::from_str(SMALL).unwrap();
    let json_path = dir.path().join("config.json");
    fs::write(&json_path, config.canonical_json()).unwrap();
    let toml_run = run_experiment(&config, &dir.path().join("t")).unwrap();
    let json_run = run_experiment(&ExperimentConfig::from_file(&json_path).unwrap(), &dir.path().join("j")).unwrap();
    assert_eq!(toml_run.manifest.outputs, json_run.manifest.outputs);
}

#[test]
fn scaled_down_presets_run_end_to_end() {
    // every preset, shrunk to a few paths, runs through the whole pipeline
    let dir = tempfile::tempdir().unwrap();
    for name in afmc_cli::preset_names() {
        let mut c = preset(name).unwrap();
        c.estimate.paths = c.estimate.paths.min(50);
        if let Some(ns) = &mut c.estimate.n_values {
            *ns = vec![16, 64];
            c.process.n = 64;
            c.compare.as_mut().unwrap().n_fine = Some(256);
        } else if c.compare.as_ref().is_some_and(|cmp| cmp.reference != afmc_cli::config::ReferenceName::Llt) {
            c.process.n = 64;
        }
        let out = dir.path().join(name);
        let outcome = run_experiment(&c, &out).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(outcome.results["name"], name);
        assert!(out.join("results.json").exists());
    }
}
