use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures/synthetic")
        .canonicalize()
        .unwrap()
}

fn aspire(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aspire"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// Writes a config next to a fresh output directory; `extra` is appended.
fn setup(extra: &str) -> (TempDir, PathBuf, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("pipeline.toml");
    let text = format!(
        "seed = 99\nout_dir = \"out\"\n[inputs]\ndir = {:?}\n[vae]\nepochs = 200\n{extra}",
        fixture_dir()
    );
    std::fs::write(&cfg, text).unwrap();
    let out = tmp.path().join("out");
    (tmp, cfg, out)
}

fn manifest(out: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap()
}

fn statuses(m: &Value) -> Vec<(String, String)> {
    m["stages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| {
            (
                s["stage"].as_str().unwrap().to_string(),
                s["status"].as_str().unwrap().to_string(),
            )
        })
        .collect()
}

fn digests(m: &Value, skip_stage: Option<&str>) -> Vec<(String, String)> {
    m["stages"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|s| Some(s["stage"].as_str().unwrap()) != skip_stage)
        .flat_map(|s| s["outputs"].as_array().unwrap().iter())
        .map(|d| {
            (
                d["file"].as_str().unwrap().to_string(),
                d["sha256"].as_str().unwrap().to_string(),
            )
        })
        .collect()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn full_run_exits_zero_and_writes_every_output() {
    let (_tmp, cfg, out) = setup("");
    let o = aspire(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    let st = statuses(&m);
    assert_eq!(st.len(), 9);
    assert!(st.iter().all(|(_, s)| s == "ok"), "{st:?}");
    for (file, _) in digests(&m, None) {
        assert!(out.join(&file).is_file(), "{file} missing");
    }
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("manifest:"));
}

#[test]
fn missing_config_flag_exits_one() {
    let o = aspire(&["run"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--config"));
}

#[test]
fn unreadable_or_invalid_config_exits_one() {
    let o = aspire(&["run", "--config", "/nonexistent/pipeline.toml"]);
    assert_eq!(code(&o), 1);

    let (_tmp, cfg, out) = setup("[cluster]\nkk = 3\n");
    let o = aspire(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn missing_inputs_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "seed = 1\n[inputs]\ndir = \"empty\"\n").unwrap();
    std::fs::create_dir(tmp.path().join("empty")).unwrap();
    let o = aspire(&["ingest", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn argument_errors_exit_one_and_help_exits_zero() {
    assert_eq!(code(&aspire(&["frobnicate"])), 1);
    assert_eq!(
        code(&aspire(&[
            "run", "--domain", "history", "--config", "x.toml"
        ])),
        1
    );
    let help = aspire(&["--help"]);
    assert_eq!(code(&help), 0);
    assert!(String::from_utf8_lossy(&help.stdout).contains("counterfactual"));
}

#[test]
fn infeasible_cluster_fails_alone_and_leaves_other_outputs_intact() {
    let (_good_tmp, good_cfg, good_out) = setup("");
    assert_eq!(
        code(&aspire(&["run", "--config", good_cfg.to_str().unwrap()])),
        0
    );

    let (_tmp, cfg, out) = setup("[cluster]\nk = 500\n");
    let o = aspire(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let m = manifest(&out);
    for (stage, status) in statuses(&m) {
        if stage == "cluster" {
            assert_eq!(status, "failed");
        } else {
            assert_eq!(status, "ok", "{stage}");
        }
    }
    let cluster = m["stages"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["stage"] == "cluster")
        .unwrap();
    assert!(cluster["reason"].as_str().unwrap().contains("infeasible"));
    assert!(cluster["outputs"].as_array().unwrap().is_empty());
    assert!(!out.join("clusters.csv").exists());
    assert!(String::from_utf8_lossy(&o.stdout).contains("failed: infeasible"));
    // every other stage wrote exactly what the successful run wrote
    assert_eq!(
        digests(&m, Some("cluster")),
        digests(&manifest(&good_out), Some("cluster"))
    );
}

#[test]
fn rerun_reproduces_digests_and_clears_stale_outputs() {
    let (_tmp, cfg, out) = setup("");
    let c = cfg.to_str().unwrap();
    assert_eq!(code(&aspire(&["run", "--config", c])), 0);
    let first = digests(&manifest(&out), None);
    assert_eq!(code(&aspire(&["run", "--config", c])), 0);
    assert_eq!(first, digests(&manifest(&out), None));
    assert!(out.join("clusters.csv").exists());

    // same output directory, now with an infeasible k: the old file goes away
    let text = std::fs::read_to_string(&cfg).unwrap() + "[cluster]\nk = 500\n";
    std::fs::write(&cfg, text).unwrap();
    assert_eq!(code(&aspire(&["cluster", "--config", c])), 2);
    assert!(!out.join("clusters.csv").exists());
}

#[test]
fn overrides_are_applied_and_recorded() {
    let (_tmp, cfg, out) = setup("");
    let c = cfg.to_str().unwrap();
    assert_eq!(code(&aspire(&["vae", "--config", c])), 0);
    let base = manifest(&out);
    assert_eq!(base["seed"], 99);
    assert_eq!(base["domain"], "math");

    let alt = out.with_file_name("alt");
    let o = aspire(&[
        "vae",
        "--config",
        c,
        "--seed",
        "5",
        "--domain",
        "reading",
        "--out",
        alt.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let m = manifest(&alt);
    assert_eq!(m["seed"], 5);
    assert_eq!(m["domain"], "reading");
    let latent = |m: &Value| {
        digests(m, None)
            .into_iter()
            .find(|(f, _)| f == "latent.csv")
            .unwrap()
    };
    assert_ne!(latent(&base), latent(&m));
}

#[test]
fn single_stage_runs_only_its_dependencies() {
    let (_tmp, cfg, out) = setup("");
    assert_eq!(
        code(&aspire(&[
            "counterfactual",
            "--config",
            cfg.to_str().unwrap()
        ])),
        0
    );
    let stages: Vec<String> = statuses(&manifest(&out))
        .into_iter()
        .map(|(s, _)| s)
        .collect();
    assert_eq!(stages, ["ingest", "regress", "counterfactual"]);
    assert!(out.join("counterfactual.csv").exists());
    assert!(!out.join("clusters.csv").exists());
}
