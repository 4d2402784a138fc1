use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const WALKER: &str = r#"
kind = "walker"
seed = 7

[model]
n = 10
speed = { mean = 0.0, variance = 1.0 }

[run]
horizon = 1.0
grid_step = 0.1
n_paths = 100

[output]
prefix = "walker"
"#;

fn stochavg(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_stochavg"));
    cmd.args(args).env_remove("STOCHAVG_WORKERS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn simulate(config: &Path, out: &Path, envs: &[(&str, &str)]) -> Output {
    stochavg(
        &[
            "simulate",
            config.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
        ],
        envs,
    )
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn walker_csv_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "walker.toml", WALKER);
    let mut outputs = Vec::new();
    for (i, workers) in ["1", "1", "4"].iter().enumerate() {
        let out = tmp.path().join(format!("run{i}"));
        let o = simulate(&cfg, &out, &[("STOCHAVG_WORKERS", workers)]);
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push(std::fs::read(out.join("walker_paths.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);

    let text = String::from_utf8(outputs.swap_remove(0)).unwrap();
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(data[0].starts_with("path_id,time,deme_0"));
    // 11 grid times on [0, 1] at step 0.1
    assert_eq!(data.len() - 1, 100 * 11);
    assert!(text.contains("seed"));
}

#[test]
fn unbalanced_kernel_exits_with_validation_code() {
    let tmp = TempDir::new().unwrap();
    let text = r#"
kind = "brwre"
seed = 1

[model]
n = 10
alpha = 0.5
sigma_e2 = 0.09
x0 = [1.0, 1.0, 1.0]
kernel = { rates = [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [2.0, 0.0, 0.0]], gamma = [1.0, 1.0, 1.0] }
environment = { family = "two-point" }

[run]
horizon = 1.0
grid_step = 0.5
n_paths = 4
"#;
    let cfg = write_config(tmp.path(), "bad.toml", text);
    let o = simulate(&cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("model.kernel"), "{msg}");
    assert!(msg.contains("unbalanced"), "{msg}");
}

#[test]
fn unknown_key_is_named() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "typo.toml",
        &WALKER.replace("horizon", "horizn"),
    );
    let o = simulate(&cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("horizn"), "{}", stderr(&o));
}

#[test]
fn wrong_subcommand_for_kind() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "walker.toml", WALKER);
    let o = stochavg(&["oracle", cfg.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("kind"));
}

#[test]
fn compare_against_itself_passes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "walker.toml", WALKER);
    assert!(simulate(&cfg, tmp.path(), &[]).status.success());
    let csv = tmp.path().join("walker_paths.csv");
    let verdicts = tmp.path().join("cmp.json");
    let o = stochavg(
        &[
            "compare",
            csv.to_str().unwrap(),
            csv.to_str().unwrap(),
            "--out",
            verdicts.to_str().unwrap(),
        ],
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(verdicts).unwrap()).unwrap();
    assert_eq!(doc["passed"], doc["total"]);
    assert_eq!(doc["total"], 11 * 3);
}

fn single_deme(kind: &str, n: u32) -> String {
    format!(
        r#"
kind = "{kind}"
seed = 11

[model]
n = {n}
alpha = 0.5
sigma_e2 = 0.09
x0 = [1.0]
kernel = {{ preset = "single" }}
environment = {{ family = "two-point" }}

[run]
horizon = 1.0
grid = [0.0, 0.5, 1.0]
dt = 0.001
n_paths = 2000

[output]
prefix = "{kind}"
"#
    )
}

#[test]
fn small_scale_brwre_differs_from_the_diffusion() {
    let tmp = TempDir::new().unwrap();
    for kind in ["brwre", "sde"] {
        let cfg = write_config(tmp.path(), &format!("{kind}.toml"), &single_deme(kind, 5));
        let o = simulate(&cfg, tmp.path(), &[]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = tmp.path().join("brwre_paths.csv");
    let b = tmp.path().join("sde_paths.csv");
    let o = stochavg(
        &[
            "compare",
            a.to_str().unwrap(),
            b.to_str().unwrap(),
            "--tests",
            "ks",
        ],
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    // population sizes are multiples of 1/5 against a continuous law
    let failed = doc["total"].as_u64().unwrap() - doc["passed"].as_u64().unwrap();
    assert!(failed >= 1, "{doc}");
}

#[test]
fn grid_mismatch_is_an_input_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "walker.toml", WALKER);
    assert!(simulate(&cfg, tmp.path(), &[]).status.success());
    let other = write_config(
        tmp.path(),
        "coarse.toml",
        &WALKER.replace("grid_step = 0.1", "grid_step = 0.5"),
    );
    let coarse_dir = tmp.path().join("coarse");
    assert!(simulate(&other, &coarse_dir, &[]).status.success());
    let o = stochavg(
        &[
            "compare",
            tmp.path().join("walker_paths.csv").to_str().unwrap(),
            coarse_dir.join("walker_paths.csv").to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oracle_json_carries_provenance() {
    let tmp = TempDir::new().unwrap();
    let text = r#"
kind = "oracle"
seed = 3

[oracle]
rho = [0.5, 1.0]
t = [1.0]
var_y = 1.0
"#;
    let cfg = write_config(tmp.path(), "oracle.toml", text);
    let o = stochavg(
        &[
            "oracle",
            cfg.to_str().unwrap(),
            "--out-dir",
            tmp.path().to_str().unwrap(),
        ],
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let written = String::from_utf8(o.stdout).unwrap();
    let path = written.lines().next().unwrap();
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(doc["seed"], 3);
    assert_eq!(doc["experiment"], "oracle");
    assert_eq!(doc["config_sha256"].as_str().unwrap().len(), 64);
}
