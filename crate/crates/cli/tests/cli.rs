use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use entryexit::{parse_model, ModelConfig};
use tempfile::TempDir;

const DESK: &str = include_str!("../../../fixtures/desk.toml");
const STUB: &str = include_str!("../../../fixtures/stub3.toml");

fn desk_fast() -> ModelConfig {
    let mut cfg = parse_model(DESK).unwrap();
    cfg.numerics.grid_nodes = 200;
    cfg.numerics.hist_bins = 200;
    cfg.numerics.quad_nodes = 32;
    cfg.numerics.lifetime_paths = 4000;
    cfg
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(dir: &TempDir, args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_entryexit"))
        .args(args)
        .arg(config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(dir: &TempDir, name: &str) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.path().join("out").join(name)).unwrap()).unwrap()
}

#[test]
fn validate_desk_passes() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "desk.toml", DESK);
    let o = run(&dir, &["validate"], &cfg);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = read_json(&dir, "assumptions.json");
    assert!(report.is_object());
    let m = read_json(&dir, "validate_manifest.json");
    assert_eq!(m["command"], "validate");
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn discount_above_survival_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let text = DESK.replace("beta = 0.95", "beta = 0.99");
    let cfg = write(&dir, "bad.toml", &text);
    for cmd in ["validate", "equilibrium"] {
        let o = run(&dir, &[cmd], &cfg);
        assert_eq!(o.status.code(), Some(2), "{cmd}: {}", stderr(&o));
    }
}

#[test]
fn missing_file_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let o = run(&dir, &["equilibrium"], &dir.path().join("nope.toml"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("file not found"), "{}", stderr(&o));
}

#[test]
fn equilibrium_on_the_desk() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "desk.toml", &desk_fast().to_toml());
    let o = run(&dir, &["equilibrium"], &cfg);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let eq = read_json(&dir, "equilibrium.json");
    assert!(eq["residuals"]["market"].as_f64().unwrap() < 1e-8);
    assert!(eq["residuals"]["entry"].as_f64().unwrap().abs() <= 5e-6);
    let csv = fs::read_to_string(dir.path().join("out/mu_star.csv")).unwrap();
    assert!(csv.lines().any(|l| l == "bin_left,bin_right,mass"));
}

#[test]
fn unsatisfiable_entry_is_a_compute_error() {
    let dir = TempDir::new().unwrap();
    let text = STUB.replace("probs = [0.5, 0.5, 0.0]", "probs = [1.0, 0.0, 0.0]");
    let cfg = write(&dir, "dead.toml", &text);
    let o = run(&dir, &["equilibrium"], &cfg);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn same_seed_gives_identical_files() {
    let cfg_text = STUB;
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let dir = TempDir::new().unwrap();
        let cfg = write(&dir, "stub.toml", cfg_text);
        for (cmd, extra) in [("equilibrium", vec![]), ("simulate", vec!["--paths", "20000"])] {
            let mut args = vec![cmd, "--seed", "7"];
            args.extend(extra);
            let o = run(&dir, &args, &cfg);
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        }
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir.path().join("out"))
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| !p.to_string_lossy().ends_with("_manifest.json"))
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
            .collect();
        files.sort();
        outputs.push(files);
    }
    assert_eq!(outputs[0].len(), 4);
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn growing_incumbents_have_no_tail_index() {
    let dir = TempDir::new().unwrap();
    let text = DESK.replace("mu = -0.025", "mu = 0.01");
    let cfg = write(&dir, "grow.toml", &text);
    let o = run(&dir, &["tail", "--samples", "1000"], &cfg);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("no positive tail index"), "{}", stderr(&o));
}

#[test]
fn tiny_tail_sample_skips_hill() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "desk.toml", &desk_fast().to_toml());
    let o = run(&dir, &["tail", "--samples", "100"], &cfg);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("k below minimum; Hill skipped"), "{}", stderr(&o));
    let report = read_json(&dir, "tail_report.json");
    assert!(report["hill"].is_null());
    for f in ["rank_size.csv", "k_sweep.csv", "cross_section.csv"] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
}

#[test]
fn invariance_with_no_usable_rows_fails() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "desk.toml", &desk_fast().to_toml());
    let o = run(
        &dir,
        &["invariance", "--entrants", "pareto:alpha=1.1:scale=1,pareto:alpha=1.2:scale=1", "--samples", "2000"],
        &cfg,
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("out/invariance.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| l.contains("precondition")).count(), 2);
}

#[test]
fn fully_censored_simulation_fails() {
    let dir = TempDir::new().unwrap();
    let mut cfg = parse_model(STUB).unwrap();
    cfg.numerics.t_max = 1;
    let mut text = cfg.to_toml();
    text = text.replace("probs = [0.5, 0.5, 0.0]", "probs = [1e-9, 0.999999999, 0.0]");
    let path = write(&dir, "censor.toml", &text);
    let o = run(&dir, &["simulate", "--paths", "1000"], &path);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("paths censored"), "{}", stderr(&o));
}
