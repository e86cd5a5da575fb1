use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn recomb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_recomb"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn csv_column(text: &str, name: &str) -> Vec<f64> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).expect("column present");
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

#[test]
fn validate_materializes_every_default() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "experiment = \"simulate\"\n");
    let out = recomb(&["validate", "--config", &cfg]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for key in ["nx = 32", "nv = 32", "vmax = 8.0", "sigma = 1.3", "dt = ", "record_every = 10", "seed = 0", "eps_list"] {
        assert!(text.contains(key), "missing `{key}` in\n{text}");
    }
}

#[test]
fn validate_reports_odd_nx() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[grid]\nnx = 31\n");
    let out = recomb(&["validate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nx must be even"));
}

#[test]
fn validate_aggregates_and_names_the_envelope_precondition() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[grid]\nnx = 31\n[physics]\nrho_inf = 0.5\ngamma1 = 0.5\namplitude = 0.01\n");
    let out = recomb(&["validate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nx must be even"), "{err}");
    assert!(err.contains("gamma1 < rho_inf"), "{err}");
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[grid]\nnxx = 16\n");
    let out = recomb(&["simulate", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nxx"));
}

#[test]
fn simulate_equilibrium_has_zero_entropy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[grid]\nnx = 16\nnv = 16\nvmax = 7.0\n[physics]\namplitude = 0.0\nrho_inf = 0.7\n[numerics]\nt_final = 1.0\n",
    );
    let out_dir = dir.path().join("o");
    let out = recomb(&["simulate", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("simulate.csv")).unwrap();
    let h = csv_column(&csv, "rel_entropy");
    assert!(h.len() > 2);
    assert!(h.iter().all(|x| *x <= 1e-12), "{h:?}");
}

#[test]
fn coercivity_report_at_unit_rho() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[grid]\nnx = 16\nnv = 16\nvmax = 7.0\n[coercivity]\nn_samples = 20\n",
    );
    let out_dir = dir.path().join("o");
    let out = recomb(&["coercivity-check", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let report = fs::read_to_string(out_dir.join("coercivity_report.txt")).unwrap();
    let line = report
        .lines()
        .find(|l| l.starts_with("p1_micro_coercivity ="))
        .expect("p1 line");
    let value: f64 = line.split(['=', '|']).nth(1).unwrap().trim().parse().unwrap();
    assert!(value >= 1.0 - 1e-6, "{line}");
}

#[test]
fn limit_study_err_sup_decreases() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[grid]\nnx = 16\nnv = 24\nvmax = 7.0\n");
    let out_dir = dir.path().join("o");
    let out = recomb(&["limit-study", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let csv = fs::read_to_string(out_dir.join("limit-study.csv")).unwrap();
    let err = csv_column(&csv, "err_sup");
    assert_eq!(err.len(), 4);
    assert!(err.windows(2).all(|w| w[1] < w[0]), "{err:?}");
}

#[test]
fn every_file_carries_the_config_hash_and_runs_repeat_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[grid]\nnx = 8\nnv = 12\nvmax = 7.0\n[physics]\nperturbation = \"random\"\n[numerics]\nt_final = 1.0\n",
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let out = recomb(&["linear-decay", "--config", &cfg, "--out", d.to_str().unwrap(), "--seed", "11"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    let hash = summary["config_sha256"].as_str().unwrap().to_owned();
    assert_eq!(summary["seed"], 11);
    for name in ["resolved_config.toml", "linear-decay.csv", "summary.json"] {
        let x = fs::read(a.join(name)).unwrap();
        assert_eq!(x, fs::read(b.join(name)).unwrap(), "{name} differs");
        assert!(String::from_utf8(x).unwrap().contains(&hash), "{name} lacks the hash");
    }
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let out = recomb(&["validate", "--config", path.to_str().unwrap()]);
        assert!(out.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
    }
}
