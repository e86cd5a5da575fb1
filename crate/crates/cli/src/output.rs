//! Artifact writing. Every file carries the hash of the resolved config.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::config::{Format, RunConfig};
use crate::experiments::Outcome;

pub fn config_hash(resolved_toml: &str) -> String {
    Sha256::digest(resolved_toml.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Shortest round-trip decimal, in exponent form outside [1e-4, 1e16).
/// Non-finite values become an empty field.
pub fn format_number(x: f64) -> String {
    let a = x.abs();
    if !x.is_finite() {
        String::new()
    } else if a == 0.0 || (1e-4..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn csv_text(outcome: &Outcome, hash: &str) -> String {
    let mut s = format!("# config_sha256={hash}\n{}\n", outcome.columns.join(","));
    for row in &outcome.rows {
        let fields: Vec<String> = row.iter().map(|x| format_number(*x)).collect();
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}

pub fn summary_value(config: &RunConfig, outcome: &Outcome, hash: &str) -> Value {
    let mut checks = Map::new();
    for c in &outcome.checks {
        checks.insert(c.name.clone(), json!({"passed": c.passed, "value": c.value}));
    }
    let passed = outcome.checks.iter().filter(|c| c.passed).count();
    let mut root = outcome.summary.clone();
    root.insert("config_sha256".into(), json!(hash));
    root.insert("experiment".into(), json!(config.experiment().name()));
    root.insert("seed".into(), json!(config.output.seed));
    root.insert("checks".into(), Value::Object(checks));
    root.insert("checks_passed".into(), json!(passed));
    root.insert("checks_failed".into(), json!(outcome.checks.len() - passed));
    root.insert("status".into(), json!(if outcome.passed() { "pass" } else { "fail" }));
    Value::Object(root)
}

/// Writes the artifact set into `dir` and returns the paths written.
pub fn write_artifacts(dir: &Path, config: &RunConfig, outcome: &Outcome) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let resolved = config.to_toml();
    let hash = config_hash(&resolved);
    let mut written = Vec::new();
    let mut put = |name: String, text: String| -> io::Result<()> {
        let path = dir.join(name);
        fs::write(&path, text)?;
        written.push(path);
        Ok(())
    };
    put("resolved_config.toml".into(), format!("# config_sha256={hash}\n{resolved}"))?;
    let formats = &config.output.formats;
    if formats.contains(&Format::Csv) && !outcome.columns.is_empty() {
        put(format!("{}.csv", config.experiment().name()), csv_text(outcome, &hash))?;
    }
    if let Some(report) = &outcome.report {
        put("coercivity_report.txt".into(), format!("# config_sha256={hash}\n{report}"))?;
    }
    if formats.contains(&Format::Json) {
        let value = summary_value(config, outcome, &hash);
        let mut text = serde_json::to_string_pretty(&value).expect("summary serializes");
        text.push('\n');
        put("summary.json".into(), text)?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_hex_sha256() {
        let h = config_hash("abc");
        assert_eq!(h, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-17, 6.02e23, 0.0, 1e-4, 9.99e-5] {
            assert_eq!(format_number(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(format_number(f64::NAN), "");
        assert_eq!(format_number(3.5e-15), "3.5e-15");
        assert_eq!(format_number(0.25), "0.25");
    }
}
