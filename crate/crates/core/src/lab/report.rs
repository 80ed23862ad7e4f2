//! Experiment reports and their on-disk form.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evolve::EnergyTrace;

use super::config::SimConfig;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// A named output file.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub contents: Vec<u8>,
}

#[derive(Clone, Debug, Default)]
pub struct Report {
    pub command: String,
    pub checks: Vec<Check>,
    pub files: Vec<OutputFile>,
    /// Headline numbers for the manifest.
    pub summary: serde_json::Map<String, Value>,
    /// Wall-clock seconds per phase; excluded from every CSV.
    pub timings: Vec<(String, f64)>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Self { command: command.to_string(), ..Self::default() }
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.to_string(), passed, detail: detail.into() });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn file(&mut self, name: &str, contents: impl Into<Vec<u8>>) {
        self.files.push(OutputFile { name: name.to_string(), contents: contents.into() });
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) {
        let mut s = header.join(",");
        s.push('\n');
        for r in rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        self.file(name, s);
    }

    pub fn trace(&mut self, stem: &str, trace: &EnergyTrace) {
        let mut a = Vec::new();
        trace.write_csv(&mut a).expect("write to memory");
        let mut b = Vec::new();
        trace.write_diagnostics_csv(&mut b).expect("write to memory");
        self.file(&format!("{stem}.csv"), a);
        self.file(&format!("{stem}_diagnostics.csv"), b);
    }

    pub fn summary(&mut self, key: &str, value: impl Serialize) {
        self.summary.insert(key.to_string(), serde_json::to_value(value).expect("summary serialises"));
    }

    pub fn timing(&mut self, phase: &str, seconds: f64) {
        self.timings.push((phase.to_string(), seconds));
    }

    pub fn file_named(&self, name: &str) -> Option<&OutputFile> {
        self.files.iter().find(|f| f.name == name)
    }

    /// One line per check.
    pub fn render_checks(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&format!("[{}] {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail));
        }
        s
    }
}

/// Shortest round-trip form of a float.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

/// Directory of one run: `<output.dir>/<command>-<hash prefix>`.
pub fn run_dir(cfg: &SimConfig, command: &str) -> PathBuf {
    cfg.output.dir.join(format!("{command}-{}", &cfg.hash()[..12]))
}

/// Writes every file of `report` and a `manifest.json` into `dir`, creating
/// it if needed and overwriting earlier files of the same run.
pub fn emit_results(report: &Report, cfg: &SimConfig, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for f in &report.files {
        let p = dir.join(&f.name);
        std::fs::write(&p, &f.contents).map_err(|e| Error::io(&p, e))?;
        files.push(serde_json::json!({
            "name": f.name,
            "sha256": hex::encode(Sha256::digest(&f.contents)),
        }));
    }
    let timings: serde_json::Map<String, Value> =
        report.timings.iter().map(|(k, v)| (k.clone(), Value::from(*v))).collect();
    let manifest = serde_json::json!({
        "command": report.command,
        "config_hash": cfg.hash(),
        "config": cfg,
        "versions": { "mhdtc": env!("CARGO_PKG_VERSION") },
        "passed": report.passed(),
        "checks": report.checks,
        "summary": report.summary,
        "files": files,
        "timings": timings,
    });
    let p = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    std::fs::write(&p, text + "\n").map_err(|e| Error::io(&p, e))?;
    Ok(p)
}
