//! CSV tables, JSON sidecars and the run summary.

use crate::config::{Provenance, RunConfig};
use crate::error::{CliError, CliResult};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};

/// Build identification baked in at compile time.
pub const GIT_DESCRIBE: &str = env!("DNLS_GIT_DESCRIBE");

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// A CSV table with a mandatory header row.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<String>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, fields: &[String]) {
        debug_assert_eq!(fields.len(), self.columns.len());
        self.rows.push(fields.join(","));
    }

    pub fn render(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }
}

/// Shortest round-trip decimal; empty for NaN.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:?}")
    }
}

/// What a command hands back to the driver.
#[derive(Debug, Default)]
pub struct Outcome {
    pub table: Table,
    pub summary: String,
    pub report: serde_json::Value,
    pub checks: Vec<Check>,
    /// Cache files read or written; hashed into the sidecar.
    pub caches: Vec<PathBuf>,
    /// Other files the command wrote.
    pub artifacts: Vec<PathBuf>,
}

impl Outcome {
    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

#[derive(Serialize)]
struct FileHash {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Build {
    version: &'static str,
    git_describe: &'static str,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    config: &'a RunConfig,
    provenance: &'a Provenance,
    build: Build,
    seed: u64,
    columns: &'a [&'static str],
    caches: Vec<FileHash>,
    artifacts: Vec<String>,
    report: &'a serde_json::Value,
    checks: &'a [Check],
}

pub fn sha256_file(path: &Path) -> Option<String> {
    let bytes = std::fs::read(path).ok()?;
    Some(hex::encode(Sha256::digest(&bytes)))
}

/// Sidecar path for an output file: `<output>.json`.
pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_file(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Writes the table (file or stdout) and, for file output, the sidecar.
pub fn emit(cfg: &RunConfig, prov: &Provenance, out: &Outcome) -> CliResult<()> {
    let csv = out.table.render();
    match &cfg.output {
        Some(path) => {
            write_file(path, &csv)?;
            let hashes = |paths: &[PathBuf]| -> Vec<FileHash> {
                paths
                    .iter()
                    .map(|p| FileHash {
                        path: p.display().to_string(),
                        sha256: sha256_file(p).unwrap_or_default(),
                    })
                    .collect()
            };
            let sidecar = Sidecar {
                config: cfg,
                provenance: prov,
                build: Build {
                    version: env!("CARGO_PKG_VERSION"),
                    git_describe: GIT_DESCRIBE,
                },
                seed: cfg.seed,
                columns: &out.table.columns,
                caches: hashes(&out.caches),
                artifacts: out.artifacts.iter().map(|p| p.display().to_string()).collect(),
                report: &out.report,
                checks: &out.checks,
            };
            let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
            write_file(&sidecar_path(path), &(text + "\n"))?;
            println!("{}", out.summary);
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(csv.as_bytes())
                .map_err(|e| CliError::io("<stdout>", e))?;
            lock.flush().map_err(|e| CliError::io("<stdout>", e))?;
            eprintln!("{}", out.summary);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_rendering() {
        let mut t = Table::new(&["a", "b"]);
        t.push(&[num(0.1), num(f64::NAN)]);
        assert_eq!(t.render(), "a,b\n0.1,\n");
        assert_eq!(num(1e-20), "1e-20");
        assert_eq!(num(2.0), "2.0");
    }

    #[test]
    fn sidecar_sits_next_to_output() {
        assert_eq!(
            sidecar_path(Path::new("out/scan.csv")),
            PathBuf::from("out/scan.csv.json")
        );
    }
}
