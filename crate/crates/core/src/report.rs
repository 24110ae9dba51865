//! Run reports: named scalars with tolerances and provenance, verdicts, and the
//! manifest of files written. Serialization is deterministic.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultEntry {
    pub name: String,
    pub value: f64,
    pub tol: Option<f64>,
    /// How the value was obtained, e.g. `quadrature`, `closed-form`, `eigensolve`.
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub config: serde_json::Value,
    pub results: Vec<ResultEntry>,
    pub verdicts: Vec<Verdict>,
    /// Paths relative to the output directory.
    pub files: Vec<String>,
    /// Wall-clock seconds; `null` unless timing was requested.
    pub seconds: Option<f64>,
}

impl Report {
    pub fn new(command: impl Into<String>, config: serde_json::Value) -> Self {
        Self {
            command: command.into(),
            config,
            results: Vec::new(),
            verdicts: Vec::new(),
            files: Vec::new(),
            seconds: None,
        }
    }

    pub fn push_result(&mut self, name: impl Into<String>, value: f64, tol: Option<f64>, provenance: &str) {
        self.results.push(ResultEntry {
            name: name.into(),
            value,
            tol,
            provenance: provenance.to_string(),
        });
    }

    pub fn push_verdict(&mut self, name: impl Into<String>, status: impl Into<String>) {
        self.verdicts.push(Verdict {
            name: name.into(),
            status: status.into(),
        });
    }

    pub fn add_file(&mut self, name: impl Into<String>) {
        self.files.push(name.into());
    }

    pub fn result(&self, name: &str) -> Option<&ResultEntry> {
        self.results.iter().find(|r| r.name == name)
    }

    pub fn verdict(&self, name: &str) -> Option<&str> {
        self.verdicts
            .iter()
            .find(|v| v.name == name)
            .map(|v| v.status.as_str())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    Json,
    Csv,
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(body.as_bytes()).map_err(io)
}

/// CSV with columns `kind,name,value,tol,provenance`: one row per result
/// (`kind = result`) and per verdict (`kind = verdict`, status in `provenance`).
pub fn report_csv(report: &Report) -> String {
    let mut s = String::from("kind,name,value,tol,provenance\n");
    for r in &report.results {
        let tol = r.tol.map(|t| format!("{t:e}")).unwrap_or_default();
        s.push_str(&format!("result,{},{:e},{},{}\n", r.name, r.value, tol, r.provenance));
    }
    for v in &report.verdicts {
        s.push_str(&format!("verdict,{},,,{}\n", v.name, v.status));
    }
    s
}

/// Writes `report.json` or `report.csv` into `dir` and returns the path.
pub fn emit_report(report: &Report, format: ReportFormat, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let (name, body) = match format {
        ReportFormat::Json => ("report.json", report.to_json()?),
        ReportFormat::Csv => ("report.csv", report_csv(report)),
    };
    let path = dir.join(name);
    write_file(&path, &body)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_is_valid_json() {
        let r = Report::new("weight", serde_json::json!({}));
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(v["results"], serde_json::json!([]));
        assert_eq!(v["seconds"], serde_json::Value::Null);
    }

    #[test]
    fn round_trip_and_csv_columns() {
        let mut r = Report::new("probe", serde_json::json!({"M": 256}));
        r.push_result("lambda_max", 1.0, Some(1e-2), "eigensolve");
        r.push_verdict("bessel", "holds");
        let back: Report = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        let csv = report_csv(&r);
        assert!(csv.starts_with("kind,name,value,tol,provenance\n"));
        assert!(csv.contains("verdict,bessel,,,holds"));
    }

    #[test]
    fn unwritable_directory_names_the_path() {
        let r = Report::new("x", serde_json::Value::Null);
        let err = emit_report(&r, ReportFormat::Json, Path::new("/proc/nonexistent/dir")).unwrap_err();
        assert!(err.to_string().contains("/proc/nonexistent"));
    }
}
