//! JSON run report and the artifact writer.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::{Format, Mode, ParsedConfig};
use crate::error::CliError;
use crate::run::{execute, Outcome, Scalars};
use crate::table::Table;

/// Version of the report layout; bumped on any incompatible change.
pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const REPORT_FILE: &str = "report.json";
pub const GNUPLOT_FILE: &str = "plot.gp";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileEntry {
    pub name: String,
    /// Data rows, header excluded; lines for scripts.
    pub rows: usize,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorEntry {
    pub kind: &'static str,
    pub exit_code: i32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool_version: &'static str,
    pub mode: &'static str,
    pub status: &'static str,
    pub regime: Option<String>,
    pub scalars: Scalars,
    pub details: Map<String, Value>,
    pub files: Vec<FileEntry>,
    pub config: Value,
    pub error: Option<ErrorEntry>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        self.error.as_ref().map_or(0, |e| e.exit_code)
    }

    /// Short human-readable summary.
    pub fn summary(&self) -> String {
        let mut s = format!("mode: {}\nstatus: {}\n", self.mode, self.status);
        if let Some(r) = &self.regime {
            s += &format!("regime: {r}\n");
        }
        let scalars = serde_json::to_value(&self.scalars).unwrap_or(Value::Null);
        if let Value::Object(m) = scalars {
            for (k, v) in m.iter().filter(|(_, v)| !v.is_null()) {
                s += &format!("{k}: {v}\n");
            }
        }
        for f in &self.files {
            s += &format!("wrote {} ({} rows)\n", f.name, f.rows);
        }
        if let Some(e) = &self.error {
            s += &format!("error ({}): {}\n", e.kind, e.message);
        }
        s
    }
}

fn error_entry(e: &CliError) -> ErrorEntry {
    ErrorEntry {
        kind: e.kind(),
        exit_code: e.exit_code(),
        message: e.to_string(),
    }
}

/// Runs a parsed configuration and writes the requested artifacts into `dir`.
///
/// Computation failures are recorded in the returned report (and in
/// `report.json` when requested); only I/O failures come back as `Err`.
pub fn run_to_dir(parsed: &ParsedConfig, dir: &Path, formats: &BTreeSet<Format>, verbose: bool) -> Result<RunReport, CliError> {
    let mut log = |msg: &str| {
        if verbose {
            eprintln!("[qps] {msg}");
        }
    };
    let cfg = &parsed.config;
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut report = RunReport {
        schema_version: SCHEMA_VERSION,
        tool_version: TOOL_VERSION,
        mode: cfg.mode.as_str(),
        status: "ok",
        regime: None,
        scalars: Scalars::default(),
        details: Map::new(),
        files: Vec::new(),
        config: parsed.document.clone(),
        error: None,
    };
    match execute(cfg, &mut log) {
        Ok(Outcome {
            regime,
            scalars,
            details,
            tables,
            failure,
        }) => {
            report.regime = regime.map(|r| r.to_string());
            report.scalars = scalars;
            report.details = details;
            if formats.contains(&Format::Csv) {
                for t in &tables {
                    log(&format!("writing {}", t.file_name));
                    t.write_csv(dir)?;
                    report.files.push(FileEntry {
                        name: t.file_name.clone(),
                        rows: t.rows.len(),
                        columns: t.header.clone(),
                    });
                }
            }
            if formats.contains(&Format::Gnuplot) {
                let script = gnuplot_script(cfg.mode, &tables);
                write_file(&dir.join(GNUPLOT_FILE), &script)?;
                report.files.push(FileEntry {
                    name: GNUPLOT_FILE.into(),
                    rows: script.lines().count(),
                    columns: Vec::new(),
                });
            }
            if let Some(e) = failure {
                report.status = "failed";
                report.error = Some(error_entry(&e));
            }
        }
        Err(e) => {
            report.status = "failed";
            report.error = Some(error_entry(&e));
        }
    }
    if formats.contains(&Format::Json) {
        let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
        text.push('\n');
        write_file(&dir.join(REPORT_FILE), &text)?;
    }
    Ok(report)
}

fn write_file(path: &PathBuf, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })
}

/// Plot commands for the tables of one run; columns are addressed by header name.
fn gnuplot_script(mode: Mode, tables: &[Table]) -> String {
    let mut s = String::from("set datafile separator ','\nset key autotitle columnhead\nset xlabel 't'\n");
    let plot = |s: &mut String, table: &Table, x: &str, ys: &[&str]| {
        let parts: Vec<String> = ys
            .iter()
            .filter(|y| table.column(y).is_some())
            .map(|y| format!("'{}' using '{x}':'{y}' with lines", table.file_name))
            .collect();
        if !parts.is_empty() {
            s.push_str(&format!("plot {}\npause -1\n", parts.join(", ")));
        }
    };
    for t in tables {
        match (mode, t.file_name.as_str()) {
            (Mode::Markov, _) => {
                let cols: Vec<&str> = t.header.iter().filter(|h| h.ends_with("_re")).map(String::as_str).collect();
                plot(&mut s, t, "t", &cols);
            }
            (Mode::Nonmarkov, "nonmarkov.csv") => {
                plot(&mut s, t, "t", &["D_pp", "D_xx", "D_px", "Lambda"]);
                plot(&mut s, t, "t", &["P", "X", "Q"]);
            }
            (Mode::Nonmarkov, _) => plot(&mut s, t, "t", &["Gamma", "coherence"]),
            (Mode::Multilevel, "multilevel.csv") => plot(&mut s, t, "t", &["coherence_norm", "purity"]),
            (Mode::DerivativeCheck, _) => {
                s.push_str("set logscale y\n");
                plot(&mut s, t, "t", &["rel_err"]);
            }
            _ => {}
        }
    }
    s
}
