//! Report serialization: flat CSV of checks or pretty JSON of the whole bundle.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::report::plan::OutputFormat;
use crate::report::run::ReportBundle;

/// Column order of the CSV report.
pub const CSV_COLUMNS: [&str; 9] = [
    "study",
    "claim",
    "p",
    "r",
    "m",
    "N",
    "value",
    "threshold",
    "pass",
];

#[derive(Serialize)]
struct CsvRow<'a> {
    study: &'a str,
    claim: &'a str,
    p: Option<i32>,
    r: Option<i32>,
    m: Option<i32>,
    #[serde(rename = "N")]
    n: Option<usize>,
    value: f64,
    threshold: f64,
    pass: bool,
}

/// One row per check. A study that errored contributes a single failing row
/// whose claim carries the error message.
pub fn write_csv<W: Write>(bundle: &ReportBundle, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for study in &bundle.studies {
        if let Some(err) = &study.error {
            let claim = format!("study failed: {err}");
            w.serialize(CsvRow {
                study: &study.name,
                claim: &claim,
                p: None,
                r: None,
                m: None,
                n: None,
                value: 1.0,
                threshold: 0.0,
                pass: false,
            })?;
        }
        for c in &study.checks {
            w.serialize(CsvRow {
                study: &study.name,
                claim: &c.claim,
                p: c.p,
                r: c.r,
                m: c.m,
                n: c.n,
                value: c.value,
                threshold: c.threshold,
                pass: c.pass,
            })?;
        }
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn write_json<W: Write>(bundle: &ReportBundle, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, bundle)?;
    out.write_all(b"\n").map_err(|e| Error::Io {
        path: "<output>".into(),
        source: e,
    })?;
    Ok(())
}

pub fn render(bundle: &ReportBundle, format: OutputFormat) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    match format {
        OutputFormat::Csv => write_csv(bundle, &mut buf)?,
        OutputFormat::Json => write_json(bundle, &mut buf)?,
    }
    Ok(buf)
}

/// Writes the report to `path`, or to standard output when `path` is `None`.
pub fn emit(bundle: &ReportBundle, format: OutputFormat, path: Option<&Path>) -> Result<()> {
    let bytes = render(bundle, format)?;
    match path {
        Some(path) => fs::write(path, bytes).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => std::io::stdout()
            .write_all(&bytes)
            .map_err(|source| Error::Io {
                path: "<stdout>".into(),
                source,
            }),
    }
}

/// Reads back a JSON report.
pub fn read_bundle(path: &Path) -> Result<ReportBundle> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}
