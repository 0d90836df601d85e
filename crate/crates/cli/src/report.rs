//! Report serialization: one CSV of row records plus one JSON summary per
//! experiment, written under a shared path prefix.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tsrvlab_core::experiments::{ExperimentConfig, ExperimentReport, Summary};

use crate::{CliError, CliResult};

/// Wall-clock metadata; absent when timestamps are suppressed so identical
/// invocations produce identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub created_unix: Option<u64>,
}

/// The JSON summary document. Row records live in the sibling CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema: String,
    pub experiment: String,
    pub columns: Vec<String>,
    pub row_count: usize,
    pub summary: Summary,
    pub config: ExperimentConfig,
    pub metadata: Metadata,
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("cannot write {}: {e}", path.display()))
}

/// Write `<prefix>.csv` and `<prefix>.json`. Row values are serialized with
/// 17 significant digits so they parse back bit-exactly; the JSON summary
/// carries the schema id and the full config echo.
pub fn write_report(
    report: &ExperimentReport,
    prefix: &Path,
    timestamp: Option<u64>,
) -> CliResult<(PathBuf, PathBuf)> {
    if let Some(dir) = prefix.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
    }

    let csv_path = prefix.with_extension("csv");
    let mut csv = std::io::BufWriter::new(
        std::fs::File::create(&csv_path).map_err(|e| io_err(&csv_path, e))?,
    );
    writeln!(csv, "{}", report.columns.join(",")).map_err(|e| io_err(&csv_path, e))?;
    for row in &report.rows {
        let line = row
            .iter()
            .map(|v| format!("{v:.16e}"))
            .collect::<Vec<_>>()
            .join(",");
        writeln!(csv, "{line}").map_err(|e| io_err(&csv_path, e))?;
    }
    csv.flush().map_err(|e| io_err(&csv_path, e))?;

    let doc = ReportDocument {
        schema: report.schema.clone(),
        experiment: report.experiment.clone(),
        columns: report.columns.clone(),
        row_count: report.rows.len(),
        summary: report.summary.clone(),
        config: report.config.clone(),
        metadata: Metadata {
            created_unix: timestamp,
        },
    };
    let json_path = prefix.with_extension("json");
    let json = serde_json::to_string_pretty(&doc)
        .map_err(|e| CliError::Data(format!("serialization failed: {e}")))?;
    std::fs::write(&json_path, json.as_bytes()).map_err(|e| io_err(&json_path, e))?;
    Ok((csv_path, json_path))
}

/// Read back a CSV written by `write_report`: (columns, rows).
pub fn read_csv(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Data("empty CSV".into()))?;
    let columns: Vec<String> = header.split(',').map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(str::parse::<f64>).collect();
        rows.push(row.map_err(|e| CliError::Data(format!("row {}: {e}", i + 2)))?);
    }
    Ok((columns, rows))
}

/// Read back a JSON summary document.
pub fn read_json(path: &Path) -> CliResult<ReportDocument> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("bad JSON summary: {e}")))
}
