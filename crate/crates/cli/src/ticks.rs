//! Tick-data ingestion: the `timestamp,price` CSV read into a validated
//! series of log prices.
//!
//! Rows are treated as equally spaced in transaction time; the horizon the
//! series spans is supplied by the caller, not inferred from timestamps.

use std::path::Path;

use crate::{CliError, CliResult};

/// A validated tick series: non-decreasing timestamps, positive prices.
#[derive(Debug, Clone, PartialEq)]
pub struct TickSeries {
    pub timestamps: Vec<f64>,
    pub prices: Vec<f64>,
    pub instrument: String,
}

impl TickSeries {
    /// Observation count n (intervals, one less than the number of rows).
    pub fn n(&self) -> usize {
        self.prices.len() - 1
    }

    /// Log prices in row order.
    pub fn log_prices(&self) -> Vec<f64> {
        self.prices.iter().map(|p| p.ln()).collect()
    }
}

/// Parse a `timestamp,price` CSV. Diagnostics cite the 1-based data row
/// (the header line is not counted).
pub fn ingest_ticks(path: &Path, instrument: Option<&str>) -> CliResult<TickSeries> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let label = instrument
        .map(str::to_string)
        .or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
        })
        .unwrap_or_else(|| "unknown".into());
    parse_ticks(&text, label)
}

fn parse_ticks(text: &str, instrument: String) -> CliResult<TickSeries> {
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(CliError::Data("empty file".into()));
    };
    if header.trim() != "timestamp,price" {
        return Err(CliError::Data(format!(
            "header: expected 'timestamp,price', got '{header}'"
        )));
    }

    let mut timestamps = Vec::new();
    let mut prices = Vec::new();
    for (idx, raw) in lines {
        let row = idx; // 1-based data row (the header is not a row)
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (Some(ts), Some(price), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(CliError::Data(format!(
                "row {row}: expected two comma-separated fields, got '{raw}'"
            )));
        };
        let ts: f64 = ts
            .trim()
            .parse()
            .map_err(|_| CliError::Data(format!("row {row}: bad timestamp '{ts}'")))?;
        let price: f64 = price
            .trim()
            .parse()
            .map_err(|_| CliError::Data(format!("row {row}: bad price '{price}'")))?;
        if !(price.is_finite() && price > 0.0) {
            return Err(CliError::Data(format!(
                "row {row}: price must be positive, got {price}"
            )));
        }
        if let Some(&prev) = timestamps.last() {
            if ts < prev {
                return Err(CliError::Data(format!(
                    "row {row}: timestamp {ts} decreases from {prev}"
                )));
            }
        }
        timestamps.push(ts);
        prices.push(price);
    }
    if prices.len() < 2 {
        return Err(CliError::Data(format!(
            "need at least 2 data rows, got {}",
            prices.len()
        )));
    }
    Ok(TickSeries {
        timestamps,
        prices,
        instrument,
    })
}
