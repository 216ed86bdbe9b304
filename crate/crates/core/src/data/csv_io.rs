//! CSV ingest and export.
//!
//! Format: header `timestamp,<node>,...`, one row per step, one channel per
//! file. Empty cells mark missing readings. Writing then loading reproduces
//! values and mask exactly; floats are printed shortest-round-trip.

use std::path::Path;

use chrono::NaiveDateTime;

use crate::data::TrafficSeries;
use crate::error::{Error, Result};

const TIMESTAMP_FORMATS: [&str; 2] = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"];

fn parse_timestamp(text: &str) -> Option<NaiveDateTime> {
    TIMESTAMP_FORMATS
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(text, fmt).ok())
}

pub fn load_csv(path: &Path) -> Result<TrafficSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut records = reader.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(|e| Error::Parse {
            line: 1,
            message: format!("unreadable header: {e}"),
        })?,
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "empty file".into(),
            })
        }
    };
    if header.get(0).map(str::trim) != Some("timestamp") {
        return Err(Error::Parse {
            line: 1,
            message: "header must start with `timestamp`".into(),
        });
    }
    let node_names: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    if node_names.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "zero nodes in header".into(),
        });
    }
    let nodes = node_names.len();

    let mut values = Vec::new();
    let mut mask = Vec::new();
    let mut timestamps: Vec<String> = Vec::new();
    for (i, record) in records.enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse {
            line,
            message: format!("unreadable row: {e}"),
        })?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(line);
        if record.len() != nodes + 1 {
            return Err(Error::Parse {
                line,
                message: format!(
                    "row has {} fields, expected {}",
                    record.len(),
                    nodes + 1
                ),
            });
        }
        timestamps.push(record.get(0).unwrap_or("").trim().to_string());
        for cell in record.iter().skip(1) {
            let cell = cell.trim();
            if cell.is_empty() {
                values.push(0.0);
                mask.push(true);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                message: format!("non-numeric cell `{cell}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("non-finite cell `{cell}`"),
                });
            }
            values.push(v);
            mask.push(false);
        }
    }
    let steps = timestamps.len();
    let start_timestamp = timestamps.first().cloned().unwrap_or_default();
    let interval_seconds = infer_interval(&timestamps).unwrap_or(300);
    TrafficSeries::new(
        steps,
        nodes,
        1,
        values,
        mask,
        node_names,
        start_timestamp,
        interval_seconds,
    )
}

fn infer_interval(timestamps: &[String]) -> Option<u32> {
    let a = parse_timestamp(timestamps.first()?)?;
    let b = parse_timestamp(timestamps.get(1)?)?;
    let delta = (b - a).num_seconds();
    u32::try_from(delta).ok().filter(|&d| d > 0)
}

pub fn write_csv(series: &TrafficSeries, path: &Path) -> Result<()> {
    if series.channels != 1 {
        return Err(Error::Config(format!(
            "csv export holds one channel per file, series has {}",
            series.channels
        )));
    }
    let start = parse_timestamp(&series.start_timestamp);
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["timestamp".to_string()];
    header.extend(series.node_names.iter().cloned());
    writer.write_record(&header)?;
    let mut row = Vec::with_capacity(series.nodes + 1);
    for t in 0..series.steps {
        row.clear();
        let stamp = match start {
            Some(s) => {
                let offset = chrono::Duration::seconds(t as i64 * series.interval_seconds as i64);
                (s + offset).format("%Y-%m-%dT%H:%M:%S").to_string()
            }
            None => t.to_string(),
        };
        row.push(stamp);
        for n in 0..series.nodes {
            if series.is_missing(t, n, 0) {
                row.push(String::new());
            } else {
                row.push(series.value(t, n, 0).to_string());
            }
        }
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}
