//! Forecast error measures.
//!
//! All three measures compare flat prediction and target slices of equal
//! length, in the original data scale. MAPE is reported in percent and
//! skips targets with magnitude below a caller-supplied threshold; the
//! report keeps the evaluated and masked counts so a reader can judge
//! coverage.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};

/// Default magnitude below which a target is excluded from MAPE.
pub const DEFAULT_MAPE_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub mae: f64,
    pub rmse: f64,
    /// Mean absolute percentage error, in percent.
    pub mape: f64,
    /// MAE restricted to the first `h` forecast steps, keyed by `h`.
    /// Filled by split-level evaluation; empty for flat comparisons.
    pub per_horizon_mae: BTreeMap<usize, f64>,
    /// Entries that contributed to MAPE.
    pub n_evaluated: usize,
    /// Entries excluded from MAPE by the magnitude threshold.
    pub n_masked: usize,
}

fn check_pair(op: &'static str, predictions: &[f64], targets: &[f64]) -> Result<()> {
    if predictions.len() != targets.len() {
        return Err(Error::Metric(format!(
            "{op}: prediction count {} does not match target count {}",
            predictions.len(),
            targets.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Metric(format!("{op}: empty input")));
    }
    Ok(())
}

pub fn mean_absolute_error(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    check_pair("mae", predictions, targets)?;
    let total: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t).abs())
        .sum();
    Ok(total / predictions.len() as f64)
}

pub fn root_mean_square_error(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    check_pair("rmse", predictions, targets)?;
    let total: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok((total / predictions.len() as f64).sqrt())
}

/// Returns `(mape_percent, evaluated, masked)`.
pub fn mean_absolute_percentage_error(
    predictions: &[f64],
    targets: &[f64],
    threshold: f64,
) -> Result<(f64, usize, usize)> {
    check_pair("mape", predictions, targets)?;
    let mut total = 0.0;
    let mut evaluated = 0usize;
    for (p, t) in predictions.iter().zip(targets) {
        if t.abs() < threshold {
            continue;
        }
        total += ((p - t) / t).abs();
        evaluated += 1;
    }
    if evaluated == 0 {
        return Err(Error::Metric(
            "mape undefined: every target is below the magnitude threshold".into(),
        ));
    }
    Ok((
        100.0 * total / evaluated as f64,
        evaluated,
        predictions.len() - evaluated,
    ))
}

pub fn compute_metrics(
    predictions: &[f64],
    targets: &[f64],
    mape_threshold: f64,
) -> Result<MetricsReport> {
    let mae = mean_absolute_error(predictions, targets)?;
    let rmse = root_mean_square_error(predictions, targets)?;
    let (mape, evaluated, masked) =
        mean_absolute_percentage_error(predictions, targets, mape_threshold)?;
    Ok(MetricsReport {
        mae,
        rmse,
        mape,
        per_horizon_mae: BTreeMap::new(),
        n_evaluated: evaluated,
        n_masked: masked,
    })
}

impl MetricsReport {
    pub fn csv_header(&self) -> String {
        let mut cols = vec![
            "mae".to_string(),
            "rmse".to_string(),
            "mape".to_string(),
        ];
        for h in self.per_horizon_mae.keys() {
            cols.push(format!("mae_h{h}"));
        }
        cols.join(",")
    }

    pub fn csv_line(&self) -> String {
        let mut cols = vec![
            self.mae.to_string(),
            self.rmse.to_string(),
            self.mape.to_string(),
        ];
        for v in self.per_horizon_mae.values() {
            cols.push(v.to_string());
        }
        cols.join(",")
    }
}
