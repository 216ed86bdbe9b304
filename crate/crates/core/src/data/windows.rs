//! Chronological 6:2:2 split and sliding-window extraction.
//!
//! The time axis is cut before windowing, so no window straddles a split
//! boundary. Inputs are standardized with statistics fit on the training
//! segment only; targets stay in the original scale.

use crate::data::{Standardizer, TrafficSeries};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.6,
            val: 0.2,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::Config(format!("split ratios must be non-negative: {self:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios must sum to 1, got {sum}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Window {
    /// `[input_steps, nodes, channels]`, standardized.
    pub input: Tensor,
    /// `[output_steps, nodes, output_channels]`, original scale.
    pub target: Tensor,
}

#[derive(Debug, Clone)]
pub struct WindowedDataset {
    pub train: Vec<Window>,
    pub val: Vec<Window>,
    pub test: Vec<Window>,
    pub standardizer: Standardizer,
    pub input_steps: usize,
    pub output_steps: usize,
    pub num_nodes: usize,
    pub input_channels: usize,
    pub output_channels: usize,
}

/// Sliding windows of stride 1 that fit in a segment of `len` steps.
pub fn window_count(len: usize, input_steps: usize, output_steps: usize) -> usize {
    (len + 1).saturating_sub(input_steps + output_steps)
}

pub fn make_windows(
    series: &TrafficSeries,
    input_steps: usize,
    output_steps: usize,
    ratios: SplitRatios,
    output_channels: usize,
) -> Result<WindowedDataset> {
    if input_steps == 0 || output_steps == 0 {
        return Err(Error::Config(
            "input_steps and output_steps must be at least 1".into(),
        ));
    }
    ratios.validate()?;
    if output_channels == 0 || output_channels > series.channels {
        return Err(Error::Config(format!(
            "output_channels {output_channels} outside 1..={}",
            series.channels
        )));
    }
    if series.has_missing() {
        return Err(Error::Data(
            "series has missing values; interpolate before windowing".into(),
        ));
    }
    if series.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("series has non-finite values".into()));
    }

    let steps = series.steps;
    let cut_train = ((ratios.train * steps as f64).floor() as usize).min(steps);
    let cut_val = (((ratios.train + ratios.val) * steps as f64).floor() as usize)
        .clamp(cut_train, steps);
    if cut_train == 0 {
        return Err(Error::Data("training segment is empty".into()));
    }
    let row = series.nodes * series.channels;
    let standardizer = Standardizer::fit(&series.values[..cut_train * row], series.channels)?;

    let segments = [(0, cut_train), (cut_train, cut_val), (cut_val, steps)];
    let mut splits: [Vec<Window>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (slot, &(a, b)) in splits.iter_mut().zip(&segments) {
        let count = window_count(b - a, input_steps, output_steps);
        slot.reserve(count);
        for start in a..a + count {
            let mut input = series.values[start * row..(start + input_steps) * row].to_vec();
            standardizer.apply_in_place(&mut input)?;
            let t0 = start + input_steps;
            let mut target = Vec::with_capacity(output_steps * series.nodes * output_channels);
            for t in t0..t0 + output_steps {
                for n in 0..series.nodes {
                    for c in 0..output_channels {
                        target.push(series.value(t, n, c));
                    }
                }
            }
            slot.push(Window {
                input: Tensor::new(
                    vec![input_steps, series.nodes, series.channels],
                    input,
                )?,
                target: Tensor::new(
                    vec![output_steps, series.nodes, output_channels],
                    target,
                )?,
            });
        }
    }
    let [train, val, test] = splits;
    if train.is_empty() && val.is_empty() && test.is_empty() {
        return Err(Error::Data(format!(
            "no segment is long enough for {input_steps}+{output_steps} steps (series has {steps})"
        )));
    }
    Ok(WindowedDataset {
        train,
        val,
        test,
        standardizer,
        input_steps,
        output_steps,
        num_nodes: series.nodes,
        input_channels: series.channels,
        output_channels,
    })
}
