//! Raw multivariate series with an explicit missing-value mask.

use crate::error::{Error, Result};

/// Readings on a `[steps, nodes, channels]` grid, row-major. Missing entries
/// hold 0.0 in `values` and are flagged in `missing_mask`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficSeries {
    pub steps: usize,
    pub nodes: usize,
    pub channels: usize,
    pub values: Vec<f64>,
    pub missing_mask: Vec<bool>,
    pub node_names: Vec<String>,
    pub start_timestamp: String,
    pub interval_seconds: u32,
}

impl TrafficSeries {
    // One argument per field: this is a checked record constructor.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        steps: usize,
        nodes: usize,
        channels: usize,
        values: Vec<f64>,
        missing_mask: Vec<bool>,
        node_names: Vec<String>,
        start_timestamp: String,
        interval_seconds: u32,
    ) -> Result<Self> {
        if nodes == 0 || channels == 0 {
            return Err(Error::Data("series needs at least one node and channel".into()));
        }
        let numel = steps * nodes * channels;
        if values.len() != numel || missing_mask.len() != numel {
            return Err(Error::Data(format!(
                "series buffers hold {} values and {} flags, expected {numel}",
                values.len(),
                missing_mask.len()
            )));
        }
        if node_names.len() != nodes {
            return Err(Error::Data(format!(
                "{} node names for {nodes} nodes",
                node_names.len()
            )));
        }
        Ok(TrafficSeries {
            steps,
            nodes,
            channels,
            values,
            missing_mask,
            node_names,
            start_timestamp,
            interval_seconds,
        })
    }

    #[inline]
    pub fn index(&self, step: usize, node: usize, channel: usize) -> usize {
        (step * self.nodes + node) * self.channels + channel
    }

    pub fn value(&self, step: usize, node: usize, channel: usize) -> f64 {
        self.values[self.index(step, node, channel)]
    }

    pub fn is_missing(&self, step: usize, node: usize, channel: usize) -> bool {
        self.missing_mask[self.index(step, node, channel)]
    }

    pub fn has_missing(&self) -> bool {
        self.missing_mask.iter().any(|&m| m)
    }
}

/// Fills gaps per node and channel: interior gaps linearly against the time
/// index, edge gaps with the nearest observed value. The returned series has
/// an all-false mask.
pub fn interpolate_missing(series: &TrafficSeries) -> Result<TrafficSeries> {
    let mut out = series.clone();
    for node in 0..series.nodes {
        for channel in 0..series.channels {
            let observed: Vec<usize> = (0..series.steps)
                .filter(|&t| !series.is_missing(t, node, channel))
                .collect();
            if observed.is_empty() {
                return Err(Error::Data(format!(
                    "column {} channel {channel} has no observed values",
                    series.node_names[node]
                )));
            }
            let first = observed[0];
            let last = *observed.last().expect("non-empty");
            for t in 0..series.steps {
                if !series.is_missing(t, node, channel) {
                    continue;
                }
                let idx = out.index(t, node, channel);
                out.values[idx] = if t < first {
                    series.value(first, node, channel)
                } else if t > last {
                    series.value(last, node, channel)
                } else {
                    // Interior gap: bracket by the nearest observations.
                    let right_pos = observed.partition_point(|&o| o < t);
                    let t1 = observed[right_pos];
                    let t0 = observed[right_pos - 1];
                    let v0 = series.value(t0, node, channel);
                    let v1 = series.value(t1, node, channel);
                    v0 + (v1 - v0) * (t - t0) as f64 / (t1 - t0) as f64
                };
                out.missing_mask[idx] = false;
            }
        }
    }
    Ok(out)
}
