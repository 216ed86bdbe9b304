//! Batch gradients, the epoch loop, and split evaluation.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;

use crate::data::{Standardizer, Window, WindowedDataset};
use crate::error::{Error, Result};
use crate::exec;
use crate::metrics::{compute_metrics, mean_absolute_error, MetricsReport, DEFAULT_MAPE_THRESHOLD};
use crate::model::{mount, SgruParams};
use crate::rng::{seeded_stream, STREAM_SHUFFLE};
use crate::tensor::Tape;
use crate::train::{adam_step, mae_loss, AdamState, TrainConfig};

/// Forecast depths reported alongside the full-depth score.
pub const STANDARD_HORIZONS: [usize; 4] = [3, 6, 9, 12];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// 1-based epoch index.
    pub epoch: usize,
    pub train_mae: f64,
    pub val_mae: f64,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    /// Parameters of the best validation epoch (initial parameters if
    /// training diverged before completing one).
    pub params: SgruParams,
    /// 1-based; 0 when no epoch finished.
    pub best_epoch: usize,
    pub best_val_mae: f64,
    pub history: Vec<EpochStats>,
    pub diverged: bool,
}

/// Mean MAE gradient over a batch, written into the parameter gradient
/// buffers (overwriting previous content). Returns the mean loss in the
/// original data scale.
pub fn batch_gradient(
    params: &mut SgruParams,
    batch: &[&Window],
    standardizer: &Standardizer,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Train("cannot take a gradient over an empty batch".into()));
    }
    if params.dims.output_channels != 1 {
        return Err(Error::Train(
            "loss path supports a single output channel".into(),
        ));
    }
    let scale = standardizer.std[0];
    let shift = standardizer.mean[0];
    let shared: &SgruParams = params;
    type WindowGrad = (f64, Vec<Vec<f64>>);
    let per_window: Vec<WindowGrad> = exec::try_ordered_map(batch, |window| -> Result<WindowGrad> {
        let tape = Tape::new();
        let model = mount(&tape, shared);
        let rescaled = model.forward(&window.input)?.affine(scale, shift);
        let target = tape.constant_tensor(&window.target);
        let loss = mae_loss(&rescaled, &target)?;
        loss.backward()?;
        let grads: Vec<Vec<f64>> = model
            .leaves()
            .iter()
            .map(|(name, var)| {
                var.grad()
                    .ok_or_else(|| Error::Graph(format!("no gradient recorded for {name}")))
            })
            .collect::<Result<_>>()?;
        Ok((loss.data()[0], grads))
    })?;

    let inv = 1.0 / batch.len() as f64;
    let mut acc: Vec<Vec<f64>> = params
        .leaves()
        .iter()
        .map(|(_, t)| vec![0.0; t.numel()])
        .collect();
    let mut loss_sum = 0.0;
    for (loss, grads) in &per_window {
        loss_sum += loss;
        for (slot, grad) in acc.iter_mut().zip(grads) {
            for (a, g) in slot.iter_mut().zip(grad) {
                *a += g;
            }
        }
    }
    for (slot, (_, tensor)) in params.leaves_mut().into_iter().enumerate() {
        for v in &mut acc[slot] {
            *v *= inv;
        }
        tensor.zero_grad();
        tensor.accumulate_grad(&acc[slot])?;
    }
    Ok(loss_sum * inv)
}

/// Forward pass over each window with predictions mapped back to the
/// original scale. Returns one flat `[output_steps, nodes, channels]`
/// buffer per window.
pub fn predict_windows(
    params: &SgruParams,
    windows: &[Window],
    standardizer: &Standardizer,
) -> Result<Vec<Vec<f64>>> {
    let channels = params.dims.output_channels;
    if standardizer.channels() < channels {
        return Err(Error::Config(format!(
            "standardizer covers {} channels, model emits {channels}",
            standardizer.channels()
        )));
    }
    exec::try_ordered_map(windows, |window| -> Result<Vec<f64>> {
        let tape = Tape::new();
        let model = mount(&tape, params);
        let mut values = model.forward(&window.input)?.data();
        for (i, v) in values.iter_mut().enumerate() {
            let c = i % channels;
            *v = *v * standardizer.std[c] + standardizer.mean[c];
        }
        Ok(values)
    })
}

/// Scores a split: overall metrics plus MAE at the standard horizons (and
/// the full depth), each horizon using exactly the first `h` forecast steps.
pub fn evaluate(
    params: &SgruParams,
    windows: &[Window],
    standardizer: &Standardizer,
) -> Result<MetricsReport> {
    let depth = params.dims.output_steps;
    let mut horizons: BTreeSet<usize> = STANDARD_HORIZONS
        .iter()
        .copied()
        .filter(|&h| h <= depth)
        .collect();
    horizons.insert(depth);
    let horizons: Vec<usize> = horizons.into_iter().collect();
    evaluate_at(params, windows, standardizer, &horizons)
}

/// [`evaluate`] with a caller-chosen horizon set.
pub fn evaluate_at(
    params: &SgruParams,
    windows: &[Window],
    standardizer: &Standardizer,
    horizons: &[usize],
) -> Result<MetricsReport> {
    if windows.is_empty() {
        return Err(Error::Metric("no windows to evaluate".into()));
    }
    let depth = params.dims.output_steps;
    for &h in horizons {
        if h == 0 || h > depth {
            return Err(Error::Metric(format!(
                "horizon {h} outside forecast depth 1..={depth}"
            )));
        }
    }
    let predictions = predict_windows(params, windows, standardizer)?;
    let per_step = params.dims.num_nodes * params.dims.output_channels;
    let mut flat_pred = Vec::new();
    let mut flat_target = Vec::new();
    for (pred, window) in predictions.iter().zip(windows) {
        flat_pred.extend_from_slice(pred);
        flat_target.extend_from_slice(window.target.data());
    }
    let mut report = compute_metrics(&flat_pred, &flat_target, DEFAULT_MAPE_THRESHOLD)?;

    for &h in horizons {
        let mut pred_h = Vec::new();
        let mut target_h = Vec::new();
        for (pred, window) in predictions.iter().zip(windows) {
            pred_h.extend_from_slice(&pred[..h * per_step]);
            target_h.extend_from_slice(&window.target.data()[..h * per_step]);
        }
        report
            .per_horizon_mae
            .insert(h, mean_absolute_error(&pred_h, &target_h)?);
    }
    Ok(report)
}

fn check_dataset(config: &TrainConfig, dataset: &WindowedDataset) -> Result<()> {
    if dataset.train.is_empty() {
        return Err(Error::Train("dataset has no training windows".into()));
    }
    if dataset.val.is_empty() {
        return Err(Error::Train("dataset has no validation windows".into()));
    }
    if dataset.input_steps != config.input_steps || dataset.output_steps != config.output_steps {
        return Err(Error::Config(format!(
            "dataset windows are {}x{} steps, config wants {}x{}",
            dataset.input_steps, dataset.output_steps, config.input_steps, config.output_steps
        )));
    }
    if dataset.output_channels != 1 {
        return Err(Error::Config(
            "training supports a single output channel".into(),
        ));
    }
    Ok(())
}

/// Full training run: seeded shuffling, mini-batch Adam, per-epoch
/// validation, early stopping on stale validation MAE. On divergence the
/// best parameters seen so far are returned with `diverged` set.
pub fn train(config: &TrainConfig, dataset: &WindowedDataset) -> Result<TrainResult> {
    config.validate()?;
    check_dataset(config, dataset)?;
    let dims = config.model_dims(
        dataset.num_nodes,
        dataset.input_channels,
        dataset.output_channels,
    );
    let mut params = SgruParams::init_seeded(config.variant, dims, config.seed)?;
    let mut optimizer = AdamState::new(&params);
    let mut shuffle_rng = seeded_stream(config.seed, STREAM_SHUFFLE);

    let mut best_params = params.clone();
    let mut best_val_mae = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut stale_epochs = 0usize;
    let mut history = Vec::new();
    let mut diverged = false;

    'epochs: for epoch in 1..=config.max_epochs {
        let mut order: Vec<usize> = (0..dataset.train.len()).collect();
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Window> = chunk.iter().map(|&i| &dataset.train[i]).collect();
            let loss = match batch_gradient(&mut params, &batch, &dataset.standardizer) {
                Ok(loss) => loss,
                Err(Error::Numeric { .. }) => {
                    diverged = true;
                    break 'epochs;
                }
                Err(e) => return Err(e),
            };
            if !loss.is_finite() {
                diverged = true;
                break 'epochs;
            }
            match adam_step(&mut params, &mut optimizer, config) {
                Ok(()) => {}
                // A non-finite gradient is a divergence, not a caller error.
                Err(Error::Train(msg)) if msg.starts_with("non-finite") => {
                    diverged = true;
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
            loss_sum += loss * chunk.len() as f64;
        }
        let train_mae = loss_sum / dataset.train.len() as f64;
        let val_mae = match evaluate(&params, &dataset.val, &dataset.standardizer) {
            Ok(report) => report.mae,
            Err(Error::Numeric { .. }) => {
                diverged = true;
                break 'epochs;
            }
            Err(e) => return Err(e),
        };
        history.push(EpochStats {
            epoch,
            train_mae,
            val_mae,
        });
        if val_mae < best_val_mae {
            best_val_mae = val_mae;
            best_epoch = epoch;
            best_params = params.clone();
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= config.patience {
                break;
            }
        }
    }

    Ok(TrainResult {
        params: best_params,
        best_epoch,
        best_val_mae,
        history,
        diverged,
    })
}
