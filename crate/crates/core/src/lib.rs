//! Spatio-temporal traffic forecasting engine.
//!
//! The crate provides, from the bottom up:
//!
//! * [`tensor`]: dense `f64` tensors and a reverse-mode tape with the small
//!   operation set the model needs (matrix product, broadcasted elementwise
//!   arithmetic, activations, row softmax, concatenation, axis moves).
//! * [`model`]: a graph-gated recurrent forecaster over road-sensor
//!   networks. A learned adjacency couples the nodes, recurrent cells embed
//!   a graph convolution in their gates, and four wiring variants switch
//!   the input embedding and the cell topology on or off for ablations.
//! * [`data`]: CSV ingestion, gap interpolation, standardization, window
//!   construction, and a synthetic generator with known structure.
//! * [`train`]: mean-absolute-error loss, Adam with global-norm clipping,
//!   and a deterministic mini-batch training loop with early stopping.
//! * [`metrics`]: MAE, RMSE, and thresholded MAPE reports.
//!
//! Every random draw flows through named streams in [`rng`], and batch
//! fan-out goes through [`exec`], which has a rayon path (feature
//! `parallel`, on by default) and a sequential path that produce bitwise
//! identical results.

pub mod data;
pub mod error;
pub mod exec;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
