//! MAE objective, Adam optimizer, and the mini-batch training loop.

mod adam;
mod config;
mod fit;
mod loss;

pub use adam::{adam_step, clip_gradients, AdamState};
pub use config::TrainConfig;
pub use fit::{
    batch_gradient, evaluate, evaluate_at, predict_windows, train, EpochStats, TrainResult,
    STANDARD_HORIZONS,
};
pub use loss::mae_loss;
