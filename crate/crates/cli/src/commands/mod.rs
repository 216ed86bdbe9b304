pub mod ablate;
pub mod eval;
pub mod gradcheck;
pub mod predict;
pub mod synth;
pub mod train;

use std::path::Path;

use sgru_core::data::{interpolate_missing, load_csv, make_windows, SplitRatios, TrafficSeries, WindowedDataset};
use sgru_core::Result;

/// Loads a CSV, repairs gaps, and windows it with the given split.
pub fn load_windows(
    data: &Path,
    input_steps: usize,
    output_steps: usize,
    ratios: SplitRatios,
) -> Result<(TrafficSeries, WindowedDataset)> {
    let series = interpolate_missing(&load_csv(data)?)?;
    let dataset = make_windows(&series, input_steps, output_steps, ratios, 1)?;
    Ok((series, dataset))
}

/// Exit code for a run that completed but detected numeric divergence.
pub const EXIT_DIVERGED: u8 = 3;
/// Exit code for a failed verification (gradient check over tolerance).
pub const EXIT_CHECK_FAILED: u8 = 1;
