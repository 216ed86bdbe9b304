//! Dataset ingest, repair, scaling, and windowing.

mod csv_io;
mod series;
mod standardize;
mod synthetic;
mod windows;

pub use csv_io::{load_csv, write_csv};
pub use series::{interpolate_missing, TrafficSeries};
pub use standardize::Standardizer;
pub use synthetic::{generate_synthetic, STEPS_PER_DAY};
pub use windows::{make_windows, window_count, SplitRatios, Window, WindowedDataset};
