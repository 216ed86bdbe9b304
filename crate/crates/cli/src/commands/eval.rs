use std::path::PathBuf;

use clap::{Args, ValueEnum};
use sgru_core::data::Window;
use sgru_core::train::{evaluate, evaluate_at};
use sgru_core::{Error, Result};

use crate::commands::{load_windows, train::check_shapes, train::load_params};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Trained checkpoint JSON.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Input CSV; split 6:2:2 exactly as during training.
    #[arg(long)]
    pub data: PathBuf,
    /// Which split to score.
    #[arg(long, value_enum, default_value_t = Split::Test)]
    pub split: Split,
    /// Comma-separated horizon steps, e.g. `3,6,12`; default is the standard
    /// set clipped to the forecast depth, plus the depth itself.
    #[arg(long)]
    pub horizons: Option<String>,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_horizons(spec: &str) -> Result<Vec<usize>> {
    spec.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad horizon {part:?} in {spec:?}")))
        })
        .collect()
}

pub fn run(args: &EvalArgs) -> Result<u8> {
    let (_, params) = load_params(&args.checkpoint)?;
    let dims = &params.dims;
    let (_, dataset) = load_windows(
        &args.data,
        dims.input_steps,
        dims.output_steps,
        Default::default(),
    )?;
    check_shapes(&params, &dataset)?;
    let windows: &[Window] = match args.split {
        Split::Train => &dataset.train,
        Split::Val => &dataset.val,
        Split::Test => &dataset.test,
    };
    let report = match &args.horizons {
        Some(spec) => evaluate_at(&params, windows, &dataset.standardizer, &parse_horizons(spec)?)?,
        None => evaluate(&params, windows, &dataset.standardizer)?,
    };
    let text = serde_json::to_string_pretty(&report)?;
    println!("{text}");
    if let Some(path) = &args.out {
        std::fs::write(path, format!("{text}\n"))?;
    }
    Ok(0)
}
