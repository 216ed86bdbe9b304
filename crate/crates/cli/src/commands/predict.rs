use std::path::PathBuf;

use clap::Args;
use sgru_core::data::SplitRatios;
use sgru_core::train::predict_windows;
use sgru_core::Result;

use crate::commands::{load_windows, train::check_shapes, train::load_params};

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Trained checkpoint JSON.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Input CSV; every complete window is predicted, no split.
    #[arg(long)]
    pub data: PathBuf,
    /// Output CSV of per-window forecasts.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &PredictArgs) -> Result<u8> {
    let (_, params) = load_params(&args.checkpoint)?;
    let dims = &params.dims;
    let everything = SplitRatios {
        train: 1.0,
        val: 0.0,
        test: 0.0,
    };
    let (series, dataset) = load_windows(
        &args.data,
        dims.input_steps,
        dims.output_steps,
        everything,
    )?;
    check_shapes(&params, &dataset)?;
    let predictions = predict_windows(&params, &dataset.train, &dataset.standardizer)?;

    let mut text = String::from("window_index,horizon_step,node,prediction\n");
    for (index, values) in predictions.iter().enumerate() {
        for step in 0..dims.output_steps {
            for node in 0..dims.num_nodes {
                text.push_str(&format!(
                    "{},{},{},{}\n",
                    index,
                    step + 1,
                    series.node_names[node],
                    values[step * dims.num_nodes + node],
                ));
            }
        }
    }
    std::fs::write(&args.out, text)?;
    println!(
        "wrote {} windows x {} steps to {}",
        predictions.len(),
        dims.output_steps,
        args.out.display()
    );
    Ok(0)
}
