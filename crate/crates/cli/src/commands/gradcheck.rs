use clap::Args;
use rand_distr::{Distribution, Normal};
use sgru_core::model::{check_model_gradients, ModelDims, SgruParams, Variant, DEFAULT_CHECK_EPSILON};
use sgru_core::rng::{seeded_stream, STREAM_NOISE};
use sgru_core::tensor::Tensor;
use sgru_core::{Error, Result};

use crate::commands::EXIT_CHECK_FAILED;

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Model variant: simple, w_st_emb, w_struct, or sgru.
    #[arg(long, default_value = "sgru")]
    pub variant: String,
    /// Comma-separated nodes, input steps, output steps, hidden size,
    /// adjacency size, embedding size.
    #[arg(long, default_value = "4,3,2,5,2,3")]
    pub dims: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worst acceptable relative error between tape and finite differences.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

fn parse_dims(spec: &str) -> Result<ModelDims> {
    let parts: Vec<usize> = spec
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad dimension {part:?} in {spec:?}")))
        })
        .collect::<Result<_>>()?;
    let [nodes, input_steps, output_steps, hidden, adjacency, embed] = parts[..] else {
        return Err(Error::Config(format!(
            "expected 6 comma-separated dimensions, got {} in {spec:?}",
            parts.len()
        )));
    };
    Ok(ModelDims {
        input_steps,
        output_steps,
        num_nodes: nodes,
        input_channels: 1,
        output_channels: 1,
        adjacency_dim: adjacency,
        embed_dim: embed,
        hidden_dim: hidden,
    })
}

pub fn run(args: &GradcheckArgs) -> Result<u8> {
    if !(args.tolerance.is_finite() && args.tolerance > 0.0) {
        return Err(Error::Config(format!(
            "tolerance must be positive and finite, got {}",
            args.tolerance
        )));
    }
    let variant = Variant::from_label(&args.variant)?;
    let dims = parse_dims(&args.dims)?;
    let params = SgruParams::init_seeded(variant, dims, args.seed)?;

    let mut rng = seeded_stream(args.seed, STREAM_NOISE);
    let normal = Normal::new(0.0, 0.5).expect("finite std");
    let numel = dims.input_steps * dims.num_nodes * dims.input_channels;
    let values: Vec<f64> = (0..numel).map(|_| normal.sample(&mut rng)).collect();
    let input = Tensor::new(
        vec![dims.input_steps, dims.num_nodes, dims.input_channels],
        values,
    )?;

    let reports = check_model_gradients(&params, &input, DEFAULT_CHECK_EPSILON)?;
    let mut worst: f64 = 0.0;
    for report in &reports {
        println!(
            "{:<28} max_rel_err {:.3e}  ({} elements)",
            report.name, report.max_rel_err, report.checked
        );
        worst = worst.max(report.max_rel_err);
    }
    let pass = worst < args.tolerance;
    println!(
        "{} worst {:.3e} vs tolerance {:.3e}",
        if pass { "PASS" } else { "FAIL" },
        worst,
        args.tolerance
    );
    Ok(if pass { 0 } else { EXIT_CHECK_FAILED })
}
