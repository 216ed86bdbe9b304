use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use serde::Serialize;
use sgru_core::data::WindowedDataset;
use sgru_core::metrics::MetricsReport;
use sgru_core::model::{Checkpoint, SgruParams, Variant};
use sgru_core::train::{evaluate, train, TrainConfig, TrainResult};
use sgru_core::{Error, Result};

use crate::commands::{load_windows, EXIT_DIVERGED};
use crate::manifest::{sha256_file, tool_version, write_json_atomic, RunManifest};
use crate::seeds::parse_seed_spec;

/// Hyperparameter flags shared by `train` and `ablate`; set flags win over the
/// config file, which wins over defaults.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub input_steps: Option<usize>,
    #[arg(long)]
    pub output_steps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Input CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// JSON config file; omitted fields fall back to defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model variant: simple, w_st_emb, w_struct, or sgru.
    #[arg(long)]
    pub variant: Option<String>,
    /// Seed or seeds: `7`, `1,2,5`, or inclusive `1..10`.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Output directory; one subdirectory per seed.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

/// File config (or defaults), then flag overrides, then validation.
pub fn effective_config(
    config_path: Option<&Path>,
    variant: Option<&str>,
    overrides: &Overrides,
) -> Result<TrainConfig> {
    let mut config = match config_path {
        Some(path) => TrainConfig::from_json(&std::fs::read_to_string(path)?)?,
        None => TrainConfig::default(),
    };
    if let Some(label) = variant {
        config.variant = Variant::from_label(label)?;
    }
    if let Some(v) = overrides.max_epochs {
        config.max_epochs = v;
    }
    if let Some(v) = overrides.batch_size {
        config.batch_size = v;
    }
    if let Some(v) = overrides.hidden_dim {
        config.hidden_dim = v;
    }
    if let Some(v) = overrides.embed_dim {
        config.embed_dim = v;
    }
    if let Some(v) = overrides.learning_rate {
        config.learning_rate = v;
    }
    if let Some(v) = overrides.patience {
        config.patience = v;
    }
    if let Some(v) = overrides.input_steps {
        config.input_steps = v;
    }
    if let Some(v) = overrides.output_steps {
        config.output_steps = v;
    }
    config.validate()?;
    Ok(config)
}

pub struct SeedOutcome {
    pub seed: u64,
    pub result: TrainResult,
    pub val_report: MetricsReport,
}

/// Trains one seed and scores its best parameters on the validation split.
pub fn run_seed(config: &TrainConfig, dataset: &WindowedDataset) -> Result<SeedOutcome> {
    let result = train(config, dataset)?;
    let val_report = evaluate(&result.params, &dataset.val, &dataset.standardizer)?;
    Ok(SeedOutcome {
        seed: config.seed,
        result,
        val_report,
    })
}

pub fn write_history(history: &[sgru_core::train::EpochStats], path: &Path) -> Result<()> {
    let mut text = String::from("epoch,train_mae,val_mae\n");
    for stats in history {
        text.push_str(&format!(
            "{},{},{}\n",
            stats.epoch, stats.train_mae, stats.val_mae
        ));
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Serialize)]
struct PerSeedSummary {
    seed: u64,
    best_epoch: usize,
    best_val_mae: f64,
    diverged: bool,
    val: MetricsReport,
}

#[derive(Serialize)]
struct Aggregate {
    seeds: Vec<u64>,
    mean_best_val_mae: f64,
    mean_val_mae: f64,
    mean_val_rmse: f64,
    mean_val_mape: f64,
    mean_val_per_horizon_mae: BTreeMap<usize, f64>,
    per_seed: Vec<PerSeedSummary>,
}

fn aggregate(outcomes: &[SeedOutcome]) -> Aggregate {
    let n = outcomes.len() as f64;
    let mut per_horizon: BTreeMap<usize, f64> = BTreeMap::new();
    for outcome in outcomes {
        for (&h, &v) in &outcome.val_report.per_horizon_mae {
            *per_horizon.entry(h).or_insert(0.0) += v;
        }
    }
    for v in per_horizon.values_mut() {
        *v /= n;
    }
    Aggregate {
        seeds: outcomes.iter().map(|o| o.seed).collect(),
        mean_best_val_mae: outcomes.iter().map(|o| o.result.best_val_mae).sum::<f64>() / n,
        mean_val_mae: outcomes.iter().map(|o| o.val_report.mae).sum::<f64>() / n,
        mean_val_rmse: outcomes.iter().map(|o| o.val_report.rmse).sum::<f64>() / n,
        mean_val_mape: outcomes.iter().map(|o| o.val_report.mape).sum::<f64>() / n,
        mean_val_per_horizon_mae: per_horizon,
        per_seed: outcomes
            .iter()
            .map(|o| PerSeedSummary {
                seed: o.seed,
                best_epoch: o.result.best_epoch,
                best_val_mae: o.result.best_val_mae,
                diverged: o.result.diverged,
                val: o.val_report.clone(),
            })
            .collect(),
    }
}

pub fn run(args: &TrainArgs) -> Result<u8> {
    let base = effective_config(args.config.as_deref(), args.variant.as_deref(), &args.overrides)?;
    let seeds = match &args.seeds {
        Some(spec) => parse_seed_spec(spec)?,
        None => vec![base.seed],
    };
    let started = Instant::now();
    let dataset_sha256 = sha256_file(&args.data)?;
    let (_, dataset) = load_windows(
        &args.data,
        base.input_steps,
        base.output_steps,
        Default::default(),
    )?;
    std::fs::create_dir_all(&args.out_dir)?;

    let mut outcomes = Vec::with_capacity(seeds.len());
    let mut any_diverged = false;
    for &seed in &seeds {
        let config = TrainConfig { seed, ..base };
        let seed_started = Instant::now();
        let outcome = run_seed(&config, &dataset)?;
        let seed_dir = args.out_dir.join(format!("seed_{seed}"));
        std::fs::create_dir_all(&seed_dir)?;
        let checkpoint_path = seed_dir.join("checkpoint.json");
        Checkpoint::from_params(&outcome.result.params, seed).save(&checkpoint_path)?;
        let history_path = seed_dir.join("history.csv");
        write_history(&outcome.result.history, &history_path)?;
        let manifest = RunManifest {
            command: "train".into(),
            config,
            seeds: vec![seed],
            dataset_path: args.data.display().to_string(),
            dataset_sha256: dataset_sha256.clone(),
            version: tool_version(),
            duration_seconds: seed_started.elapsed().as_secs_f64(),
            parameter_count: Some(outcome.result.params.parameter_count()),
            outputs: vec![
                checkpoint_path.display().to_string(),
                history_path.display().to_string(),
            ],
        };
        write_json_atomic(&manifest, &seed_dir.join("manifest.json"))?;
        if outcome.result.diverged {
            any_diverged = true;
            println!(
                "seed {seed}: DIVERGED after {} epoch(s); best checkpoint retained",
                outcome.result.history.len()
            );
        } else {
            println!(
                "seed {seed}: best epoch {} val mae {:.6}",
                outcome.result.best_epoch, outcome.result.best_val_mae
            );
        }
        outcomes.push(outcome);
    }

    if seeds.len() > 1 {
        let path = args.out_dir.join("aggregate.json");
        write_json_atomic(&aggregate(&outcomes), &path)?;
        println!("aggregate over {} seeds: {}", seeds.len(), path.display());
    }
    println!(
        "finished {} run(s) in {:.1}s",
        seeds.len(),
        started.elapsed().as_secs_f64()
    );
    Ok(if any_diverged { EXIT_DIVERGED } else { 0 })
}

/// Loads a checkpoint and rebuilds its parameters.
pub fn load_params(path: &Path) -> Result<(Checkpoint, SgruParams)> {
    let checkpoint = Checkpoint::load(path)?;
    let params = checkpoint.to_params()?;
    Ok((checkpoint, params))
}

/// Guards checkpoint dimensions against a dataset.
pub fn check_shapes(params: &SgruParams, dataset: &WindowedDataset) -> Result<()> {
    let dims = &params.dims;
    if dims.num_nodes != dataset.num_nodes
        || dims.input_channels != dataset.input_channels
        || dims.input_steps != dataset.input_steps
        || dims.output_steps != dataset.output_steps
        || dims.output_channels != dataset.output_channels
    {
        return Err(Error::Config(format!(
            "checkpoint expects {} nodes, {} channel(s), {} in / {} out steps; dataset has {} nodes, {} channel(s), {} in / {} out steps",
            dims.num_nodes,
            dims.input_channels,
            dims.input_steps,
            dims.output_steps,
            dataset.num_nodes,
            dataset.input_channels,
            dataset.input_steps,
            dataset.output_steps,
        )));
    }
    Ok(())
}
