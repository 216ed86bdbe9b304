use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use sgru_core::model::Variant;
use sgru_core::train::TrainConfig;
use sgru_core::Result;

use crate::commands::train::{effective_config, run_seed, Overrides};
use crate::commands::{load_windows, EXIT_DIVERGED};
use crate::manifest::{sha256_file, tool_version, write_json_atomic, RunManifest};
use crate::seeds::parse_seed_spec;

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Input CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// JSON config file; its variant field is ignored here.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed or seeds: `7`, `1,2,5`, or inclusive `1..10`.
    #[arg(long)]
    pub seeds: String,
    /// Output directory for the comparison table and manifest.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub fn run(args: &AblateArgs) -> Result<u8> {
    let base = effective_config(args.config.as_deref(), None, &args.overrides)?;
    let seeds = parse_seed_spec(&args.seeds)?;
    let started = Instant::now();
    let dataset_sha256 = sha256_file(&args.data)?;
    let (_, dataset) = load_windows(
        &args.data,
        base.input_steps,
        base.output_steps,
        Default::default(),
    )?;
    std::fs::create_dir_all(&args.out_dir)?;

    let mut any_diverged = false;
    let mut table = String::from("variant,horizon,median_val_mae,mean_val_mae\n");
    for variant in Variant::ALL {
        // horizon -> per-seed validation MAE
        let mut by_horizon: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for &seed in &seeds {
            let config = TrainConfig {
                variant,
                seed,
                ..base
            };
            let outcome = run_seed(&config, &dataset)?;
            if outcome.result.diverged {
                any_diverged = true;
                println!("{} seed {seed}: DIVERGED", variant.label());
            } else {
                println!(
                    "{} seed {seed}: best epoch {} val mae {:.6}",
                    variant.label(),
                    outcome.result.best_epoch,
                    outcome.result.best_val_mae
                );
            }
            for (&h, &v) in &outcome.val_report.per_horizon_mae {
                by_horizon.entry(h).or_default().push(v);
            }
        }
        for (h, mut values) in by_horizon {
            values.sort_by(|a, b| a.total_cmp(b));
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            table.push_str(&format!(
                "{},{},{},{}\n",
                variant.label(),
                h,
                median(&values),
                mean
            ));
        }
    }

    let table_path = args.out_dir.join("ablation.csv");
    std::fs::write(&table_path, &table)?;
    let manifest = RunManifest {
        command: "ablate".into(),
        config: base,
        seeds: seeds.clone(),
        dataset_path: args.data.display().to_string(),
        dataset_sha256,
        version: tool_version(),
        duration_seconds: started.elapsed().as_secs_f64(),
        parameter_count: None,
        outputs: vec![table_path.display().to_string()],
    };
    write_json_atomic(&manifest, &args.out_dir.join("manifest.json"))?;
    println!("wrote {}", table_path.display());
    Ok(if any_diverged { EXIT_DIVERGED } else { 0 })
}
