use std::fmt::Write as _;
use std::path::PathBuf;

use delu_core::delu::train;
use delu_core::{DeluNetwork, TrainConfig, Variant};

use crate::args::TrainArgs;
use crate::error::{CliError, CliResult};
use crate::manifest::{with_manifest, RunManifest};

use super::{read_problem, resolve_f_max, seed_override, write_text};

/// Trains and writes the checkpoint plus the per-epoch loss CSV. Returns
/// the final training mse.
pub fn run_train(mut args: TrainArgs) -> CliResult<f64> {
    if let Some(seed) = seed_override()? {
        args.seed = seed;
    }
    if args.epochs == 0 {
        return Err(CliError::usage("--epochs must be positive"));
    }
    if args.samples == 0 {
        return Err(CliError::usage("--samples must be positive"));
    }
    let problem = read_problem(&args.problem)?;
    let f_max = resolve_f_max(args.fmax, Some(&problem))?;
    args.fmax = Some(f_max);
    let loss_path = args
        .loss_out
        .clone()
        .unwrap_or_else(|| default_loss_path(&args.out));
    args.loss_out = Some(loss_path.clone());

    let mut manifest = RunManifest::new("train", &args, vec![args.seed]);
    let data = problem.sample_training_set(args.samples, f_max, args.seed)?;
    let net = DeluNetwork::init_with(
        problem.n_outcomes(),
        &args.hidden,
        args.zeta_width,
        Variant::from(args.variant),
        args.seed,
    )?;
    let cfg = TrainConfig {
        epochs: args.epochs,
        learning_rate: args.lr,
        batch_size: args.batch_size,
        shuffle_seed: args.seed,
        init_seed: args.seed,
        ..TrainConfig::default()
    };
    cfg.validate()?;
    let (net, losses) = manifest.time("train", || train(net, &data, &cfg))?;

    let body = with_manifest(net.to_json_value(), &manifest);
    write_text(
        &args.out,
        &(serde_json::to_string_pretty(&body).expect("json serializes") + "\n"),
    )?;
    let mut csv = manifest.csv_line();
    csv.push_str("epoch,mse\n");
    for (epoch, loss) in losses.iter().enumerate() {
        writeln!(csv, "{},{loss}", epoch + 1).expect("string write");
    }
    write_text(&loss_path, &csv)?;
    Ok(*losses.last().expect("at least one epoch"))
}

fn default_loss_path(checkpoint: &std::path::Path) -> PathBuf {
    let mut name = checkpoint
        .file_stem()
        .map(|s| s.to_os_string())
        .unwrap_or_else(|| "checkpoint".into());
    name.push(".loss.csv");
    checkpoint.with_file_name(name)
}
