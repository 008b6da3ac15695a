//! Command implementations and the helpers they share.

mod bench;
mod diagnose;
mod generate;
mod infer;
mod train;

use std::path::{Path, PathBuf};

use delu_core::rng::{self, Stream};
use delu_core::{
    gradient_inference, lp_inference, sub_argmax_inference, Contract, ContractProblem, DeluNetwork,
    InferenceResult,
};

use crate::args::{BarrierArgs, MethodArg, ProbeSource, SubargmaxEval};
use crate::error::{CliError, CliResult};

pub use bench::{run_bench, BenchRow, CSV_COLUMNS, TIMING_COLUMNS};
pub use diagnose::run_diagnose;
pub use generate::run_generate;
pub use infer::run_infer;
pub use train::run_train;

/// Environment variable that replaces every command's seed when set.
pub const SEED_ENV: &str = "DELU_SEED";

/// The seed from the environment override, if any.
pub fn seed_override() -> CliResult<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(text) => text
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::usage(format!("{SEED_ENV} must be an unsigned integer, got `{text}`"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(err) => Err(CliError::usage(format!("{SEED_ENV}: {err}"))),
    }
}

pub(crate) fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::file(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::file(path, e))
}

pub(crate) fn read_problem(path: &Path) -> CliResult<ContractProblem> {
    ContractProblem::from_json_str(&read_text(path)?).map_err(|e| CliError::file(path, e))
}

pub(crate) fn read_checkpoint(path: &Path) -> CliResult<DeluNetwork> {
    DeluNetwork::from_json_str(&read_text(path)?).map_err(|e| CliError::file(path, e))
}

/// Writes pretty JSON to `out`, or to stdout when no path is given.
pub(crate) fn emit_json(out: Option<&PathBuf>, value: &serde_json::Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("json serializes") + "\n";
    match out {
        Some(path) => write_text(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub(crate) fn resolve_f_max(flag: Option<f64>, problem: Option<&ContractProblem>) -> CliResult<f64> {
    let f_max = match (flag, problem) {
        (Some(v), _) => v,
        (None, Some(p)) => p.default_f_max(),
        (None, None) => return Err(CliError::usage("--fmax is required without --problem")),
    };
    if !(f_max > 0.0 && f_max.is_finite()) {
        return Err(CliError::usage(format!("--fmax must be positive and finite, got {f_max}")));
    }
    Ok(f_max)
}

pub(crate) fn check_inputs(net: &DeluNetwork, problem: &ContractProblem) -> CliResult<()> {
    if net.n_inputs() != problem.n_outcomes() {
        return Err(CliError::usage(format!(
            "checkpoint takes {} payments but the problem has {} outcomes",
            net.n_inputs(),
            problem.n_outcomes()
        )));
    }
    Ok(())
}

/// Probe contracts for region collection and barrier starts.
pub(crate) fn probes(
    problem: &ContractProblem,
    source: ProbeSource,
    samples: usize,
    seed: u64,
    f_max: f64,
) -> CliResult<Vec<Contract>> {
    if samples == 0 {
        return Err(CliError::usage("probe sample count must be positive"));
    }
    Ok(match source {
        ProbeSource::Train => problem
            .sample_training_set(samples, f_max, seed)?
            .into_iter()
            .map(|(c, _)| c)
            .collect(),
        ProbeSource::Random => {
            let mut r = rng::stream(seed, Stream::Probes, 0);
            (0..samples)
                .map(|_| {
                    let pay = (0..problem.n_outcomes())
                        .map(|_| rng::uniform(&mut r, 0.0, f_max))
                        .collect();
                    Contract::new(pay)
                })
                .collect::<delu_core::Result<_>>()?
        }
    })
}

/// Runs one inference method. Barrier methods start from the first
/// `--starts` probes.
pub(crate) fn infer_with(
    net: &DeluNetwork,
    problem: &ContractProblem,
    method: MethodArg,
    probes: &[Contract],
    barrier: &BarrierArgs,
    f_max: f64,
) -> CliResult<InferenceResult> {
    let cfg = barrier.config();
    cfg.validate()?;
    let starts = match barrier.starts {
        Some(0) => return Err(CliError::usage("--starts must be positive")),
        Some(k) => &probes[..k.min(probes.len())],
        None => probes,
    };
    let truth = |f: &[f64]| problem.principal_utility_at(f);
    Ok(match method {
        MethodArg::Lp => lp_inference(net, probes, f_max)?,
        MethodArg::Grad => gradient_inference(net, starts, &cfg, f_max)?,
        MethodArg::Subargmax => {
            let eval: Option<delu_core::inference::Evaluator<'_>> = match barrier.subargmax_eval {
                SubargmaxEval::True => Some(&truth),
                SubargmaxEval::Model => None,
            };
            sub_argmax_inference(net, starts, &cfg, f_max, eval)?
        }
    })
}

/// Timing phase name for a method.
pub(crate) fn infer_phase(method: MethodArg) -> &'static str {
    match method {
        MethodArg::Lp => "lp-infer",
        MethodArg::Grad => "grad-infer",
        MethodArg::Subargmax => "subargmax-infer",
    }
}
