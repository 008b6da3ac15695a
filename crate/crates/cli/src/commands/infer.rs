use serde_json::json;

use delu_core::diagnostics::normalized_utility;
use delu_core::oracle_optimal_contract;

use crate::args::InferArgs;
use crate::error::CliResult;
use crate::manifest::{with_manifest, RunManifest};

use super::{check_inputs, emit_json, infer_phase, infer_with, probes, read_checkpoint, read_problem, resolve_f_max, seed_override};

/// Runs one inference method and emits the result JSON, which is also
/// returned.
pub fn run_infer(mut args: InferArgs) -> CliResult<serde_json::Value> {
    if let Some(seed) = seed_override()? {
        args.seed = seed;
    }
    let problem = read_problem(&args.problem)?;
    let net = read_checkpoint(&args.checkpoint)?;
    check_inputs(&net, &problem)?;
    let f_max = resolve_f_max(args.fmax, Some(&problem))?;
    args.fmax = Some(f_max);

    let mut manifest = RunManifest::new("infer", &args, vec![args.seed]);
    let probes = probes(&problem, args.probe_source, args.samples, args.seed, f_max)?;
    let result = manifest.time(infer_phase(args.method), || {
        infer_with(&net, &problem, args.method, &probes, &args.barrier, f_max)
    })?;
    let true_utility = problem.principal_utility(&result.contract)?;

    let (oracle_value, normalized) = if args.with_oracle {
        let oracle = manifest.time("oracle", || oracle_optimal_contract(&problem, f_max))?;
        // a zero oracle value leaves the ratio undefined
        (Some(oracle.value), normalized_utility(true_utility, oracle.value).ok())
    } else {
        (None, None)
    };

    let body = json!({
        "method": result.method,
        "contract": result.contract,
        "model_value": result.model_value,
        "true_utility": true_utility,
        "oracle_value": oracle_value,
        "normalized": normalized,
        "pattern": result.pattern,
        "rounds_used": result.rounds_used,
        "f_max": f_max,
    });
    let out = with_manifest(body, &manifest);
    emit_json(args.out.as_ref(), &out)?;
    Ok(out)
}
