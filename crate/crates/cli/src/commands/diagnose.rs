use serde_json::json;

use delu_core::diagnostics::{boundary_alignment, self_alignment, BoundaryTestConfig};

use crate::args::DiagnoseArgs;
use crate::error::{CliError, CliResult};
use crate::manifest::{with_manifest, RunManifest};

use super::{check_inputs, emit_json, read_checkpoint, read_problem, resolve_f_max, seed_override};

/// Computes the alignment report with per-sample labels and emits it.
pub fn run_diagnose(mut args: DiagnoseArgs) -> CliResult<serde_json::Value> {
    if let Some(seed) = seed_override()? {
        args.seed = seed;
    }
    if args.samples == 0 {
        return Err(CliError::usage("--samples must be positive"));
    }
    let cfg = BoundaryTestConfig {
        n_directions: args.directions,
        step_h: args.step_h,
        nonlinear_tol: args.tol,
        boundary_fraction: args.fraction,
        seed: args.seed,
    };
    cfg.validate()?;
    let net = read_checkpoint(&args.checkpoint)?;
    let problem = match (&args.problem, args.against_self) {
        (Some(path), _) => Some(read_problem(path)?),
        (None, true) => None,
        (None, false) => return Err(CliError::usage("--problem is required unless --against-self is given")),
    };
    if let Some(p) = &problem {
        check_inputs(&net, p)?;
    }
    let f_max = resolve_f_max(args.fmax, problem.as_ref())?;
    args.fmax = Some(f_max);

    let mut manifest = RunManifest::new("diagnose", &args, vec![args.seed]);
    let (report, labels) = manifest.time("diagnose", || match (&problem, args.against_self) {
        (Some(p), false) => boundary_alignment(&net, p, args.samples, &cfg, f_max),
        _ => self_alignment(&net, args.samples, &cfg, f_max),
    })?;
    let body = json!({
        "mode": if args.against_self { "self" } else { "truth" },
        "report": report,
        "labels": labels,
    });
    let out = with_manifest(body, &manifest);
    emit_json(args.out.as_ref(), &out)?;
    Ok(out)
}
