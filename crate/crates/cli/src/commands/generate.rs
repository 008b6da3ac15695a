use sha2::{Digest, Sha256};

use delu_core::{ContractProblem, ProblemGenConfig};

use crate::args::GenerateArgs;
use crate::error::CliResult;
use crate::manifest::{with_manifest, RunManifest};

use super::{seed_override, write_text};

/// Writes the generated problem and returns the file's SHA-256 in hex.
pub fn run_generate(mut args: GenerateArgs) -> CliResult<String> {
    if let Some(seed) = seed_override()? {
        args.seed = seed;
    }
    let cfg = ProblemGenConfig {
        m: args.m,
        n: args.n,
        alpha_p: args.alpha_p,
        beta_p: args.beta_p,
        seed: args.seed,
    };
    cfg.validate()?;
    let problem = ContractProblem::generate(&cfg)?;
    let manifest = RunManifest::new("generate", &args, vec![args.seed]);
    let body = with_manifest(problem.to_json_value(), &manifest);
    let text = serde_json::to_string_pretty(&body).expect("json serializes") + "\n";
    write_text(&args.out, &text)?;
    let digest = Sha256::digest(text.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}
