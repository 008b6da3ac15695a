use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use delu_core::delu::train;
use delu_core::diagnostics::{boundary_alignment_degree, normalized_utility, BoundaryTestConfig};
use delu_core::{
    oracle_optimal_contract, Contract, ContractProblem, DeluNetwork, OracleSolution, ProblemGenConfig, TrainConfig,
    Variant,
};

use crate::args::{BenchArgs, GridArg, MethodArg, ProbeSource, VariantArg};
use crate::error::{CliError, CliResult};
use crate::manifest::{timed, RunManifest};

use super::{infer_phase, infer_with, probes, seed_override, write_text};

/// The twelve (alpha_p, beta_p) combinations of the default grid.
pub const DEFAULT_GRID: [(f64, f64); 12] = [
    (0.5, 0.0),
    (0.5, 0.3),
    (0.5, 0.6),
    (0.5, 0.9),
    (0.7, 0.0),
    (0.7, 0.3),
    (0.7, 0.6),
    (0.7, 0.9),
    (0.9, 0.0),
    (0.9, 0.3),
    (0.9, 0.6),
    (0.9, 0.9),
];

pub const CSV_COLUMNS: [&str; 15] = [
    "m",
    "n",
    "alpha_p",
    "beta_p",
    "seed",
    "variant",
    "method",
    "model_value",
    "true_utility",
    "oracle_value",
    "normalized",
    "alignment_degree",
    "train_ms",
    "infer_ms",
    "error",
];

/// Wall-clock columns, excluded when comparing runs.
pub const TIMING_COLUMNS: [&str; 2] = ["train_ms", "infer_ms"];

/// One (cell, variant, method) outcome. Empty fields mean the step failed
/// or was skipped; `error` says why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub m: usize,
    pub n: usize,
    pub alpha_p: f64,
    pub beta_p: f64,
    pub seed: u64,
    pub variant: String,
    pub method: String,
    pub model_value: Option<f64>,
    pub true_utility: Option<f64>,
    pub oracle_value: Option<f64>,
    pub normalized: Option<f64>,
    pub alignment_degree: Option<f64>,
    pub train_ms: Option<f64>,
    pub infer_ms: Option<f64>,
    pub error: String,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    gen: ProblemGenConfig,
}

type Timings = BTreeMap<String, f64>;

fn cells(args: &BenchArgs) -> CliResult<Vec<Cell>> {
    let mut out = Vec::new();
    let mut ordinal = 0;
    for &m in &args.m_list {
        for &n in &args.n_list {
            for &seed in &args.seeds {
                let pairs: Vec<(f64, f64)> = match args.grid {
                    GridArg::Default => DEFAULT_GRID.to_vec(),
                    GridArg::Custom => args
                        .alphas
                        .iter()
                        .flat_map(|&a| args.betas.iter().map(move |&b| (a, b)))
                        .collect(),
                    GridArg::Rotate => vec![DEFAULT_GRID[ordinal % DEFAULT_GRID.len()]],
                };
                ordinal += 1;
                for (alpha_p, beta_p) in pairs {
                    let gen = ProblemGenConfig {
                        m,
                        n,
                        alpha_p,
                        beta_p,
                        seed,
                    };
                    gen.validate()?;
                    out.push(Cell { gen });
                }
            }
        }
    }
    out.sort_by(|a, b| {
        let (a, b) = (a.gen, b.gen);
        (a.m, a.n)
            .cmp(&(b.m, b.n))
            .then(a.alpha_p.total_cmp(&b.alpha_p))
            .then(a.beta_p.total_cmp(&b.beta_p))
            .then(a.seed.cmp(&b.seed))
    });
    Ok(out)
}

fn validate(args: &BenchArgs) -> CliResult<()> {
    let empty = [
        ("--m-list", args.m_list.is_empty()),
        ("--n-list", args.n_list.is_empty()),
        ("--seeds", args.seeds.is_empty()),
        ("--variants", args.variants.is_empty()),
        ("--methods", args.methods.is_empty()),
        ("--alphas", args.grid == GridArg::Custom && args.alphas.is_empty()),
        ("--betas", args.grid == GridArg::Custom && args.betas.is_empty()),
    ];
    if let Some((flag, _)) = empty.iter().find(|(_, e)| *e) {
        return Err(CliError::usage(format!("{flag} must not be empty")));
    }
    if args.epochs == 0 || args.samples == 0 || args.jobs == 0 {
        return Err(CliError::usage("--epochs, --samples and --jobs must be positive"));
    }
    if args.barrier.starts == Some(0) {
        return Err(CliError::usage("--starts must be positive"));
    }
    args.barrier.config().validate()?;
    train_config(args, 0).validate()?;
    if args.diag_samples > 0 {
        diag_config(args, 0).validate()?;
    }
    Ok(())
}

fn train_config(args: &BenchArgs, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: args.epochs,
        learning_rate: args.lr,
        batch_size: args.batch_size,
        shuffle_seed: seed,
        init_seed: seed,
        ..TrainConfig::default()
    }
}

fn diag_config(args: &BenchArgs, seed: u64) -> BoundaryTestConfig {
    BoundaryTestConfig {
        n_directions: args.directions,
        seed,
        ..BoundaryTestConfig::default()
    }
}

/// Runs every cell, writes the CSV and returns its rows. Fails only when
/// no row produced a result.
pub fn run_bench(mut args: BenchArgs) -> CliResult<Vec<BenchRow>> {
    if let Some(seed) = seed_override()? {
        args.seeds = vec![seed];
    }
    validate(&args)?;
    let cells = cells(&args)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| CliError::Numeric(format!("cannot start worker pool: {e}")))?;
    let results: Vec<(Vec<BenchRow>, Timings)> =
        pool.install(|| cells.par_iter().map(|cell| run_cell(cell, &args)).collect());

    let mut manifest = RunManifest::new("bench", &args, args.seeds.clone());
    let mut rows = Vec::new();
    for (cell_rows, timings) in results {
        rows.extend(cell_rows);
        for (phase, ms) in timings {
            manifest.add_time(&phase, ms);
        }
    }

    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    writer.write_record(CSV_COLUMNS).map_err(|e| CliError::file(&args.out, e))?;
    for row in &rows {
        writer.serialize(row).map_err(|e| CliError::file(&args.out, e))?;
    }
    let body = writer.into_inner().map_err(|e| CliError::file(&args.out, e))?;
    let text = manifest.csv_line() + &String::from_utf8(body).expect("csv is utf-8");
    write_text(&args.out, &text)?;

    if rows.iter().all(|r| r.model_value.is_none()) {
        return Err(CliError::Numeric("every bench row failed".into()));
    }
    Ok(rows)
}

fn run_cell(cell: &Cell, args: &BenchArgs) -> (Vec<BenchRow>, Timings) {
    let mut timings = Timings::new();
    let mut rows = Vec::new();
    let g = cell.gen;
    let blank = |variant: VariantArg, method: MethodArg, error: String| BenchRow {
        m: g.m,
        n: g.n,
        alpha_p: g.alpha_p,
        beta_p: g.beta_p,
        seed: g.seed,
        variant: Variant::from(variant).as_str().into(),
        method: delu_core::InferenceMethod::from(method).as_str().into(),
        model_value: None,
        true_utility: None,
        oracle_value: None,
        normalized: None,
        alignment_degree: None,
        train_ms: None,
        infer_ms: None,
        error,
    };

    let setup = || -> CliResult<(ContractProblem, f64, Vec<(Contract, f64)>, Vec<Contract>)> {
        let problem = ContractProblem::generate(&g)?;
        let f_max = problem.default_f_max();
        let data = problem.sample_training_set(args.samples, f_max, g.seed)?;
        let probes = match args.probe_source {
            ProbeSource::Train => data.iter().map(|(c, _)| c.clone()).collect(),
            ProbeSource::Random => probes(&problem, ProbeSource::Random, args.samples, g.seed, f_max)?,
        };
        Ok((problem, f_max, data, probes))
    };
    let (problem, f_max, data, probes) = match setup() {
        Ok(v) => v,
        Err(e) => {
            for &variant in &args.variants {
                for &method in &args.methods {
                    rows.push(blank(variant, method, format!("generate: {e}")));
                }
            }
            return (rows, timings);
        }
    };

    let (oracle, ms) = timed(|| oracle_optimal_contract(&problem, f_max));
    *timings.entry("oracle".into()).or_default() += ms;
    let oracle: Result<OracleSolution, String> = oracle.map_err(|e| format!("oracle: {e}"));

    for &variant in &args.variants {
        let trained = timed(|| -> CliResult<DeluNetwork> {
            let net = DeluNetwork::init(g.m, variant.into(), g.seed)?;
            Ok(train(net, &data, &train_config(args, g.seed))?.0)
        });
        let (net, train_ms) = match trained {
            (Ok(net), ms) => (net, ms),
            (Err(e), _) => {
                for &method in &args.methods {
                    rows.push(blank(variant, method, format!("train: {e}")));
                }
                continue;
            }
        };
        *timings.entry("train".into()).or_default() += train_ms;

        let mut notes: Vec<String> = Vec::new();
        let alignment = if args.diag_samples > 0 {
            let (report, ms) = timed(|| {
                boundary_alignment_degree(&net, &problem, args.diag_samples, &diag_config(args, g.seed), f_max)
            });
            *timings.entry("diagnose".into()).or_default() += ms;
            match report {
                Ok(r) => Some(r.degree),
                Err(e) => {
                    notes.push(format!("diagnose: {e}"));
                    None
                }
            }
        } else {
            None
        };

        for &method in &args.methods {
            let mut row = blank(variant, method, String::new());
            row.train_ms = Some(train_ms);
            row.alignment_degree = alignment;
            let mut row_notes = notes.clone();
            let (result, infer_ms) = timed(|| infer_with(&net, &problem, method, &probes, &args.barrier, f_max));
            *timings.entry(infer_phase(method).into()).or_default() += infer_ms;
            match result {
                Ok(res) => {
                    row.infer_ms = Some(infer_ms);
                    row.model_value = Some(res.model_value);
                    let truth = problem.principal_utility_at(res.contract.pay());
                    row.true_utility = Some(truth);
                    match &oracle {
                        Ok(o) => {
                            row.oracle_value = Some(o.value);
                            match normalized_utility(truth, o.value) {
                                Ok(v) => row.normalized = Some(v),
                                Err(e) => row_notes.push(format!("normalize: {e}")),
                            }
                        }
                        Err(e) => row_notes.push(e.clone()),
                    }
                }
                Err(e) => row_notes.push(format!("infer: {e}")),
            }
            row.error = row_notes.join("; ");
            rows.push(row);
        }
    }
    (rows, timings)
}
