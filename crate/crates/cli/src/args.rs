//! Command-line flags.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use delu_core::{BarrierConfig, InferenceMethod, Variant};

/// Training defaults shared by `train` and `bench`.
pub const DEFAULT_SAMPLES: usize = 5000;
pub const DEFAULT_EPOCHS: usize = 100;
pub const DEFAULT_BATCH: usize = 256;
pub const DEFAULT_LR: f64 = 1e-3;

#[derive(Debug, Parser)]
#[command(name = "delu", version, about = "Contract design with DeLU networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random contract problem.
    Generate(GenerateArgs),
    /// Train a network on sampled contracts of a problem.
    Train(TrainArgs),
    /// Search a trained network for its best contract.
    Infer(InferArgs),
    /// Run the generate, train, infer, oracle and diagnose pipeline over a grid.
    Bench(BenchArgs),
    /// Measure how well a network's discontinuities match the true ones.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantArg {
    Delu,
    Relu,
    Concave,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Delu => Variant::Delu,
            VariantArg::Relu => Variant::Relu,
            VariantArg::Concave => Variant::Concave,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Lp,
    Grad,
    Subargmax,
}

impl From<MethodArg> for InferenceMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Lp => InferenceMethod::PieceLp,
            MethodArg::Grad => InferenceMethod::Barrier,
            MethodArg::Subargmax => InferenceMethod::SubArgmax,
        }
    }
}

/// Where LP regions and barrier start points come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeSource {
    /// The training contracts, regenerated from the sample count and seed.
    Train,
    /// Fresh uniform contracts from an independent stream.
    Random,
}

/// What sub-argmax scores its candidates with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SubargmaxEval {
    /// The true principal utility.
    True,
    /// The network itself.
    Model,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GridArg {
    /// Every (alpha_p, beta_p) in {0.5, 0.7, 0.9} x {0, 0.3, 0.6, 0.9} for each cell.
    Default,
    /// The product of --alphas and --betas for each cell.
    Custom,
    /// One default-grid pair per (m, n, seed) cell, cycling in cell order.
    Rotate,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenerateArgs {
    /// Number of outcomes.
    #[arg(long)]
    pub m: usize,
    /// Number of actions.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.7)]
    pub alpha_p: f64,
    #[arg(long, default_value_t = 0.3)]
    pub beta_p: f64,
    /// Overridden by DELU_SEED when set.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long, value_enum, default_value_t = VariantArg::Delu)]
    pub variant: VariantArg,
    /// Training contracts drawn uniformly from the box.
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = DEFAULT_EPOCHS)]
    pub epochs: usize,
    #[arg(long, default_value_t = DEFAULT_BATCH)]
    pub batch_size: usize,
    #[arg(long, default_value_t = DEFAULT_LR)]
    pub lr: f64,
    /// Width of each hidden layer of the ReLU part, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "32")]
    pub hidden: Vec<usize>,
    /// Width of the bias network's hidden layer.
    #[arg(long, default_value_t = 512)]
    pub zeta_width: usize,
    /// Upper payment bound; defaults to the problem's own bound.
    #[arg(long)]
    pub fmax: Option<f64>,
    /// Overridden by DELU_SEED when set.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// Loss CSV path; defaults to the checkpoint path with `.loss.csv`.
    #[arg(long)]
    pub loss_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BarrierArgs {
    #[arg(long, default_value_t = 1.0)]
    pub t0: f64,
    #[arg(long, default_value_t = 10.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub step: f64,
    #[arg(long, default_value_t = 500)]
    pub max_inner_steps: usize,
    #[arg(long, default_value_t = 0.5)]
    pub backtrack: f64,
    /// Barrier chains started, taken from the front of the probe set;
    /// all probes when omitted.
    #[arg(long)]
    pub starts: Option<usize>,
    #[arg(long, value_enum, default_value_t = SubargmaxEval::True)]
    pub subargmax_eval: SubargmaxEval,
}

impl BarrierArgs {
    pub fn config(&self) -> BarrierConfig {
        BarrierConfig {
            t0: self.t0,
            mu: self.mu,
            eps: self.eps,
            step: self.step,
            max_inner_steps: self.max_inner_steps,
            backtrack_factor: self.backtrack,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InferArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Lp)]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value_t = ProbeSource::Train)]
    pub probe_source: ProbeSource,
    /// Probe count; match the training run to reuse its contracts.
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    /// Probe seed; overridden by DELU_SEED when set.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub barrier: BarrierArgs,
    #[arg(long)]
    pub fmax: Option<f64>,
    /// Also solve the exact oracle and report normalized utility.
    #[arg(long)]
    pub with_oracle: bool,
    /// Result path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Required unless --against-self is given.
    #[arg(long)]
    pub problem: Option<PathBuf>,
    /// Compare the network with itself instead of the true utility.
    #[arg(long)]
    pub against_self: bool,
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    #[arg(long, default_value_t = 200)]
    pub directions: usize,
    /// Probe step as a fraction of the payment bound.
    #[arg(long, default_value_t = 1e-3)]
    pub step_h: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Fraction of nonlinear directions above which a point is a boundary.
    #[arg(long, default_value_t = 0.2)]
    pub fraction: f64,
    /// Overridden by DELU_SEED when set.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub fmax: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "2,5")]
    pub m_list: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "8,32,64")]
    pub n_list: Vec<usize>,
    #[arg(long, value_enum, default_value_t = GridArg::Default)]
    pub grid: GridArg,
    #[arg(long, value_delimiter = ',', default_value = "0.7")]
    pub alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.3")]
    pub betas: Vec<f64>,
    /// Seeds, comma separated; DELU_SEED replaces the list with one seed.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    pub seeds: Vec<u64>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "delu,relu")]
    pub variants: Vec<VariantArg>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "lp,grad,subargmax")]
    pub methods: Vec<MethodArg>,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = DEFAULT_EPOCHS)]
    pub epochs: usize,
    #[arg(long, default_value_t = DEFAULT_BATCH)]
    pub batch_size: usize,
    #[arg(long, default_value_t = DEFAULT_LR)]
    pub lr: f64,
    #[arg(long, value_enum, default_value_t = ProbeSource::Train)]
    pub probe_source: ProbeSource,
    #[command(flatten)]
    pub barrier: BarrierArgs,
    /// Boundary samples for the alignment degree; 0 skips diagnostics.
    #[arg(long, default_value_t = 500)]
    pub diag_samples: usize,
    #[arg(long, default_value_t = 200)]
    pub directions: usize,
    /// Cells run concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub out: PathBuf,
}
