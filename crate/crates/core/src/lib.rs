//! Contract design with discontinuous piecewise-affine networks.
//!
//! The crate learns a DeLU approximation of a principal's utility over
//! contracts and searches it for good contracts, either exactly per linear
//! piece with a simplex solver or with a log-barrier gradient method. An
//! exact per-action LP oracle serves as ground truth.

pub mod error;
pub mod delu;
pub mod diagnostics;
pub mod inference;
pub mod linalg;
pub mod lp;
pub mod problem;
pub mod rng;

pub use delu::{ActivationPattern, DeluNetwork, TrainConfig, Variant};
pub use error::{Error, Result};
pub use inference::{gradient_inference, lp_inference, sub_argmax_inference, BarrierConfig, InferenceMethod, InferenceResult};
pub use linalg::Matrix;
pub use lp::{oracle_optimal_contract, solve_lp, LinearProgram, LpSolution, LpStatus, OracleSolution};
pub use problem::{AgentResponse, Contract, ContractProblem, ProblemGenConfig};
