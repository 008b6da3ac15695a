//! DeLU networks: a ReLU sub-network η whose output bias is produced by a
//! tanh network ζ fed the activation pattern, so the represented function
//! is affine on every activation region and may jump between regions.

mod network;
mod train;

pub use network::{
    ActivationPattern, AffinePieceMap, DeluNetwork, DenseLayer, EtaParams, Forward, Gradients,
    PieceLayer, Variant, ZetaParams, DEFAULT_ETA_WIDTH, DEFAULT_ZETA_WIDTH,
};
pub use train::{mse, train, TrainConfig};
