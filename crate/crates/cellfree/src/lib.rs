//! Uplink simulator for scalable cell-free massive MIMO networks.
//!
//! The crate models the full uplink chain of a user-centric cell-free
//! network: geometry and correlated-fading statistics ([`netgen`]), pilot
//! reception and MMSE channel estimation ([`channel`]), competitive initial
//! access under per-AP pilot capacity ([`access`]), five pilot-assignment
//! schemes ([`pilots`]), fractional uplink power control ([`power`]), local
//! combining with two-layer large-scale fading decoding and both
//! Monte-Carlo and closed-form spectral-efficiency evaluation
//! ([`receiver`]), and a seeded experiment harness ([`harness`]).
//!
//! Everything is deterministic given the configured seed: repeated runs
//! reproduce results byte for byte.

pub mod access;
pub mod channel;
pub mod harness;
pub mod linalg;
pub mod netgen;
pub mod pilots;
pub mod power;
pub mod receiver;
pub mod rng;




pub use netgen::{NetworkConfig, NetworkRealization};




/// Errors surfaced by the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("grid deployment needs a square AP count, got {0}")]
    NonSquareGrid(usize),
    #[error("infeasible access instance: {ues} UEs exceed capacity {aps} APs x {tau_p} pilots")]
    InfeasibleAccess { ues: usize, aps: usize, tau_p: usize },
    #[error("AP {ap} serves only protected UEs; pilot capacity cannot be honored")]
    ProtectedCapacityConflict { ap: usize },
    #[error("UE {0} ended with an empty serving set")]
    EmptyServingSet(usize),
    #[error("matrix is numerically singular")]
    SingularMatrix,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
