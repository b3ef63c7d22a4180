//! Decentralized ergodic coverage control for teams of simulated
//! micro-patterning robots.
//!
//! A team of agents covers a 2D workspace so that the time each agent
//! spends in a region is proportional to a target density. Coverage
//! progress is tracked through spatial Fourier coefficients of the
//! trajectories; agents optionally share and average those coefficients,
//! which lets them divide the task between themselves. Each agent drops
//! dimples at a fixed rate as it moves, so the produced pattern density
//! follows the target.
//!
//! The crate is organized around the simulation pipeline:
//!
//! * [`spectral`] — cosine basis, density transforms, trajectory statistics
//! * [`controller`] — receding-horizon planner with a barrier penalty, plus
//!   a closed-form spectral feedback fallback
//! * [`swarm`] — agent dynamics, dimple deposition, collision handling,
//!   and the trial loop
//! * [`comm`] — statistics exchange between agents
//! * [`metrics`] — ergodic metric, trajectory heterogeneity, and
//!   pattern-quality scores
//! * [`io`], [`targets`], [`config`], [`batch`] — file formats, built-in
//!   targets, configuration, and the batch experiment harness

pub mod batch;
pub mod comm;
pub mod config;
pub mod controller;
pub mod io;
pub mod metrics;
pub mod spectral;
pub mod swarm;
pub mod targets;

pub use spectral::{CoeffVector, DensityMap, SpectralBasis, TrajectoryStats};

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("point ({0}, {1}) lies outside the domain")]
    OutOfDomain(f64, f64),
    #[error("density is not normalized (total mass {0})")]
    NotNormalized(f64),
    #[error("density has zero mass")]
    ZeroMass,
    #[error("coefficient vector has length {got}, basis has {expected} modes")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite gradient at descent iteration {0}")]
    NonFiniteGradient(usize),
    #[error("metric requires at least two agents, got {0}")]
    InsufficientAgents(usize),
    #[error("no dimple events recorded")]
    NoDimples,
    #[error("trial failed at t = {time}: {source}")]
    Trial {
        time: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("trial with seed {seed} failed: {source}")]
    BatchTrial {
        seed: u64,
        #[source]
        source: Box<Error>,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("image: {0}")]
    Image(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
