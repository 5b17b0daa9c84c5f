//! Exact and Monte Carlo engines for a directed forest-fire random field on
//! the quarter lattice.
//!
//! A site `(j, k)` burns with a probability set by its left and bottom
//! neighbours (see [`Params`]); fire enters from finite ignition sets on the
//! two axes (see [`Boundary`]). The field is generated one anti-diagonal
//! `j + k = n` at a time, and `Z_n` is the burnt fraction of diagonal `n`.
//!
//! * [`exact`]: the law of small diagonals, two independent ways.
//! * [`mc`]: reproducible streaming simulation and monotone coupling.
//! * [`one_dim`]: the one-dimensional model and its geometric law.
//! * [`analysis`]: convergence diagnostics for `Z_n` and parameter sweeps.
//! * [`verify`]: the self-checks behind `pyrofield verify`.

pub mod analysis;
pub mod bits;
pub mod exact;
pub mod mc;
pub mod model;
pub mod one_dim;
pub mod rng;
pub mod stats;
pub mod verify;

pub use bits::Diagonal;
pub use exact::{
    cylinder_probability, forward, initial_distribution, step_distribution, triangle_enumeration, yn_pmf,
    CylinderEvent, DiagonalDistribution, ExactError, ExactLimits, TriangleJoint, YnPmf,
};
pub use mc::{
    burn_frequency, simulate, simulate_coupled, simulate_replica, McError, ReplicaTrace, SimConfig, SiteWindow,
};
pub use model::{neighbor_statuses, Boundary, Inequality, NeighborPair, ParamError, Params};
pub use one_dim::{OneDError, OneDParams};
pub use stats::{DiagonalStats, RecordSpec, RunStats};
