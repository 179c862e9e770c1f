//! Solver library for controlled sweeping processes with time delay over
//! polyhedral sets.
//!
//! The dynamics are `-x'(t) ∈ N_{C(t)}(x(t)) + g(t, x(t), x(t - δ(t)), u(t))`
//! with a prescribed history on `[t0 - Δ, t0]`. The crate provides
//!
//! - [`geometry`]: projections, distances and normal cones of polyhedra,
//! - [`problem`]: delay, history, perturbation catalog, controls, validators,
//! - [`catchup`]: the frozen-delay catching-up solver and its a priori bounds,
//! - [`discretize`]: sampled discrete pairs with exact inclusion residuals,
//! - [`optimize`]: the discrete Mayer problems and their solvers,
//! - [`analysis`]: exact L², sup and W^{1,2} distances between signals.

// `!(a > b)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod catchup;
pub mod discretize;
pub mod error;
pub mod geometry;
pub mod optimize;
pub mod problem;

pub use analysis::{dist_l2, dist_w12, gronwall_envelope, sup_dist, NormReport, Signal};
pub use catchup::{CauchyReport, Mesh, SolveOptions, SolveReport, Trajectory};
pub use discretize::{ConvergenceRow, ConvergenceTable, DiscretePair};
pub use error::{Result, SweepError};
pub use geometry::{ActiveSetResult, ConeDecomposition, MovingPolyhedron, Polyhedron, Track, Vector};
pub use optimize::{Candidate, DiscreteOcp, FeasibilityReport, MayerCost, SolveResult};
pub use problem::{ControlSet, ControlSignal, DelaySpec, History, Perturbation, SweepingProblem, ValidationReport};
