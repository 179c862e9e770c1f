use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum SweepError {
    #[error("polyhedron is empty{}", context_suffix(.0))]
    InfeasiblePolyhedron(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("point is not in the set (distance {distance:.3e} exceeds {tol:.3e})")]
    PointNotInSet { distance: f64, tol: f64 },

    #[error("time {t} outside of [{lo}, {hi}]")]
    TimeOutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("unknown catalog entry `{0}`")]
    UnknownCatalogEntry(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("initial state is not in the moving set (distance {0:.3e})")]
    InfeasibleStart(f64),

    #[error("trajectory carries no forcing record")]
    MissingForcingRecord,

    #[error("no convergence: last refinement distance {last:.3e} > tol {tol:.3e} at k = {k}")]
    NoConvergence {
        last: f64,
        tol: f64,
        k: usize,
        result: Box<(crate::catchup::Trajectory, crate::catchup::CauchyReport)>,
    },

    #[error("level {level} too large (limit {limit})")]
    LevelTooLarge { level: u32, limit: u32 },

    #[error("domain mismatch: [{a0}, {a1}] vs [{b0}, {b1}]")]
    DomainMismatch { a0: f64, a1: f64, b0: f64, b1: f64 },

    #[error("no feasible start: sampled reference violates constraints by {0:.3e}")]
    NoFeasibleStart(f64),

    #[error("no feasible candidate among {0} grid points")]
    NoFeasibleCandidate(u64),

    #[error("enumeration of {} rollouts exceeds the limit {limit:.0e}", count_text(*.count))]
    EnumerationTooLarge { count: f64, limit: f64 },
}

fn count_text(count: f64) -> String {
    if count.is_finite() {
        format!("{count:.3e}")
    } else {
        "more than 1e308".to_string()
    }
}

fn context_suffix(s: &str) -> String {
    if s.is_empty() {
        String::new()
    } else {
        format!(": {s}")
    }
}

pub type Result<T> = std::result::Result<T, SweepError>;
