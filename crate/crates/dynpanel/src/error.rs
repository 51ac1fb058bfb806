//! Crate-wide error type.

use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A CSV row could not be parsed into the panel schema.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// The CSV header does not match the declared schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// A value is outside its admissible domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// An individual's periods are non-consecutive under strict gap policy.
    #[error("gap policy violation for individual {id}: {detail}")]
    GapPolicy { id: String, detail: String },

    /// No untrimmed switcher window contributes, so every parameter ties at 0.
    #[error("no untrimmed switcher windows: the objective is identically zero")]
    NoSwitchers,

    /// The feasibility floor excluded every candidate even after restarts.
    #[error("no feasible point found after {restarts} restarts (iota = {iota})")]
    NoFeasiblePoint { restarts: u32, iota: f64 },

    /// A vector with (near-)zero norm cannot be projected onto the sphere.
    #[error("degenerate vector: norm below 1e-300")]
    DegenerateVector,

    /// The exhaustive grid oracle refuses high-dimensional problems.
    #[error("dimension {dim} too large for the grid oracle (max {max})")]
    DimensionTooLarge { dim: usize, max: usize },

    /// Both bootstrap spread statistics collapsed to zero.
    #[error("degenerate bootstrap spread: cannot estimate a convergence rate")]
    DegenerateSpread,

    /// Too many bootstrap replicates failed to optimize.
    #[error("{failed} of {total} bootstrap replicates failed (limit 10%)")]
    FailureRate { failed: usize, total: usize },

    /// Too few simulated draws survived the tail conditioning.
    #[error("insufficient tail draws: {surviving} survived, {required} required")]
    InsufficientTailDraws { surviving: usize, required: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
