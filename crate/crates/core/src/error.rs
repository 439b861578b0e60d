use crate::vec2::Vec2;

/// Errors produced by the solver and diagnostic layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The kernel (or a derived quantity) was evaluated at the origin.
    #[error("singular input: kernel evaluated at |x| = 0 (x = {0:?})")]
    SingularInput(Vec2),

    /// A parameter value violates its domain constraint.
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    /// Two particles coincide while integrating with the exact kernel.
    #[error("particles {i} and {j} collided at t = {time}")]
    Collision { i: usize, j: usize, time: f64 },

    /// Explicit time step exceeds the stability bound.
    #[error("CFL violation at t = {time}: dt = {dt} exceeds limit {limit}")]
    CflViolation { dt: f64, limit: f64, time: f64 },

    /// A sample-based estimator received coincident points.
    #[error("duplicate points: samples {i} and {j} coincide")]
    DuplicatePoints { i: usize, j: usize },

    /// Combined support exceeds the exact transport solver's cap.
    #[error("support size {given} exceeds exact-solver cap {cap}")]
    SizeCap { given: usize, cap: usize },

    /// Total masses of the two measures differ.
    #[error("mass mismatch: {a} vs {b}")]
    MassMismatch { a: f64, b: f64 },

    /// A binary or JSON artifact failed to parse.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
