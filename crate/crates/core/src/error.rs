//! Crate-wide error type.

/// Errors raised by the distortion calculus, the oracles, and the runtimes.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// A context index is outside `[0, N)`.
    #[error("context index {index} out of range for {n} contexts")]
    ContextOutOfRange { index: usize, n: usize },

    /// An action index is outside `[0, A)`.
    #[error("action index {index} out of range for {a} actions")]
    ActionOutOfRange { index: usize, a: usize },

    /// An operation that is defined within a single query fiber was given
    /// contexts from different fibers.
    #[error("contexts {x} and {x2} belong to different query fibers")]
    CrossFiber { x: usize, x2: usize },

    /// A cluster-level operation was given an empty cluster.
    #[error("operation requires a nonempty cluster")]
    EmptyCluster,

    /// A weight vector or context distribution does not sum to one.
    #[error("distribution is not normalized (sum = {sum})")]
    UnnormalizedDistribution { sum: f64 },

    /// A parameter is outside its admissible range.
    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    /// An exact oracle was asked to run beyond its enumeration cap.
    #[error("{what} requires {given} <= {cap} (exact enumeration cap)")]
    CapacityExceeded {
        what: &'static str,
        cap: usize,
        given: usize,
    },

    /// Instance generation could not satisfy its structural constraints.
    #[error("generation failed: {0}")]
    Generation(String),

    /// Malformed input data (tables, instances, configs).
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// A runtime state precondition was violated (e.g. routing with no
    /// active slots).
    #[error("invalid state: {0}")]
    InvalidState(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that signal an instance too large for an exact
    /// oracle, as opposed to malformed input.
    pub fn is_capacity(&self) -> bool {
        matches!(self, Error::CapacityExceeded { .. })
    }
}
