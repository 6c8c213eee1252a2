//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by tensor, circuit, sketch, and learner operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Two operands had incompatible shapes (order or dimension).
    #[error("shape mismatch: {context}")]
    ShapeMismatch {
        /// Human-readable description of the offending shapes.
        context: String,
    },

    /// A dense materialization would exceed the entry cap.
    #[error("dense tensor of order {order} over dim {dim} exceeds entry cap {cap} \
             (override with MOMENTSKETCH_DENSE_CAP)")]
    DenseCapExceeded {
        /// Vector dimension.
        dim: usize,
        /// Tensor order.
        order: usize,
        /// Effective entry cap.
        cap: u64,
    },

    /// A circuit failed structural validation.
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    /// A projection chain failed its structural invariants.
    #[error("invalid projection: {0}")]
    InvalidProjection(String),

    /// A sketch build was missing a required stream order.
    #[error("missing moment stream of order {order} (sketch of order {sketch_order} \
             needs every even order in 2..={max_even} plus order {sketch_order})")]
    MissingStream {
        /// The absent order.
        order: usize,
        /// The order of the sketch being built.
        sketch_order: usize,
        /// Largest even order required.
        max_even: usize,
    },

    /// A parameter was outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A learner was given fewer samples than its stage schedule consumes.
    #[error("insufficient samples: need at least {required}, got {available}")]
    InsufficientSamples {
        /// Samples the stage schedule consumes.
        required: usize,
        /// Samples supplied.
        available: usize,
    },

    /// Rejection sampling exhausted its iteration budget.
    #[error("rejection sampling exceeded {cap_iterations} proposals for one accept \
             (acceptance cap {cap})")]
    RejectionBudgetExhausted {
        /// Proposal budget per accepted point.
        cap_iterations: u64,
        /// Density cap in force.
        cap: f64,
    },

    /// An activation coefficient required by the learner is too small.
    #[error("activation coefficient c_{order} = {value:.3e} is below the floor {floor:.3e}; \
             the moment streams for that order would be unboundedly noisy")]
    CoefficientTooSmall {
        /// Hermite order with the vanishing coefficient.
        order: usize,
        /// Its value.
        value: f64,
        /// The configured floor.
        floor: f64,
    },

    /// I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
