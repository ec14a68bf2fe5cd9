use thiserror::Error;

/// Errors shared across the engine.
#[derive(Debug, Error)]
pub enum Error {
    /// Evaluation left the domain of an elementary function (division by a
    /// jet with zero constant term, sqrt/log of a nonpositive constant term).
    #[error("domain error: {0}")]
    Domain(String),

    /// An expression referenced a variable index outside its declared arity.
    #[error("arity error: variable index {index} out of range for {arity} variables")]
    Arity { index: usize, arity: usize },

    /// Operand shapes (dim, order, rank) do not match.
    #[error("shape error: {0}")]
    Shape(String),

    /// A derivative of higher order than the jet truncation was requested.
    #[error("order error: {0}")]
    Order(String),

    /// Contraction requested over two slots of equal variance.
    #[error("variance error: {0}")]
    Variance(String),

    /// Slot index invalid for the tensor rank.
    #[error("slot error: {0}")]
    Slot(String),

    /// Metric not positive definite / not invertible at the evaluation point.
    #[error("singular metric: {0}")]
    SingularMetric(String),

    /// Embedding differential has rank < n at the chart point.
    #[error("degenerate embedding: {0}")]
    DegenerateEmbedding(String),

    /// Operation undefined in this dimension.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Formula has a pole at this dimension.
    #[error("pole at n={n}: {what}")]
    Pole { n: usize, what: String },

    /// Input tensor was required to be trace-free but is not.
    #[error("not trace-free: {0}")]
    NotTraceFree(String),

    #[error("unknown invariant: {0}")]
    UnknownInvariant(String),

    #[error("unknown scenario: {0}")]
    UnknownScenario(String),

    #[error("bad scenario parameters: {0}")]
    BadParams(String),

    /// Scenario/Expr JSON schema violation; `pointer` is a JSON pointer to
    /// the offending node.
    #[error("schema error at {pointer}: {message}")]
    Schema { pointer: String, message: String },
}

impl Error {
    pub fn schema(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
