use thiserror::Error;

/// Errors raised across the toolkit. Field-level spec errors carry the
/// offending field name so config problems can be reported precisely.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("schema error in `{field}`: {msg}")]
    Schema { field: String, msg: String },

    #[error("invariant violated for `{field}`: {msg}")]
    Invariant { field: String, msg: String },

    #[error("moment diverged: {0}")]
    Diverged(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("depth error: {0}")]
    Depth(String),

    #[error("non-monotone F_L at index {index}")]
    NonMonotone { index: usize },

    #[error("failed to bracket tau({q}): |t| exceeded {limit}")]
    Bracket { q: f64, limit: f64 },

    #[error("interval J is empty on the scanned range")]
    EmptyJ,

    #[error("bin width {width:e} below precision floor")]
    Binning { width: f64 },

    #[error("empty ball at point {point:?}")]
    EmptyBall { point: Vec<f64> },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("level {y} outside projected range [{lo}, {hi}]")]
    OutOfRange { y: f64, lo: f64, hi: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn schema(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Schema {
            field: field.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn invariant(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Invariant {
            field: field.into(),
            msg: msg.into(),
        }
    }
}
