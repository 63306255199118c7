use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} must be strictly positive and finite, got {value}")]
    NonPositiveRate { name: &'static str, value: f64 },

    #[error("unstable system: arrival rate {lambda} fps is not below capacity {capacity} fps")]
    Unstable { lambda: f64, capacity: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("g(z) has no sign change on [0, 1]: g(0) = {g0}, g(1) = {g1}")]
    NoSignChange { g0: f64, g1: f64 },

    #[error("boundary solution failed normalization: |G(1) - 1| = {deviation:e}")]
    BoundaryInvalid { deviation: f64 },

    #[error("removable singularity at z = {z} not resolved: left {left}, right {right}")]
    SingularityUnresolved { z: f64, left: f64, right: f64 },

    #[error("truncation at {levels} levels leaves tail mass {tail_mass:e} (bound {bound:e})")]
    TruncationInsufficient { levels: usize, tail_mass: f64, bound: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot parse grid spec near `{token}`: {reason}")]
    GridParse { token: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable tag, used for the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonPositiveRate { .. } => "non_positive_rate",
            Error::Unstable { .. } => "unstable",
            Error::Domain(_) => "domain",
            Error::NoSignChange { .. } => "no_sign_change",
            Error::BoundaryInvalid { .. } => "boundary_invalid",
            Error::SingularityUnresolved { .. } => "singularity_unresolved",
            Error::TruncationInsufficient { .. } => "truncation_insufficient",
            Error::Config(_) => "config",
            Error::GridParse { .. } => "grid_parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
