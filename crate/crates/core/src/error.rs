use thiserror::Error;

/// Errors produced anywhere in the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("gradient root must be a 1x1 scalar, got shape {0:?}")]
    NonScalarRoot((usize, usize)),

    #[error("unsupported differentiation: {0}")]
    Unsupported(String),

    #[error("parameter slice [{offset}, {end}) out of range for {len} parameters")]
    ParamOutOfRange { offset: usize, end: usize, len: usize },

    #[error("invalid layer sizes {0:?}: need at least two layers, all positive, output width 1")]
    InvalidLayers(Vec<usize>),

    #[error("invalid domain box: {0}")]
    InvalidBox(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate trial function: {0}")]
    Degenerate(String),

    #[error("degeneracy at epoch {epoch}: {reason}")]
    DegenerateEpoch { epoch: usize, reason: String },

    #[error("non-finite loss at epoch {epoch} (loss = {loss}, lambda = {lambda})")]
    NonFinite { epoch: usize, loss: f64, lambda: f64 },

    #[error("singular matrix: zero pivot at column {0}")]
    Singular(usize),

    #[error("configuration invalid: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("unknown registry entry `{0}`")]
    UnknownExperiment(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("artifact directory {0} already exists")]
    ArtifactExists(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("toml parse error: {0}")]
    TomlDe(#[from] toml::de::Error),

    #[error("toml serialize error: {0}")]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::NonScalarRoot(_) => "non_scalar_root",
            Error::Unsupported(_) => "unsupported",
            Error::ParamOutOfRange { .. } => "param_out_of_range",
            Error::InvalidLayers(_) => "invalid_layers",
            Error::InvalidBox(_) => "invalid_box",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Degenerate(_) | Error::DegenerateEpoch { .. } => "degenerate",
            Error::NonFinite { .. } => "non_finite",
            Error::Singular(_) => "singular",
            Error::Config(_) => "config",
            Error::UnknownExperiment(_) => "unknown_experiment",
            Error::Checkpoint(_) => "checkpoint",
            Error::ArtifactExists(_) => "artifact_exists",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::TomlDe(_) | Error::TomlSer(_) => "toml",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
