use thiserror::Error;

/// Errors raised anywhere in the simulator.
///
/// The variant name doubles as the typed error name the CLI prints on
/// stderr, see [`Error::kind`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: {left:?} vs {right:?}")]
    Dimension {
        context: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("gradient check invalid: {0}")]
    CheckInvalid(String),

    #[error("deep fade: |h| = {magnitude:e} below threshold")]
    DeepFade { magnitude: f64 },

    #[error("degenerate symbol block: all symbols are zero")]
    DegenerateBlock,

    #[error("training diverged at step {step}: loss = {loss}")]
    TrainingFailure { step: usize, loss: f64 },

    #[error("vocabulary error: {0}")]
    Vocabulary(String),

    #[error("sequence length {len} exceeds maximum {max}")]
    Length { len: usize, max: usize },

    #[error("template error: {0}")]
    Template(String),

    #[error("cosine similarity undefined for a zero vector")]
    UndefinedSimilarity,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("bad magic bytes in model file")]
    BadMagic,

    #[error("unsupported model format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("role mismatch: expected {expected}, found {found}")]
    RoleMismatch { expected: String, found: String },

    #[error("model dims {found:?} do not match expected {expected:?}")]
    DimMismatch { expected: Vec<usize>, found: Vec<usize> },

    #[error("truncated or corrupt model file: {0}")]
    Corrupt(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable name of the variant, used for CLI diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "DimensionError",
            Error::Contract(_) => "ContractViolation",
            Error::CheckInvalid(_) => "CheckInvalid",
            Error::DeepFade { .. } => "DeepFade",
            Error::DegenerateBlock => "DegenerateBlock",
            Error::TrainingFailure { .. } => "TrainingFailure",
            Error::Vocabulary(_) => "VocabularyError",
            Error::Length { .. } => "LengthError",
            Error::Template(_) => "TemplateError",
            Error::UndefinedSimilarity => "UndefinedSimilarity",
            Error::Config(_) => "ConfigError",
            Error::BadMagic => "BadMagic",
            Error::Version { .. } => "VersionMismatch",
            Error::RoleMismatch { .. } => "RoleMismatch",
            Error::DimMismatch { .. } => "DimMismatch",
            Error::Corrupt(_) => "CorruptModel",
            Error::Io(_) => "IoError",
            Error::Json(_) => "JsonError",
        }
    }

    pub(crate) fn dim(context: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Dimension {
            context,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
