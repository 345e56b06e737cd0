use thiserror::Error;

/// Errors produced anywhere in the OCR engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("image decode failed: {0}")]
    ImageDecode(String),

    #[error("need at least 4 correspondences, got {found}")]
    InsufficientCorrespondences { found: usize },

    #[error("registration failed: {inliers} inliers, {required} required")]
    RegistrationFailed { inliers: usize, required: usize },

    #[error("point maps to infinity (|w'| < 1e-12)")]
    PointAtInfinity,

    #[error("degenerate region (area {area:.3} px^2)")]
    DegenerateRegion { area: f64 },

    #[error("template schema error: {0}")]
    Schema(String),

    #[error("template validation error: {0}")]
    Validation(String),

    #[error("font error: {0}")]
    Font(String),

    #[error("font has no glyph for {character:?} (U+{:04X})", *character as u32)]
    Glyph { character: char },

    #[error("training diverged at step {step}: loss is not finite")]
    TrainingDiverged { step: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("no digits left after filtering")]
    EmptyAfterFilter,

    #[error("not a valid date: {0:?}")]
    DateRejected(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
