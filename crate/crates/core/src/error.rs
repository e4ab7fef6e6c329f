use thiserror::Error;

#[derive(Debug, Error)]
pub enum VslqError {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operator is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("integration diverged at t = {time} ns: {reason}")]
    IntegrationDiverged { time: f64, reason: String },

    #[error("calibration failed: {0}")]
    CalibrationFailed(String),

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("equilibration failed: logical fidelity {fidelity:.4} below {threshold}")]
    EquilibrationFailed { fidelity: f64, threshold: f64 },

    #[error("resonator truncation saturated: top-level population {0:.3e}")]
    ResonatorSaturated(f64),

    #[error("initial condition {label}: {source}")]
    InitialCondition {
        label: String,
        #[source]
        source: Box<VslqError>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, VslqError>;
