use thiserror::Error;

/// Crate-wide error type. Variants are grouped by the layer that raises them;
/// everything funnels into this one enum so the CLI can print a single chain.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parameter {theta} is outside the declared parameter space")]
    ThetaOutsideSpace { theta: f64 },

    #[error("observation {xi} is outside the support of the outcome family")]
    OutsideSupport { xi: f64 },

    #[error("action {action} is not admissible in state {state}")]
    InadmissibleAction { state: usize, action: usize },

    #[error("observation {xi} has zero likelihood under every parameter atom")]
    ImpossibleObservation { xi: f64 },

    #[error("risk functional got an empty value set")]
    EmptyValues,

    #[error("risk level alpha={alpha} must lie in (0, 1)")]
    InvalidAlpha { alpha: f64 },

    #[error("sampling budget {given} is below the minimum {minimum}")]
    BudgetTooSmall { given: usize, minimum: usize },

    #[error("augmented state count exceeded the cap of {cap}")]
    StateCapExceeded { cap: usize },

    #[error("outcome support cannot be truncated to finite length: {0}")]
    UnboundedSupport(String),

    #[error("no stored entry for state {state} at stage {stage}")]
    MissingTableEntry { state: usize, stage: usize },

    #[error("transition into state {state} left the augmented-state universe")]
    UniverseEscape { state: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("maze layout rejected: {0}")]
    BadLayout(String),

    #[error("estimation needs at least one observation")]
    EmptyData,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
