use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),
    #[error("duplicate subsystem label `{0}`")]
    DuplicateLabel(String),
    #[error("subsystem `{label}` has invalid dimension {dim}")]
    InvalidDimension { label: String, dim: usize },
    #[error("total dimension {dim} exceeds the cap of {cap}")]
    DimensionOverflow { dim: usize, cap: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("matrix is not positive semidefinite (minimum eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("matrix is not Hermitian (defect {0:e})")]
    NotHermitian(f64),
    #[error("operator is not unitary (defect {0:e})")]
    NotUnitary(f64),
    #[error("invalid projector family: {0}")]
    InvalidFamily(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid history: {0}")]
    InvalidHistory(String),
    #[error("evaluation time {eval} precedes the final event time {last}")]
    EvalTimeBeforeLastEvent { eval: usize, last: usize },
    #[error("evaluation time {eval} is beyond the schedule horizon {horizon}")]
    EvalTimeBeyondHorizon { eval: usize, horizon: usize },
    #[error("history {0} has zero probability; its consistency factor is undefined")]
    ZeroProbability(String),
    #[error("operation requires a pure global state")]
    RequiresPureState,
    #[error("coarse-graining lists history {0} more than once")]
    OverlappingCoarseGraining(String),
    #[error("traced fragment covers the whole space; use the ordinary decoherence functional")]
    FullTrace,
    #[error("histories are not consistent with respect to tracing {fragment} (max trace norm {max_norm:e})")]
    NotConsistent { fragment: String, max_norm: f64 },
    #[error("exhaustive search over {subsystems} subsystems exceeds the cap of {cap}")]
    SearchTooLarge { subsystems: usize, cap: usize },
    #[error("invalid model configuration: {0}")]
    InvalidModel(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error("tolerance breach: {0}")]
    ToleranceBreach(String),
    #[error("unsupported report format `{0}`")]
    UnsupportedFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
