use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("step index {t} is outside the schedule (defined for 1..={len})")]
    StepOutOfRange { t: usize, len: usize },

    #[error("step index must be at least 1")]
    ZeroStep,

    #[error("operation `{op}` is not supported for the {schedule} schedule")]
    UnsupportedSchedule { op: &'static str, schedule: &'static str },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("matrix game solver did not converge (residual duality gap {gap:e})")]
    SolverFailure { gap: f64 },

    #[error("learner failed at t={t}, h={h}, s={s}: {source}")]
    Learner {
        t: usize,
        h: usize,
        s: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("rate fit needs at least 3 points with positive gaps: {0}")]
    Fit(String),

    #[error("empty history: {0}")]
    EmptyHistory(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }

    pub(crate) fn json(path: impl AsRef<std::path::Path>, source: serde_json::Error) -> Self {
        Error::Json { path: path.as_ref().display().to_string(), source }
    }
}
