use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// `exp` of a value whose log-magnitude is beyond the representable range.
    #[error("tower overflow: log-magnitude {logmag} exceeds {limit}{}", context_suffix(.context))]
    TowerOverflow {
        logmag: f64,
        limit: f64,
        context: Option<String>,
    },

    #[error("real part is not positive (phase {phase})")]
    NonPositiveRealPart { phase: f64 },

    #[error("size limit exceeded: {0}")]
    Size(String),

    #[error("series evaluation at |z| = {radius} is beyond the reliable radius {guard}")]
    Reliability { radius: f64, guard: f64 },

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported mode: {0}")]
    UnsupportedMode(String),

    #[error("integrand out of regime: {0}")]
    OutOfRegime(String),

    #[error("scenario setup failed: {0}")]
    Setup(String),

    #[error("parse error: {0}")]
    Parse(String),
}

fn context_suffix(context: &Option<String>) -> String {
    match context {
        Some(c) => format!(" in {c}"),
        None => String::new(),
    }
}

impl Error {
    /// Attach a description of where an overflow happened, keeping the innermost one.
    pub fn with_context(self, ctx: impl FnOnce() -> String) -> Self {
        match self {
            Error::TowerOverflow {
                logmag,
                limit,
                context: None,
            } => Error::TowerOverflow {
                logmag,
                limit,
                context: Some(ctx()),
            },
            other => other,
        }
    }

    pub fn is_overflow(&self) -> bool {
        matches!(self, Error::TowerOverflow { .. })
    }
}
