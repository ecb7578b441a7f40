use thiserror::Error;

/// Errors raised across data validation, fitting and estimation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}: outcome missing for a source (s=1) observation")]
    MissingOutcome { row: usize },

    #[error("row {row}: `{field}` must be 0 or 1, got {value}")]
    NonBinaryCode {
        row: usize,
        field: &'static str,
        value: f64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("no observations with s={s}")]
    EmptyArm { s: u8 },

    #[error("outcome bounds must satisfy y_min < y_max (got {lo}, {hi})")]
    DegenerateBounds { lo: f64, hi: f64 },

    #[error("row {row}: {msg}")]
    InvalidValue { row: usize, msg: String },

    #[error("all regression weights are zero")]
    AllZeroWeights,

    #[error("singular design: weighted normal equations are rank deficient")]
    SingularDesign,

    #[error("row {row}: sampling probability `pi` is missing")]
    MissingPi { row: usize },

    #[error("fold {fold}: {reason}")]
    FoldTooSmall { fold: usize, reason: String },

    #[error("fitting nuisance component `{name}`: {source}")]
    Component {
        name: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("scenario `{label}` aborted: {failed} of {reps} replications failed")]
    ScenarioAborted {
        label: String,
        failed: usize,
        reps: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn in_component(self, name: &'static str) -> Self {
        Error::Component {
            name,
            source: Box::new(self),
        }
    }

    /// Row index of the offending observation, when the error is tied to one.
    pub fn row(&self) -> Option<usize> {
        match self {
            Error::MissingOutcome { row }
            | Error::NonBinaryCode { row, .. }
            | Error::InvalidValue { row, .. }
            | Error::MissingPi { row } => Some(*row),
            Error::Component { source, .. } => source.row(),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
