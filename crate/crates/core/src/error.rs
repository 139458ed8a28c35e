use thiserror::Error;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("cannot parse {what} from {input:?}")]
    Parse { what: &'static str, input: String },

    #[error("duplicate observation for ({country}, {month}, {variable})")]
    DuplicateObservation {
        country: String,
        month: String,
        variable: String,
    },

    #[error("series ({country}, {variable}) has a gap: {month} is missing")]
    Gap {
        country: String,
        variable: String,
        month: String,
    },

    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("non-positive value {value} at {month}; logarithm undefined")]
    Domain { month: String, value: f64 },

    #[error("two shock events land in {month} and no reassignment entry resolves them")]
    ShockConflict { month: String },

    #[error("incomplete panel: {0}")]
    IncompletePanel(String),

    #[error("design has no eligible rows")]
    EmptyDesign,

    #[error("design matrix is rank deficient; collinear columns: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("leverage {leverage} at row {row} is too close to one for the HC3 adjustment")]
    LeverageTooHigh { row: usize, leverage: f64 },

    #[error("restricted variance R Omega R' = {0:e} is degenerate")]
    DegenerateVariance(f64),

    #[error("no rotation satisfied the sign restrictions in {n_draws} draws (acceptance rate 0)")]
    NoAcceptedRotations { n_draws: usize },

    #[error("selection grid is infeasible: {0}")]
    InfeasibleGrid(String),

    #[error("conditional impulse responses require the absolute-value (sign) specification")]
    NotSignSpecification,

    #[error("coefficient layout has no {0} block")]
    UnknownLayout(String),

    #[error("scale factor must be positive, got {0}")]
    NonPositiveScale(f64),

    #[error("significance table is missing the cell ({outcome}, {shock}, h={horizon})")]
    MissingCell {
        outcome: String,
        shock: String,
        horizon: usize,
    },

    #[error("structural model violations: {}", .0.join("; "))]
    ModelViolations(Vec<String>),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Invalid(_) | Error::ModelViolations(_) | Error::NonPositiveScale(_) => {
                ErrorClass::Config
            }
            Error::RankDeficient { .. }
            | Error::LeverageTooHigh { .. }
            | Error::DegenerateVariance(_)
            | Error::NoAcceptedRotations { .. }
            | Error::Numerical(_) => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
