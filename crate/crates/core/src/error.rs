use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used for process exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed or inconsistent input data.
    Input,
    /// A numerical problem: singular systems, zero denominators, non-finite values.
    Numerical,
    /// A computation succeeded but a validation gate did not.
    Validation,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("no records")]
    NoRecords,

    #[error("line {line}: {message}")]
    MalformedRow { line: u64, message: String },

    #[error("line {line}, column `{column}`: cannot parse {value:?} as a number")]
    NonNumeric {
        line: u64,
        column: String,
        value: String,
    },

    #[error("stratum `{label}` has {count} record(s); at least 2 are required")]
    TooFewRecords { label: String, count: usize },

    #[error("stratum {stratum}: zero variance in {variable}, correlations are undefined")]
    ZeroVariance { stratum: usize, variable: char },

    #[error("invalid summary document: {0}")]
    Summary(String),

    #[error("stratum {stratum}: {message}")]
    InvalidStratum { stratum: usize, message: String },

    #[error("stratum {stratum}: {field} is missing")]
    MissingField { stratum: usize, field: &'static str },

    #[error("invalid sample design: {0}")]
    Design(String),

    #[error(
        "stratum {stratum}: {field} = {covariance} disagrees with correlation-implied {implied} \
         (discrepancy {discrepancy:.4} in correlation units)"
    )]
    InconsistentCovariance {
        stratum: usize,
        field: &'static str,
        covariance: f64,
        implied: f64,
        discrepancy: f64,
    },

    #[error(
        "stratum {stratum}: {field} implies correlation {correlation}, outside the admissible [{lo:.4}, {hi:.4}]"
    )]
    InadmissibleCorrelation {
        stratum: usize,
        field: &'static str,
        correlation: f64,
        lo: f64,
        hi: f64,
    },

    #[error("stratum {stratum}: correlation matrix (yx={yx}, yz={yz}, xz={xz}) is not positive semi-definite")]
    NotPositiveSemiDefinite {
        stratum: usize,
        yx: f64,
        yz: f64,
        xz: f64,
    },

    #[error("population mean of {0} is zero (or negligible against its spread)")]
    ZeroMean(char),

    #[error("zero denominator in {0}")]
    ZeroDenominator(String),

    #[error(
        "singular moment system: V020*V002 - V011^2 = {determinant:e}, condition number ~ {condition:e}"
    )]
    Singular { determinant: f64, condition: f64 },

    #[error("non-finite value from {0}")]
    NonFinite(String),

    #[error("{failed} of {total} replications produced non-finite estimates (limit 0.1%)")]
    TooManyNonFinite { failed: usize, total: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::ZeroMean(_)
            | Error::ZeroDenominator(_)
            | Error::Singular { .. }
            | Error::NonFinite(_)
            | Error::TooManyNonFinite { .. } => ErrorKind::Numerical,
            Error::Validation(_) => ErrorKind::Validation,
            _ => ErrorKind::Input,
        }
    }
}
