use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("value is indistinguishable from zero at working precision")]
    ZeroAtPrecision,
    #[error("element is a unit but its inverse is not a polynomial of bounded degree")]
    NotExactlyInvertible,
    #[error("domain violation: {0}")]
    DomainViolation(String),
    #[error("degree {degree} exceeds the chart degree bound {bound}")]
    DegreeOverflow { degree: u32, bound: u32 },
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("compactness not certified: {0}")]
    CompactnessUnverified(String),
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("size limit exceeded: {0}")]
    SizeLimit(String),
    #[error("series was not computed from this operator")]
    SeriesMismatch,
    #[error("tail bound cannot certify the polygon: {0}")]
    TailUncertain(String),
    #[error("indeterminate at working precision: {0}")]
    Indeterminate(String),
    #[error("no polygon vertex separates the slopes: {0}")]
    NoBreak(String),
    #[error("not coprime: {0}")]
    NotCoprime(String),
    #[error("zero order mismatch: expected {expected}, found {found}")]
    OrderMismatch { expected: usize, found: usize },
    #[error("Riesz routes disagree (discrepancy valuation {valuation})")]
    RouteDisagreement { valuation: String },
    #[error("kernel rank {found} differs from expected {expected}")]
    RankMismatch { expected: usize, found: usize },
    #[error("rank uncertain: {0}")]
    RankUncertain(String),
    #[error("polynomial does not divide: {0}")]
    NotDivisible(String),
    #[error("kernel is not stable under {0}")]
    NonStableKernel(String),
    #[error("split failure: {0}")]
    SplitFailure(String),
    #[error("base-change kernel is not nilpotent: {0}")]
    NonNilpotentKernel(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("parse error: {0}")]
    Parse(String),
}
