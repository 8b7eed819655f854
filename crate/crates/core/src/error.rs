use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("d = {0} must be squarefree and congruent to 1 mod 4")]
    InvalidDiscriminant(i64),
    #[error("operation requires a norm-Euclidean field (d in {{5, 17}}), got d = {0}")]
    UnsupportedField(i64),
    #[error("no Euclidean quotient found for division in d = {0}")]
    NotEuclidean(i64),
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("x^2 + {m1}x + {m0} is reducible over F_{p}")]
    ReducibleModulus { p: u64, m1: u64, m0: u64 },
    #[error("unsupported finite field F_{p}^{degree}")]
    UnsupportedFiniteField { p: u64, degree: u32 },
    #[error("no element of order {order} in a field with {q} elements")]
    NoRootsOfUnity { order: u64, q: u64 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("singular curve: {0}")]
    SingularCurve(String),
    #[error("cubic does not split over the field: {0}")]
    NoRootsInField(String),
    #[error("exponent window too large: {0}")]
    WindowOverflow(String),
    #[error("norm {0} exceeds the factorization bound")]
    FactorizationBound(String),
    #[error("modulus must be odd (coprime to 2)")]
    EvenModulus,
    #[error("unsupported even-place case: {0}")]
    UnsupportedEvenPlace(String),
    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("unsupported sieve configuration (d = {d}, r = {r})")]
    UnsupportedConfig { d: i64, r: u32 },
    #[error("bad reduction of {label} at {p}")]
    BadReduction { label: String, p: u64 },
    #[error("line {line}: {msg}")]
    Schema { line: usize, msg: String },
    #[error("curve {0} not found")]
    UnknownCurve(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
