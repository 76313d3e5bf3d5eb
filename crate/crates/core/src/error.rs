//! Crate-wide error type.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside its admissible range.
    InvalidParameter(String),
    /// A modulus fails its congruence requirement (1 mod 2N).
    Congruence { modulus: u64, two_n: u64 },
    /// A value that must be prime is composite.
    NotPrime(u64),
    /// A bounded search (prime search, ...) ran out of candidates.
    SearchExhausted(String),
    /// Operands live under different rings / moduli / domains.
    DomainMismatch(String),
    /// More slots requested than the packing layout provides.
    CapacityExceeded { requested: usize, capacity: usize },
    /// Galois elements must be odd and coprime to 2N.
    InvalidGaloisElement(usize),
    /// No evaluation key generated for the requested Galois element.
    KeyNotFound(usize),
    /// Vector / matrix dimensions do not line up.
    ShapeMismatch(String),
    /// A matrix expected to be integer-valued deviates from the integers.
    Integrality { max_deviation: f64, tol: f64 },
    /// A controller-form conversion failed (rank deficiency, ...).
    Conversion(String),
    /// A scaled message does not fit the plaintext space.
    Overflow(String),
    /// Homomorphic operation applied to a ciphertext of the wrong degree.
    UnsupportedDegree(usize),
    /// Run configuration could not be parsed or validated.
    Config(String),
    /// A run was refused because the parameter budget check failed.
    BudgetRefusal(String),
    /// Underlying I/O failure.
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::Congruence { modulus, two_n } => {
                write!(f, "modulus {modulus} is not 1 mod {two_n}")
            }
            Error::NotPrime(v) => write!(f, "{v} is not prime"),
            Error::SearchExhausted(msg) => write!(f, "search exhausted: {msg}"),
            Error::DomainMismatch(msg) => write!(f, "domain mismatch: {msg}"),
            Error::CapacityExceeded {
                requested,
                capacity,
            } => write!(f, "capacity exceeded: {requested} > {capacity}"),
            Error::InvalidGaloisElement(k) => {
                write!(f, "invalid Galois element {k}: must be odd and < 2N")
            }
            Error::KeyNotFound(k) => write!(f, "no Galois key for element {k}"),
            Error::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            Error::Integrality { max_deviation, tol } => write!(
                f,
                "matrix is not integer-valued: max deviation {max_deviation:.3e} > tol {tol:.3e}"
            ),
            Error::Conversion(msg) => write!(f, "conversion failed: {msg}"),
            Error::Overflow(msg) => write!(f, "message overflow: {msg}"),
            Error::UnsupportedDegree(d) => {
                write!(f, "unsupported ciphertext degree {d}")
            }
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::BudgetRefusal(msg) => write!(f, "budget refusal: {msg}"),
            Error::Io(msg) => write!(f, "io error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
