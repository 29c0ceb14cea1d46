use thiserror::Error;

/// Failures surfaced by engine operations.
///
/// Input that cannot be parsed or has the wrong shape maps to exit code 1 on
/// the command line; every other variant is a violated precondition (exit 2).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("zero input")]
    ZeroInput,
    #[error("moduli {0} and {1} are not coprime")]
    NonCoprimeModuli(u64, u64),
    #[error("singular matrix")]
    Singular,
    #[error("not a symplectic similitude: {0}")]
    NotSimilitude(String),
    #[error("division by a non-unit of Z_({0})")]
    NonUnit(u64),
    #[error("inadmissible: {0}")]
    Inadmissible(String),
    #[error("modulus mismatch: {0}")]
    ModulusMismatch(String),
    #[error("subgroup containment fails: {0}")]
    NotContained(String),
    #[error("not invariant: {0}")]
    NotInvariant(String),
    #[error("level {level} exceeds the configured bound {bound}")]
    LevelBound { level: u64, bound: u64 },
    #[error("precondition failed: {0}")]
    Precondition(String),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Malformed(_) | Error::Dimension(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
