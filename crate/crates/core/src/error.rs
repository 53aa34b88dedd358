use thiserror::Error;

/// Errors raised anywhere in the protocol stack.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("modulus {0} is not prime")]
    NotPrime(u64),
    #[error("modulus {0} exceeds the supported range (q < 2^32)")]
    ModulusTooLarge(u64),
    #[error("division by zero")]
    DivisionByZero,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("infeasible parameters: need N > {bound}, got N = {n}")]
    InfeasibleParams { n: usize, bound: usize },
    #[error("field of size {q} is too small, need q >= {required}")]
    FieldTooSmall { q: u64, required: u64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("duplicate interpolation node at x = {0}")]
    DuplicateNode(u64),
    #[error("message degree {degree} too high for {points} evaluation points")]
    DegreeTooHigh { degree: usize, points: usize },
    #[error("decode failure: {0}")]
    DecodeFailure(String),

    #[error("not enough shares: have {have}, need {need}")]
    NotEnoughShares { have: usize, need: usize },
    #[error("server privacy mode is off")]
    ModeOff,
    #[error("missing query from user {user} for server {server} in round {round}")]
    MissingQuery {
        user: usize,
        server: usize,
        round: usize,
    },
    #[error("missing decoded round {0}")]
    MissingRound(usize),
    #[error("adversary out of bounds: {0}")]
    AdversaryOutOfBounds(String),
    #[error("retrieved file differs from the stored file")]
    WrongFile,

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
