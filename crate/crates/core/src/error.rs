use crate::cnf::Lit;

/// Errors raised by the core operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("step count {k} outside the supported range [{min}, {max}]")]
    StepCount { k: usize, min: usize, max: usize },
    #[error("expected {expected} hex characters, found {found}")]
    HexLength { expected: usize, found: usize },
    #[error("invalid hex string: {0}")]
    Hex(hex::FromHexError),
    #[error("switch vector must have length {expected}, found {found}")]
    SwitchLength { expected: usize, found: usize },
    #[error("switch vector may only contain '0' and '1', found {0:?}")]
    SwitchAlphabet(char),
    #[error("switch vector is empty or longer than 64 positions")]
    SwitchCapacity,
    #[error("assumptions contain both {0} and its negation")]
    ComplementaryAssumptions(Lit),
    #[error("literal {0} refers to a variable outside the formula")]
    UnknownVariable(Lit),
}

impl From<hex::FromHexError> for Error {
    fn from(e: hex::FromHexError) -> Self {
        Error::Hex(e)
    }
}
