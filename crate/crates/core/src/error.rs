use num_bigint::BigInt;
use thiserror::Error;

use crate::affine::AffineForm;
use crate::search::PatternClass;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("affine coefficient must be at least 1, got {0}")]
    InvalidCoefficient(BigInt),

    #[error("cannot step {0}: parity depends on k")]
    IndeterminateParity(AffineForm),

    #[error("trajectory of {anchor} exceeded the step cap of {cap}")]
    StepCapExceeded { anchor: AffineForm, cap: usize },

    #[error("invalid pattern class {modulus}k-{remainder}: {reason}")]
    InvalidClass {
        modulus: u64,
        remainder: u64,
        reason: &'static str,
    },

    #[error("invalid residue class: {0}")]
    InvalidResidue(String),

    #[error("trajectory of {0} is already registered")]
    DuplicateRegistration(PatternClass),

    #[error("concrete trajectory of {start} did not resolve within {cap} steps")]
    CapBreach { start: String, cap: u64 },

    #[error("64-bit overflow while iterating from {0}")]
    Overflow(u64),

    #[error("visited set exceeded its limit of {0} entries")]
    MemoryGuard(usize),

    #[error("certificate for {class} fails at k = {k}")]
    VerificationFailed { class: PatternClass, k: u64 },

    #[error("brute-force modulus {0} is above the oracle cap")]
    OracleCap(u64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit status used by the CLI for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::VerificationFailed { .. } => 1,
            Error::StepCapExceeded { .. }
            | Error::CapBreach { .. }
            | Error::MemoryGuard(_)
            | Error::Overflow(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
