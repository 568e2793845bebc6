use thiserror::Error;

/// Errors raised by the algebraic and numeric kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("coefficient modes differ (exact vs float)")]
    ModeMismatch,
    #[error("{op}: constant term is zero")]
    ZeroConstantTerm { op: &'static str },
    #[error("{op}: constant term must vanish")]
    NonzeroConstantTerm { op: &'static str },
    #[error("{op}: argument is not of the form 1 + (positive order terms)")]
    NotAUnit { op: &'static str },
    #[error("composition diverges: inner series has a constant term and the outer one is not a polynomial")]
    DivergentComposition,
    #[error("{op} is only available in exact mode")]
    FloatUnsupported { op: &'static str },
    #[error("{op}: truncation exhausted (need degree {need}, have {have})")]
    TruncationExhausted { op: &'static str, need: i64, have: i64 },
    #[error("order undefined: the germ is the identity up to degree {trunc}")]
    OrderUndefined { trunc: u32 },
    #[error("the germ is not tangent to the identity: {0}")]
    NotTangent(String),
    #[error("the origin is dicritical: every direction is characteristic")]
    Dicritical,
    #[error("direction {0} is not characteristic")]
    NotCharacteristic(String),
    #[error("the map is not tangential to the divisor (k is identically infinite)")]
    NotTangential,
    #[error("hypothesis not met: {0}")]
    Hypothesis(String),
    #[error("linear chain stops at step {step}: {reason}")]
    ChainTerminated { step: usize, reason: String },
    #[error("not divisible: {0}")]
    NotDivisible(String),
    #[error("point lies on the branch cut")]
    OnBranchCut,
    #[error("numerical iteration did not converge: {0}")]
    NonConvergence(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

impl Error {
    /// Stable process exit code for this class of failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::TruncationExhausted { .. } => 3,
            Error::NonConvergence(_) => 4,
            Error::Invalid(_) | Error::ModeMismatch => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
