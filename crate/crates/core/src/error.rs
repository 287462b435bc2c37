use thiserror::Error;

/// Errors produced by embedding, detection and the supporting transforms.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{users} directions cannot be embedded into host vectors of length {length}")]
    InfeasibleRank { users: usize, length: usize },

    #[error("projection basis is ill-conditioned (cond = {cond:e})")]
    IllConditionedBasis { cond: f64 },

    #[error("candidate search of size {count} exceeds the ceiling of {ceiling}")]
    SearchTooLarge { count: u128, ceiling: u64 },

    #[error("directions are linearly dependent")]
    DegenerateBasis,

    #[error("direction lies in the span of the prior directions")]
    DegenerateDirection,

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("image has zero mean intensity")]
    DegenerateImage,

    #[error("parameter derivation failed after {attempts} attempts")]
    DerivationFailure { attempts: u32 },

    #[error(
        "fidelity target {target:.2} dB not reached; best f_g {best_fg} gave {best_psnr:.2} dB"
    )]
    TuningFailure {
        target: f64,
        best_fg: f64,
        best_psnr: f64,
    },
}

impl Error {
    /// Stable kebab-case name, used by the command line for error reporting.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::InfeasibleRank { .. } => "infeasible-rank",
            Error::IllConditionedBasis { .. } => "ill-conditioned-basis",
            Error::SearchTooLarge { .. } => "search-too-large",
            Error::DegenerateBasis => "degenerate-basis",
            Error::DegenerateDirection => "degenerate-direction",
            Error::InvalidImage(_) => "invalid-image",
            Error::DegenerateImage => "degenerate-image",
            Error::DerivationFailure { .. } => "derivation-failure",
            Error::TuningFailure { .. } => "tuning-failure",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
