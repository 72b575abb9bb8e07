use thiserror::Error;

/// Errors produced by the evaluation engine.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A multi-index exceeded the configured total-degree cap.
    #[error("total degree {degree} exceeds the configured maximum {max}")]
    DegreeLimit { degree: u32, max: u32 },

    /// Dimension of a multi-index does not match the parameter set.
    #[error("index dimension {idx_dim} does not match parameter dimension {dim}")]
    DimensionMismatch { idx_dim: usize, dim: usize },

    /// A machine-precision evaluation produced a non-finite intermediate.
    #[error(
        "non-finite intermediate under machine precision; retry with the \
         extended policy (e.g. 256 mantissa bits)"
    )]
    NonFinite,

    /// Invalid construction parameters (negative counts, bad bounds, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A photon-varying spec annihilates the state or yields a non-positive norm.
    #[error(
        "operation yields non-positive normalization ({norm:.3e}); invalid spec/state combination"
    )]
    NonPositiveNorm { norm: f64 },

    /// A quantity required to be real carried too much imaginary residue.
    #[error("imaginary residue {imag:.3e} exceeds tolerance (scale {scale:.3e})")]
    ImaginaryResidue { imag: f64, scale: f64 },

    /// Quadrature failed to converge when doubling the node count.
    #[error(
        "quadrature did not converge: {coarse:.12e} vs {fine:.12e} (relative change {rel:.3e})"
    )]
    QuadratureNonConvergent { coarse: f64, fine: f64, rel: f64 },

    /// Truncated Fock representation leaks probability past the tail guard.
    #[error("truncation tail mass {tail:.3e} exceeds {tol:.1e}; retry with a larger dimension than {dim}")]
    TruncationTail { tail: f64, tol: f64, dim: usize },

    /// An operation annihilated a Fock-basis state (norm below threshold).
    #[error("operation annihilates the state (norm {norm:.3e})")]
    VanishingNorm { norm: f64 },

    /// Argument outside the supported range.
    #[error("argument out of range: {0}")]
    OutOfRange(String),
}

pub type Result<T> = std::result::Result<T, Error>;
