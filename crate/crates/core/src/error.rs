use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quadrature did not converge: residual {residual:e} exceeds tolerance {tolerance:e}")]
    Quadrature { residual: f64, tolerance: f64 },

    #[error("derivative order {0} outside 1..=6")]
    DerivativeOrder(usize),

    #[error("epsilon^2 of the {block} block is negative ({value:e}) beyond roundoff")]
    NegativeEpsilon { block: &'static str, value: f64 },

    #[error("separation s = 0 is singular for this quantity; use the s -> 0 limit routines")]
    ZeroSeparation,

    #[error("negative radicand {value:e} in {what}")]
    NegativeRadicand { what: &'static str, value: f64 },

    #[error("linear system is singular: residual {residual:e} after minimum-norm fallback")]
    SingularSystem { residual: f64 },

    #[error("asymptotic regime requires a Gaussian point-spread function")]
    UnsupportedRegime,

    #[error("no local maximum of the QFI: {0}")]
    NoLocalMaximum(&'static str),

    #[error("Fock cutoff {cutoff} too small: tail mass {tail_mass:e} exceeds {bound:e}")]
    CutoffTooSmall { cutoff: usize, tail_mass: f64, bound: f64 },

    #[error("finite-difference estimate unstable: Richardson residual {residual:e} exceeds {tolerance:e}")]
    FiniteDifference { residual: f64, tolerance: f64 },

    #[error("covariance matrix ill-conditioned or indefinite (condition number {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("ratio undefined: reference value is zero")]
    UndefinedRatio,
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    /// True for errors caused by bad input rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::DerivativeOrder(_)
                | Error::ZeroSeparation
                | Error::UnsupportedRegime
                | Error::NoLocalMaximum(_)
        )
    }
}
