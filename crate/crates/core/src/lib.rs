//! Fisher-information limits for resolving two identical incoherent point
//! sources in the presence of thermal noise and detector dark counts.
//!
//! The crate is organised bottom-up:
//!
//! * [`overlap`]: point-spread-function overlap `δ(s)` and every scalar
//!   derived from it (mode-derivative couplings `B±`, effective attenuations).
//! * [`qfi`]: quantum Fisher information of the two-source thermal state, via
//!   the closed form, a general Gaussian-state solver, and asymptotic regimes.
//! * [`fock`]: brute-force truncated Fock-space oracle for the same quantity.
//! * [`spade`]: photon-count statistics of Hermite-Gaussian mode sorting and
//!   the resulting classical Fisher-information bound.
//! * [`montecarlo`]: direct sampling of the photodetection model.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`, which is what the tolerances quoted
//! throughout the docs assume.

pub mod error;
pub mod fock;
pub mod montecarlo;
pub mod overlap;
pub mod qfi;
pub mod scene;
pub mod spade;

mod real;

pub use error::{Error, Result};
pub use real::Real;

pub use overlap::{BSlopes, OverlapCalculus, Psf, PsfKind, Quadrature};
pub use qfi::{Block, CovBlock, QfiResult, Regime};
pub use scene::SceneParams;
pub use spade::SpadeStats;

pub type Psf64 = Psf<f64>;
pub type Overlap64 = OverlapCalculus<f64>;
pub type Scene64 = SceneParams<f64>;
pub type Qfi64 = QfiResult<f64>;
pub type CovBlock64 = CovBlock<f64>;
pub type SpadeStats64 = SpadeStats<f64>;
