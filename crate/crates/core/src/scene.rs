use serde::{Deserialize, Serialize};

use crate::real::{lit, Real};
use crate::{Error, Result};

/// Physical scenario shared by every Fisher-information routine.
///
/// `dark` is a per-mode Poisson dark-count rate and only enters the
/// photon-counting statistics in [`crate::spade`] and [`crate::montecarlo`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneParams<T> {
    /// Source separation.
    pub s: T,
    /// Point-spread-function width.
    pub sigma: T,
    /// Attenuation, restricted to (0, 1/2].
    pub eta: T,
    /// Mean photon number emitted by each source.
    pub n_s: T,
    /// Mean thermal noise photons per relevant mode.
    pub n_n: T,
    /// Dark counts per detector per exposure.
    pub dark: T,
}

impl<T: Real> SceneParams<T> {
    pub fn new(s: T, sigma: T, eta: T, n_s: T, n_n: T) -> Self {
        SceneParams { s, sigma, eta, n_s, n_n, dark: T::zero() }
    }

    /// Builds parameters from the detected signal `η·N_s` rather than `N_s`.
    pub fn from_signal(s: T, sigma: T, eta: T, eta_n_s: T, n_n: T) -> Self {
        Self::new(s, sigma, eta, eta_n_s / eta, n_n)
    }

    pub fn with_dark(mut self, dark: T) -> Self {
        self.dark = dark;
        self
    }

    pub fn with_s(mut self, s: T) -> Self {
        self.s = s;
        self
    }

    /// Detected signal photons `η·N_s`.
    pub fn eta_n_s(&self) -> T {
        self.eta * self.n_s
    }

    /// `η·N_s / N_n`; `None` without thermal noise.
    pub fn snr(&self) -> Option<T> {
        if self.n_n > T::zero() {
            Some(self.eta_n_s() / self.n_n)
        } else {
            None
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |x: T| x.is_finite() && x >= T::zero();
        if !finite_nonneg(self.s) {
            return Err(Error::invalid("s", "must be finite and >= 0"));
        }
        if !(self.sigma.is_finite() && self.sigma > T::zero()) {
            return Err(Error::invalid("sigma", "must be finite and > 0"));
        }
        if !(self.eta > T::zero() && self.eta <= lit(0.5)) {
            return Err(Error::invalid("eta", "must lie in (0, 1/2]"));
        }
        if !finite_nonneg(self.n_s) {
            return Err(Error::invalid("n_s", "must be finite and >= 0"));
        }
        if !finite_nonneg(self.n_n) {
            return Err(Error::invalid("n_n", "must be finite and >= 0"));
        }
        if !finite_nonneg(self.dark) {
            return Err(Error::invalid("dark", "must be finite and >= 0"));
        }
        Ok(())
    }
}
