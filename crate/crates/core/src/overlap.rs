//! Point-spread-function overlap and the scalars derived from it.
//!
//! For a real PSF `ψ` the overlap of the two displaced images is
//! `δ(s) = ∫ψ(x + s/2)ψ(x − s/2)dx`. Everything else in the crate consumes
//! `δ` through an [`OverlapCalculus`] evaluated at one separation.
//!
//! Two PSF kinds are supported. The Gaussian PSF
//! `ψ(x) = exp(−x²/4σ²)/(2πσ²)^{1/4}` has `δ(s) = exp(−s²/8σ²)` and all
//! derivatives in closed form. A sampled PSF is reduced once to its power
//! spectrum, so that `δ(s) = Σ_k w_k cos(ω_k s)` and derivatives act on the
//! cosines (differentiation under the integral, never of `δ` itself).

use crate::real::{lit, to_f64, Real};
use crate::{Error, Result};

/// Sampling grid for numeric PSFs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature<T> {
    pub nodes: usize,
    pub half_width: T,
    pub abs_tolerance: T,
}

impl<T: Real> Quadrature<T> {
    /// 2001 nodes over `[−12σ, 12σ]`, absolute tolerance `1e-12`.
    pub fn default_for(sigma: T) -> Self {
        Quadrature { nodes: 2001, half_width: sigma * lit(12.0), abs_tolerance: lit(1e-12) }
    }
}

/// Power spectrum of a sampled PSF: `δ(s) = Σ weight_k cos(omega_k s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    omega: Vec<T>,
    weight: Vec<T>,
    residual: T,
}

impl<T: Real> Spectrum<T> {
    /// Quadrature diagnostic: the worst of normalisation error, edge
    /// amplitude and near-Nyquist spectral weight.
    pub fn residual(&self) -> T {
        self.residual
    }

    fn derivative(&self, s: T, order: usize) -> T {
        let mut acc = T::zero();
        for (&w, &k) in self.weight.iter().zip(&self.omega) {
            let phase = k * s;
            let trig = match order % 4 {
                0 => phase.cos(),
                1 => -phase.sin(),
                2 => -phase.cos(),
                _ => phase.sin(),
            };
            acc += w * k.powi(order as i32) * trig;
        }
        acc
    }

    fn one_minus(&self, s: T) -> T {
        let two: T = lit(2.0);
        self.weight
            .iter()
            .zip(&self.omega)
            .map(|(&w, &k)| {
                let h = (k * s / two).sin();
                two * w * h * h
            })
            .fold(T::zero(), |a, b| a + b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PsfKind<T> {
    GaussianAnalytic,
    NumericSampled(Spectrum<T>),
}

/// A real, one-dimensional point-spread function of width `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct Psf<T> {
    sigma: T,
    quadrature: Quadrature<T>,
    kind: PsfKind<T>,
}

/// Gaussian PSF amplitude `exp(−x²/4σ²)/(2πσ²)^{1/4}`.
pub fn gaussian_amplitude<T: Real>(sigma: T, x: T) -> T {
    let two: T = lit(2.0);
    let norm = (two * T::pi() * sigma * sigma).powf(lit(-0.25));
    norm * (-(x * x) / (lit::<T>(4.0) * sigma * sigma)).exp()
}

fn check_sigma<T: Real>(sigma: T) -> Result<()> {
    if sigma.is_finite() && sigma > T::zero() {
        Ok(())
    } else {
        Err(Error::invalid("sigma", "must be finite and > 0"))
    }
}

impl<T: Real> Psf<T> {
    pub fn gaussian(sigma: T) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(Psf { sigma, quadrature: Quadrature::default_for(sigma), kind: PsfKind::GaussianAnalytic })
    }

    /// Samples `amplitude` on `quadrature.nodes` points over
    /// `[−half_width, half_width]` and reduces it to its power spectrum.
    ///
    /// The samples are zero-padded to at least twice their length so the
    /// autocorrelation is linear rather than circular for every separation
    /// up to the sampling half-width.
    pub fn sampled(sigma: T, quadrature: Quadrature<T>, amplitude: impl Fn(T) -> T) -> Result<Self> {
        check_sigma(sigma)?;
        if quadrature.nodes < 3 {
            return Err(Error::invalid("quadrature.nodes", "need at least 3 nodes"));
        }
        if !(quadrature.half_width > T::zero()) {
            return Err(Error::invalid("quadrature.half_width", "must be > 0"));
        }
        let n = quadrature.nodes;
        let dx = lit::<T>(2.0) * quadrature.half_width / lit((n - 1) as f64);
        let samples: Vec<T> = (0..n)
            .map(|j| amplitude(-quadrature.half_width + dx * lit(j as f64)))
            .collect();
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("amplitude", "PSF samples must be finite"));
        }

        let m = (2 * n).next_power_of_two();
        let fundamental = lit::<T>(2.0) * T::pi() / (lit::<T>(m as f64) * dx);
        let scale = dx / lit(m as f64);
        let half = m / 2;
        let mut omega = Vec::with_capacity(half + 1);
        let mut weight = Vec::with_capacity(half + 1);
        for k in 0..=half {
            let w = fundamental * lit(k as f64);
            let (mut re, mut im) = (T::zero(), T::zero());
            for (j, &psi) in samples.iter().enumerate() {
                let phase = w * (-quadrature.half_width + dx * lit(j as f64));
                re += psi * phase.cos();
                im -= psi * phase.sin();
            }
            let multiplicity: T = if k == 0 || k == half { T::one() } else { lit(2.0) };
            omega.push(w);
            weight.push(multiplicity * scale * (re * re + im * im));
        }

        let norm = weight.iter().fold(T::zero(), |a, &b| a + b);
        let edge = samples[0].abs().max(samples[n - 1].abs());
        let hf = weight[3 * half / 4..].iter().fold(T::zero(), |a, &b| a + b);
        let residual = (norm - T::one()).abs().max(edge * edge).max(hf);
        if !(residual <= quadrature.abs_tolerance) {
            return Err(Error::Quadrature {
                residual: to_f64(residual),
                tolerance: to_f64(quadrature.abs_tolerance),
            });
        }
        Ok(Psf { sigma, quadrature, kind: PsfKind::NumericSampled(Spectrum { omega, weight, residual }) })
    }

    /// The Gaussian PSF pushed through the sampled route, for cross-checks.
    pub fn sampled_gaussian(sigma: T) -> Result<Self> {
        Self::sampled(sigma, Quadrature::default_for(sigma), |x| gaussian_amplitude(sigma, x))
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn quadrature(&self) -> &Quadrature<T> {
        &self.quadrature
    }

    pub fn kind(&self) -> &PsfKind<T> {
        &self.kind
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.kind, PsfKind::GaussianAnalytic)
    }

    /// `∫ψ²dx`; exactly one for the analytic Gaussian.
    pub fn normalization(&self) -> T {
        match &self.kind {
            PsfKind::GaussianAnalytic => T::one(),
            PsfKind::NumericSampled(sp) => sp.weight.iter().fold(T::zero(), |a, &b| a + b),
        }
    }

    /// `Δk² = β(0) = −δ''(0)`.
    pub fn dk2(&self) -> T {
        -self.derivative_unchecked(T::zero(), 2)
    }

    /// `(δ''(0), δ⁽⁴⁾(0), δ⁽⁶⁾(0))`.
    pub fn even_derivatives_at_zero(&self) -> (T, T, T) {
        let z = T::zero();
        (self.derivative_unchecked(z, 2), self.derivative_unchecked(z, 4), self.derivative_unchecked(z, 6))
    }

    fn gaussian_rate(&self) -> T {
        T::one() / (lit::<T>(8.0) * self.sigma * self.sigma)
    }

    fn derivative_unchecked(&self, s: T, order: usize) -> T {
        match &self.kind {
            PsfKind::GaussianAnalytic => {
                // d^n/ds^n exp(−a s²) = (−√a)^n H_n(√a s) exp(−a s²)
                let a = self.gaussian_rate();
                let ra = a.sqrt();
                let h = hermite(order, ra * s);
                let sign: T = if order % 2 == 0 { T::one() } else { -T::one() };
                sign * ra.powi(order as i32) * h * (-a * s * s).exp()
            }
            PsfKind::NumericSampled(sp) => sp.derivative(s, order),
        }
    }

    /// `1 − δ(s)` without cancellation.
    pub fn one_minus_delta(&self, s: T) -> T {
        match &self.kind {
            PsfKind::GaussianAnalytic => -(-self.gaussian_rate() * s * s).exp_m1(),
            PsfKind::NumericSampled(sp) => sp.one_minus(s),
        }
    }
}

/// Physicists' Hermite polynomial by the three-term recurrence.
fn hermite<T: Real>(n: usize, x: T) -> T {
    let two: T = lit(2.0);
    let (mut prev, mut cur) = (T::one(), two * x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = two * x * cur - two * lit::<T>(k as f64) * prev;
        prev = cur;
        cur = next;
    }
    cur
}

fn check_separation<T: Real>(s: T) -> Result<()> {
    if s.is_finite() && s >= T::zero() {
        Ok(())
    } else {
        Err(Error::invalid("s", "must be finite and >= 0"))
    }
}

/// Overlap `δ(s) = ∫ψ(x + s/2)ψ(x − s/2)dx`.
pub fn delta<T: Real>(psf: &Psf<T>, s: T) -> Result<T> {
    check_separation(s)?;
    Ok(match &psf.kind {
        PsfKind::GaussianAnalytic => (-psf.gaussian_rate() * s * s).exp(),
        PsfKind::NumericSampled(sp) => sp.derivative(s, 0),
    })
}

/// `δ⁽ᵒʳᵈᵉʳ⁾(s)` for `order` in `1..=6`.
pub fn delta_derivative<T: Real>(psf: &Psf<T>, s: T, order: usize) -> Result<T> {
    if !(1..=6).contains(&order) {
        return Err(Error::DerivativeOrder(order));
    }
    check_separation(s)?;
    Ok(psf.derivative_unchecked(s, order))
}

/// Every overlap-derived scalar at one separation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapCalculus<T> {
    pub s: T,
    /// `δ(s)`.
    pub delta: T,
    /// `1 − δ(s)`, evaluated without cancellation.
    pub one_minus_delta: T,
    /// `γ = δ'(s)`.
    pub gamma: T,
    /// `β = −δ''(s)`.
    pub beta: T,
    /// `Δk² = β(0)`.
    pub dk2: T,
    pub delta4_0: T,
    pub delta6_0: T,
    /// `ε±² = Δk² ∓ β − γ²/(1 ± δ)`.
    pub eps_plus2: T,
    pub eps_minus2: T,
    /// `B± = −ε±/(2√(1 ± δ))`.
    pub b_plus: T,
    pub b_minus: T,
    /// `η± = (1 ± δ)η`.
    pub eta_plus: T,
    pub eta_minus: T,
    /// `θ± = arccos √η±`.
    pub theta_plus: T,
    pub theta_minus: T,
}

impl<T: Real> OverlapCalculus<T> {
    pub fn one_plus_delta(&self) -> T {
        T::one() + self.delta
    }
}

/// `e^{−u}(sinh u − u)` without cancellation or overflow.
fn damped_sinh_excess<T: Real>(u: T) -> T {
    if u < T::one() {
        let u2 = u * u;
        let mut term = u * u2 / lit(6.0);
        let mut sum = term;
        let mut k = 1usize;
        while term > T::default_epsilon() * sum && k < 40 {
            term = term * u2 / lit(((2 * k + 2) * (2 * k + 3)) as f64);
            sum += term;
            k += 1;
        }
        (-u).exp() * sum
    } else {
        -(-(u + u)).exp_m1() / lit(2.0) - u * (-u).exp()
    }
}

fn clamp_eps<T: Real>(value: T, scale: T, block: &'static str) -> Result<T> {
    if value >= T::zero() {
        Ok(value)
    } else if value > -lit::<T>(1e-12) * scale {
        Ok(T::zero())
    } else {
        Err(Error::NegativeEpsilon { block, value: to_f64(value) })
    }
}

/// Populates an [`OverlapCalculus`] at separation `s > 0` and attenuation
/// `0 < eta ≤ 1/2`.
///
/// For the Gaussian PSF `ε±²` are evaluated from algebraically rearranged
/// closed forms; with `u = s²/8σ²`,
/// `ε+² = 2a(1 − e^{−2u} + 2u e^{−u})/(1 + e^{−u})` and
/// `ε−² = 4a e^{−u}(sinh u − u)/(1 − e^{−u})`, `a = 1/8σ²`, which keeps the
/// `O(s⁴)` value of `ε−²` accurate as `s → 0`. Numeric PSFs use the defining
/// combination; values in `(−1e-12·Δk², 0)` are clamped to zero.
pub fn calculus_at<T: Real>(psf: &Psf<T>, s: T, eta: T) -> Result<OverlapCalculus<T>> {
    check_separation(s)?;
    if s == T::zero() {
        return Err(Error::ZeroSeparation);
    }
    if !(eta > T::zero() && eta <= lit(0.5)) {
        return Err(Error::invalid("eta", "must lie in (0, 1/2]"));
    }
    let two: T = lit(2.0);
    let delta = delta(psf, s)?;
    let one_minus_delta = psf.one_minus_delta(s);
    let one_plus_delta = T::one() + delta;
    let gamma = psf.derivative_unchecked(s, 1);
    let beta = -psf.derivative_unchecked(s, 2);
    let (d2, delta4_0, delta6_0) = psf.even_derivatives_at_zero();
    let dk2 = -d2;

    let (eps_plus2, eps_minus2) = match psf.kind {
        PsfKind::GaussianAnalytic => {
            let a = psf.gaussian_rate();
            let u = a * s * s;
            let e = (-u).exp();
            let plus = two * a * (-(-(u + u)).exp_m1() + two * u * e) / (T::one() + e);
            let minus = lit::<T>(4.0) * a * damped_sinh_excess(u) / one_minus_delta;
            (plus, minus)
        }
        PsfKind::NumericSampled(_) => {
            let g2 = gamma * gamma;
            (dk2 - beta - g2 / one_plus_delta, dk2 + beta - g2 / one_minus_delta)
        }
    };
    let eps_plus2 = clamp_eps(eps_plus2, dk2, "symmetric")?;
    let eps_minus2 = clamp_eps(eps_minus2, dk2, "antisymmetric")?;

    let b_plus = -eps_plus2.sqrt() / (two * one_plus_delta.sqrt());
    let b_minus = -eps_minus2.sqrt() / (two * one_minus_delta.sqrt());
    let eta_plus = eta * one_plus_delta;
    let eta_minus = eta * one_minus_delta;

    Ok(OverlapCalculus {
        s,
        delta,
        one_minus_delta,
        gamma,
        beta,
        dk2,
        delta4_0,
        delta6_0,
        eps_plus2,
        eps_minus2,
        b_plus,
        b_minus,
        eta_plus,
        eta_minus,
        theta_plus: eta_plus.sqrt().acos(),
        theta_minus: eta_minus.sqrt().acos(),
    })
}

/// Linear-in-`s` coefficients of `B±` near `s = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BSlopes<T> {
    /// `−¼√(δ⁽⁴⁾(0) − δ''(0)²)`.
    pub b_plus_slope: T,
    /// `−√[(δ⁽⁶⁾(0)/5 − δ⁽⁴⁾(0)²/(3δ''(0)))/(12δ''(0))]`. Vanishes for the
    /// Gaussian PSF although `B−(s)/s` does not; see `b_minus_limit`.
    pub b_minus_slope: T,
    /// `lim_{s→0} B−(s)/s = −√(δ''δ⁽⁶⁾ − δ⁽⁴⁾²)/(12|δ''|)` from the Taylor
    /// series of `ε−²/(4(1 − δ))`; `−1/(8√6 σ²)` for the Gaussian PSF.
    pub b_minus_limit: T,
}

fn checked_root<T: Real>(value: T, scale: T, what: &'static str) -> Result<T> {
    if value >= T::zero() {
        Ok(value.sqrt())
    } else if value > -lit::<T>(1e-10) * scale {
        Ok(T::zero())
    } else {
        Err(Error::NegativeRadicand { what, value: to_f64(value) })
    }
}

pub fn b_small_s_expansion<T: Real>(psf: &Psf<T>) -> Result<BSlopes<T>> {
    let (d2, d4, d6) = psf.even_derivatives_at_zero();
    let quarter: T = lit(0.25);
    let plus = checked_root(d4 - d2 * d2, d4.abs() + d2 * d2, "b_plus_slope")?;

    let (p, q) = (d6 / lit(5.0), d4 * d4 / (lit::<T>(3.0) * d2));
    let twelve_d2 = lit::<T>(12.0) * d2;
    let minus = checked_root((p - q) / twelve_d2, (p.abs() + q.abs()) / twelve_d2.abs(), "b_minus_slope")?;

    let d2sq = d2 * d2;
    let limit = checked_root(
        (d2 * d6 - d4 * d4) / (lit::<T>(144.0) * d2sq),
        ((d2 * d6).abs() + d4 * d4) / (lit::<T>(144.0) * d2sq),
        "b_minus_limit",
    )?;

    Ok(BSlopes { b_plus_slope: -quarter * plus, b_minus_slope: -minus, b_minus_limit: -limit })
}
