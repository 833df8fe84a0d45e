//! Photon counting in the first `Q` Hermite-Gaussian modes (fin-SPADE).
//!
//! Mode `q` receives a Poisson fraction `f_q = e^{−𝒬} 𝒬^q / q!` of each
//! source's light, `𝒬 = s²/16σ²`. The counts have mean `μ_q` and a covariance
//! `C` whose off-diagonal entries couple only modes of equal parity; the
//! moment bound `F ≥ μ̇ᵀ C⁻¹ μ̇` lower-bounds the classical Fisher information.
//!
//! `dark` adds an independent Poisson rate to every mode: `D` on each `μ_q`
//! and on each `C_qq`, nothing on `μ̇`.

use nalgebra::{DMatrix, DVector};

use crate::real::{lit, to_f64, Real};
use crate::scene::SceneParams;
use crate::{Error, Result};

pub const DEFAULT_MODES: usize = 15;
/// Largest condition number accepted for the equilibrated covariance.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct SpadeStats<T: Real> {
    pub mode_count: usize,
    pub poisson_arg: T,
    pub f: DVector<T>,
    pub mu: DVector<T>,
    pub mu_dot: DVector<T>,
    pub c: DMatrix<T>,
    pub fisher_bound: T,
}

pub fn poisson_arg<T: Real>(p: &SceneParams<T>) -> T {
    p.s * p.s / (lit::<T>(16.0) * p.sigma * p.sigma)
}

/// `f_0 … f_{n−1}`, accumulated in log space so large `𝒬` does not underflow
/// `f_0` before the bulk of the distribution is reached.
pub fn mode_fractions<T: Real>(p: &SceneParams<T>, n: usize) -> DVector<T> {
    let qa = poisson_arg(p);
    if qa == T::zero() {
        return DVector::from_fn(n, |i, _| if i == 0 { T::one() } else { T::zero() });
    }
    let ln_q = qa.ln();
    let mut ln_f = -qa;
    DVector::from_fn(n, |i, _| {
        if i > 0 {
            ln_f += ln_q - lit::<T>(i as f64).ln();
        }
        ln_f.exp()
    })
}

fn fraction<T: Real>(p: &SceneParams<T>, q: usize) -> T {
    mode_fractions(p, q + 1)[q]
}

/// `μ_q = 2ηN_s f_q + N_n + D`.
pub fn spade_mean<T: Real>(p: &SceneParams<T>, q: usize) -> T {
    lit::<T>(2.0) * p.eta_n_s() * fraction(p, q) + p.n_n + p.dark
}

/// `∂μ_q/∂s = ηN_s s/(4σ²) (f_{q−1} − f_q)`, with `f_{−1} = 0`.
pub fn spade_mean_deriv<T: Real>(p: &SceneParams<T>, q: usize) -> T {
    let f = mode_fractions(p, q + 1);
    let prev = if q == 0 { T::zero() } else { f[q - 1] };
    mean_deriv_prefactor(p) * (prev - f[q])
}

fn mean_deriv_prefactor<T: Real>(p: &SceneParams<T>) -> T {
    p.eta_n_s() * p.s / (lit::<T>(4.0) * p.sigma * p.sigma)
}

fn check_modes(mode_count: usize) -> Result<()> {
    if mode_count == 0 {
        return Err(Error::invalid("mode_count", "must be >= 1"));
    }
    Ok(())
}

fn covariance_from<T: Real>(p: &SceneParams<T>, f: &DVector<T>) -> DMatrix<T> {
    let x = p.eta_n_s();
    let (two, four): (T, T) = (lit(2.0), lit(4.0));
    let floor = p.n_n * p.n_n + p.n_n + p.dark;
    let n = f.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            four * x * x * f[i] * f[i] + four * x * p.n_n * f[i] + two * x * f[i] + floor
        } else if (i + j) % 2 == 0 {
            four * x * x * (f[i] * f[j])
        } else {
            T::zero()
        }
    })
}

pub fn spade_covariance<T: Real>(p: &SceneParams<T>, mode_count: usize) -> Result<DMatrix<T>> {
    check_modes(mode_count)?;
    Ok(covariance_from(p, &mode_fractions(p, mode_count)))
}

/// `μ̇ᵀ C⁻¹ μ̇` by Cholesky on the diagonally equilibrated covariance.
///
/// Modes with `C_qq = 0` carry no counts at all and are dropped.
fn moment_bound<T: Real>(mu_dot: &DVector<T>, c: &DMatrix<T>) -> Result<T> {
    if mu_dot.iter().all(|v| *v == T::zero()) {
        return Ok(T::zero());
    }
    let keep: Vec<usize> = (0..c.nrows()).filter(|&i| c[(i, i)] > T::zero()).collect();
    let n = keep.len();
    if n == 0 {
        return Err(Error::IllConditioned { condition: f64::INFINITY });
    }
    let scale: Vec<T> = keep.iter().map(|&i| T::one() / c[(i, i)].sqrt()).collect();
    let a = DMatrix::from_fn(n, n, |i, j| c[(keep[i], keep[j])] * scale[i] * scale[j]);
    let b = DVector::from_fn(n, |i, _| mu_dot[keep[i]] * scale[i]);

    let eig = a.clone().symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    let condition = if lo > T::zero() { to_f64(hi / lo) } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    let chol = a.cholesky().ok_or(Error::IllConditioned { condition })?;
    let y = chol.solve(&b);
    Ok(b.dot(&y))
}

pub fn spade_stats<T: Real>(p: &SceneParams<T>, mode_count: usize) -> Result<SpadeStats<T>> {
    check_modes(mode_count)?;
    p.validate()?;
    let f = mode_fractions(p, mode_count);
    let two: T = lit(2.0);
    let mu = f.map(|fq| two * p.eta_n_s() * fq + p.n_n + p.dark);
    let k = mean_deriv_prefactor(p);
    let mu_dot = DVector::from_fn(mode_count, |q, _| {
        let prev = if q == 0 { T::zero() } else { f[q - 1] };
        k * (prev - f[q])
    });
    let c = covariance_from(p, &f);
    let fisher_bound = moment_bound(&mu_dot, &c)?;
    Ok(SpadeStats { mode_count, poisson_arg: poisson_arg(p), f, mu, mu_dot, c, fisher_bound })
}

pub fn spade_cfi_bound<T: Real>(p: &SceneParams<T>, mode_count: usize) -> Result<T> {
    spade_stats(p, mode_count).map(|st| st.fisher_bound)
}

/// `|F(q_to) − F(q_from)| / F(q_from)`.
pub fn spade_mode_convergence<T: Real>(p: &SceneParams<T>, q_from: usize, q_to: usize) -> Result<T> {
    if q_from < 1 || q_to <= q_from {
        return Err(Error::invalid("q_to", "requires q_to > q_from >= 1"));
    }
    let a = spade_cfi_bound(p, q_from)?;
    let b = spade_cfi_bound(p, q_to)?;
    if a == T::zero() {
        return Err(Error::UndefinedRatio);
    }
    Ok((b - a).abs() / a)
}
