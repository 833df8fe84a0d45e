//! Quantum Fisher information of two identical thermal sources under
//! thermal noise.
//!
//! The state factorises into a symmetric and an antisymmetric block, each a
//! two-mode Gaussian state of the image mode `â±` and its derivative mode
//! `b̂±`, with occupations `ηN_s(1 ± δ) + N_n` and `N_n`. The QFI is
//! `H = H₊ + H₋` and is available three ways:
//!
//! * [`qfi_closed_form`]: the analytic per-block expression.
//! * [`qfi_general`]: the Gaussian-state route, `H = −Tr[G ∂V]` with `G`
//!   solving `4VGV + ΩGΩ + 2∂V = 0`.
//! * [`qfi_asymptotic`]: the small/large separation and SNR regimes.
//!
//! Covariances use quadrature ordering `(x₁, p₁, x₂, p₂)` with vacuum
//! variance 1/2.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4};
use serde::{Deserialize, Serialize};

use crate::overlap::{calculus_at, OverlapCalculus, Psf};
use crate::real::{lit, to_f64, Real};
use crate::scene::SceneParams;
use crate::{Error, Result};

/// SNR at or above which the high-SNR approximations are considered valid.
pub const HIGH_SNR: f64 = 10.0;
/// SNR at or below which the low-SNR approximation is considered valid.
pub const LOW_SNR: f64 = 0.1;
/// `s ≤ SMALL_S · σ` counts as a small separation.
pub const SMALL_S: f64 = 0.5;
/// `s ≥ LARGE_S · σ` counts as a large separation.
pub const LARGE_S: f64 = 5.0;
/// `s ≤ s*/SUB_S_STAR` counts as well below the QFI maximum.
pub const SUB_S_STAR: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    Plus,
    Minus,
}

impl Block {
    pub fn label(self) -> &'static str {
        match self {
            Block::Plus => "plus",
            Block::Minus => "minus",
        }
    }

    fn sign<T: Real>(self) -> T {
        match self {
            Block::Plus => T::one(),
            Block::Minus => -T::one(),
        }
    }
}

/// Per-block pieces of the overlap calculus the QFI needs.
struct BlockOverlap<T> {
    one_pm_delta: T,
    gamma: T,
    eps2: T,
    b_abs: T,
}

fn block_overlap<T: Real>(oc: &OverlapCalculus<T>, block: Block) -> BlockOverlap<T> {
    match block {
        Block::Plus => BlockOverlap {
            one_pm_delta: oc.one_plus_delta(),
            gamma: oc.gamma,
            eps2: oc.eps_plus2,
            b_abs: oc.b_plus.abs(),
        },
        Block::Minus => BlockOverlap {
            one_pm_delta: oc.one_minus_delta,
            gamma: oc.gamma,
            eps2: oc.eps_minus2,
            b_abs: oc.b_minus.abs(),
        },
    }
}

/// `G` for one block together with its beam-splitter diagonalisation.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSolution<T> {
    pub g: Matrix4<T>,
    pub g11: T,
    pub g12: T,
    pub g22: T,
    pub measurement: BlockMeasurement<T>,
}

/// Beam-splitter angle that diagonalises a 2×2 `g` block, and the
/// resulting diagonal entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockMeasurement<T> {
    pub angle: T,
    pub eigenvalues: (T, T),
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDetails<T> {
    pub plus: BlockSolution<T>,
    pub minus: BlockSolution<T>,
}

impl<T: Real> GaussianDetails<T> {
    /// `(g₁, g₂, g₃, g₄)`: eigenvalues of the plus then the minus block.
    pub fn g_eigs(&self) -> [T; 4] {
        let (a, b) = self.plus.measurement.eigenvalues;
        let (c, d) = self.minus.measurement.eigenvalues;
        [a, b, c, d]
    }

    pub fn measurement_angles(&self) -> (T, T) {
        (self.plus.measurement.angle, self.minus.measurement.angle)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QfiResult<T> {
    pub h_plus: T,
    pub h_minus: T,
    pub h_total: T,
    /// Present only for results from [`qfi_general`].
    pub gaussian: Option<GaussianDetails<T>>,
}

fn check_scene<T: Real>(p: &SceneParams<T>, oc: &OverlapCalculus<T>) -> Result<()> {
    p.validate()?;
    if p.s == T::zero() || oc.s == T::zero() {
        return Err(Error::ZeroSeparation);
    }
    Ok(())
}

fn closed_form_block<T: Real>(x_signal: T, n_n: T, bo: &BlockOverlap<T>) -> T {
    if x_signal == T::zero() {
        return T::zero();
    }
    let one = T::one();
    let two: T = lit(2.0);
    let x = x_signal * bo.one_pm_delta;
    // occupation-change term; with N_n = 0 this is X·(γ²/(1±δ))/(x + 1)
    let first = if n_n == T::zero() {
        x_signal * (bo.gamma * bo.gamma / bo.one_pm_delta) / (x + one)
    } else {
        x_signal * x_signal * bo.gamma * bo.gamma / ((x + n_n + one) * (x + n_n))
    };
    // mode-shape term: −2X²[(1±δ)(δ''(0) ∓ δ''(s)) + γ²] = 2X²(1±δ)ε±²
    let denom = two * x * (two * n_n + one) + lit::<T>(4.0) * n_n * (n_n + one);
    let second = two * x_signal * x_signal * bo.one_pm_delta * bo.eps2 / denom;
    first + second
}

/// The analytic `H±(s)`; `gaussian` is left empty.
pub fn qfi_closed_form<T: Real>(p: &SceneParams<T>, oc: &OverlapCalculus<T>) -> Result<QfiResult<T>> {
    check_scene(p, oc)?;
    let x = p.eta_n_s();
    let h_plus = closed_form_block(x, p.n_n, &block_overlap(oc, Block::Plus));
    let h_minus = closed_form_block(x, p.n_n, &block_overlap(oc, Block::Minus));
    Ok(QfiResult { h_plus, h_minus, h_total: h_plus + h_minus, gaussian: None })
}

/// Convenience: overlap calculus at `p.s` followed by [`qfi_closed_form`].
pub fn qfi_at<T: Real>(psf: &Psf<T>, p: &SceneParams<T>) -> Result<QfiResult<T>> {
    let oc = calculus_at(psf, p.s, p.eta)?;
    qfi_closed_form(p, &oc)
}

/// Block-diagonal symplectic form for two modes.
pub fn omega<T: Real>() -> Matrix4<T> {
    let (o, z) = (T::one(), T::zero());
    #[rustfmt::skip]
    let m = Matrix4::new(
        z, o, z, z,
        -o, z, z, z,
        z, z, z, o,
        z, z, -o, z,
    );
    m
}

/// Covariance of one `(â±, b̂±)` block and its derivative in `s`.
///
/// The covariance is stored as its excess over vacuum, `V − I/2`, so that
/// states close to the vacuum keep full relative precision.
#[derive(Debug, Clone, PartialEq)]
pub struct CovBlock<T> {
    pub label: Block,
    pub excess: Matrix4<T>,
    pub dv: Matrix4<T>,
}

impl<T: Real> CovBlock<T> {
    /// Builds a block from a full covariance `v`.
    pub fn new(label: Block, v: Matrix4<T>, dv: Matrix4<T>) -> Self {
        let half: T = lit(0.5);
        CovBlock { label, excess: v - Matrix4::identity() * half, dv }
    }

    /// `V = diag(v₁, v₁, v₂, v₂)` with `v₁ = ηN_s(1 ± δ) + N_n + 1/2`,
    /// `v₂ = N_n + 1/2`; `∂V` carries `±ηN_s δ'` on the `â±` block and the
    /// beam-splitter coupling `−(v₂ − v₁)|B±|` between the two modes.
    pub fn thermal(p: &SceneParams<T>, oc: &OverlapCalculus<T>, label: Block) -> Self {
        let bo = block_overlap(oc, label);
        let x = p.eta_n_s() * bo.one_pm_delta;
        let w1 = x + p.n_n;
        let w2 = p.n_n;
        let d11 = label.sign::<T>() * p.eta_n_s() * bo.gamma;
        // v₂ − v₁ = −x
        let d12 = x * bo.b_abs;
        let z = T::zero();
        let excess = Matrix4::from_diagonal(&nalgebra::Vector4::new(w1, w1, w2, w2));
        #[rustfmt::skip]
        let dv = Matrix4::new(
            d11, z, d12, z,
            z, d11, z, d12,
            d12, z, z, z,
            z, d12, z, z,
        );
        CovBlock { label, excess, dv }
    }

    pub fn v(&self) -> Matrix4<T> {
        self.excess + Matrix4::identity() * lit::<T>(0.5)
    }

    /// `4VGV + ΩGΩ + 2∂V`, expanded around the vacuum as
    /// `G + ΩGΩ + 2(WG + GW) + 4WGW + 2∂V` with `W = V − I/2`.
    pub fn g_equation_residual(&self, g: &Matrix4<T>) -> Matrix4<T> {
        let w = &self.excess;
        let om = omega::<T>();
        let two: T = lit(2.0);
        g + om * g * om + (w * g + g * w) * two + w * g * w * lit::<T>(4.0) + self.dv * two
    }

    /// Smallest eigenvalue of the Hermitian matrix `V + iΩ/2`; non-negative
    /// for a bona fide Gaussian state.
    pub fn uncertainty_margin(&self) -> T {
        use nalgebra::Complex;
        let v = self.v();
        let om = omega::<T>();
        let half: T = lit(0.5);
        let h = Matrix4::from_fn(|i, j| Complex::new(v[(i, j)], half * om[(i, j)]));
        h.symmetric_eigenvalues().iter().fold(T::max_value().unwrap(), |m, &e| m.min(e))
    }
}

/// Orthogonal change of basis on `vec(G)` that diagonalises the exact part
/// `G ↦ G + ΩGΩ` of the vectorised operator.
///
/// `ΩE_kΩ` maps each unit matrix to ± another unit matrix, so the operator
/// pairs up coordinates; the sum/difference of each pair is an eigenvector
/// with eigenvalue 0 or 2. Returns the basis (rows) and those eigenvalues.
fn pair_basis<T: Real>() -> (DMatrix<T>, DVector<T>) {
    let om = omega::<T>();
    let mut partner = [(0usize, T::zero()); 16];
    for k in 0..16 {
        let mut ek = Matrix4::<T>::zeros();
        ek[k] = T::one();
        let image = om * ek * om;
        let (j, c) = image.iter().enumerate().find(|(_, v)| **v != T::zero()).map(|(j, v)| (j, *v)).unwrap();
        partner[k] = (j, c);
    }
    let r = T::FRAC_1_SQRT_2();
    let mut basis = DMatrix::zeros(16, 16);
    let mut eig = DVector::zeros(16);
    let mut row = 0;
    for k in 0..16 {
        let (j, c) = partner[k];
        if j < k {
            continue;
        }
        // (I + ΩΩ-map)(e_k ± c e_j) = (1 ± 1)(e_k ± c e_j)
        basis[(row, k)] = r;
        basis[(row, j)] = c * r;
        eig[row] = lit(2.0);
        basis[(row + 1, k)] = r;
        basis[(row + 1, j)] = -c * r;
        eig[row + 1] = T::zero();
        row += 2;
    }
    (basis, eig)
}

/// Solves `4VGV + ΩGΩ + 2∂V = 0` for symmetric `G`.
///
/// The equation is vectorised to a 16×16 system
/// `(4V⊗V + Ωᵀ⊗Ω) vec G = −2 vec ∂V`. It is assembled as an exact integer
/// part plus the vacuum-excess terms, rotated into the basis of
/// [`pair_basis`], and solved by dense LU. When a mode sits at the vacuum
/// (`v = 1/2`) the system is singular and the minimum-norm solution is
/// returned instead, which sets the free `g₂₂` to zero.
pub fn solve_g<T: Real>(block: &CovBlock<T>) -> Result<Matrix4<T>> {
    let w = &block.excess;
    let two: T = lit(2.0);
    let four: T = lit(4.0);
    let mut excess_op = DMatrix::<T>::zeros(16, 16);
    for k in 0..16 {
        let mut ek = Matrix4::<T>::zeros();
        ek[k] = T::one();
        let image = (w * ek + ek * w) * two + w * ek * w * four;
        excess_op.column_mut(k).copy_from_slice(image.as_slice());
    }
    let (basis, exact_eig) = pair_basis::<T>();
    let m = &basis * excess_op * basis.transpose() + DMatrix::from_diagonal(&exact_eig);
    let rhs_full = DVector::from_column_slice(block.dv.as_slice()) * (-two);
    let rhs = &basis * rhs_full;

    let scale = rhs.amax();
    if scale == T::zero() {
        return Ok(Matrix4::zeros());
    }
    let tolerance = lit::<T>(1e-10) * scale;
    let residual = |y: &DVector<T>| (&m * y - &rhs).amax();

    let direct = m.clone().lu().solve(&rhs).filter(|y| y.iter().all(|v| v.is_finite()));
    let y = match direct {
        Some(y) if residual(&y) <= tolerance => y,
        _ => {
            let svd = m.clone().svd(true, true);
            let cut = svd.singular_values.max() * lit(1e-13);
            let y = svd
                .solve(&rhs, cut)
                .map_err(|_| Error::SingularSystem { residual: f64::INFINITY })?;
            let r = residual(&y);
            if !(r <= tolerance) {
                return Err(Error::SingularSystem { residual: to_f64(r) });
            }
            y
        }
    };
    let g_vec = basis.transpose() * y;
    let g = Matrix4::from_column_slice(g_vec.as_slice());
    Ok((g + g.transpose()) * lit::<T>(0.5))
}

/// Beam-splitter angle `θ = ½ arctan(2g₁₂/(g₁₁ − g₂₂))` and the rotated
/// diagonal `O g Oᵀ` with `O = [[cos θ, sin θ], [−sin θ, cos θ]]`.
pub fn diagonalizing_angle<T: Real>(g11: T, g12: T, g22: T) -> BlockMeasurement<T> {
    let z = T::zero();
    let (angle, degenerate) = if g12 == z {
        (z, g11 == g22)
    } else if g11 == g22 {
        (T::frac_pi_4() * g12.signum(), false)
    } else {
        ((lit::<T>(2.0) * g12 / (g11 - g22)).atan() * lit(0.5), false)
    };
    let (s, c) = angle.sin_cos();
    let two: T = lit(2.0);
    let e1 = c * c * g11 + two * c * s * g12 + s * s * g22;
    let e2 = s * s * g11 - two * c * s * g12 + c * c * g22;
    BlockMeasurement { angle, eigenvalues: (e1, e2), degenerate }
}

/// The 2×2 rotation for a [`BlockMeasurement`] angle.
pub fn rotation<T: Real>(angle: T) -> Matrix2<T> {
    let (s, c) = angle.sin_cos();
    Matrix2::new(c, s, -s, c)
}

fn solve_block<T: Real>(p: &SceneParams<T>, oc: &OverlapCalculus<T>, label: Block) -> Result<(T, BlockSolution<T>)> {
    let cov = CovBlock::thermal(p, oc, label);
    let g = solve_g(&cov)?;
    let h = -g.component_mul(&cov.dv).sum();
    let (g11, g12, g22) = (g[(0, 0)], g[(0, 2)], g[(2, 2)]);
    let measurement = diagonalizing_angle(g11, g12, g22);
    Ok((h, BlockSolution { g, g11, g12, g22, measurement }))
}

/// `H± = −Tr[G± ∂V±]` from the Gaussian-state solver, with `G±` and the
/// optimal measurement angles.
pub fn qfi_general<T: Real>(p: &SceneParams<T>, oc: &OverlapCalculus<T>) -> Result<QfiResult<T>> {
    check_scene(p, oc)?;
    let (h_plus, plus) = solve_block(p, oc, Block::Plus)?;
    let (h_minus, minus) = solve_block(p, oc, Block::Minus)?;
    Ok(QfiResult { h_plus, h_minus, h_total: h_plus + h_minus, gaussian: Some(GaussianDetails { plus, minus }) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementPlan<T> {
    pub plus: BlockMeasurement<T>,
    pub minus: BlockMeasurement<T>,
}

/// Beam splitters on `(â±, b̂±)` followed by photon counting saturate the
/// QFI; this returns their angles and the `G` eigenvalues.
pub fn optimal_measurement<T: Real>(result: &QfiResult<T>) -> Result<MeasurementPlan<T>> {
    let details = result
        .gaussian
        .as_ref()
        .ok_or_else(|| Error::invalid("result", "G matrices absent; use qfi_general"))?;
    Ok(MeasurementPlan { plus: details.plus.measurement, minus: details.minus.measurement })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    LargeSnrSmallS,
    SubSstar,
    SmallSnr,
    LargeS,
}

impl Regime {
    pub const ALL: [Regime; 4] = [Regime::LargeSnrSmallS, Regime::SubSstar, Regime::SmallSnr, Regime::LargeS];

    pub fn tag(self) -> &'static str {
        match self {
            Regime::LargeSnrSmallS => "large-snr-small-s",
            Regime::SubSstar => "sub-sstar",
            Regime::SmallSnr => "small-snr",
            Regime::LargeS => "large-s",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Regime::ALL.into_iter().find(|r| r.tag() == tag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Asymptotic<T> {
    pub regime: Regime,
    pub value: T,
    pub valid: bool,
}

fn regime_valid<T: Real>(p: &SceneParams<T>, regime: Regime) -> bool {
    let snr = p.snr();
    let high = snr.map_or(p.eta_n_s() > T::zero(), |r| r >= lit(HIGH_SNR));
    let small_s = p.s <= p.sigma * lit(SMALL_S);
    match regime {
        Regime::LargeSnrSmallS => high && small_s,
        Regime::SubSstar => high && s_star(p).is_ok_and(|st| p.s <= st.s_star / lit(SUB_S_STAR)),
        Regime::SmallSnr => snr.is_some_and(|r| r <= lit(LOW_SNR)) && small_s,
        Regime::LargeS => p.s >= p.sigma * lit(LARGE_S),
    }
}

/// Closed-form approximation of `H(s)` in one regime, for the Gaussian PSF,
/// with a validity flag from the thresholds at the top of this module.
pub fn qfi_asymptotic<T: Real>(psf: &Psf<T>, p: &SceneParams<T>, regime: Regime) -> Result<Asymptotic<T>> {
    if !psf.is_gaussian() {
        return Err(Error::UnsupportedRegime);
    }
    p.validate()?;
    let valid = regime_valid(p, regime);
    let x = p.eta_n_s();
    if x == T::zero() {
        return Ok(Asymptotic { regime, value: T::zero(), valid });
    }
    let (s, sig, nn) = (p.s, p.sigma, p.n_n);
    let one = T::one();
    let dk2 = psf.dk2();
    let noise = nn * (nn + one);
    let needs_noise = || {
        if nn == T::zero() {
            Err(Error::invalid("n_n", "this regime requires thermal noise (N_n > 0)"))
        } else {
            Ok(())
        }
    };
    let value = match regime {
        Regime::LargeSnrSmallS => {
            let (s2, sg2) = (s * s, sig * sig);
            lit::<T>(4.0) * x * x * s2 / (x * x * s2 * s2 + lit::<T>(8.0) * x * s2 * sg2 + lit::<T>(64.0) * noise * sg2 * sg2)
        }
        Regime::SubSstar => {
            needs_noise()?;
            x * x / noise * dk2 * dk2 * s * s
        }
        Regime::SmallSnr => {
            needs_noise()?;
            let (_, d4, _) = psf.even_derivatives_at_zero();
            x * x / (lit::<T>(2.0) * noise) * (lit::<T>(3.0) * dk2 * dk2 + d4) * s * s
        }
        Regime::LargeS => {
            let two: T = lit(2.0);
            two * x * x * dk2 / (two * nn * nn + x + two * nn * (x + one))
        }
    };
    Ok(Asymptotic { regime, value, valid })
}

/// The most specific regime whose validity conditions hold, or the nearest
/// candidate (flagged invalid) when none does.
pub fn select_regime<T: Real>(p: &SceneParams<T>) -> Regime {
    let order = [Regime::LargeS, Regime::SubSstar, Regime::LargeSnrSmallS, Regime::SmallSnr];
    if let Some(r) = order.into_iter().find(|&r| regime_valid(p, r)) {
        return r;
    }
    match p.snr() {
        Some(r) if r < T::one() => Regime::SmallSnr,
        _ => Regime::LargeSnrSmallS,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SStar<T> {
    pub s_star: T,
    pub h_at_s_star: T,
    pub valid: bool,
}

/// Location `s* = 2√2 (N_n² + N_n)^{1/4} σ/√(ηN_s)` of the high-SNR local
/// maximum and the approximate value of the QFI there.
pub fn s_star<T: Real>(p: &SceneParams<T>) -> Result<SStar<T>> {
    p.validate()?;
    let (x, nn) = (p.eta_n_s(), p.n_n);
    if nn == T::zero() {
        return Err(Error::NoLocalMaximum("requires thermal noise (N_n > 0)"));
    }
    if x == T::zero() {
        return Err(Error::NoLocalMaximum("requires signal photons (N_s > 0)"));
    }
    let root = (nn * nn + nn).sqrt();
    let s_star = lit::<T>(2.0) * T::SQRT_2() * root.sqrt() * p.sigma / x.sqrt();
    let h = x / (lit::<T>(2.0) * p.sigma * p.sigma) * root / ((nn + root) * (root + nn + T::one()));
    Ok(SStar { s_star, h_at_s_star: h, valid: x / nn >= lit(HIGH_SNR) })
}

/// First interior local maximum of the closed-form `H` over an increasing
/// grid of separations. At high SNR the QFI also rises again towards its
/// large-separation plateau, so the global maximum is not the one wanted.
pub fn first_local_maximum<T: Real>(psf: &Psf<T>, p: &SceneParams<T>, grid: &[T]) -> Result<Option<(T, T)>> {
    let mut prev: Option<(T, T)> = None;
    let mut rising = false;
    for &s in grid {
        let v = qfi_at(psf, &p.with_s(s))?.h_total;
        if let Some((ps, pv)) = prev {
            if v < pv && rising {
                return Ok(Some((ps, pv)));
            }
            rising = v > pv;
        }
        prev = Some((s, v));
    }
    Ok(None)
}
