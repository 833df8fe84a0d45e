//! Truncated Fock-space oracle for the QFI.
//!
//! Builds each block state `U(B±t)[ρ_T(n_a(t)) ⊗ ρ_T(N_n)]U†(B±t)` with
//! `n_a(t) = ηN_s(1 ± δ(s + t)) + N_n` explicitly as a density matrix,
//! differentiates it by Richardson-extrapolated central differences and
//! evaluates `H = Σ 2|∂ρ_ij|²/(p_i + p_j)` in the eigenbasis of `ρ`.
//!
//! The beam splitter conserves total photon number, so every state in the
//! family is block diagonal over `n = n_a + n_b`; the oracle works one block
//! at a time. Two-mode indices are `n_a·d + n_b`. Double precision only.

use nalgebra::{DMatrix, DVector};

use crate::overlap::{calculus_at, delta, Psf};
use crate::scene::SceneParams;
use crate::{Error, Result};

pub const DEFAULT_TAIL_BOUND: f64 = 1e-10;
pub const DEFAULT_FD_STEP: f64 = 1e-4;
pub const DEFAULT_EIG_FLOOR: f64 = 1e-11;
pub const DEFAULT_RICHARDSON_TOL: f64 = 1e-6;

/// Diagonal of a thermal state truncated to `cutoff` levels and renormalised.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalFock {
    pub probs: Vec<f64>,
    /// Probability beyond the cutoff before renormalisation.
    pub tail_mass: f64,
}

impl ThermalFock {
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.probs))
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }
}

/// Geometric law `p_k = n̄ᵏ/(n̄+1)ᵏ⁺¹`, `k < cutoff`.
pub fn thermal_fock(n_mean: f64, cutoff: usize, tail_bound: f64) -> Result<ThermalFock> {
    if !(n_mean.is_finite() && n_mean >= 0.0) {
        return Err(Error::invalid("n_mean", "must be finite and >= 0"));
    }
    if cutoff < 2 {
        return Err(Error::invalid("cutoff", "must be >= 2"));
    }
    let r = n_mean / (n_mean + 1.0);
    let tail_mass = r.powi(cutoff as i32);
    if tail_mass > tail_bound {
        return Err(Error::CutoffTooSmall { cutoff, tail_mass, bound: tail_bound });
    }
    let raw: Vec<f64> = (0..cutoff).map(|k| r.powi(k as i32) / (n_mean + 1.0)).collect();
    let norm: f64 = raw.iter().sum();
    Ok(ThermalFock { probs: raw.into_iter().map(|p| p / norm).collect(), tail_mass })
}

/// Smallest cutoff whose thermal tail at `n_mean` is within `tail_bound`.
pub fn cutoff_for(n_mean: f64, tail_bound: f64) -> usize {
    if n_mean <= 0.0 {
        return 2;
    }
    let r = n_mean / (n_mean + 1.0);
    ((tail_bound.ln() / r.ln()).ceil() as usize).max(2)
}

/// The `(n_a, n_b)` states with fixed total `n` inside a `d`-level truncation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhotonBlock {
    pub total: usize,
    /// `n_a` of each basis state; `n_b = total − n_a`.
    pub n_a: Vec<usize>,
}

impl PhotonBlock {
    pub fn new(total: usize, cutoff: usize) -> Self {
        let lo = total.saturating_sub(cutoff - 1);
        let hi = total.min(cutoff - 1);
        PhotonBlock { total, n_a: (lo..=hi).collect() }
    }

    pub fn len(&self) -> usize {
        self.n_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_a.is_empty()
    }

    /// Matrix of `a b† − a† b` on this block (real antisymmetric).
    pub fn generator(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut k = DMatrix::zeros(n, n);
        for (j, &na) in self.n_a.iter().enumerate() {
            let nb = self.total - na;
            // a b† |na, nb⟩ = √na √(nb+1) |na−1, nb+1⟩
            if j > 0 && na > 0 {
                k[(j - 1, j)] += ((na * (nb + 1)) as f64).sqrt();
            }
            // −a† b |na, nb⟩ = −√(na+1) √nb |na+1, nb−1⟩
            if j + 1 < n && nb > 0 {
                k[(j + 1, j)] -= (((na + 1) * nb) as f64).sqrt();
            }
        }
        k
    }

    pub fn beam_splitter(&self, angle: f64) -> DMatrix<f64> {
        (self.generator() * angle).exp()
    }
}

pub fn photon_blocks(cutoff: usize) -> Vec<PhotonBlock> {
    (0..=2 * (cutoff - 1)).map(|n| PhotonBlock::new(n, cutoff)).collect()
}

/// `exp(angle·(a b† − a† b))` on the full `d² × d²` truncated space.
pub fn beam_splitter_fock(angle: f64, cutoff: usize) -> Result<DMatrix<f64>> {
    if cutoff < 2 {
        return Err(Error::invalid("cutoff", "must be >= 2"));
    }
    let d = cutoff;
    let mut u = DMatrix::zeros(d * d, d * d);
    for block in photon_blocks(d) {
        let ub = block.beam_splitter(angle);
        let idx: Vec<usize> = block.n_a.iter().map(|&na| na * d + (block.total - na)).collect();
        for (i, &gi) in idx.iter().enumerate() {
            for (j, &gj) in idx.iter().enumerate() {
                u[(gi, gj)] = ub[(i, j)];
            }
        }
    }
    Ok(u)
}

/// Two-mode density matrix on the full truncated space.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedState {
    pub cutoff: usize,
    pub rho: DMatrix<f64>,
    pub tail_mass: f64,
}

/// `U(angle)[ρ_T(n_a) ⊗ ρ_T(n_b)]U†(angle)`.
pub fn two_mode_state(n_a: f64, n_b: f64, angle: f64, cutoff: usize, tail_bound: f64) -> Result<TruncatedState> {
    let (ta, tb) = (thermal_fock(n_a, cutoff, 1.0)?, thermal_fock(n_b, cutoff, 1.0)?);
    let tail_mass = 1.0 - (1.0 - ta.tail_mass) * (1.0 - tb.tail_mass);
    if tail_mass > tail_bound {
        return Err(Error::CutoffTooSmall { cutoff, tail_mass, bound: tail_bound });
    }
    let prod = ta.matrix().kronecker(&tb.matrix());
    let u = beam_splitter_fock(angle, cutoff)?;
    Ok(TruncatedState { cutoff, rho: &u * prod * u.transpose(), tail_mass })
}

/// Symmetric logarithmic derivative of `ρ` along `∂ρ`.
#[derive(Debug, Clone)]
pub struct Sld {
    pub l: DMatrix<f64>,
    pub qfi: f64,
    /// `max |(ρL + Lρ)/2 − ∂ρ|` over the retained eigenpairs.
    pub consistency: f64,
}

/// Solves `∂ρ = (ρL + Lρ)/2` spectrally, dropping pairs with `p_i + p_j ≤ floor`.
pub fn sld(rho: &DMatrix<f64>, drho: &DMatrix<f64>, floor: f64) -> Sld {
    let eig = rho.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let p = &eig.eigenvalues;
    let d = v.transpose() * drho * v;
    let n = p.len();
    let mut l_eig = DMatrix::zeros(n, n);
    let mut qfi = 0.0;
    let mut consistency: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let sum = p[i] + p[j];
            if sum > floor {
                let lij = 2.0 * d[(i, j)] / sum;
                l_eig[(i, j)] = lij;
                qfi += 2.0 * d[(i, j)] * d[(i, j)] / sum;
                consistency = consistency.max((0.5 * sum * lij - d[(i, j)]).abs());
            }
        }
    }
    Sld { l: v * l_eig * v.transpose(), qfi, consistency }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Per-mode Fock dimension; `None` picks the smallest one meeting `tail_bound`.
    pub cutoff: Option<usize>,
    pub fd_step: f64,
    pub tail_bound: f64,
    pub eig_floor: f64,
    /// Largest accepted relative gap between the extrapolated and the `h/2` estimate.
    pub richardson_tol: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            cutoff: None,
            fd_step: DEFAULT_FD_STEP,
            tail_bound: DEFAULT_TAIL_BOUND,
            eig_floor: DEFAULT_EIG_FLOOR,
            richardson_tol: DEFAULT_RICHARDSON_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResult {
    pub h_plus: f64,
    pub h_minus: f64,
    pub h_total: f64,
    pub cutoff: usize,
    pub tail_mass: f64,
    /// Relative change between the Richardson value and the plain `h/2` estimate.
    pub richardson_residual: f64,
    /// Worst SLD equation mismatch over all blocks.
    pub sld_consistency: f64,
}

/// Diagonal of `ρ_T(n_a) ⊗ ρ_T(n_b)` restricted to one photon block.
fn block_diagonal(ta: &ThermalFock, tb: &ThermalFock, block: &PhotonBlock) -> DVector<f64> {
    DVector::from_iterator(block.len(), block.n_a.iter().map(|&na| ta.probs[na] * tb.probs[block.total - na]))
}

struct BlockFamily {
    occupations: [f64; 5],
    n_b: f64,
    coupling: f64,
    step: f64,
}

/// Offsets `0, ±h, ±h/2` in the order stored in [`BlockFamily::occupations`].
const OFFSETS: [f64; 5] = [0.0, 1.0, -1.0, 0.5, -0.5];

fn block_qfi(fam: &BlockFamily, cutoff: usize, opts: &OracleOptions) -> Result<(f64, f64, f64)> {
    let thermals = fam
        .occupations
        .iter()
        .map(|&n| thermal_fock(n, cutoff, 1.0))
        .collect::<Result<Vec<_>>>()?;
    let tb = thermal_fock(fam.n_b, cutoff, 1.0)?;
    let h = fam.step;
    let (mut h_fine, mut h_rich, mut consistency) = (0.0, 0.0, 0.0f64);
    for block in photon_blocks(cutoff) {
        let states: Vec<DMatrix<f64>> = OFFSETS
            .iter()
            .zip(&thermals)
            .map(|(&o, ta)| {
                let u = block.beam_splitter(fam.coupling * o * h);
                &u * DMatrix::from_diagonal(&block_diagonal(ta, &tb, &block)) * u.transpose()
            })
            .collect();
        let d_coarse = (&states[1] - &states[2]) / (2.0 * h);
        let d_fine = (&states[3] - &states[4]) / h;
        let d_rich = (&d_fine * 4.0 - &d_coarse) / 3.0;
        h_fine += sld(&states[0], &d_fine, opts.eig_floor).qfi;
        let r = sld(&states[0], &d_rich, opts.eig_floor);
        h_rich += r.qfi;
        consistency = consistency.max(r.consistency);
    }
    let residual = if h_rich > 0.0 { (h_rich - h_fine).abs() / h_rich } else { 0.0 };
    Ok((h_rich, residual, consistency))
}

/// Independent QFI by explicit density matrices; see the module docs.
pub fn oracle_qfi(psf: &Psf<f64>, p: &SceneParams<f64>, opts: &OracleOptions) -> Result<OracleResult> {
    p.validate()?;
    if p.s == 0.0 {
        return Err(Error::ZeroSeparation);
    }
    let h = opts.fd_step;
    if !(h > 0.0 && h < p.s) {
        return Err(Error::invalid("fd_step", "must lie in (0, s)"));
    }
    let oc = calculus_at(psf, p.s, p.eta)?;
    let x = p.eta_n_s();
    let max_occupation = x * oc.one_plus_delta() + p.n_n;
    let cutoff = opts.cutoff.unwrap_or_else(|| cutoff_for(max_occupation, opts.tail_bound));
    let ta = thermal_fock(max_occupation, cutoff, 1.0)?;
    let tb = thermal_fock(p.n_n, cutoff, 1.0)?;
    let tail_mass = 1.0 - (1.0 - ta.tail_mass) * (1.0 - tb.tail_mass);
    if tail_mass > opts.tail_bound {
        return Err(Error::CutoffTooSmall { cutoff, tail_mass, bound: opts.tail_bound });
    }
    if x == 0.0 {
        return Ok(OracleResult {
            h_plus: 0.0,
            h_minus: 0.0,
            h_total: 0.0,
            cutoff,
            tail_mass,
            richardson_residual: 0.0,
            sld_consistency: 0.0,
        });
    }

    let mut deltas = [0.0; 5];
    for (d, o) in deltas.iter_mut().zip(OFFSETS) {
        *d = delta(psf, p.s + o * h)?;
    }
    let mut out = [0.0; 2];
    let (mut residual, mut consistency) = (0.0f64, 0.0f64);
    for (k, (sign, coupling)) in [(1.0, oc.b_plus), (-1.0, oc.b_minus)].into_iter().enumerate() {
        let fam = BlockFamily {
            occupations: deltas.map(|d| x * (1.0 + sign * d) + p.n_n),
            n_b: p.n_n,
            coupling,
            step: h,
        };
        let (hq, r, c) = block_qfi(&fam, cutoff, opts)?;
        out[k] = hq;
        residual = residual.max(r);
        consistency = consistency.max(c);
    }
    if residual > opts.richardson_tol {
        return Err(Error::FiniteDifference { residual, tolerance: opts.richardson_tol });
    }
    Ok(OracleResult {
        h_plus: out[0],
        h_minus: out[1],
        h_total: out[0] + out[1],
        cutoff,
        tail_mass,
        richardson_residual: residual,
        sld_consistency: consistency,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qfi::qfi_at;

    #[test]
    fn thermal_examples() {
        let vac = thermal_fock(0.0, 7, DEFAULT_TAIL_BOUND).unwrap();
        assert_eq!(vac.probs[0], 1.0);
        assert!(vac.probs[1..].iter().all(|&p| p == 0.0));

        let one = thermal_fock(1.0, 40, 1.0).unwrap();
        let norm = 1.0 - one.tail_mass;
        for (k, want) in [0.5, 0.25, 0.125].into_iter().enumerate() {
            assert!((one.probs[k] * norm - want).abs() < 1e-15);
        }

        let t = thermal_fock(0.2, 30, DEFAULT_TAIL_BOUND).unwrap();
        assert!((t.mean() - 0.2).abs() < 1e-10);
        assert!(matches!(thermal_fock(1.2, 30, 1e-10), Err(Error::CutoffTooSmall { .. })));
        assert!(thermal_fock(0.2, 1, 1.0).is_err());
    }

    #[test]
    fn cutoff_sizing_meets_bound() {
        for &n in &[0.01, 0.3, 1.2, 2.5] {
            let d = cutoff_for(n, 1e-10);
            assert!(thermal_fock(n, d, 1e-10).is_ok());
            assert!(thermal_fock(n, d - 1, 1e-10).is_err());
        }
    }

    #[test]
    fn beam_splitter_examples() {
        let id = beam_splitter_fock(0.0, 6).unwrap();
        assert_eq!(id, DMatrix::identity(36, 36));

        let d = 5;
        let u = beam_splitter_fock(std::f64::consts::FRAC_PI_2, d).unwrap();
        let (ket10, ket01) = (d, 1);
        assert!((u[(ket01, ket10)].abs() - 1.0).abs() < 1e-12);
        assert!((u[(ket10, ket01)].abs() - 1.0).abs() < 1e-12);

        let d = 15;
        let u = beam_splitter_fock(0.3, d).unwrap();
        let dev = (u.transpose() * &u - DMatrix::identity(d * d, d * d)).amax();
        assert!(dev <= 1e-10);
        // conserves total photon number
        for i in 0..d * d {
            for j in 0..d * d {
                if (i / d + i % d) != (j / d + j % d) {
                    assert_eq!(u[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn generator_matches_ladder_operators() {
        let d = 6;
        let mut a = DMatrix::zeros(d, d);
        for n in 1..d {
            a[(n - 1, n)] = (n as f64).sqrt();
        }
        let id = DMatrix::identity(d, d);
        let (aa, bb) = (a.kronecker(&id), id.kronecker(&a));
        let full = &aa * bb.transpose() - aa.transpose() * &bb;
        for block in photon_blocks(d).into_iter().filter(|b| b.total < d) {
            let g = block.generator();
            for (i, &ni) in block.n_a.iter().enumerate() {
                for (j, &nj) in block.n_a.iter().enumerate() {
                    let gi = ni * d + block.total - ni;
                    let gj = nj * d + block.total - nj;
                    assert!((g[(i, j)] - full[(gi, gj)]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn two_mode_state_is_a_density_matrix() {
        let st = two_mode_state(0.4, 0.1, 0.7, 20, 1e-6).unwrap();
        assert!((st.rho.trace() - 1.0).abs() < 1e-12);
        assert!((&st.rho - st.rho.transpose()).amax() < 1e-12);
        assert!(st.rho.clone().symmetric_eigenvalues().min() >= -1e-12);
    }

    #[test]
    fn sld_is_consistent() {
        let st = two_mode_state(0.5, 0.1, 0.4, 12, 1e-3).unwrap();
        // ∂/∂θ of U ρ U† at fixed occupations is [K, ρ]
        let blocks = photon_blocks(12);
        let mut k = DMatrix::zeros(144, 144);
        for b in blocks {
            let g = b.generator();
            let idx: Vec<usize> = b.n_a.iter().map(|&na| na * 12 + b.total - na).collect();
            for (i, &gi) in idx.iter().enumerate() {
                for (j, &gj) in idx.iter().enumerate() {
                    k[(gi, gj)] = g[(i, j)];
                }
            }
        }
        let drho = &k * &st.rho - &st.rho * &k;
        let s = sld(&st.rho, &drho, DEFAULT_EIG_FLOOR);
        let lhs = (&st.rho * &s.l + &s.l * &st.rho) * 0.5;
        assert!((lhs - &drho).amax() < 1e-8);
        assert!(s.consistency < 1e-12);
    }

    fn scene(s: f64) -> SceneParams<f64> {
        SceneParams::new(s, 1.0, 0.3, 0.5, 0.1)
    }

    #[test]
    fn oracle_matches_closed_form() {
        let g = Psf::<f64>::gaussian(1.0).unwrap();
        let p = scene(0.8);
        let opts = OracleOptions { cutoff: Some(25), tail_bound: 1e-9, ..Default::default() };
        let o = oracle_qfi(&g, &p, &opts).unwrap();
        let c = qfi_at(&g, &p).unwrap();
        assert!(((o.h_total - c.h_total) / c.h_total).abs() < 1e-4, "{} vs {}", o.h_total, c.h_total);
        assert!(((o.h_plus - c.h_plus) / c.h_plus).abs() < 1e-4);
        assert!(o.sld_consistency < 1e-8);
    }

    #[test]
    fn oracle_quadratic_at_small_separation() {
        let g = Psf::<f64>::gaussian(1.0).unwrap();
        let opts = OracleOptions { fd_step: 1e-5, ..Default::default() };
        let a = oracle_qfi(&g, &scene(0.05), &opts).unwrap().h_total / 0.05f64.powi(2);
        let b = oracle_qfi(&g, &scene(0.025), &opts).unwrap().h_total / 0.025f64.powi(2);
        assert!(((a - b) / b).abs() < 0.02);
    }

    #[test]
    fn oracle_stable_under_eigen_floor() {
        let g = Psf::<f64>::gaussian(1.0).unwrap();
        let p = SceneParams::<f64>::new(0.6, 1.0, 0.5, 0.6, 0.05);
        let run = |floor| oracle_qfi(&g, &p, &OracleOptions { eig_floor: floor, ..Default::default() }).unwrap().h_total;
        let (a, b) = (run(1e-12), run(1e-9));
        assert!(((a - b) / a).abs() < 1e-4);
    }

    #[test]
    fn oracle_edge_cases() {
        let g = Psf::<f64>::gaussian(1.0).unwrap();
        let none = SceneParams::<f64>::new(0.5, 1.0, 0.3, 0.0, 0.1);
        assert_eq!(oracle_qfi(&g, &none, &OracleOptions::default()).unwrap().h_total, 0.0);
        let opts = OracleOptions { cutoff: Some(5), ..Default::default() };
        assert!(matches!(oracle_qfi(&g, &scene(0.8), &opts), Err(Error::CutoffTooSmall { .. })));
    }
}
