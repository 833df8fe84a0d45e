//! Direct sampling of fin-SPADE photocounts.
//!
//! Per sample: source amplitudes `A₁, A₂` and per-mode noise `ξ_q` are
//! circular complex Gaussians with `⟨|A|²⟩ = ηN_s`, `⟨|ξ_q|²⟩ = N_n`; the mode
//! amplitude is `B_q = R_q √f_q + ξ_q` with `R_q = A₁ + A₂` for even `q` and
//! `A₁ − A₂` for odd `q`; the count is `N_q ~ Poisson(|B_q|² + D)`.
//!
//! Samples are generated in chunks of [`CHUNK`]. Chunk `k` draws from
//! `ChaCha8Rng::seed_from_u64(seed)` on stream `k`, so the sample stream
//! depends only on `(seed, config)`. Moments are accumulated as exact integer
//! power sums, which makes the estimate independent of how chunks are split
//! across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::scene::SceneParams;
use crate::spade::{mode_fractions, spade_covariance, spade_stats};
use crate::{Error, Result};

pub const CHUNK: u64 = 1 << 14;
pub const MIN_SAMPLES_FOR_ESTIMATE: u64 = 1000;
pub const Z_LIMIT: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
    pub params: SceneParams<f64>,
    pub mode_count: usize,
}

impl McConfig {
    pub fn new(params: SceneParams<f64>, mode_count: usize, samples: u64, seed: u64) -> Result<Self> {
        let cfg = McConfig { samples, seed, params, mode_count };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.samples == 0 {
            return Err(Error::invalid("samples", "must be >= 1"));
        }
        if self.mode_count == 0 {
            return Err(Error::invalid("mode_count", "must be >= 1"));
        }
        Ok(())
    }

    fn chunks(&self) -> u64 {
        self.samples.div_ceil(CHUNK)
    }

    fn chunk_len(&self, k: u64) -> u64 {
        CHUNK.min(self.samples - k * CHUNK)
    }
}

struct Sampler {
    sqrt_f: Vec<f64>,
    amp_sd: f64,
    noise_sd: f64,
    dark: f64,
}

impl Sampler {
    fn new(cfg: &McConfig) -> Self {
        let p = &cfg.params;
        Sampler {
            sqrt_f: mode_fractions(p, cfg.mode_count).iter().map(|f| f.sqrt()).collect(),
            amp_sd: (p.eta_n_s() / 2.0).sqrt(),
            noise_sd: (p.n_n / 2.0).sqrt(),
            dark: p.dark,
        }
    }

    fn gauss(rng: &mut ChaCha8Rng, sd: f64) -> (f64, f64) {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        (sd * re, sd * im)
    }

    fn draw(&self, rng: &mut ChaCha8Rng, out: &mut [u64]) {
        let a1 = Self::gauss(rng, self.amp_sd);
        let a2 = Self::gauss(rng, self.amp_sd);
        for (q, slot) in out.iter_mut().enumerate() {
            let r = if q % 2 == 0 { (a1.0 + a2.0, a1.1 + a2.1) } else { (a1.0 - a2.0, a1.1 - a2.1) };
            let xi = Self::gauss(rng, self.noise_sd);
            let b = (r.0 * self.sqrt_f[q] + xi.0, r.1 * self.sqrt_f[q] + xi.1);
            let lambda = b.0 * b.0 + b.1 * b.1 + self.dark;
            *slot = if lambda > 0.0 {
                Poisson::new(lambda).expect("finite positive rate").sample(rng) as u64
            } else {
                0
            };
        }
    }

    fn chunk(&self, cfg: &McConfig, k: u64, mut visit: impl FnMut(&[u64])) {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(k);
        let mut counts = vec![0u64; cfg.mode_count];
        for _ in 0..cfg.chunk_len(k) {
            self.draw(&mut rng, &mut counts);
            visit(&counts);
        }
    }
}

/// The sample stream, one count vector per sample, generated lazily chunk by
/// chunk. [`estimate_moments`] consumes exactly this stream.
pub fn sample_counts(cfg: &McConfig) -> Result<impl Iterator<Item = Vec<u64>> + '_> {
    cfg.validate()?;
    let sampler = Sampler::new(cfg);
    Ok((0..cfg.chunks()).flat_map(move |k| {
        let mut buf = Vec::with_capacity(cfg.chunk_len(k) as usize);
        sampler.chunk(cfg, k, |c| buf.push(c.to_vec()));
        buf
    }))
}

/// Exact integer power sums over a set of samples.
#[derive(Debug, Clone, PartialEq)]
struct Sums {
    q: usize,
    n: u64,
    x: Vec<u128>,
    /// Row-major `q × q` tables of `Σ x_i x_j`, `Σ x_i² x_j`, `Σ x_i² x_j²`.
    xy: Vec<u128>,
    xxy: Vec<u128>,
    xxyy: Vec<u128>,
}

impl Sums {
    fn new(q: usize) -> Self {
        Sums { q, n: 0, x: vec![0; q], xy: vec![0; q * q], xxy: vec![0; q * q], xxyy: vec![0; q * q] }
    }

    fn push(&mut self, c: &[u64]) {
        self.n += 1;
        for i in 0..self.q {
            let xi = c[i] as u128;
            self.x[i] += xi;
            for j in 0..self.q {
                let xj = c[j] as u128;
                let k = i * self.q + j;
                self.xy[k] += xi * xj;
                self.xxy[k] += xi * xi * xj;
                self.xxyy[k] += xi * xi * xj * xj;
            }
        }
    }

    fn merge(mut self, o: Sums) -> Sums {
        self.n += o.n;
        for (a, b) in [(&mut self.x, &o.x), (&mut self.xy, &o.xy), (&mut self.xxy, &o.xxy), (&mut self.xxyy, &o.xxyy)] {
            a.iter_mut().zip(b).for_each(|(a, b)| *a += b);
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub samples: u64,
    pub mu_hat: Vec<f64>,
    pub c_hat: Vec<Vec<f64>>,
    pub mu_se: Vec<f64>,
    pub c_se: Vec<Vec<f64>>,
}

fn finish(s: &Sums) -> McEstimate {
    let q = s.q;
    let n = s.n as f64;
    let ni = s.n as i128;
    let avg = |v: u128| v as f64 / n;
    let mean: Vec<f64> = s.x.iter().map(|&v| avg(v)).collect();
    let mut c_hat = vec![vec![0.0; q]; q];
    let mut c_se = vec![vec![0.0; q]; q];
    for i in 0..q {
        for j in 0..q {
            let k = i * q + j;
            // n Σxy − Σx Σy is exact in integers
            let num = ni * s.xy[k] as i128 - s.x[i] as i128 * s.x[j] as i128;
            let c = if s.n > 1 { num as f64 / (n * (n - 1.0)) } else { 0.0 };
            let (a, b) = (mean[i], mean[j]);
            let m22 = avg(s.xxyy[k]) - 2.0 * b * avg(s.xxy[k]) - 2.0 * a * avg(s.xxy[j * q + i])
                + b * b * avg(s.xy[i * q + i])
                + a * a * avg(s.xy[j * q + j])
                + 4.0 * a * b * avg(s.xy[k])
                - 3.0 * a * a * b * b;
            let pop = num as f64 / (n * n);
            c_hat[i][j] = c;
            c_se[i][j] = ((m22 - pop * pop).max(0.0) / n).sqrt();
        }
    }
    let mu_se = (0..q).map(|i| (c_hat[i][i].max(0.0) / n).sqrt()).collect();
    McEstimate { samples: s.n, mu_hat: mean, c_hat, mu_se, c_se }
}

/// Single-pass mean and covariance of the sample stream with standard errors.
pub fn estimate_moments(cfg: &McConfig) -> Result<McEstimate> {
    cfg.validate()?;
    if cfg.samples < MIN_SAMPLES_FOR_ESTIMATE {
        return Err(Error::invalid("samples", format!("must be >= {MIN_SAMPLES_FOR_ESTIMATE} for moment estimates")));
    }
    let sampler = Sampler::new(cfg);
    let sums = (0..cfg.chunks())
        .into_par_iter()
        .map(|k| {
            let mut s = Sums::new(cfg.mode_count);
            sampler.chunk(cfg, k, |c| s.push(c));
            s
        })
        .reduce(|| Sums::new(cfg.mode_count), Sums::merge);
    Ok(finish(&sums))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McValidation {
    pub mu: Vec<f64>,
    pub c: Vec<Vec<f64>>,
    pub mu_z: Vec<f64>,
    pub c_z: Vec<Vec<f64>>,
    pub max_abs_z: f64,
    /// Largest `|z|` over entries with odd `q − q'` (analytic value 0).
    pub max_abs_z_odd: f64,
    pub pass: bool,
}

fn z_score(emp: f64, exact: f64, se: f64) -> f64 {
    if se > 0.0 {
        (emp - exact) / se
    } else if emp == exact {
        0.0
    } else {
        f64::INFINITY.copysign(emp - exact)
    }
}

/// z-scores of an estimate against given analytic moments.
pub fn compare(est: &McEstimate, mu: &[f64], c: &[Vec<f64>]) -> McValidation {
    let q = mu.len();
    let mu_z: Vec<f64> = (0..q).map(|i| z_score(est.mu_hat[i], mu[i], est.mu_se[i])).collect();
    let c_z: Vec<Vec<f64>> =
        (0..q).map(|i| (0..q).map(|j| z_score(est.c_hat[i][j], c[i][j], est.c_se[i][j])).collect()).collect();
    let mut max_abs_z = mu_z.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    let mut max_abs_z_odd = 0.0f64;
    for i in 0..q {
        for j in 0..q {
            max_abs_z = max_abs_z.max(c_z[i][j].abs());
            if (i + j) % 2 == 1 {
                max_abs_z_odd = max_abs_z_odd.max(c_z[i][j].abs());
            }
        }
    }
    McValidation { mu: mu.to_vec(), c: c.to_vec(), mu_z, c_z, max_abs_z, max_abs_z_odd, pass: max_abs_z <= Z_LIMIT }
}

/// Samples `cfg` and scores the result against the analytic moments.
pub fn validate(cfg: &McConfig) -> Result<(McEstimate, McValidation)> {
    let est = estimate_moments(cfg)?;
    let mu = spade_stats(&cfg.params, cfg.mode_count)
        .map(|s| s.mu)
        .or_else(|_| -> Result<_> {
            // the Fisher bound may be undefined (e.g. no light at all); the means are not
            let f = mode_fractions(&cfg.params, cfg.mode_count);
            Ok(f.map(|fq| 2.0 * cfg.params.eta_n_s() * fq + cfg.params.n_n + cfg.params.dark))
        })?;
    let c = spade_covariance(&cfg.params, cfg.mode_count)?;
    let c_rows: Vec<Vec<f64>> = c.row_iter().map(|r| r.iter().copied().collect()).collect();
    let v = compare(&est, mu.as_slice(), &c_rows);
    Ok((est, v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(s: f64, x: f64, nn: f64, q: usize, samples: u64) -> McConfig {
        McConfig::new(SceneParams::from_signal(s, 1.0, 0.5, x, nn), q, samples, 42).unwrap()
    }

    #[test]
    fn dark_and_empty_scene_counts_nothing() {
        let c = cfg(1.0, 0.0, 0.0, 5, 5000);
        assert!(sample_counts(&c).unwrap().all(|v| v.iter().all(|&n| n == 0)));
    }

    #[test]
    fn stream_length_and_determinism() {
        let c = cfg(1.0, 1.0, 0.1, 4, CHUNK + 17);
        let a: Vec<_> = sample_counts(&c).unwrap().collect();
        let b: Vec<_> = sample_counts(&c).unwrap().collect();
        assert_eq!(a.len() as u64, CHUNK + 17);
        assert_eq!(a, b);
        let other = McConfig { seed: 43, ..c };
        assert_ne!(a, sample_counts(&other).unwrap().collect::<Vec<_>>());
    }

    #[test]
    fn estimate_matches_stream_and_ignores_threads() {
        let c = cfg(2.0, 0.5, 0.05, 4, 3 * CHUNK + 5);
        let mut s = Sums::new(4);
        for v in sample_counts(&c).unwrap() {
            s.push(&v);
        }
        let serial = finish(&s);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        assert_eq!(one.install(|| estimate_moments(&c)).unwrap(), serial);
        assert_eq!(four.install(|| estimate_moments(&c)).unwrap(), serial);
    }

    #[test]
    fn noise_only_mean() {
        let c = cfg(1.0, 0.0, 0.3, 3, 1_000_000);
        let (est, v) = validate(&c).unwrap();
        for q in 0..3 {
            assert!(((est.mu_hat[q] - 0.3) / est.mu_se[q]).abs() <= 5.0);
        }
        assert!(v.pass, "{}", v.max_abs_z);
    }

    #[test]
    fn fundamental_mode_variance() {
        let c = cfg(4.0, 1.0, 0.1, 4, 1_000_000);
        let (est, v) = validate(&c).unwrap();
        let e = (-1.0f64).exp();
        let c00 = 4.0 * e * e + 0.4 * e + 2.0 * e + 0.11;
        assert!(((est.c_hat[0][0] - c00) / est.c_se[0][0]).abs() <= 5.0);
        assert!(v.pass, "{}", v.max_abs_z);
    }

    #[test]
    fn standard_errors_shrink_with_samples() {
        let a = estimate_moments(&cfg(2.0, 0.5, 0.05, 3, 200_000)).unwrap();
        let b = estimate_moments(&McConfig { samples: 400_000, ..cfg(2.0, 0.5, 0.05, 3, 1) }).unwrap();
        for q in 0..3 {
            let ratio = a.mu_se[q] / b.mu_se[q];
            assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.1, "{ratio}");
        }
    }

    #[test]
    fn corrupted_reference_is_caught() {
        let c = cfg(2.0, 0.5, 0.05, 4, 200_000);
        let (est, v) = validate(&c).unwrap();
        assert!(v.pass);
        let mut mu = v.mu.clone();
        mu[0] *= 1.05;
        assert!(!compare(&est, &mu, &v.c).pass);
    }

    #[test]
    fn rejects_bad_configs() {
        let p = SceneParams::<f64>::from_signal(1.0, 1.0, 0.5, 1.0, 0.1);
        assert!(McConfig::new(p, 0, 10, 1).is_err());
        assert!(McConfig::new(p, 3, 0, 1).is_err());
        assert!(estimate_moments(&McConfig::new(p, 3, 10, 1).unwrap()).is_err());
    }
}
