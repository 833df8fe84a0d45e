//! JSON validation reports: Fock-space oracle agreement and Monte Carlo
//! moment checks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use superres::fock::{oracle_qfi, OracleOptions};
use superres::montecarlo::{compare, estimate_moments, McConfig, McEstimate, McValidation, CHUNK, Z_LIMIT};
use superres::qfi::qfi_at;
use superres::spade::{spade_covariance, spade_mean};
use superres::{Psf, SceneParams};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OraclePoint {
    pub s: f64,
    pub eta_n_s: f64,
    pub n_n: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default = "half")]
    pub eta: f64,
}

impl OraclePoint {
    pub fn new(s: f64, eta_n_s: f64, n_n: f64) -> Self {
        OraclePoint { s, eta_n_s, n_n, sigma: 1.0, eta: 0.5 }
    }

    fn scene(&self) -> SceneParams<f64> {
        SceneParams::from_signal(self.s, self.sigma, self.eta, self.eta_n_s, self.n_n)
    }
}

/// Six points spanning both separation regimes, `ηN_s ≤ 0.5` and `N_n ∈ [0.05, 0.2]`.
pub fn default_oracle_panel() -> Vec<OraclePoint> {
    [(0.05, 0.2, 0.05), (0.05, 0.5, 0.2), (0.8, 0.2, 0.2), (0.8, 0.5, 0.05), (0.05, 0.5, 0.05), (0.8, 0.2, 0.05)]
        .into_iter()
        .map(|(s, x, nn)| OraclePoint::new(s, x, nn))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleSettings {
    pub cutoff: Option<usize>,
    pub fd_step: f64,
    pub tail_bound: f64,
    pub tolerance: f64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        OracleSettings { cutoff: Some(30), fd_step: 1e-4, tail_bound: 1e-7, tolerance: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleEntry {
    pub point: OraclePoint,
    pub h_closed: Option<f64>,
    pub h_oracle: Option<f64>,
    /// Relative difference; absolute when the closed form is zero.
    pub rel_error: Option<f64>,
    pub cutoff: Option<usize>,
    pub tail_mass: Option<f64>,
    pub richardson_residual: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub schema_version: u32,
    pub settings: OracleSettings,
    pub entries: Vec<OracleEntry>,
    pub max_rel_error: Option<f64>,
    pub pass: bool,
}

fn oracle_entry(point: OraclePoint, settings: &OracleSettings) -> OracleEntry {
    let mut entry = OracleEntry {
        point,
        h_closed: None,
        h_oracle: None,
        rel_error: None,
        cutoff: None,
        tail_mass: None,
        richardson_residual: None,
        error: None,
    };
    let p = point.scene();
    let opts = OracleOptions {
        cutoff: settings.cutoff,
        fd_step: settings.fd_step,
        tail_bound: settings.tail_bound,
        ..OracleOptions::default()
    };
    let mut run = || -> superres::Result<()> {
        let psf = Psf::gaussian(p.sigma)?;
        let closed = qfi_at(&psf, &p)?.h_total;
        entry.h_closed = Some(closed);
        let o = oracle_qfi(&psf, &p, &opts)?;
        entry.h_oracle = Some(o.h_total);
        entry.cutoff = Some(o.cutoff);
        entry.tail_mass = Some(o.tail_mass);
        entry.richardson_residual = Some(o.richardson_residual);
        let diff = (o.h_total - closed).abs();
        entry.rel_error = Some(if closed == 0.0 { diff } else { diff / closed });
        Ok(())
    };
    if let Err(e) = run() {
        entry.error = Some(e.to_string());
    }
    entry
}

/// Runs every point; a failing point is recorded and the batch continues.
pub fn oracle_check(points: &[OraclePoint], settings: OracleSettings) -> OracleReport {
    let entries: Vec<OracleEntry> = points.par_iter().map(|&pt| oracle_entry(pt, &settings)).collect();
    let max_rel_error = entries.iter().filter_map(|e| e.rel_error).reduce(f64::max);
    let pass = entries.iter().all(|e| e.error.is_none() && e.rel_error.is_some_and(|r| r <= settings.tolerance));
    OracleReport { schema_version: SCHEMA_VERSION, settings, entries, max_rel_error, pass }
}

pub fn parse_points(text: &str) -> CliResult<Vec<OraclePoint>> {
    serde_json::from_str(text).map_err(|e| CliError::validation(format!("points file: {e}")))
}

/// Scales one analytic covariance entry (and its mirror) before scoring;
/// a negative control for the validation itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corruption {
    pub q: usize,
    pub q2: usize,
    pub factor: f64,
}

impl Corruption {
    pub fn parse(text: &str) -> CliResult<Self> {
        let bad = || CliError::validation(format!("`{text}`: expected q,q2,factor"));
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        let [q, q2, f] = parts[..] else { return Err(bad()) };
        Ok(Corruption {
            q: q.parse().map_err(|_| bad())?,
            q2: q2.parse().map_err(|_| bad())?,
            factor: f.parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McFailure {
    pub moment: String,
    pub q: usize,
    pub q2: Option<usize>,
    pub z: f64,
    pub empirical: f64,
    pub analytic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub schema_version: u32,
    pub seed: u64,
    pub samples: u64,
    pub mode_count: usize,
    pub rng: String,
    pub chunk_size: u64,
    pub params: SceneParams<f64>,
    pub corruption: Option<Corruption>,
    pub z_limit: f64,
    pub pass: bool,
    pub max_abs_z: f64,
    pub max_abs_z_odd: f64,
    pub failures: Vec<McFailure>,
    pub estimate: McEstimate,
    pub validation: McValidation,
}

pub fn mc_validate(cfg: &McConfig, corruption: Option<Corruption>) -> CliResult<McReport> {
    let q = cfg.mode_count;
    if let Some(c) = corruption {
        if c.q >= q || c.q2 >= q {
            return Err(CliError::validation("corrupted entry outside the mode range"));
        }
    }
    let est = estimate_moments(cfg)?;
    let mu: Vec<f64> = (0..q).map(|i| spade_mean(&cfg.params, i)).collect();
    let cm = spade_covariance(&cfg.params, q)?;
    let mut c: Vec<Vec<f64>> = (0..q).map(|i| (0..q).map(|j| cm[(i, j)]).collect()).collect();
    if let Some(k) = corruption {
        c[k.q][k.q2] *= k.factor;
        if k.q != k.q2 {
            c[k.q2][k.q] *= k.factor;
        }
    }
    let v = compare(&est, &mu, &c);
    let mut failures = Vec::new();
    for i in 0..q {
        if v.mu_z[i].abs() > Z_LIMIT {
            failures.push(McFailure { moment: "mu".into(), q: i, q2: None, z: v.mu_z[i], empirical: est.mu_hat[i], analytic: mu[i] });
        }
        for j in i..q {
            if v.c_z[i][j].abs() > Z_LIMIT {
                failures.push(McFailure {
                    moment: "c".into(),
                    q: i,
                    q2: Some(j),
                    z: v.c_z[i][j],
                    empirical: est.c_hat[i][j],
                    analytic: c[i][j],
                });
            }
        }
    }
    Ok(McReport {
        schema_version: SCHEMA_VERSION,
        seed: cfg.seed,
        samples: cfg.samples,
        mode_count: q,
        rng: "ChaCha8 (rand_chacha 0.9), seed_from_u64(seed), stream = chunk index".into(),
        chunk_size: CHUNK,
        params: cfg.params,
        corruption,
        z_limit: Z_LIMIT,
        pass: v.pass,
        max_abs_z: v.max_abs_z,
        max_abs_z_odd: v.max_abs_z_odd,
        failures,
        estimate: est,
        validation: v,
    })
}

pub fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}
