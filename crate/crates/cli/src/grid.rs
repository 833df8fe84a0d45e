//! Grid commands: QFI sweeps, SPADE bound sweeps and the bound/QFI ratio map.
//!
//! Lengths are written in units of σ and information in units of 1/σ², so
//! the `s` column holds `s/σ` and `h_*` columns hold `H·σ²`.

use rayon::prelude::*;
use superres::overlap::calculus_at;
use superres::qfi::{qfi_asymptotic, qfi_closed_form, qfi_general, s_star, select_regime};
use superres::spade::spade_cfi_bound;
use superres::{Psf, SceneParams};

use crate::error::{CliError, CliResult};
use crate::sweep::{Output, SweepSpec};
use crate::table::{num, opt, Table};

fn run_rows<F>(points: &[SceneParams<f64>], row: F) -> CliResult<Vec<Vec<String>>>
where
    F: Fn(&SceneParams<f64>) -> CliResult<Vec<String>> + Sync + Send,
{
    points.par_iter().map(row).collect()
}

fn with_point(p: &SceneParams<f64>, e: CliError) -> CliError {
    let at = format!("at s={}, sigma={}, eta_n_s={}, n_n={}", p.s, p.sigma, p.eta_n_s(), p.n_n);
    match e {
        CliError::Validation(m) => CliError::Validation(format!("{m} ({at})")),
        CliError::Numerical(m) => CliError::Numerical(format!("{m} ({at})")),
        io => io,
    }
}

pub fn qfi_sweep(spec: &SweepSpec) -> CliResult<Table> {
    let points = spec.grid()?;
    let mut header = vec![
        "s", "sigma", "eta", "n_s", "eta_n_s", "n_n", "h_plus", "h_minus", "h_total", "h_asymptotic", "regime",
        "regime_valid", "s_star", "h_at_s_star",
    ];
    let extras = [
        (Output::QfiSolver, "h_solver"),
        (Output::Normalized, "h_per_signal"),
        (Output::Cfi, "cfi"),
        (Output::Ratio, "ratio"),
    ];
    header.extend(extras.iter().filter(|(o, _)| spec.wants(*o)).map(|(_, n)| *n));
    let mut table = Table::new(&header);
    table.rows = run_rows(&points, |p| qfi_row(spec, p).map_err(|e| with_point(p, e)))?;
    Ok(table)
}

fn qfi_row(spec: &SweepSpec, p: &SceneParams<f64>) -> CliResult<Vec<String>> {
    let psf = Psf::gaussian(p.sigma)?;
    let oc = calculus_at(&psf, p.s, p.eta)?;
    let h = qfi_closed_form(p, &oc)?;
    let sig2 = p.sigma * p.sigma;
    let regime = select_regime(p);
    let asym = qfi_asymptotic(&psf, p, regime).ok();
    let star = s_star(p).ok();
    let mut row = vec![
        num(p.s / p.sigma),
        num(p.sigma),
        num(p.eta),
        num(p.n_s),
        num(p.eta_n_s()),
        num(p.n_n),
        num(h.h_plus * sig2),
        num(h.h_minus * sig2),
        num(h.h_total * sig2),
        opt(asym.map(|a| a.value * sig2)),
        regime.tag().to_string(),
        asym.map(|a| a.valid.to_string()).unwrap_or_default(),
        opt(star.map(|st| st.s_star / p.sigma)),
        opt(star.map(|st| st.h_at_s_star * sig2)),
    ];
    if spec.wants(Output::QfiSolver) {
        row.push(num(qfi_general(p, &oc)?.h_total * sig2));
    }
    if spec.wants(Output::Normalized) {
        let x = p.eta_n_s();
        row.push(opt((x > 0.0).then(|| h.h_total * sig2 / x)));
    }
    let needs_cfi = spec.wants(Output::Cfi) || spec.wants(Output::Ratio);
    let cfi = if needs_cfi { Some(spade_cfi_bound(p, spec.q_modes)?) } else { None };
    if spec.wants(Output::Cfi) {
        row.push(opt(cfi.map(|f| f * sig2)));
    }
    if spec.wants(Output::Ratio) {
        row.push(opt(cfi.filter(|_| h.h_total > 0.0).map(|f| f / h.h_total)));
    }
    Ok(row)
}

pub fn cfi_sweep(spec: &SweepSpec) -> CliResult<Table> {
    let points = spec.grid()?;
    let mut table = Table::new(&["s", "sigma", "eta", "eta_n_s", "n_n", "dark", "q_modes", "cfi"]);
    table.rows = run_rows(&points, |p| {
        let f = spade_cfi_bound(p, spec.q_modes).map_err(|e| with_point(p, e.into()))?;
        Ok(vec![
            num(p.s / p.sigma),
            num(p.sigma),
            num(p.eta),
            num(p.eta_n_s()),
            num(p.n_n),
            num(p.dark),
            spec.q_modes.to_string(),
            num(f * p.sigma * p.sigma),
        ])
    })?;
    Ok(table)
}

/// `F/H` per grid point. Points where the ratio is undefined or a quantity
/// fails are kept, with the reason in the `status` column.
pub fn ratio_map(spec: &SweepSpec) -> CliResult<Table> {
    let points = spec.grid()?;
    let mut table = Table::new(&["s", "eta_n_s", "n_n", "q_modes", "cfi", "qfi", "ratio", "status"]);
    table.rows = run_rows(&points, |p| {
        let sig2 = p.sigma * p.sigma;
        let h = Psf::gaussian(p.sigma).and_then(|psf| calculus_at(&psf, p.s, p.eta)).and_then(|oc| qfi_closed_form(p, &oc));
        let f = spade_cfi_bound(p, spec.q_modes);
        let (cfi, qfi, ratio, status) = match (f, h) {
            (Ok(f), Ok(h)) if h.h_total > 0.0 => (Some(f), Some(h.h_total), Some(f / h.h_total), "ok".to_string()),
            (Ok(f), Ok(h)) => (Some(f), Some(h.h_total), None, "undefined: zero qfi".to_string()),
            (Err(e), _) | (_, Err(e)) => (None, None, None, format!("error: {}", e.to_string().replace(',', ";"))),
        };
        Ok(vec![
            num(p.s / p.sigma),
            num(p.eta_n_s()),
            num(p.n_n),
            spec.q_modes.to_string(),
            opt(cfi.map(|v| v * sig2)),
            opt(qfi.map(|v| v * sig2)),
            opt(ratio),
            status,
        ])
    })?;
    Ok(table)
}
