//! Preset sweeps that regenerate the data behind each figure.

use crate::error::{CliError, CliResult};
use crate::grid::{qfi_sweep, ratio_map};
use crate::sweep::SweepSpec;
use crate::table::Table;

/// QFI maps and cuts (`1a`–`1d`) and the bound/QFI ratio map (`2`).
pub const FIGURES: [&str; 5] = ["1a", "1b", "1c", "1d", "2"];

pub fn preset(name: &str) -> CliResult<SweepSpec> {
    let text = match name {
        "1a" => include_str!("../presets/fig1a.json"),
        "1b" => include_str!("../presets/fig1b.json"),
        "1c" => include_str!("../presets/fig1c.json"),
        "1d" => include_str!("../presets/fig1d.json"),
        "2" => include_str!("../presets/fig2.json"),
        _ => return Err(CliError::validation(format!("unknown figure `{name}`; expected one of {}", FIGURES.join(", ")))),
    };
    SweepSpec::from_json(text)
}

pub fn figure(name: &str, spec: &SweepSpec) -> CliResult<Table> {
    if name == "2" {
        ratio_map(spec)
    } else {
        qfi_sweep(spec)
    }
}
