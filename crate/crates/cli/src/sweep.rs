//! Sweep description: axes, fixed parameters and requested outputs.
//!
//! A sweep is a JSON document such as
//!
//! ```json
//! {
//!   "axes": [
//!     { "param": "s", "min": 0.01, "max": 10, "points": 60, "scale": "log" },
//!     { "param": "eta_n_s", "values": [1, 10, 100] }
//!   ],
//!   "fixed": { "sigma": 1, "eta": 0.5, "n_n": 0.01 },
//!   "outputs": ["qfi-closed", "asymptotics"],
//!   "q_modes": 15
//! }
//! ```
//!
//! Grid points are enumerated with the first axis outermost.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use superres::SceneParams;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    S,
    Sigma,
    Eta,
    NS,
    EtaNS,
    NN,
    Dark,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Param::S => "s",
            Param::Sigma => "sigma",
            Param::Eta => "eta",
            Param::NS => "n_s",
            Param::EtaNS => "eta_n_s",
            Param::NN => "n_n",
            Param::Dark => "dark",
        }
    }

    pub fn parse(name: &str) -> CliResult<Self> {
        const ALL: [Param; 7] = [Param::S, Param::Sigma, Param::Eta, Param::NS, Param::EtaNS, Param::NN, Param::Dark];
        ALL.into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| CliError::validation(format!("unknown parameter `{name}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub param: Param,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default)]
    pub scale: Scale,
    /// Explicit values; replaces `min`/`max`/`points`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl Axis {
    /// Parses `param=scale:min:max:points` or `param=v1,v2,...`.
    pub fn parse(text: &str) -> CliResult<Self> {
        let bad = || CliError::validation(format!("axis `{text}`: expected param=log|linear:min:max:points or param=v1,v2,..."));
        let (name, rest) = text.split_once('=').ok_or_else(bad)?;
        let param = Param::parse(name.trim())?;
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let fields: Vec<&str> = rest.split(':').collect();
        if let [scale, min, max, points] = fields[..] {
            let scale = match scale.trim() {
                "log" => Scale::Log,
                "linear" => Scale::Linear,
                _ => return Err(bad()),
            };
            let points = points.trim().parse::<usize>().map_err(|_| bad())?;
            return Ok(Axis { param, min: Some(num(min)?), max: Some(num(max)?), points: Some(points), scale, values: None });
        }
        let values = rest.split(',').map(num).collect::<CliResult<Vec<_>>>()?;
        Ok(Axis { param, min: None, max: None, points: None, scale: Scale::Linear, values: Some(values) })
    }

    pub fn values(&self) -> CliResult<Vec<f64>> {
        let name = self.param.name();
        if let Some(v) = &self.values {
            if v.is_empty() {
                return Err(CliError::validation(format!("axis `{name}` has no values")));
            }
            return Ok(v.clone());
        }
        let (Some(lo), Some(hi), Some(n)) = (self.min, self.max, self.points) else {
            return Err(CliError::validation(format!("axis `{name}` needs min, max and points, or values")));
        };
        if n < 2 {
            return Err(CliError::validation(format!("axis `{name}` needs at least 2 points")));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(CliError::validation(format!("axis `{name}` needs finite min < max")));
        }
        let t = |i: usize| i as f64 / (n - 1) as f64;
        Ok(match self.scale {
            Scale::Linear => (0..n).map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * t(i) }).collect(),
            Scale::Log => {
                if lo <= 0.0 {
                    return Err(CliError::validation(format!("log axis `{name}` needs positive bounds")));
                }
                let (a, b) = (lo.log10(), hi.log10());
                (0..n).map(|i| if i == n - 1 { hi } else { 10f64.powf(a + (b - a) * t(i)) }).collect()
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Output {
    QfiClosed,
    QfiSolver,
    Asymptotics,
    Normalized,
    Cfi,
    Ratio,
}

impl Output {
    pub fn parse(name: &str) -> CliResult<Self> {
        serde_json::from_value(serde_json::Value::String(name.trim().to_string()))
            .map_err(|_| CliError::validation(format!("unknown output `{name}`")))
    }
}

fn default_outputs() -> Vec<Output> {
    vec![Output::QfiClosed, Output::Asymptotics]
}

fn default_q_modes() -> usize {
    superres::spade::DEFAULT_MODES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axes: Vec<Axis>,
    #[serde(default)]
    pub fixed: BTreeMap<Param, f64>,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<Output>,
    #[serde(default = "default_q_modes")]
    pub q_modes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec { axes: Vec::new(), fixed: BTreeMap::new(), outputs: default_outputs(), q_modes: default_q_modes(), output: None }
    }
}

/// Command-line adjustments layered on top of a sweep file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub axes: Vec<Axis>,
    pub fixed: Vec<(Param, f64)>,
    pub outputs: Option<Vec<Output>>,
    pub q_modes: Option<usize>,
    pub output: Option<PathBuf>,
}

pub fn parse_fixed(text: &str) -> CliResult<(Param, f64)> {
    let (k, v) = text
        .split_once('=')
        .ok_or_else(|| CliError::validation(format!("`{text}`: expected param=value")))?;
    let v = v
        .trim()
        .parse::<f64>()
        .map_err(|_| CliError::validation(format!("`{text}`: value is not a number")))?;
    Ok((Param::parse(k.trim())?, v))
}

impl SweepSpec {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::validation(format!("sweep file: {e}")))
    }

    /// An axis override replaces the axis of the same parameter (or is
    /// appended); a fixed override removes any axis over that parameter.
    pub fn apply(mut self, o: Overrides) -> Self {
        for (p, v) in o.fixed {
            self.axes.retain(|a| a.param != p);
            self.fixed.insert(p, v);
        }
        for a in o.axes {
            self.fixed.remove(&a.param);
            match self.axes.iter_mut().find(|b| b.param == a.param) {
                Some(slot) => *slot = a,
                None => self.axes.push(a),
            }
        }
        if let Some(out) = o.outputs {
            self.outputs = out;
        }
        if let Some(q) = o.q_modes {
            self.q_modes = q;
        }
        if o.output.is_some() {
            self.output = o.output;
        }
        self
    }

    pub fn wants(&self, o: Output) -> bool {
        self.outputs.contains(&o)
    }

    /// Every grid point as scene parameters, first axis outermost.
    pub fn grid(&self) -> CliResult<Vec<SceneParams<f64>>> {
        if self.q_modes == 0 {
            return Err(CliError::validation("q_modes must be >= 1"));
        }
        let mut seen = Vec::new();
        for a in &self.axes {
            if seen.contains(&a.param) {
                return Err(CliError::validation(format!("parameter `{}` has two axes", a.param.name())));
            }
            if self.fixed.contains_key(&a.param) {
                return Err(CliError::validation(format!("parameter `{}` is both fixed and swept", a.param.name())));
            }
            seen.push(a.param);
        }
        let values = self.axes.iter().map(Axis::values).collect::<CliResult<Vec<_>>>()?;
        let total: usize = values.iter().map(Vec::len).product();
        let mut points = Vec::with_capacity(total);
        let mut idx = vec![0usize; values.len()];
        for _ in 0..total {
            let mut assign = self.fixed.clone();
            for (k, a) in self.axes.iter().enumerate() {
                assign.insert(a.param, values[k][idx[k]]);
            }
            points.push(scene_from(&assign)?);
            for k in (0..idx.len()).rev() {
                idx[k] += 1;
                if idx[k] < values[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
        Ok(points)
    }
}

fn scene_from(assign: &BTreeMap<Param, f64>) -> CliResult<SceneParams<f64>> {
    let get = |p: Param| assign.get(&p).copied();
    let s = get(Param::S).ok_or_else(|| CliError::validation("separation `s` is neither fixed nor swept"))?;
    let sigma = get(Param::Sigma).unwrap_or(1.0);
    let eta = get(Param::Eta).unwrap_or(0.5);
    let n_s = match (get(Param::NS), get(Param::EtaNS)) {
        (Some(_), Some(_)) => return Err(CliError::validation("give either `n_s` or `eta_n_s`, not both")),
        (Some(n), None) => n,
        (None, Some(x)) => x / eta,
        (None, None) => return Err(CliError::validation("signal `n_s` or `eta_n_s` is neither fixed nor swept")),
    };
    let p = SceneParams::new(s, sigma, eta, n_s, get(Param::NN).unwrap_or(0.0)).with_dark(get(Param::Dark).unwrap_or(0.0));
    p.validate()?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_grammar() {
        let a = Axis::parse("s=log:0.01:10:4").unwrap();
        let v = a.values().unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!((v[0], v[3]), (0.01, 10.0));
        assert!((v[1] - 0.1).abs() < 1e-15);
        assert_eq!(Axis::parse("n_n=0,0.01,1").unwrap().values().unwrap(), vec![0.0, 0.01, 1.0]);
        assert!(Axis::parse("s=log:0:1:5").unwrap().values().is_err());
        assert!(Axis::parse("s=linear:0:1:1").unwrap().values().is_err());
        assert!(Axis::parse("q=1,2").is_err());
    }

    #[test]
    fn grid_order_and_overrides() {
        let spec = SweepSpec::from_json(
            r#"{"axes":[{"param":"s","values":[0.1,0.2]},{"param":"eta_n_s","values":[1,2,3]}],
                "fixed":{"n_n":0.01}}"#,
        )
        .unwrap();
        let g = spec.grid().unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!((g[0].s, g[0].eta_n_s()), (0.1, 1.0));
        assert_eq!((g[1].s, g[1].eta_n_s()), (0.1, 2.0));
        assert_eq!((g[3].s, g[3].eta_n_s()), (0.2, 1.0));

        let o = Overrides { fixed: vec![(Param::EtaNS, 5.0)], ..Default::default() };
        let g = spec.clone().apply(o).grid().unwrap();
        assert_eq!(g.len(), 2);
        assert!(g.iter().all(|p| (p.eta_n_s() - 5.0).abs() < 1e-15));
    }

    #[test]
    fn grid_rejects_bad_specs() {
        assert!(SweepSpec::from_json(r#"{"axes":[],"bogus":1}"#).is_err());
        let missing_s = SweepSpec { fixed: [(Param::EtaNS, 1.0)].into(), ..Default::default() };
        assert!(missing_s.grid().is_err());
        let both = SweepSpec { fixed: [(Param::S, 0.1), (Param::EtaNS, 1.0), (Param::NS, 1.0)].into(), ..Default::default() };
        assert!(both.grid().is_err());
        let bad_eta = SweepSpec { fixed: [(Param::S, 0.1), (Param::NS, 1.0), (Param::Eta, 0.9)].into(), ..Default::default() };
        assert!(matches!(bad_eta.grid(), Err(CliError::Validation(_))));
    }
}
