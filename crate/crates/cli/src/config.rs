//! Experiment configuration: flat TOML tables, `key=value` overrides and presets.

use std::fmt;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use pagecurve::heom::{Terminator, CONVERGENCE_THRESHOLD};
use pagecurve::ode::Tolerances;
use pagecurve::LogBase;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Qbm,
    SpinBoson,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Qbm => "qbm",
            Model::SpinBoson => "spin-boson",
        })
    }
}

/// Initial state tag. `wave-packet` needs `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Initial {
    WavePacket,
    Ground,
    Excited,
}

/// One experiment. Model-specific keys are optional and filled in by
/// [`ExperimentConfig::resolve`]; keys belonging to the other model are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub model: Model,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub gamma: f64,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Initial>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default)]
    pub t_start: f64,
    pub t_stop: f64,
    pub points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_c: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminator: Option<Terminator>,
    /// Re-run at (N_k+10, N_C) and (N_k, N_C+1) and compare.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check_convergence: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence_threshold: Option<f64>,
    #[serde(default)]
    pub entropy_base: LogBase,
}

fn default_cutoff() -> f64 {
    10.0
}

impl ExperimentConfig {
    pub fn from_table(table: Table) -> Result<Self> {
        let cfg: Self = Value::Table(table)
            .try_into()
            .context("invalid experiment configuration")?;
        cfg.resolve()
    }

    /// Fill model defaults and validate everything that can be checked
    /// without running a solver.
    pub fn resolve(mut self) -> Result<Self> {
        let foreign: &[(&str, bool)] = match self.model {
            Model::Qbm => &[
                ("epsilon", self.epsilon.is_some()),
                ("n_k", self.n_k.is_some()),
                ("n_c", self.n_c.is_some()),
                ("rtol", self.rtol.is_some()),
                ("atol", self.atol.is_some()),
                ("terminator", self.terminator.is_some()),
                ("check_convergence", self.check_convergence.is_some()),
                (
                    "convergence_threshold",
                    self.convergence_threshold.is_some(),
                ),
            ],
            Model::SpinBoson => &[
                ("omega0", self.omega0.is_some()),
                ("delta", self.delta.is_some()),
            ],
        };
        if let Some((key, _)) = foreign.iter().find(|f| f.1) {
            bail!("`{key}` does not apply to the {} model", self.model);
        }
        if self.name.is_empty() {
            self.name = self.model.to_string();
        }
        ensure!(
            !self.name.contains(['/', '\\']) && self.name != "." && self.name != "..",
            "run name {:?} is not a valid file stem",
            self.name
        );
        ensure!(
            self.gamma.is_finite() && self.gamma >= 0.0,
            "gamma must be finite and >= 0"
        );
        ensure!(
            self.cutoff.is_finite() && self.cutoff > 0.0,
            "cutoff must be finite and > 0"
        );
        ensure!(
            self.temperature.is_finite() && self.temperature >= 0.0,
            "temperature must be finite and >= 0"
        );
        ensure!(self.points >= 1, "points must be >= 1");
        ensure!(
            self.t_start.is_finite() && self.t_start >= 0.0,
            "t_start must be finite and >= 0"
        );
        ensure!(
            self.t_stop.is_finite()
                && (self.t_stop > self.t_start
                    || (self.points == 1 && self.t_stop == self.t_start)),
            "t_stop must exceed t_start"
        );
        match self.model {
            Model::Qbm => {
                let w0 = *self.omega0.get_or_insert(1.0);
                ensure!(w0.is_finite() && w0 > 0.0, "omega0 must be finite and > 0");
                let initial = *self.initial.get_or_insert(Initial::WavePacket);
                match initial {
                    Initial::WavePacket => {
                        let d = self
                            .delta
                            .context("initial = \"wave-packet\" needs `delta`")?;
                        ensure!(d.is_finite() && d > 0.0, "delta must be finite and > 0");
                    }
                    Initial::Ground => ensure!(
                        self.delta.is_none(),
                        "`delta` only applies to a wave packet"
                    ),
                    Initial::Excited => bail!("the oscillator has no `excited` initial state"),
                }
            }
            Model::SpinBoson => {
                let eps = *self.epsilon.get_or_insert(1.0);
                ensure!(
                    eps.is_finite() && eps > 0.0,
                    "epsilon must be finite and > 0"
                );
                match *self.initial.get_or_insert(Initial::Excited) {
                    Initial::Excited | Initial::Ground => {}
                    Initial::WavePacket => bail!("the qubit has no `wave-packet` initial state"),
                }
                let defaults = Tolerances::default();
                let n_k = *self.n_k.get_or_insert(30);
                let n_c = *self.n_c.get_or_insert(2);
                ensure!(n_k >= 1 && n_c >= 1, "n_k and n_c must be >= 1");
                self.rtol.get_or_insert(defaults.rtol);
                self.atol.get_or_insert(defaults.atol);
                self.terminator.get_or_insert_with(Terminator::default);
                self.check_convergence.get_or_insert(true);
                let thr = *self
                    .convergence_threshold
                    .get_or_insert(CONVERGENCE_THRESHOLD);
                ensure!(
                    thr.is_finite() && thr > 0.0,
                    "convergence_threshold must be > 0"
                );
            }
        }
        Ok(self)
    }

    pub fn times(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.t_start];
        }
        let h = (self.t_stop - self.t_start) / (self.points - 1) as f64;
        let mut t: Vec<f64> = (0..self.points)
            .map(|i| self.t_start + h * i as f64)
            .collect();
        t[self.points - 1] = self.t_stop;
        t
    }
}

/// Parse a command-line value as a TOML value, falling back to a bare string.
pub fn parse_value(raw: &str) -> Value {
    let raw = raw.trim();
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Split `key=value`.
pub fn split_assignment(s: &str) -> Result<(&str, &str)> {
    let (k, v) = s
        .split_once('=')
        .with_context(|| format!("expected key=value, got {s:?}"))?;
    let k = k.trim();
    ensure!(!k.is_empty(), "empty key in {s:?}");
    Ok((k, v))
}

pub fn apply_overrides(table: &mut Table, sets: &[String]) -> Result<()> {
    for s in sets {
        let (k, v) = split_assignment(s)?;
        table.insert(k.to_string(), parse_value(v));
    }
    Ok(())
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.parse()
        .with_context(|| format!("parsing {}", path.display()))
}

/// One `--vary key=v1,v2,...` axis. An empty list is allowed and yields no runs.
#[derive(Debug, Clone)]
pub struct Axis {
    pub key: String,
    pub values: Vec<Value>,
}

impl std::str::FromStr for Axis {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let (k, v) = split_assignment(s)?;
        let values = if v.trim().is_empty() {
            Vec::new()
        } else {
            v.split(',').map(parse_value).collect()
        };
        Ok(Axis {
            key: k.to_string(),
            values,
        })
    }
}

fn label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Cartesian product of the axes applied to `template`. Each run is named
/// `<base>_<key>=<value>...`.
pub fn expand(template: &Table, axes: &[Axis]) -> Vec<Table> {
    let base = template
        .get("name")
        .and_then(Value::as_str)
        .unwrap_or("run")
        .to_string();
    let mut runs = vec![(template.clone(), base)];
    for axis in axes {
        runs = runs
            .into_iter()
            .flat_map(|(t, name)| {
                axis.values.iter().map(move |v| {
                    let mut t = t.clone();
                    t.insert(axis.key.clone(), v.clone());
                    (t, format!("{name}_{}={}", axis.key, label(v)))
                })
            })
            .collect();
    }
    runs.into_iter()
        .map(|(mut t, name)| {
            t.insert("name".into(), Value::String(name));
            t
        })
        .collect()
}

const PRESETS: [(&str, &str); 4] = [
    ("fig1", include_str!("../presets/fig1.toml")),
    ("fig2", include_str!("../presets/fig2.toml")),
    ("fig3", include_str!("../presets/fig3.toml")),
    ("fig4", include_str!("../presets/fig4.toml")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|p| p.0)
}

/// A preset is a `[base]` table plus `[[runs]]` tables merged over it.
pub fn preset(name: &str) -> Result<Vec<Table>> {
    let text = PRESETS
        .iter()
        .find(|p| p.0 == name)
        .map(|p| p.1)
        .with_context(|| {
            format!(
                "unknown preset {name:?} (available: {})",
                preset_names().collect::<Vec<_>>().join(", ")
            )
        })?;
    let mut doc: Table = text
        .parse()
        .with_context(|| format!("parsing preset {name}"))?;
    let base = match doc.remove("base") {
        Some(Value::Table(t)) => t,
        _ => bail!("preset {name} has no [base] table"),
    };
    let runs = match doc.remove("runs") {
        Some(Value::Array(a)) => a,
        _ => bail!("preset {name} has no [[runs]]"),
    };
    runs.into_iter()
        .map(|r| {
            let Value::Table(over) = r else {
                bail!("preset {name}: runs must be tables")
            };
            let mut t = base.clone();
            t.extend(over);
            Ok(t)
        })
        .collect()
}
