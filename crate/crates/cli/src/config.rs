//! Run configuration, parsed from JSON with unknown keys rejected.

use std::path::{Path, PathBuf};

use lindblad_core::bounds::DEFAULT_Q0;
use lindblad_core::propagate::{ChannelBackend, InitialState, TrotterOrder, SUPEROP_BACKEND_CAP};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const MIN_SITES: usize = 2;
pub const DEFAULT_MAX_SITES: usize = 8;
pub const LARGE_MAX_SITES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    TrotterErrorScan,
    Extrapolate,
    Bounds,
    VerifyBch,
    Simulate,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::TrotterErrorScan => "trotter-error-scan",
            Self::Extrapolate => "extrapolate",
            Self::Bounds => "bounds",
            Self::VerifyBch => "verify-bch",
            Self::Simulate => "simulate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    #[default]
    TotalMagnetization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendChoice {
    SuperopExp,
    #[default]
    LocalApply,
}

impl From<BackendChoice> for ChannelBackend {
    fn from(b: BackendChoice) -> Self {
        match b {
            BackendChoice::SuperopExp => ChannelBackend::SuperopExp,
            BackendChoice::LocalApply => ChannelBackend::LocalApply,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n: Option<usize>,
    /// Inclusive range.
    pub n_range: Option<[usize; 2]>,
    #[serde(default = "one")]
    pub j_coupling: f64,
    #[serde(default = "half")]
    pub h_field: f64,
    pub gamma: Option<f64>,
    pub gamma_list: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrotterConfig {
    #[serde(default = "two")]
    pub order: u32,
    pub r: Option<usize>,
    pub r_list: Option<Vec<usize>>,
    #[serde(default)]
    pub backend: BackendChoice,
}

impl Default for TrotterConfig {
    fn default() -> Self {
        Self {
            order: 2,
            r: None,
            r_list: None,
            backend: BackendChoice::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExtrapolationConfig {
    pub p: Option<usize>,
    pub node_ratios: Option<Vec<u64>>,
    /// Base step counts swept in ratio mode.
    pub r_scales: Option<Vec<u64>>,
    /// Target precision for the planned mode.
    pub eps: Option<f64>,
    pub q0: Option<usize>,
    #[serde(default)]
    pub shots: u64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_q_max")]
    pub q_max: usize,
    #[serde(default = "default_q0")]
    pub q0: usize,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            eps: default_eps(),
            q_max: default_q_max(),
            q0: default_q0(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BchConfig {
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<f64>,
    #[serde(default = "default_t_ref")]
    pub t_ref: f64,
}

impl Default for BchConfig {
    fn default() -> Self {
        Self {
            t_grid: default_t_grid(),
            t_ref: default_t_ref(),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn two() -> u32 {
    2
}
fn default_eps() -> f64 {
    1e-3
}
fn default_q_max() -> usize {
    4
}
fn default_q0() -> usize {
    DEFAULT_Q0
}
fn default_t_grid() -> Vec<f64> {
    vec![0.025, 0.05, 0.1, 0.2]
}
fn default_t_ref() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Option<Experiment>,
    pub model: ModelConfig,
    #[serde(default)]
    pub time: f64,
    #[serde(default)]
    pub trotter: TrotterConfig,
    pub initial_state: Option<InitialState>,
    pub initial_states: Option<Vec<InitialState>>,
    #[serde(default)]
    pub observable: Observable,
    #[serde(default)]
    pub extrapolation: ExtrapolationConfig,
    #[serde(default)]
    pub bounds: BoundsConfig,
    #[serde(default)]
    pub bch: BchConfig,
    pub output: Option<PathBuf>,
}

/// Resolved, validated settings shared by every experiment.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub experiment: Experiment,
    pub sites: Vec<usize>,
    pub gammas: Vec<f64>,
    pub j_coupling: f64,
    pub h_field: f64,
    pub time: f64,
    pub order: TrotterOrder,
    pub r_values: Vec<usize>,
    pub backend: ChannelBackend,
    pub states: Vec<InitialState>,
    pub config: RunConfig,
    pub output: PathBuf,
}

fn bad(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

fn finite(field: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad(field, "must be finite"))
    }
}

fn exactly_one<T: Clone>(
    field_a: &str,
    a: &Option<T>,
    field_b: &str,
    b: &Option<Vec<T>>,
) -> Result<Option<Vec<T>>, CliError> {
    match (a, b) {
        (Some(_), Some(_)) => Err(bad(field_a, format!("give either {field_a} or {field_b}, not both"))),
        (Some(x), None) => Ok(Some(vec![x.clone()])),
        (None, Some(v)) if v.is_empty() => Err(bad(field_b, "must not be empty")),
        (None, Some(v)) => Ok(Some(v.clone())),
        (None, None) => Ok(None),
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<(Self, String), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg = Self::from_json(&text)?;
        Ok((cfg, text))
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    /// Checks every field against `experiment` and the site cap.
    pub fn resolve(
        self,
        experiment: Experiment,
        output: Option<PathBuf>,
        allow_large_n: bool,
    ) -> Result<Resolved, CliError> {
        if let Some(e) = self.experiment {
            if e != experiment {
                return Err(bad(
                    "experiment",
                    format!("config is for {} but {} was requested", e.name(), experiment.name()),
                ));
            }
        }
        let m = &self.model;
        let cap = if allow_large_n { LARGE_MAX_SITES } else { DEFAULT_MAX_SITES };
        let sites: Vec<usize> = match (m.n, m.n_range) {
            (Some(_), Some(_)) => return Err(bad("model.n", "give either n or n_range, not both")),
            (Some(n), None) => vec![n],
            (None, Some([lo, hi])) => {
                if lo > hi {
                    return Err(bad("model.n_range", "lower end exceeds upper end"));
                }
                (lo..=hi).collect()
            }
            (None, None) => return Err(bad("model.n", "missing; give n or n_range")),
        };
        for &n in &sites {
            if !(MIN_SITES..=LARGE_MAX_SITES).contains(&n) {
                return Err(bad("model.n", format!("{n} outside [{MIN_SITES}, {LARGE_MAX_SITES}]")));
            }
            if n > cap {
                return Err(bad(
                    "model.n",
                    format!("{n} exceeds the default cap {cap}; pass --allow-large-n"),
                ));
            }
        }
        let gammas = exactly_one("model.gamma", &m.gamma, "model.gamma_list", &m.gamma_list)?
            .ok_or_else(|| bad("model.gamma", "missing; give gamma or gamma_list"))?;
        for &g in &gammas {
            if finite("model.gamma", g)? < 0.0 {
                return Err(bad("model.gamma", "must be non-negative"));
            }
        }
        let j_coupling = finite("model.j_coupling", m.j_coupling)?;
        let h_field = finite("model.h_field", m.h_field)?;
        let time = finite("time", self.time)?;
        if time < 0.0 {
            return Err(bad("time", "must be non-negative"));
        }
        let order = TrotterOrder::from_int(self.trotter.order)
            .map_err(|_| bad("trotter.order", "must be 1 or 2"))?;
        let r_values = exactly_one("trotter.r", &self.trotter.r, "trotter.r_list", &self.trotter.r_list)?
            .unwrap_or_default();
        if r_values.contains(&0) {
            return Err(bad("trotter.r", "step counts must be at least 1"));
        }
        let backend: ChannelBackend = self.trotter.backend.into();
        if backend == ChannelBackend::SuperopExp {
            if let Some(&n) = sites.iter().find(|&&n| n > SUPEROP_BACKEND_CAP) {
                return Err(bad(
                    "trotter.backend",
                    format!("superop_exp supports at most {SUPEROP_BACKEND_CAP} sites, got {n}"),
                ));
            }
        }
        let states = exactly_one(
            "initial_state",
            &self.initial_state,
            "initial_states",
            &self.initial_states,
        )?
        .unwrap_or_else(|| vec![InitialState::AllOnes]);

        match experiment {
            Experiment::TrotterErrorScan | Experiment::Simulate => {
                if r_values.is_empty() {
                    return Err(bad("trotter.r", "missing; give r or r_list"));
                }
            }
            Experiment::Extrapolate => self.check_extrapolation(order)?,
            Experiment::Bounds => {
                let b = &self.bounds;
                if !(finite("bounds.eps", b.eps)? > 0.0 && b.eps < 1.0) {
                    return Err(bad("bounds.eps", "must lie in (0, 1)"));
                }
                if !(2..=5).contains(&b.q_max) {
                    return Err(bad("bounds.q_max", "must lie in 2..=5"));
                }
                if !(1..=4).contains(&b.q0) {
                    return Err(bad("bounds.q0", "must lie in 1..=4"));
                }
                if time <= 0.0 {
                    return Err(bad("time", "bounds need a positive evolution time"));
                }
            }
            Experiment::VerifyBch => {
                let b = &self.bch;
                if b.t_grid.len() < 2 {
                    return Err(bad("bch.t_grid", "needs at least two points"));
                }
                for &t in b.t_grid.iter().chain([&b.t_ref]) {
                    if finite("bch.t_grid", t)? <= 0.0 {
                        return Err(bad("bch.t_grid", "times must be positive"));
                    }
                }
                if let Some(&n) = sites.iter().find(|&&n| n > 3) {
                    return Err(bad("model.n", format!("verify-bch supports at most 3 sites, got {n}")));
                }
            }
        }

        let output = output
            .or_else(|| self.output.clone())
            .unwrap_or_else(|| PathBuf::from(experiment.name()));
        Ok(Resolved {
            experiment,
            sites,
            gammas,
            j_coupling,
            h_field,
            time,
            order,
            r_values,
            backend,
            states,
            config: self,
            output,
        })
    }

    fn check_extrapolation(&self, order: TrotterOrder) -> Result<(), CliError> {
        let x = &self.extrapolation;
        if order != TrotterOrder::Second {
            return Err(bad("trotter.order", "extrapolation needs the second-order formula"));
        }
        match (&x.node_ratios, x.p, x.eps) {
            (Some(ratios), None, None) => {
                if ratios.is_empty() || ratios.contains(&0) {
                    return Err(bad("extrapolation.node_ratios", "must be nonempty and positive"));
                }
                let mut sorted = ratios.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != ratios.len() {
                    return Err(bad("extrapolation.node_ratios", "must be distinct"));
                }
                match &x.r_scales {
                    Some(s) if !s.is_empty() && !s.contains(&0) => {}
                    _ => {
                        return Err(bad(
                            "extrapolation.r_scales",
                            "ratio mode needs a nonempty list of positive base step counts",
                        ))
                    }
                }
            }
            (None, Some(p), None) => {
                if p == 0 || p > 12 {
                    return Err(bad("extrapolation.p", "must lie in 1..=12"));
                }
                match &x.r_scales {
                    Some(s) if !s.is_empty() && !s.contains(&0) => {}
                    _ => return Err(bad("extrapolation.r_scales", "needs a nonempty list of positive base step counts")),
                }
            }
            (None, None, Some(eps)) => {
                if !(finite("extrapolation.eps", eps)? > 0.0 && eps < 1.0) {
                    return Err(bad("extrapolation.eps", "must lie in (0, 1)"));
                }
                if x.r_scales.is_some() {
                    return Err(bad("extrapolation.r_scales", "not used when the plan comes from eps"));
                }
            }
            _ => {
                return Err(bad(
                    "extrapolation",
                    "give exactly one of node_ratios, p or eps",
                ))
            }
        }
        if let Some(q0) = x.q0 {
            if !(1..=4).contains(&q0) {
                return Err(bad("extrapolation.q0", "must lie in 1..=4"));
            }
        }
        Ok(())
    }
}
