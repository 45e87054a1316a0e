//! Run configuration: TOML text with nested sections, validated on parse.

use std::f64::consts::PI;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::PropagatorChoice;
use crate::error::{Error, Result};
use crate::optimizer::Parameter;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Simulate,
    Modes,
    Optimize,
    RwaCheck,
    Raypath,
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "simulate" => Task::Simulate,
            "modes" => Task::Modes,
            "optimize" => Task::Optimize,
            "rwa_check" => Task::RwaCheck,
            "raypath" => Task::Raypath,
            other => return Err(Error::invalid("task", format!("unknown task `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LensConfig {
    #[serde(rename = "R_over_lambda_a")]
    pub r_over_lambda_a: f64,
    #[serde(default = "one")]
    pub n0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmitterMode {
    TwoAtoms,
    Ensembles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n: usize,
    #[serde(rename = "sigma_over_R")]
    pub sigma_over_r: f64,
    pub seed: u64,
    pub g_individual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterConfig {
    pub mode: EmitterMode,
    #[serde(rename = "r_a_over_R")]
    pub r_a_over_r: f64,
    /// Azimuths of the left and right emitter (or ensemble center).
    #[serde(default = "default_phi")]
    pub phi: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    /// Coupling strength; for ensembles the per-atom value comes from
    /// `emitters.ensemble.g_individual`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    pub omega_c: f64,
    #[serde(default)]
    pub drop_sqrt_omega: bool,
    #[serde(default = "default_sigmas")]
    pub truncation_sigmas: f64,
    /// Explicit `[min, max]` truncation window overriding `truncation_sigmas`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationConfig {
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub t_max: f64,
    #[serde(default = "one_usize")]
    pub sample_every: usize,
    #[serde(default = "default_propagator")]
    pub propagator: PropagatorChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// First-transfer search window in units of the arrival time.
    #[serde(default = "default_transfer_window")]
    pub transfer_window: [f64; 2],
    /// Left-emitter revival search window in units of the arrival time.
    #[serde(default = "default_revival_window")]
    pub revival_window: [f64; 2],
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            transfer_window: default_transfer_window(),
            revival_window: default_revival_window(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FramesConfig {
    pub grid_n: usize,
    pub times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsConfig {
    #[serde(default = "default_populations")]
    pub populations_csv: String,
    #[serde(default = "default_summary")]
    pub summary_json: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<FramesConfig>,
}

impl Default for OutputsConfig {
    fn default() -> Self {
        Self {
            populations_csv: default_populations(),
            summary_json: default_summary(),
            frames: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    /// Names from `g`, `omega_c`, `R_over_lambda_a`, `r_a_over_R`.
    pub free: Vec<String>,
    pub bounds: Vec<[f64; 2]>,
    pub budget: usize,
    #[serde(default)]
    pub retruncate: bool,
    /// Starting point; defaults to the values of the other sections.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RwaConfig {
    /// Number of most strongly coupled modes kept.
    pub n_modes: usize,
    #[serde(default = "one")]
    pub lambda: f64,
    /// Run length in units of the arrival time.
    #[serde(default = "two", rename = "t_max_over_T")]
    pub t_max_over_t: f64,
    #[serde(default = "default_rwa_dt")]
    pub dt: f64,
    #[serde(default = "default_state_cap")]
    pub state_cap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    pub lens: LensConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emitters: Option<EmitterConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integration: Option<IntegrationConfig>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub outputs: OutputsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize: Option<OptimizeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rwa: Option<RwaConfig>,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn one_usize() -> usize {
    1
}
fn default_phi() -> [f64; 2] {
    [0.0, PI]
}
fn default_sigmas() -> f64 {
    3.0
}
fn default_dt() -> f64 {
    0.05
}
fn default_rwa_dt() -> f64 {
    0.5
}
fn default_state_cap() -> usize {
    20_000_000
}
fn default_propagator() -> PropagatorChoice {
    PropagatorChoice::Arrowhead
}
fn default_transfer_window() -> [f64; 2] {
    [0.5, 1.5]
}
fn default_revival_window() -> [f64; 2] {
    [2.0, 3.0]
}
fn default_populations() -> String {
    "populations.csv".into()
}
fn default_summary() -> String {
    "summary.json".into()
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, column)
}

fn validation(key: &str, message: impl Into<String>) -> Error {
    Error::Validation {
        key: key.into(),
        message: message.into(),
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(validation(key, format!("{v} must be a positive finite number")))
    }
}

fn window(key: &str, w: [f64; 2]) -> Result<()> {
    if w.iter().all(|x| x.is_finite() && *x >= 0.0) && w[0] < w[1] {
        Ok(())
    } else {
        Err(validation(
            key,
            format!("[{}, {}] must be an ordered non-negative interval", w[0], w[1]),
        ))
    }
}

fn require<'a, T>(key: &str, section: &'a Option<T>, task: Task) -> Result<&'a T> {
    section
        .as_ref()
        .ok_or_else(|| validation(key, format!("section is required for task {task:?}")))
}

impl RunConfig {
    /// Parse and validate configuration text.
    pub fn parse(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
            Error::Parse {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid("config", e.to_string()))
    }

    pub fn emitters(&self) -> Result<&EmitterConfig> {
        require("emitters", &self.emitters, self.task)
    }

    pub fn coupling(&self) -> Result<&CouplingConfig> {
        require("coupling", &self.coupling, self.task)
    }

    pub fn integration(&self) -> Result<&IntegrationConfig> {
        require("integration", &self.integration, self.task)
    }

    pub fn optimize(&self) -> Result<&OptimizeConfig> {
        require("optimize", &self.optimize, self.task)
    }

    pub fn rwa(&self) -> Result<&RwaConfig> {
        require("rwa", &self.rwa, self.task)
    }

    /// Per-atom coupling strength for the configured emitter mode.
    pub fn coupling_strength(&self) -> Result<f64> {
        let emitters = self.emitters()?;
        match emitters.mode {
            EmitterMode::TwoAtoms => self
                .coupling()?
                .g
                .ok_or_else(|| validation("coupling.g", "required for two_atoms")),
            EmitterMode::Ensembles => Ok(require("emitters.ensemble", &emitters.ensemble, self.task)?.g_individual),
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("lens.R_over_lambda_a", self.lens.r_over_lambda_a)?;
        if !(self.lens.n0.is_finite() && self.lens.n0 >= 1.0) {
            return Err(validation("lens.n0", format!("{} must be at least 1", self.lens.n0)));
        }

        let needs_system = matches!(self.task, Task::Simulate | Task::Optimize | Task::RwaCheck);
        if needs_system || self.emitters.is_some() {
            let e = require("emitters", &self.emitters, self.task)?;
            positive("emitters.r_a_over_R", e.r_a_over_r)?;
            if e.r_a_over_r >= 1.0 {
                return Err(validation("emitters.r_a_over_R", "emitters must lie inside the lens"));
            }
            if e.phi.iter().any(|p| !p.is_finite()) {
                return Err(validation("emitters.phi", "angles must be finite"));
            }
            match (e.mode, &e.ensemble) {
                (EmitterMode::Ensembles, None) => {
                    return Err(validation("emitters.ensemble", "required for mode = \"ensembles\""))
                }
                (EmitterMode::Ensembles, Some(ens)) => {
                    if ens.n == 0 {
                        return Err(validation("emitters.ensemble.n", "must be positive"));
                    }
                    if !(ens.sigma_over_r.is_finite() && ens.sigma_over_r >= 0.0) {
                        return Err(validation("emitters.ensemble.sigma_over_R", "must be non-negative"));
                    }
                    positive("emitters.ensemble.g_individual", ens.g_individual)?;
                }
                (EmitterMode::TwoAtoms, _) => {}
            }
        }
        if matches!(
            self.task,
            Task::Simulate | Task::Optimize | Task::RwaCheck | Task::Modes
        ) || self.coupling.is_some()
        {
            let c = require("coupling", &self.coupling, self.task)?;
            positive("coupling.omega_c", c.omega_c)?;
            positive("coupling.truncation_sigmas", c.truncation_sigmas)?;
            if let Some(g) = c.g {
                positive("coupling.g", g)?;
            }
            if let Some(w) = c.window {
                window("coupling.window", w)?;
            }
            if needs_system && self.emitters()?.mode == EmitterMode::TwoAtoms && c.g.is_none() {
                return Err(validation("coupling.g", "required for two_atoms"));
            }
        }
        if self.task == Task::Simulate || self.integration.is_some() {
            let i = require("integration", &self.integration, self.task)?;
            positive("integration.dt", i.dt)?;
            positive("integration.t_max", i.t_max)?;
            if i.sample_every == 0 {
                return Err(validation("integration.sample_every", "must be positive"));
            }
        }
        window("analysis.transfer_window", self.analysis.transfer_window)?;
        window("analysis.revival_window", self.analysis.revival_window)?;
        for (key, name) in [
            ("outputs.populations_csv", &self.outputs.populations_csv),
            ("outputs.summary_json", &self.outputs.summary_json),
        ] {
            if name.is_empty() || name.contains(['/', '\\']) {
                return Err(validation(key, "must be a plain file name"));
            }
        }
        if let Some(f) = &self.outputs.frames {
            if f.grid_n < 16 {
                return Err(validation("outputs.frames.grid_n", "must be at least 16"));
            }
            if f.times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
                return Err(validation("outputs.frames.times", "must be non-negative"));
            }
            if let Some(c) = f.clip {
                if !(c.is_finite() && c >= 0.0) {
                    return Err(validation("outputs.frames.clip", "must be non-negative"));
                }
            }
        }
        if self.task == Task::Optimize || self.optimize.is_some() {
            let o = require("optimize", &self.optimize, self.task)?;
            if o.free.is_empty() {
                return Err(validation("optimize.free", "at least one parameter is required"));
            }
            for name in &o.free {
                Parameter::from_str(name)
                    .map_err(|_| validation("optimize.free", format!("unknown parameter `{name}`")))?;
            }
            if o.bounds.len() != o.free.len() {
                return Err(validation("optimize.bounds", "one [lo, hi] pair per free parameter"));
            }
            for b in &o.bounds {
                positive("optimize.bounds", b[0])?;
                positive("optimize.bounds", b[1])?;
                if b[0] >= b[1] {
                    return Err(validation(
                        "optimize.bounds",
                        format!("[{}, {}] is not ordered", b[0], b[1]),
                    ));
                }
            }
            if o.budget < 10 * (o.free.len() + 1) {
                return Err(validation(
                    "optimize.budget",
                    format!("must be at least {}", 10 * (o.free.len() + 1)),
                ));
            }
            if let Some(init) = &o.initial {
                if init.len() != o.free.len() {
                    return Err(validation("optimize.initial", "one value per free parameter"));
                }
            }
            if self.emitters()?.mode != EmitterMode::TwoAtoms {
                return Err(validation("emitters.mode", "optimization supports two_atoms only"));
            }
        }
        if self.task == Task::RwaCheck || self.rwa.is_some() {
            let r = require("rwa", &self.rwa, self.task)?;
            if r.n_modes == 0 {
                return Err(validation("rwa.n_modes", "must be positive"));
            }
            if !(r.lambda.is_finite() && r.lambda >= 0.0) {
                return Err(validation("rwa.lambda", "must be non-negative"));
            }
            positive("rwa.t_max_over_T", r.t_max_over_t)?;
            positive("rwa.dt", r.dt)?;
        }
        Ok(())
    }
}
