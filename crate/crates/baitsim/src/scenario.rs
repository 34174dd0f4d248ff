//! Scenario files: a flat key-value format with dotted section keys.
//!
//! ```text
//! # lines starting with '#' are comments
//! params.bite_rate = 0.5
//! mode = heterogeneous
//! profile.kind = power_law
//! profile.alpha = 2.8
//! sweep.variable = bait_density
//! sweep.min = 0
//! sweep.max = 2
//! sweep.points = 50
//! sweep.series = params.blood_preference=0.2 | params.blood_preference=0.8
//! ```
//!
//! Unknown keys are rejected with their line number so typos surface early.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::params::ModelParams;
use crate::profile::{
    poisson_profile, poisson_profile_mean_matched, power_law_profile, AttractivenessProfile,
    PowerLawSpec, ProfileError,
};
use crate::stochastic::{InitialPlacement, SimConfig};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown key `{key}` at line {line}")]
    UnknownKey { key: String, line: usize },
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("invalid parameters:\n{0}")]
    InvalidParams(String),
    #[error("profile construction failed: {0}")]
    Profile(#[from] ProfileError),
    #[error("series override `{0}` is malformed (expected key=value)")]
    BadOverride(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixMode {
    Homogeneous,
    Heterogeneous,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileSpec {
    SingleClass,
    PowerLaw(PowerLawSpec),
    Poisson { mean_k: f64, n_classes: usize },
    PoissonMeanMatched { n_classes: usize },
    Table(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaitMode {
    Uniform,
    /// Targeted with the proportional constraint rule C_i = x k_i N_i / k_mean.
    TargetedProportional,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: String,
    pub min: f64,
    pub max: f64,
    pub points: usize,
    /// One set of `key=value` overrides per series, applied on top of the
    /// base scenario.
    pub series: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: ModelParams,
    pub mode: MixMode,
    pub profile_spec: ProfileSpec,
    pub bait_mode: BaitMode,
    pub sim: SimConfig,
    pub sweep: Option<SweepSpec>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            params: ModelParams::baseline(),
            mode: MixMode::Homogeneous,
            profile_spec: ProfileSpec::SingleClass,
            bait_mode: BaitMode::Uniform,
            sim: SimConfig::default(),
            sweep: None,
        }
    }
}

impl Scenario {
    pub fn from_file(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self, ScenarioError> {
        let mut pairs: Vec<(String, String, usize)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ScenarioError::Parse {
                    line: idx + 1,
                    message: format!("expected `key = value`, got `{line}`"),
                });
            };
            pairs.push((key.trim().to_string(), value.trim().to_string(), idx + 1));
        }
        // Kind-selecting keys go first so that e.g. profile.alpha may appear
        // before profile.kind in the file.
        pairs.sort_by_key(|(key, _, line)| {
            let selector = matches!(key.as_str(), "mode" | "profile.kind" | "bait.mode");
            (!selector, *line)
        });
        let mut scenario = Scenario::default();
        for (key, value, line) in &pairs {
            scenario.apply(key, value, *line)?;
        }
        scenario.finish()?;
        Ok(scenario)
    }

    /// Applies one `key = value` assignment; used both by the file parser
    /// and by sweep-series overrides.
    pub fn apply(&mut self, key: &str, value: &str, line: usize) -> Result<(), ScenarioError> {
        let bad = |message: String| ScenarioError::Parse { line, message };
        let f64_of = |v: &str| -> Result<f64, ScenarioError> {
            v.parse()
                .map_err(|e| bad(format!("bad number `{v}` for `{key}`: {e}")))
        };
        let u64_of = |v: &str| -> Result<u64, ScenarioError> {
            v.parse()
                .map_err(|e| bad(format!("bad integer `{v}` for `{key}`: {e}")))
        };
        match key {
            "params.n_hosts" => self.params.n_hosts = u64_of(value)?,
            "params.n_mosquitoes" => self.params.n_mosquitoes = u64_of(value)?,
            "params.bite_rate" => self.params.bite_rate = f64_of(value)?,
            "params.p_infect_human" => self.params.p_infect_human = f64_of(value)?,
            "params.p_infect_mosquito" => self.params.p_infect_mosquito = f64_of(value)?,
            "params.mosquito_density" => self.params.mosquito_density = f64_of(value)?,
            "params.bait_density" => self.params.bait_density = f64_of(value)?,
            "params.blood_preference" => {
                let p = f64_of(value)?;
                self.params.blood_preference = p;
                self.params.sugar_preference = 1.0 - p;
            }
            "params.sugar_preference" => self.params.sugar_preference = f64_of(value)?,
            "params.incubation_days" => self.params.incubation_days = f64_of(value)?,
            "params.efficacy" => self.params.efficacy = f64_of(value)?,
            "params.reversion_rate" => self.params.reversion_rate = f64_of(value)?,
            "params.recovery_rate" => self.params.recovery_rate = f64_of(value)?,
            "params.turnover_rate" => self.params.turnover_rate = f64_of(value)?,
            "mode" => {
                self.mode = match value {
                    "homogeneous" => MixMode::Homogeneous,
                    "heterogeneous" => MixMode::Heterogeneous,
                    other => return Err(bad(format!("unknown mode `{other}`"))),
                }
            }
            "profile.kind" => {
                self.profile_spec = match value {
                    "single_class" => ProfileSpec::SingleClass,
                    "power_law" => ProfileSpec::PowerLaw(PowerLawSpec::new(2.8, 100)),
                    "poisson" => ProfileSpec::Poisson {
                        mean_k: 2.0,
                        n_classes: 50,
                    },
                    "poisson_mean_matched" => ProfileSpec::PoissonMeanMatched { n_classes: 50 },
                    "table" => ProfileSpec::Table(PathBuf::new()),
                    other => return Err(bad(format!("unknown profile kind `{other}`"))),
                }
            }
            "profile.alpha" => {
                if let ProfileSpec::PowerLaw(spec) = &mut self.profile_spec {
                    spec.exponent = f64_of(value)?;
                } else {
                    return Err(bad("profile.alpha requires profile.kind = power_law".into()));
                }
            }
            "profile.k_min" => {
                if let ProfileSpec::PowerLaw(spec) = &mut self.profile_spec {
                    spec.k_min = f64_of(value)?;
                } else {
                    return Err(bad("profile.k_min requires profile.kind = power_law".into()));
                }
            }
            "profile.k_max" => {
                if let ProfileSpec::PowerLaw(spec) = &mut self.profile_spec {
                    spec.k_max = f64_of(value)?;
                } else {
                    return Err(bad("profile.k_max requires profile.kind = power_law".into()));
                }
            }
            "profile.n_classes" => {
                let n = u64_of(value)? as usize;
                match &mut self.profile_spec {
                    ProfileSpec::PowerLaw(spec) => spec.n_classes = n,
                    ProfileSpec::Poisson { n_classes, .. }
                    | ProfileSpec::PoissonMeanMatched { n_classes } => *n_classes = n,
                    _ => {
                        return Err(bad(
                            "profile.n_classes requires a power_law or poisson profile".into(),
                        ))
                    }
                }
            }
            "profile.mean_k" => {
                if let ProfileSpec::Poisson { mean_k, .. } = &mut self.profile_spec {
                    *mean_k = f64_of(value)?;
                } else {
                    return Err(bad("profile.mean_k requires profile.kind = poisson".into()));
                }
            }
            "profile.path" => {
                if let ProfileSpec::Table(path) = &mut self.profile_spec {
                    *path = PathBuf::from(value);
                } else {
                    return Err(bad("profile.path requires profile.kind = table".into()));
                }
            }
            "bait.mode" => {
                self.bait_mode = match value {
                    "uniform" => BaitMode::Uniform,
                    "targeted" => BaitMode::TargetedProportional,
                    other => return Err(bad(format!("unknown bait mode `{other}`"))),
                }
            }
            "sim.dt" => self.sim.dt = f64_of(value)?,
            "sim.t_end" => self.sim.t_end = f64_of(value)?,
            "sim.runs" => self.sim.n_runs = u64_of(value)?,
            "sim.seed" => self.sim.rng_seed = u64_of(value)?,
            "sim.initial_infected" => self.sim.initial_infected_hosts = u64_of(value)?,
            "sim.output_interval" => self.sim.output_interval = f64_of(value)?,
            "sim.placement_class" => {
                self.sim.placement = InitialPlacement::Class(u64_of(value)? as usize)
            }
            "sweep.variable" => {
                self.sweep_mut().variable = value.to_string();
            }
            "sweep.min" => self.sweep_mut().min = f64_of(value)?,
            "sweep.max" => self.sweep_mut().max = f64_of(value)?,
            "sweep.points" => self.sweep_mut().points = u64_of(value)? as usize,
            "sweep.series" => {
                self.sweep_mut().series =
                    value.split('|').map(|s| s.trim().to_string()).collect();
            }
            _ => {
                return Err(ScenarioError::UnknownKey {
                    key: key.to_string(),
                    line,
                })
            }
        }
        Ok(())
    }

    fn sweep_mut(&mut self) -> &mut SweepSpec {
        self.sweep.get_or_insert(SweepSpec {
            variable: "bait_density".into(),
            min: 0.0,
            max: 2.0,
            points: 50,
            series: Vec::new(),
        })
    }

    fn finish(&mut self) -> Result<(), ScenarioError> {
        // Keep the mosquito count consistent with density unless given.
        let implied = (self.params.mosquito_density * self.params.n_hosts as f64).round() as u64;
        if (self.params.n_mosquitoes as f64 - implied as f64).abs() > 1.0 {
            self.params.n_mosquitoes = implied;
        }
        let report = self.params.validate();
        if !report.is_valid() {
            return Err(ScenarioError::InvalidParams(report.to_string()));
        }
        if let ProfileSpec::Table(path) = &self.profile_spec {
            if path.as_os_str().is_empty() {
                return Err(ScenarioError::MissingKey("profile.path"));
            }
            if !path.exists() {
                return Err(ScenarioError::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("profile table {} does not exist", path.display()),
                )));
            }
        }
        Ok(())
    }

    /// Applies a series override string of comma-separated `key=value`s and
    /// re-validates.
    pub fn with_overrides(&self, overrides: &str) -> Result<Scenario, ScenarioError> {
        let mut out = self.clone();
        for assignment in overrides.split(',') {
            let assignment = assignment.trim();
            if assignment.is_empty() {
                continue;
            }
            let (key, value) = assignment
                .split_once('=')
                .ok_or_else(|| ScenarioError::BadOverride(assignment.to_string()))?;
            out.apply(key.trim(), value.trim(), 0)?;
        }
        out.finish()?;
        Ok(out)
    }

    /// Builds the attractiveness profile this scenario calls for.
    pub fn build_profile(&self) -> Result<AttractivenessProfile, ScenarioError> {
        let n = self.params.n_hosts;
        Ok(match &self.profile_spec {
            ProfileSpec::SingleClass => AttractivenessProfile::single_class(1.0, n)?,
            ProfileSpec::PowerLaw(spec) => power_law_profile(spec, n)?,
            ProfileSpec::Poisson { mean_k, n_classes } => {
                poisson_profile(*mean_k, *n_classes, n)?
            }
            ProfileSpec::PoissonMeanMatched { n_classes } => {
                // Match the power-law mean so the two are comparable.
                let reference = power_law_profile(&PowerLawSpec::new(2.8, 100), n)?;
                poisson_profile_mean_matched(reference.k_mean(), *n_classes, n)?
            }
            ProfileSpec::Table(path) => AttractivenessProfile::from_file(path)?,
        })
    }
}
