//! Run configuration file (TOML).
//!
//! Every key is optional in the file except where a command needs it:
//! `sim.kbar` and `sim.d_env` have no default, and `check.action` is needed
//! by `check`. Defaults:
//!
//! | key | default |
//! |---|---|
//! | `seed` | 1 |
//! | `workers` | available CPUs |
//! | `out` | `out` |
//! | `n_traj` | 1000 |
//! | `sim.kappa` | 10 |
//! | `sim.n_grid` | 4096 |
//! | `sim.q_periods` | 64 |
//! | `sim.n_sub` | 100 |
//! | `sim.n_kicks` | 50 |
//! | `sim.fit_window` | [30, 50] |
//! | `sim.track_frame` | true |
//! | `sim.leak_threshold` | 1e-8 |
//! | `sim.wiener_refinement` | 1 |
//! | `sim.initial` | q0 = 0, p0 = 0, sigma_q = kbar/2 |
//! | `classical.n_particles` | 10000 |
//! | `classical.noise_factor` | 2 |
//! | `classical.partitions` | 16 |
//! | `sweep.values` | none (required by the sweep commands) |
//! | `analytic.kbar_min`, `kbar_max`, `points` | 0.1, 8, 80 |
//! | `analytic.n_terms` | 3 |
//! | `check.margin` | 10 |
//! | `check.gradient`, `curvature_ratio`, `mass` | κ, 1, 1 |

use std::path::Path;

use kicked_rotor::analytics::{ForceScales, MarginPolicy};
use kicked_rotor::classical::{ClassicalParams, NOISE_FACTOR};
use kicked_rotor::params::{
    DEFAULT_FIT_WINDOW, DEFAULT_KAPPA, DEFAULT_LEAK_THRESHOLD, DEFAULT_N_GRID, DEFAULT_N_KICKS,
    DEFAULT_N_SUB, DEFAULT_Q_PERIODS,
};
use kicked_rotor::{InitialPacket, SimParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("missing required field `{0}`")]
    Missing(&'static str),
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default = "default_out")]
    pub out: String,
    #[serde(default = "default_n_traj")]
    pub n_traj: usize,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub classical: ClassicalSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub analytic: AnalyticSection,
    #[serde(default)]
    pub check: CheckSection,
}

fn default_seed() -> u64 {
    1
}
fn default_out() -> String {
    "out".into()
}
fn default_n_traj() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub kappa: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kbar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_env: Option<f64>,
    pub n_grid: usize,
    pub q_periods: f64,
    pub n_sub: usize,
    pub n_kicks: usize,
    pub fit_window: [f64; 2],
    pub track_frame: bool,
    pub leak_threshold: f64,
    pub wiener_refinement: usize,
    pub initial: InitialSection,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            kappa: DEFAULT_KAPPA,
            kbar: None,
            d_env: None,
            n_grid: DEFAULT_N_GRID,
            q_periods: DEFAULT_Q_PERIODS,
            n_sub: DEFAULT_N_SUB,
            n_kicks: DEFAULT_N_KICKS,
            fit_window: [DEFAULT_FIT_WINDOW.0, DEFAULT_FIT_WINDOW.1],
            track_frame: true,
            leak_threshold: DEFAULT_LEAK_THRESHOLD,
            wiener_refinement: 1,
            initial: InitialSection::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    pub q0: f64,
    pub p0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_q: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassicalSection {
    pub n_particles: usize,
    pub noise_factor: f64,
    pub partitions: usize,
}

impl Default for ClassicalSection {
    fn default() -> Self {
        ClassicalSection {
            n_particles: 10_000,
            noise_factor: NOISE_FACTOR,
            partitions: 16,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyticSection {
    pub kbar_min: f64,
    pub kbar_max: f64,
    pub points: usize,
    pub n_terms: u32,
}

impl Default for AnalyticSection {
    fn default() -> Self {
        AnalyticSection {
            kbar_min: 0.1,
            kbar_max: 8.0,
            points: 80,
            n_terms: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub action: Option<f64>,
    pub margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradient: Option<f64>,
    pub curvature_ratio: f64,
    pub mass: f64,
}

impl Default for CheckSection {
    fn default() -> Self {
        CheckSection {
            action: None,
            margin: MarginPolicy::default().factor,
            gradient: None,
            curvature_ratio: 1.0,
            mass: 1.0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn kbar(&self) -> Result<f64, ConfigError> {
        self.sim.kbar.ok_or(ConfigError::Missing("sim.kbar"))
    }

    pub fn d_env(&self) -> Result<f64, ConfigError> {
        self.sim.d_env.ok_or(ConfigError::Missing("sim.d_env"))
    }

    /// Simulation parameters with explicit `kbar` and `d_env`.
    pub fn sim_params_with(&self, kbar: f64, d_env: f64) -> SimParams {
        let s = &self.sim;
        let mut p = SimParams::new(s.kappa, kbar, d_env);
        p.n_grid = s.n_grid;
        p.q_periods = s.q_periods;
        p.n_sub = s.n_sub;
        p.n_kicks = s.n_kicks;
        p.fit_window = (s.fit_window[0], s.fit_window[1]);
        p.track_frame = s.track_frame;
        p.leak_threshold = s.leak_threshold;
        p.wiener_refinement = s.wiener_refinement;
        p.initial = InitialPacket {
            q0: s.initial.q0,
            p0: s.initial.p0,
            sigma_q: s.initial.sigma_q,
        };
        p
    }

    pub fn sim_params(&self) -> Result<SimParams, ConfigError> {
        Ok(self.sim_params_with(self.kbar()?, self.d_env()?))
    }

    pub fn classical_params(&self) -> Result<ClassicalParams, ConfigError> {
        let mut p = ClassicalParams::new(
            self.sim.kappa,
            self.d_env()?,
            self.classical.n_particles,
            self.sim.n_kicks,
        );
        p.noise_factor = self.classical.noise_factor;
        p.partitions = self.classical.partitions;
        Ok(p)
    }

    pub fn sweep_values(&self) -> Result<Vec<f64>, ConfigError> {
        let v = self
            .sweep
            .values
            .clone()
            .ok_or(ConfigError::Missing("sweep.values"))?;
        if v.is_empty() {
            return Err(ConfigError::Invalid {
                field: "sweep.values",
                reason: "needs at least one value".into(),
            });
        }
        Ok(v)
    }

    pub fn force_scales(&self) -> ForceScales {
        ForceScales {
            gradient: self.check.gradient.unwrap_or(self.sim.kappa),
            curvature_ratio: self.check.curvature_ratio,
            mass: self.check.mass,
        }
    }

    pub fn workers(&self) -> usize {
        self.workers.unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
    }
}
