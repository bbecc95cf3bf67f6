//! Physical and numerical parameters of a kicked-rotor run.
//!
//! All quantities are in scaled units: the kick period is 1, the kinetic
//! term is `p²/2`, the kick potential is `κ cos q` and `[q, p] = i·k̄`.
//! The measurement strength `k` is never stored; it is always derived from
//! the measurement-induced momentum diffusion as `k = D_env / k̄²`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RotorError};

/// Initial minimum-uncertainty packet. `sigma_q = None` picks `k̄/2`, which
/// gives a momentum variance of 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialPacket {
    pub q0: f64,
    pub p0: f64,
    pub sigma_q: Option<f64>,
}

impl Default for InitialPacket {
    fn default() -> Self {
        InitialPacket {
            q0: 0.0,
            p0: 0.0,
            sigma_q: None,
        }
    }
}

impl InitialPacket {
    pub fn sigma_q(&self, kbar: f64) -> f64 {
        self.sigma_q.unwrap_or(0.5 * kbar)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Scaled kick strength κ.
    pub kappa: f64,
    /// Effective Planck constant k̄.
    pub kbar: f64,
    /// Measurement-induced momentum diffusion coefficient.
    pub d_env: f64,
    /// Grid points; must be a power of two.
    pub n_grid: usize,
    /// Box length in units of the potential period 2π.
    pub q_periods: f64,
    /// Substeps per kick period.
    pub n_sub: usize,
    pub n_kicks: usize,
    /// Diffusion fit window `(t_lo, t_hi)` in kick periods.
    pub fit_window: (f64, f64),
    pub initial: InitialPacket,
    /// Follow the packet with a co-moving frame: lattice momentum boosts,
    /// and whole-grid-point position shifts while measured. Disable to
    /// compare against fixed-grid references.
    pub track_frame: bool,
    /// Probability allowed in the outer position/momentum bands of the grid.
    pub leak_threshold: f64,
    /// Wiener sub-increments summed into each substep increment. Running
    /// `(n_sub, 2)` and `(2·n_sub, 1)` from one seed drives both with the same
    /// Brownian path.
    pub wiener_refinement: usize,
}

pub const DEFAULT_KAPPA: f64 = 10.0;
pub const DEFAULT_N_GRID: usize = 4096;
pub const DEFAULT_Q_PERIODS: f64 = 64.0;
pub const DEFAULT_N_SUB: usize = 100;
pub const DEFAULT_N_KICKS: usize = 50;
pub const DEFAULT_FIT_WINDOW: (f64, f64) = (30.0, 50.0);
pub const DEFAULT_LEAK_THRESHOLD: f64 = 1e-8;

impl SimParams {
    /// Parameters with every numerical control at its default.
    pub fn new(kappa: f64, kbar: f64, d_env: f64) -> Self {
        SimParams {
            kappa,
            kbar,
            d_env,
            n_grid: DEFAULT_N_GRID,
            q_periods: DEFAULT_Q_PERIODS,
            n_sub: DEFAULT_N_SUB,
            n_kicks: DEFAULT_N_KICKS,
            fit_window: DEFAULT_FIT_WINDOW,
            initial: InitialPacket::default(),
            track_frame: true,
            leak_threshold: DEFAULT_LEAK_THRESHOLD,
            wiener_refinement: 1,
        }
    }

    /// Measurement strength `k = D_env / k̄²`.
    pub fn k(&self) -> f64 {
        self.d_env / (self.kbar * self.kbar)
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.n_sub as f64
    }

    pub fn q_extent(&self) -> f64 {
        self.q_periods * std::f64::consts::TAU
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(RotorError::param("kappa", "must be finite and non-negative"));
        }
        if !(self.kbar > 0.0 && self.kbar.is_finite()) {
            return Err(RotorError::param("kbar", "must be finite and positive"));
        }
        if !(self.d_env >= 0.0 && self.d_env.is_finite()) {
            return Err(RotorError::param("d_env", "must be finite and non-negative"));
        }
        if self.n_grid < 4 || !self.n_grid.is_power_of_two() {
            return Err(RotorError::param(
                "n_grid",
                format!("{} is not a power of two >= 4", self.n_grid),
            ));
        }
        if !(self.q_periods > 0.0 && self.q_periods.is_finite()) {
            return Err(RotorError::param("q_periods", "box extent must be positive"));
        }
        if self.n_sub == 0 {
            return Err(RotorError::param("n_sub", "need at least one substep"));
        }
        if self.n_kicks == 0 {
            return Err(RotorError::param("n_kicks", "need at least one kick"));
        }
        let (lo, hi) = self.fit_window;
        if !(lo >= 0.0 && lo < hi && hi <= self.n_kicks as f64) {
            return Err(RotorError::param(
                "fit_window",
                format!("need 0 <= t_lo < t_hi <= n_kicks, got ({lo}, {hi})"),
            ));
        }
        if !(self.leak_threshold > 0.0) {
            return Err(RotorError::param("leak_threshold", "must be positive"));
        }
        if self.wiener_refinement == 0 {
            return Err(RotorError::param("wiener_refinement", "must be at least 1"));
        }
        if let Some(s) = self.initial.sigma_q {
            if !(s > 0.0) {
                return Err(RotorError::param("initial.sigma_q", "must be positive"));
            }
        }
        Ok(())
    }
}
