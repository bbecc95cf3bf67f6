use std::f64::consts::TAU;

use crate::error::{Result, RotorError};
use crate::params::SimParams;

/// Uniform periodic position grid on `[-L/2, L/2)` and its Fourier-dual
/// momentum lattice. Momenta are stored in FFT order (non-negative
/// frequencies first) with spacing `2π·k̄/L`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub n: usize,
    pub q_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub dq: f64,
    pub dp: f64,
    pub extent: f64,
    pub kbar: f64,
}

pub fn make_grid(params: &SimParams) -> Result<Grid> {
    Grid::new(params.n_grid, params.q_extent(), params.kbar)
}

impl Grid {
    pub fn new(n: usize, extent: f64, kbar: f64) -> Result<Grid> {
        if n < 2 || !n.is_power_of_two() {
            return Err(RotorError::param(
                "n_grid",
                format!("{n} is not a power of two >= 2"),
            ));
        }
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(RotorError::param("q_extent", "box extent must be positive"));
        }
        if !(kbar > 0.0 && kbar.is_finite()) {
            return Err(RotorError::param("kbar", "must be positive"));
        }
        let dq = extent / n as f64;
        let dp = TAU * kbar / extent;
        let q_values = (0..n).map(|j| -0.5 * extent + j as f64 * dq).collect();
        let half = n / 2;
        let p_values = (0..n)
            .map(|m| {
                let signed = if m < half { m as f64 } else { m as f64 - n as f64 };
                signed * dp
            })
            .collect();
        Ok(Grid {
            n,
            q_values,
            p_values,
            dq,
            dp,
            extent,
            kbar,
        })
    }

    /// Largest representable |p| (the Nyquist momentum).
    pub fn p_max(&self) -> f64 {
        0.5 * self.n as f64 * self.dp
    }

    /// Grid points per 2π period, if the box holds a whole number of periods
    /// that each land on grid points.
    pub fn points_per_period(&self) -> Option<usize> {
        let periods = self.extent / TAU;
        let rounded = periods.round();
        if rounded < 1.0 || (periods - rounded).abs() > 1e-9 * periods {
            return None;
        }
        let r = rounded as usize;
        (self.n % r == 0).then(|| self.n / r)
    }
}
