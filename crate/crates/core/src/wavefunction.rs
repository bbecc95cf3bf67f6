//! Wavefunctions on the periodic grid, representation changes and moments.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RotorError};
use crate::grid::Grid;
use crate::spectral::Spectral;

pub const NORM_TOLERANCE: f64 = 1e-6;

/// Offset between the grid coordinates and the physical phase space.
///
/// Up to a global phase the physical state is `ψ(q) = exp(i·P·q/k̄)·amps(q − X)`.
/// The frame moves with the boost: free flight advances `X` by `P·t` while
/// `amps` evolves under `p²/2` alone, and the kick is evaluated at `x + X`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Frame {
    pub q_shift: f64,
    pub p_boost: f64,
}

#[derive(Clone, Debug)]
pub struct Wavefunction {
    pub amps: Vec<Complex64>,
    pub grid: Arc<Grid>,
    pub frame: Frame,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub t: f64,
    pub mean_q: f64,
    pub mean_p: f64,
    pub mean_p2: f64,
    pub var_q: f64,
    pub var_p: f64,
}

impl Moments {
    pub fn mean_q2(&self) -> f64 {
        self.var_q + self.mean_q * self.mean_q
    }
}

impl Wavefunction {
    pub fn new(grid: Arc<Grid>, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != grid.n {
            return Err(RotorError::param(
                "amps",
                format!("length {} does not match grid size {}", amps.len(), grid.n),
            ));
        }
        Ok(Wavefunction {
            amps,
            grid,
            frame: Frame::default(),
        })
    }

    /// `Σ|ψ|²·dq`
    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dq
    }

    pub fn normalize(&mut self) {
        let s = 1.0 / self.norm_sq().sqrt();
        self.amps.iter_mut().for_each(|a| *a *= s);
    }

    pub fn density(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Physical momentum amplitudes on the frame's lattice `p_values + P`,
    /// in FFT order, normalised so that `Σ|φ|²·dp = Σ|ψ|²·dq`.
    pub fn to_momentum(&self, spectral: &mut Spectral) -> Vec<Complex64> {
        let g = &self.grid;
        let mut buf = self.amps.clone();
        spectral.forward(&mut buf);
        let scale = g.dq / (2.0 * PI * g.kbar).sqrt();
        let q0 = g.q_values[0];
        for (b, &p) in buf.iter_mut().zip(&g.p_values) {
            *b *= Complex64::from_polar(scale, -p * q0 / g.kbar);
        }
        buf
    }

    /// Inverse of [`Wavefunction::to_momentum`].
    pub fn from_momentum(
        grid: Arc<Grid>,
        phi: &[Complex64],
        frame: Frame,
        spectral: &mut Spectral,
    ) -> Result<Self> {
        if phi.len() != grid.n {
            return Err(RotorError::param("phi", "length does not match grid"));
        }
        let q0 = grid.q_values[0];
        let scale = (2.0 * PI * grid.kbar).sqrt() / (grid.dq * grid.n as f64);
        let mut buf: Vec<Complex64> = phi
            .iter()
            .zip(&grid.p_values)
            .map(|(&a, &p)| a * Complex64::from_polar(scale, p * q0 / grid.kbar))
            .collect();
        spectral.inverse(&mut buf);
        Ok(Wavefunction {
            amps: buf,
            grid,
            frame,
        })
    }

    /// Position and momentum moments in physical coordinates. `t` is left at
    /// zero for the caller to fill.
    pub fn moments(&self, spectral: &mut Spectral) -> Result<Moments> {
        let norm = self.norm_sq();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(RotorError::param(
                "psi",
                format!("state not normalised (norm² = {norm})"),
            ));
        }
        let mut buf = self.amps.clone();
        spectral.forward(&mut buf);
        Ok(moments_from_parts(&self.amps, &buf, &self.grid, self.frame))
    }
}

/// Moments from position amplitudes and their raw FFT. Neither needs to be
/// normalised; both are weighted by their own total.
pub(crate) fn moments_from_parts(
    pos: &[Complex64],
    mom: &[Complex64],
    grid: &Grid,
    frame: Frame,
) -> Moments {
    let (mut w, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for (a, &q) in pos.iter().zip(&grid.q_values) {
        let d = a.norm_sqr();
        w += d;
        s1 += d * q;
    }
    let mq = s1 / w;
    for (a, &q) in pos.iter().zip(&grid.q_values) {
        let x = q - mq;
        s2 += a.norm_sqr() * x * x;
    }
    let var_q = s2 / w;

    let (mut wp, mut t1, mut t2) = (0.0, 0.0, 0.0);
    for (a, &p) in mom.iter().zip(&grid.p_values) {
        let d = a.norm_sqr();
        wp += d;
        t1 += d * p;
    }
    let mp = t1 / wp;
    for (a, &p) in mom.iter().zip(&grid.p_values) {
        let x = p - mp;
        t2 += a.norm_sqr() * x * x;
    }
    let var_p = t2 / wp;
    let mean_p = mp + frame.p_boost;
    Moments {
        t: 0.0,
        mean_q: mq + frame.q_shift,
        mean_p,
        mean_p2: var_p + mean_p * mean_p,
        var_q,
        var_p,
    }
}

/// Normalised minimum-uncertainty Gaussian centred at `(q0, p0)`.
pub fn gaussian_packet(
    grid: Arc<Grid>,
    q0: f64,
    p0: f64,
    sigma_q: f64,
    kbar: f64,
) -> Result<Wavefunction> {
    if !(sigma_q >= 2.0 * grid.dq) {
        return Err(RotorError::param(
            "sigma_q",
            format!("{sigma_q} is not resolvable on a grid with dq = {}", grid.dq),
        ));
    }
    if (kbar - grid.kbar).abs() > 1e-12 * kbar {
        return Err(RotorError::param("kbar", "does not match the grid's kbar"));
    }
    let amp = (2.0 * PI * sigma_q * sigma_q).powf(-0.25);
    let amps: Vec<Complex64> = grid
        .q_values
        .iter()
        .map(|&q| {
            let x = q - q0;
            Complex64::from_polar(amp * (-x * x / (4.0 * sigma_q * sigma_q)).exp(), p0 * q / kbar)
        })
        .collect();
    let edge = amps[0].norm_sqr().max(amps[grid.n - 1].norm_sqr());
    if edge > 1e-8 {
        return Err(RotorError::param(
            "sigma_q",
            format!("packet truncated by the box (edge density {edge:.3e})"),
        ));
    }
    let mut psi = Wavefunction::new(grid, amps)?;
    psi.normalize();
    Ok(psi)
}
