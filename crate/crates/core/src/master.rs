//! Direct integration of the position-measurement master equation
//! `ρ̇ = −(i/k̄)[H, ρ] − k[q, [q, ρ]]` on small grids.
//!
//! `ρ` is held in the orthonormal grid basis (`ρ_jl = ψ_j ψ_l^* dq` for a pure
//! state). Between kicks the free Liouvillian is diagonal in the `(p, p')`
//! representation and the decoherence term is diagonal in `(q, q')`, where it
//! multiplies `ρ(q, q')` by `exp(−k(q − q')² dt)`. The two are Strang-split
//! exactly as the trajectory propagator splits drift and measurement.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, RotorError};
use crate::grid::{make_grid, Grid};
use crate::params::SimParams;
use crate::spectral::Spectral;
use crate::wavefunction::{Frame, Wavefunction};

pub const MAX_ORACLE_GRID: usize = 128;
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-8;
pub const POSITIVITY_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct DensityMatrix {
    /// Row-major `n × n`, `rho[j*n + l] = ρ(q_j, q_l)`.
    pub rho: Vec<Complex64>,
    pub grid: Arc<Grid>,
}

impl DensityMatrix {
    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.n;
        DensityMatrix {
            rho: vec![Complex64::default(); n * n],
            grid,
        }
    }

    pub fn from_pure(psi: &Wavefunction) -> Result<Self> {
        let mut d = DensityMatrix::zeros(Arc::clone(&psi.grid));
        d.add_pure(psi, 1.0)?;
        Ok(d)
    }

    /// `ρ += weight·|ψ⟩⟨ψ|`. The state must be in the lab frame.
    pub fn add_pure(&mut self, psi: &Wavefunction, weight: f64) -> Result<()> {
        if psi.frame != Frame::default() {
            return Err(RotorError::param(
                "psi",
                "density matrices need lab-frame states (disable frame tracking)",
            ));
        }
        if psi.grid.n != self.grid.n {
            return Err(RotorError::param("psi", "grid size mismatch"));
        }
        let n = self.grid.n;
        let w = weight * self.grid.dq;
        for j in 0..n {
            let a = psi.amps[j] * w;
            let row = &mut self.rho[j * n..(j + 1) * n];
            for (r, b) in row.iter_mut().zip(&psi.amps) {
                *r += a * b.conj();
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        self.rho.iter_mut().for_each(|x| *x *= s);
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn trace(&self) -> f64 {
        let n = self.n();
        (0..n).map(|j| self.rho[j * n + j].re).sum()
    }

    pub fn purity(&self) -> f64 {
        // Tr ρ² = Σ |ρ_jl|² for Hermitian ρ
        self.rho.iter().map(|x| x.norm_sqr()).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.n();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for l in j..n {
                worst = worst.max((self.rho[j * n + l] - self.rho[l * n + j].conj()).norm());
            }
        }
        worst
    }

    fn to_nalgebra(&self) -> DMatrix<Complex64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |j, l| self.rho[j * n + l])
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let m = self.to_nalgebra();
        // symmetrise away rounding before the Hermitian solver
        let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().copied().collect()
    }

    pub fn position_populations(&self) -> Vec<f64> {
        let n = self.n();
        (0..n).map(|j| self.rho[j * n + j].re).collect()
    }

    /// Populations of the momentum lattice, in FFT order.
    pub fn momentum_populations(&self, spectral: &mut Spectral) -> Vec<f64> {
        let n = self.n();
        let mut work = self.rho.clone();
        to_dual(&mut work, n, spectral);
        (0..n).map(|m| work[m * n + m].re / n as f64).collect()
    }

    pub fn mean_p2(&self, spectral: &mut Spectral) -> f64 {
        self.momentum_populations(spectral)
            .iter()
            .zip(&self.grid.p_values)
            .map(|(w, p)| w * p * p)
            .sum()
    }

    pub fn mean_q(&self) -> f64 {
        self.position_populations()
            .iter()
            .zip(&self.grid.q_values)
            .map(|(w, q)| w * q)
            .sum()
    }

    /// Check the density-matrix invariants; `t` labels the error.
    pub fn validate(&self, t: f64) -> Result<()> {
        let tr = self.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(RotorError::guard(t, format!("trace drifted to {tr}")));
        }
        let h = self.hermiticity_error();
        if h > HERMITICITY_TOL {
            return Err(RotorError::guard(t, format!("hermiticity error {h:e}")));
        }
        let min = self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min < -POSITIVITY_TOL {
            return Err(RotorError::guard(t, format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }
}

/// `½·Σ|λ_i(a − b)|`
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let diff = DensityMatrix {
        rho: a.rho.iter().zip(&b.rho).map(|(x, y)| x - y).collect(),
        grid: Arc::clone(&a.grid),
    };
    0.5 * diff.eigenvalues().iter().map(|x| x.abs()).sum::<f64>()
}

fn transpose(m: &mut [Complex64], n: usize) {
    for j in 0..n {
        for l in j + 1..n {
            m.swap(j * n + l, l * n + j);
        }
    }
}

/// Raw `F ρ F†`: forward transform along columns, inverse along rows.
fn to_dual(m: &mut [Complex64], n: usize, sp: &mut Spectral) {
    for row in m.chunks_exact_mut(n) {
        sp.inverse(row);
    }
    transpose(m, n);
    for row in m.chunks_exact_mut(n) {
        sp.forward(row);
    }
    transpose(m, n);
}

/// Inverse of [`to_dual`] up to the factor `n²`, which the caller folds in.
fn from_dual(m: &mut [Complex64], n: usize, sp: &mut Spectral) {
    for row in m.chunks_exact_mut(n) {
        sp.forward(row);
    }
    transpose(m, n);
    for row in m.chunks_exact_mut(n) {
        sp.inverse(row);
    }
    transpose(m, n);
}

/// Master-equation integrator for one parameter set.
pub struct MasterOracle {
    params: SimParams,
    grid: Arc<Grid>,
    spectral: Spectral,
    kick: Vec<Complex64>,
    decohere: Vec<f64>,
    half: Vec<Complex64>,
    full: Vec<Complex64>,
}

impl MasterOracle {
    pub fn new(params: &SimParams) -> Result<Self> {
        params.validate()?;
        if params.n_grid > MAX_ORACLE_GRID {
            return Err(RotorError::param(
                "n_grid",
                format!("master oracle is limited to {MAX_ORACLE_GRID} points"),
            ));
        }
        let grid = Arc::new(make_grid(params)?);
        let n = grid.n;
        let (kbar, dt, k) = (params.kbar, params.dt(), params.k());
        let kick = grid
            .q_values
            .iter()
            .map(|&q| Complex64::cis(-params.kappa * q.cos() / kbar))
            .collect();
        let mut decohere = vec![0.0; n * n];
        for j in 0..n {
            for l in 0..n {
                let d = grid.q_values[j] - grid.q_values[l];
                decohere[j * n + l] = (-k * d * d * dt).exp();
            }
        }
        let inv_n2 = 1.0 / (n * n) as f64;
        let mut half = vec![Complex64::default(); n * n];
        let mut full = vec![Complex64::default(); n * n];
        for m in 0..n {
            for mp in 0..n {
                let (p, pp) = (grid.p_values[m], grid.p_values[mp]);
                let e = (p * p - pp * pp) / (2.0 * kbar);
                half[m * n + mp] = Complex64::from_polar(inv_n2, -e * 0.5 * dt);
                full[m * n + mp] = Complex64::from_polar(inv_n2, -e * dt);
            }
        }
        Ok(MasterOracle {
            spectral: Spectral::new(n),
            params: params.clone(),
            grid,
            kick,
            decohere,
            half,
            full,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn spectral(&mut self) -> &mut Spectral {
        &mut self.spectral
    }

    fn drift(&mut self, rho: &mut [Complex64], full: bool) {
        let n = self.grid.n;
        to_dual(rho, n, &mut self.spectral);
        let table = if full { &self.full } else { &self.half };
        for (x, d) in rho.iter_mut().zip(table) {
            *x *= d;
        }
        from_dual(rho, n, &mut self.spectral);
    }

    /// Advance one kick period in place.
    pub fn step_period(&mut self, rho: &mut DensityMatrix) {
        let n = self.grid.n;
        for j in 0..n {
            for l in 0..n {
                rho.rho[j * n + l] *= self.kick[j] * self.kick[l].conj();
            }
        }
        let n_sub = self.params.n_sub;
        self.drift(&mut rho.rho, false);
        for s in 0..n_sub {
            if self.params.d_env > 0.0 {
                for (x, g) in rho.rho.iter_mut().zip(&self.decohere) {
                    *x *= g;
                }
            }
            self.drift(&mut rho.rho, s + 1 < n_sub);
        }
    }

    /// Evolve `n_kicks` periods, calling `observer(n, ρ)` just before kick
    /// `n = 0..=n_kicks` and validating the invariants each period.
    pub fn evolve_observed<F>(
        &mut self,
        mut rho: DensityMatrix,
        n_kicks: usize,
        mut observer: F,
    ) -> Result<DensityMatrix>
    where
        F: FnMut(usize, &DensityMatrix, &mut Spectral),
    {
        if rho.grid.n != self.grid.n {
            return Err(RotorError::param("rho", "grid size mismatch"));
        }
        rho.validate(0.0)?;
        observer(0, &rho, &mut self.spectral);
        for n in 0..n_kicks {
            self.step_period(&mut rho);
            rho.validate((n + 1) as f64)?;
            observer(n + 1, &rho, &mut self.spectral);
        }
        Ok(rho)
    }
}

/// Evolve `rho` through `n_kicks` kick periods of the master equation.
pub fn evolve_master(rho: DensityMatrix, params: &SimParams, n_kicks: usize) -> Result<DensityMatrix> {
    MasterOracle::new(params)?.evolve_observed(rho, n_kicks, |_, _, _| {})
}
