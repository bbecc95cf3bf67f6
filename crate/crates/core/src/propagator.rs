//! Kicked-rotor evolution under continuous position measurement.
//!
//! One kick period is: an instantaneous kick `exp(−iκ cos q / k̄)`, followed by
//! `n_sub` Strang substeps `[½ drift, measurement, ½ drift]`. Adjacent half
//! drifts are fused, so each substep costs one FFT pair.
//!
//! The measurement update is the Gaussian Kraus operator
//! `Ω(R) = exp(−2k·dt·(q − R)²)` with the record sample
//! `R = ⟨q⟩ + dW/(√(8k)·dt)`, followed by renormalisation. Expanding `Ω(R)`
//! with `dW² → dt` recovers the linear update
//! `1 − k q² dt + 4k q R dt`; its normalised Itô form is
//! `d|ψ⟩ = [−k(q−⟨q⟩)² dt + √(2k)(q−⟨q⟩) dW] |ψ⟩`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Result, RotorError};
use crate::grid::{make_grid, Grid};
use crate::noise::NoiseStream;
use crate::params::SimParams;
use crate::spectral::Spectral;
use crate::wavefunction::{gaussian_packet, Moments, Wavefunction, NORM_TOLERANCE};

/// Pre-measurement norm drift that signals a broken step.
pub const NORM_DRIFT_GUARD: f64 = 1e-4;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MeasurementRecord {
    pub dt: f64,
    /// `(t, R)` with `t` the substep midpoint.
    pub samples: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct TrajectoryResult {
    pub seed: u64,
    /// Moments sampled just before each kick: index `n` is time `t = n`,
    /// `n_kicks + 1` entries.
    pub moments: Vec<Moments>,
    pub record: Option<MeasurementRecord>,
}

impl TrajectoryResult {
    pub fn p2_series(&self) -> Vec<f64> {
        self.moments.iter().map(|m| m.mean_p2).collect()
    }
}

/// Apply one delta kick in place.
pub fn kick(psi: &mut Wavefunction, kappa: f64, kbar: f64) {
    if kappa == 0.0 {
        return;
    }
    let x0 = psi.frame.q_shift;
    for (a, &q) in psi.amps.iter_mut().zip(&psi.grid.q_values) {
        *a *= Complex64::cis(-kappa * (q + x0).cos() / kbar);
    }
}

/// Free evolution for `dt`: `exp(−i p² dt / (2k̄))` on the frame amplitudes,
/// with the frame itself carried along by its boost.
pub fn drift(psi: &mut Wavefunction, dt: f64, kbar: f64, spectral: &mut Spectral) {
    if dt == 0.0 {
        return;
    }
    let n = psi.grid.n as f64;
    spectral.forward(&mut psi.amps);
    for (a, &p) in psi.amps.iter_mut().zip(&psi.grid.p_values) {
        *a *= Complex64::from_polar(1.0 / n, -p * p * dt / (2.0 * kbar));
    }
    spectral.inverse(&mut psi.amps);
    psi.frame.q_shift += psi.frame.p_boost * dt;
}

/// One measurement substep. Returns the record sample `R`, or `None` when
/// `k = 0` (no measurement, state untouched).
pub fn measure_step(psi: &mut Wavefunction, k: f64, dt: f64, dw: f64) -> Result<Option<f64>> {
    if !(k >= 0.0) {
        return Err(RotorError::param("k", "measurement strength must be >= 0"));
    }
    if !(dt > 0.0) {
        return Err(RotorError::param("dt", "must be positive"));
    }
    if k == 0.0 {
        return Ok(None);
    }
    let grid = Arc::clone(&psi.grid);
    let (_, mean) = position_stats(&psi.amps, &grid);
    let r = mean + dw / ((8.0 * k).sqrt() * dt);
    let after = apply_kraus(&mut psi.amps, &grid, 2.0 * k * dt, r);
    let s = 1.0 / after.sqrt();
    psi.amps.iter_mut().for_each(|a| *a *= s);
    Ok(Some(r + psi.frame.q_shift))
}

/// `(Σ|ψ|²·dq, ⟨q⟩)` in grid coordinates.
fn position_stats(amps: &[Complex64], grid: &Grid) -> (f64, f64) {
    let (mut w, mut s) = (0.0, 0.0);
    for (a, &q) in amps.iter().zip(&grid.q_values) {
        let d = a.norm_sqr();
        w += d;
        s += d * q;
    }
    (w * grid.dq, s / w)
}

/// Multiply by `exp(−a·(q − r)²)` and return the resulting `Σ|ψ|²·dq`.
///
/// The Gaussian is built outward from the grid point nearest `r` with the
/// ratio recursion `f(x ± dq) = f(x)·exp(−a(±2x·dq + dq²))`, resynchronised
/// with exact exponentials every `RESYNC` points to bound rounding growth.
fn apply_kraus(amps: &mut [Complex64], grid: &Grid, a: f64, r: f64) -> f64 {
    const RESYNC: usize = 32;
    let n = amps.len();
    let dq = grid.dq;
    let q0 = grid.q_values[0];
    let centre = ((r - q0) / dq).round().clamp(0.0, (n - 1) as f64) as usize;
    let step = (-2.0 * a * dq * dq).exp();
    let mut acc = 0.0;

    let (mut f, mut ratio) = (0.0, 0.0);
    for (i, amp) in amps[centre..].iter_mut().enumerate() {
        if i % RESYNC == 0 {
            let x = grid.q_values[centre + i] - r;
            f = (-a * x * x).exp();
            ratio = (-a * (2.0 * x * dq + dq * dq)).exp();
        }
        *amp *= f;
        acc += amp.norm_sqr();
        f *= ratio;
        ratio *= step;
    }
    for (i, amp) in amps[..centre].iter_mut().rev().enumerate() {
        if i % RESYNC == 0 {
            let x = grid.q_values[centre - 1 - i] - r;
            f = (-a * x * x).exp();
            ratio = (-a * (-2.0 * x * dq + dq * dq)).exp();
        }
        *amp *= f;
        acc += amp.norm_sqr();
        f *= ratio;
        ratio *= step;
    }
    acc * dq
}

/// Single-trajectory propagator with its own FFT workspace and phase tables.
#[derive(Clone, Debug)]
pub struct Propagator {
    params: SimParams,
    grid: Arc<Grid>,
    spectral: Spectral,
    k: f64,
    kick_phase: Vec<Complex64>,
    /// Frame offset `X` the kick table was built for.
    kick_for: f64,
    half: Vec<Complex64>,
    full: Vec<Complex64>,
    period: Vec<Complex64>,
    band: usize,
}

impl Propagator {
    pub fn new(params: &SimParams) -> Result<Self> {
        params.validate()?;
        let grid = Arc::new(make_grid(params)?);
        let n = grid.n;
        let (kbar, dt) = (params.kbar, params.dt());
        let inv_n = 1.0 / n as f64;
        let table = |tau: f64| -> Vec<Complex64> {
            grid.p_values
                .iter()
                .map(|&p| Complex64::from_polar(inv_n, -p * p * tau / (2.0 * kbar)))
                .collect()
        };
        let (half, full, period) = (table(0.5 * dt), table(dt), table(1.0));
        let mut prop = Propagator {
            k: params.k(),
            spectral: Spectral::new(n),
            kick_phase: vec![Complex64::default(); n],
            kick_for: 0.0,
            half,
            full,
            period,
            band: (n / 32).max(1),
            params: params.clone(),
            grid,
        };
        prop.build_kick(0.0);
        Ok(prop)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn spectral(&mut self) -> &mut Spectral {
        &mut self.spectral
    }

    /// The configured initial packet.
    pub fn initial_state(&self) -> Result<Wavefunction> {
        let p = &self.params;
        gaussian_packet(
            Arc::clone(&self.grid),
            p.initial.q0,
            p.initial.p0,
            p.initial.sigma_q(p.kbar),
            p.kbar,
        )
    }

    fn build_kick(&mut self, x0: f64) {
        let (kappa, kbar) = (self.params.kappa, self.params.kbar);
        for (ph, &q) in self.kick_phase.iter_mut().zip(&self.grid.q_values) {
            *ph = Complex64::cis(-kappa * (q + x0).cos() / kbar);
        }
        self.kick_for = x0;
    }

    /// Advance one kick period in place and return the moments sampled just
    /// before the next kick (time `index + 1`). Record samples are appended to
    /// `record` when given.
    pub fn step_period(
        &mut self,
        psi: &mut Wavefunction,
        noise: &mut NoiseStream,
        index: usize,
        mut record: Option<&mut MeasurementRecord>,
    ) -> Result<Moments> {
        if self.kick_for.to_bits() != psi.frame.q_shift.to_bits() {
            self.build_kick(psi.frame.q_shift);
        }
        let x_start = psi.frame.q_shift;
        let velocity = psi.frame.p_boost;
        let t_end = (index + 1) as f64;
        let amps = &mut psi.amps;
        for (a, ph) in amps.iter_mut().zip(&self.kick_phase) {
            *a *= ph;
        }
        self.spectral.forward(amps);

        if self.k == 0.0 {
            for (a, d) in amps.iter_mut().zip(&self.period) {
                *a *= d;
            }
        } else {
            for (a, d) in amps.iter_mut().zip(&self.half) {
                *a *= d;
            }
            let dt = self.params.dt();
            let a_coef = 2.0 * self.k * dt;
            let r_scale = 1.0 / ((8.0 * self.k).sqrt() * dt);
            let n_sub = self.params.n_sub;
            for s in 0..n_sub {
                self.spectral.inverse(amps);
                let (norm, mean) = position_stats(amps, &self.grid);
                if !norm.is_finite() || (norm - 1.0).abs() > NORM_DRIFT_GUARD {
                    return Err(RotorError::guard(
                        index as f64 + s as f64 * dt,
                        format!("norm drifted to {norm} before measurement"),
                    ));
                }
                let dw = noise.next_dw();
                let r = mean + dw * r_scale;
                let after = apply_kraus(amps, &self.grid, a_coef, r);
                if !(after > 0.0 && after.is_finite()) {
                    return Err(RotorError::guard(
                        index as f64 + s as f64 * dt,
                        "measurement update annihilated the state",
                    ));
                }
                if let Some(rec) = record.as_deref_mut() {
                    let tau = (s as f64 + 0.5) * dt;
                    rec.samples
                        .push((index as f64 + tau, r + x_start + velocity * tau));
                }
                let scale = 1.0 / after.sqrt();
                self.spectral.forward(amps);
                let table = if s + 1 < n_sub { &self.full } else { &self.half };
                for (a, d) in amps.iter_mut().zip(table) {
                    *a *= d * scale;
                }
            }
        }

        psi.frame.q_shift = x_start + velocity;

        // `amps` is now the raw spectrum of the normalised state
        let (mom_leak, p_mean_grid, var_p) = self.momentum_stats(amps);
        self.spectral.inverse(amps);
        let (pos_leak, q_mean_grid, var_q) = self.position_moments(amps);

        if mom_leak > self.params.leak_threshold {
            return Err(RotorError::guard(
                t_end,
                format!(
                    "momentum aliasing: {mom_leak:.3e} probability near |p| = {:.3}",
                    self.grid.p_max()
                ),
            ));
        }
        if self.k > 0.0 && pos_leak > self.params.leak_threshold {
            return Err(RotorError::guard(
                t_end,
                format!("boundary leak: {pos_leak:.3e} probability at the box edges"),
            ));
        }

        let mean_p = p_mean_grid + psi.frame.p_boost;
        let moments = Moments {
            t: t_end,
            mean_q: q_mean_grid + psi.frame.q_shift,
            mean_p,
            mean_p2: var_p + mean_p * mean_p,
            var_q,
            var_p,
        };
        if self.params.track_frame {
            self.recentre(psi, q_mean_grid, p_mean_grid);
        }
        Ok(moments)
    }

    /// Outer-band probability, mean and variance of the raw spectrum.
    fn momentum_stats(&self, spec: &[Complex64]) -> (f64, f64, f64) {
        let n = self.grid.n;
        let half = n / 2;
        let (mut w, mut s1, mut edge) = (0.0, 0.0, 0.0);
        for (m, (a, &p)) in spec.iter().zip(&self.grid.p_values).enumerate() {
            let d = a.norm_sqr();
            w += d;
            s1 += d * p;
            // indices nearest ±n/2 are the largest |p|
            if m + self.band >= half && m < half + self.band {
                edge += d;
            }
        }
        let mean = s1 / w;
        let var = spec
            .iter()
            .zip(&self.grid.p_values)
            .map(|(a, &p)| a.norm_sqr() * (p - mean) * (p - mean))
            .sum::<f64>()
            / w;
        (edge / w, mean, var)
    }

    fn position_moments(&self, amps: &[Complex64]) -> (f64, f64, f64) {
        let n = self.grid.n;
        let (mut w, mut s1, mut edge) = (0.0, 0.0, 0.0);
        for (j, (a, &q)) in amps.iter().zip(&self.grid.q_values).enumerate() {
            let d = a.norm_sqr();
            w += d;
            s1 += d * q;
            if j < self.band || j >= n - self.band {
                edge += d;
            }
        }
        let mean = s1 / w;
        let var = amps
            .iter()
            .zip(&self.grid.q_values)
            .map(|(a, &q)| a.norm_sqr() * (q - mean) * (q - mean))
            .sum::<f64>()
            / w;
        (edge / w, mean, var)
    }

    /// Roll by whole grid points toward `⟨q⟩` and boost by whole lattice
    /// steps toward `⟨p⟩`. The roll is only needed (and only done) when the
    /// measurement keeps the packet localised.
    fn recentre(&self, psi: &mut Wavefunction, q_mean_grid: f64, p_mean_grid: f64) {
        if self.k > 0.0 {
            let points = (q_mean_grid / self.grid.dq).round() as i64;
            if points != 0 {
                let n = self.grid.n as i64;
                psi.amps.rotate_left(points.rem_euclid(n) as usize);
                psi.frame.q_shift += points as f64 * self.grid.dq;
            }
        }
        let steps = (p_mean_grid / self.grid.dp).round();
        if steps != 0.0 {
            let dk = -steps * self.grid.dp / self.grid.kbar;
            for (a, &q) in psi.amps.iter_mut().zip(&self.grid.q_values) {
                *a *= Complex64::cis(dk * q);
            }
            psi.frame.p_boost += steps * self.grid.dp;
        }
    }

    /// Moments of a state in this propagator's grid, sampled at time `t`.
    pub fn sample(&mut self, psi: &Wavefunction, t: f64) -> Result<Moments> {
        let mut m = psi.moments(&mut self.spectral)?;
        m.t = t;
        Ok(m)
    }

    /// Run one full trajectory from the configured initial packet.
    pub fn run(&mut self, seed: u64, keep_record: bool) -> Result<TrajectoryResult> {
        self.run_observed(seed, keep_record, |_, _| {})
    }

    /// As [`Propagator::run`], calling `observer(n, ψ)` with the state just
    /// before kick `n` for `n = 0..=n_kicks`.
    pub fn run_observed<F>(
        &mut self,
        seed: u64,
        keep_record: bool,
        mut observer: F,
    ) -> Result<TrajectoryResult>
    where
        F: FnMut(usize, &Wavefunction),
    {
        let mut psi = self.initial_state()?;
        let mut noise = NoiseStream::with_refinement(
            seed,
            self.params.dt(),
            self.params.wiener_refinement,
        );
        let mut record = keep_record.then(|| MeasurementRecord {
            dt: self.params.dt(),
            samples: Vec::with_capacity(self.params.n_kicks * self.params.n_sub),
        });
        let mut moments = Vec::with_capacity(self.params.n_kicks + 1);
        moments.push(self.sample(&psi, 0.0)?);
        observer(0, &psi);
        for n in 0..self.params.n_kicks {
            let m = self.step_period(&mut psi, &mut noise, n, record.as_mut())?;
            debug_assert!((psi.norm_sq() - 1.0).abs() < NORM_TOLERANCE);
            moments.push(m);
            observer(n + 1, &psi);
        }
        Ok(TrajectoryResult {
            seed,
            moments,
            record,
        })
    }
}
