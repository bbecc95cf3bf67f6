use std::sync::Arc;

use kicked_rotor::propagator::{drift, measure_step};
use kicked_rotor::spectral::Spectral;
use kicked_rotor::{gaussian_packet, Grid, Wavefunction};
use num_complex::Complex64;
use proptest::prelude::*;

fn grid() -> Arc<Grid> {
    Arc::new(Grid::new(512, 40.0, 1.0).unwrap())
}

/// First-order unnormalised update `(1 − k q² dt + 4k q⟨q⟩ dt + √(2k) q dW)ψ`,
/// then normalised.
fn linear_step(psi: &Wavefunction, k: f64, dt: f64, dw: f64) -> Vec<Complex64> {
    let g = &psi.grid;
    let d = psi.density();
    let mean: f64 = d.iter().zip(&g.q_values).map(|(x, q)| x * q).sum::<f64>() * g.dq;
    let mut out: Vec<Complex64> = psi
        .amps
        .iter()
        .zip(&g.q_values)
        .map(|(a, &q)| a * (1.0 - k * q * q * dt + 4.0 * k * q * mean * dt + (2.0 * k).sqrt() * q * dw))
        .collect();
    let norm: f64 = out.iter().map(|a| a.norm_sqr()).sum::<f64>() * g.dq;
    out.iter_mut().for_each(|a| *a /= norm.sqrt());
    out
}

fn step_error(q0: f64, sigma: f64, k: f64, dt: f64, sign: f64) -> f64 {
    let g = grid();
    let psi = gaussian_packet(Arc::clone(&g), q0, 0.3, sigma, 1.0).unwrap();
    // dW² = dt exactly, so the Itô substitution is not a source of error
    let dw = sign * dt.sqrt();
    let lin = linear_step(&psi, k, dt, dw);
    let mut kraus = psi.clone();
    measure_step(&mut kraus, k, dt, dw).unwrap();
    kraus
        .amps
        .iter()
        .zip(&lin)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt()
        * g.dq.sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn kraus_update_agrees_with_linear_form(
        q0 in -3.0f64..3.0,
        sigma in 0.5f64..2.0,
        k in 0.05f64..2.0,
        up in any::<bool>(),
    ) {
        let sign = if up { 1.0 } else { -1.0 };
        let e1 = step_error(q0, sigma, k, 1e-4, sign);
        let e2 = step_error(q0, sigma, k, 2.5e-5, sign);
        // local error is O(dt^{3/2}): quartering dt cuts it by about 8
        prop_assert!(e1 < 1e-3, "e1 = {e1}");
        prop_assert!(e2 < e1 / 6.0, "e1 = {e1}, e2 = {e2}");
    }
}

#[test]
fn record_sample_is_mean_plus_scaled_noise() {
    let g = grid();
    let psi = gaussian_packet(Arc::clone(&g), 1.5, 0.0, 1.0, 1.0).unwrap();
    let (k, dt, dw) = (0.5, 1e-3, 0.02);
    let mut a = psi.clone();
    let r = measure_step(&mut a, k, dt, dw).unwrap().unwrap();
    let expect = 1.5 + dw / ((8.0 * k).sqrt() * dt);
    assert!((r - expect).abs() < 1e-10, "{r} vs {expect}");
}

#[test]
fn free_packet_ehrenfest() {
    let g = Arc::new(Grid::new(2048, 200.0, 1.0).unwrap());
    let mut sp = Spectral::new(g.n);
    let mut psi = gaussian_packet(Arc::clone(&g), 0.0, 5.0, 1.0, 1.0).unwrap();
    let dt = 0.01;
    drift(&mut psi, dt, 1.0, &mut sp);
    let m = psi.moments(&mut sp).unwrap();
    assert!((m.mean_q - 5.0 * dt).abs() < 1e-6, "⟨q⟩ = {}", m.mean_q);
    assert!((m.mean_p - 5.0).abs() < 1e-9);
}
