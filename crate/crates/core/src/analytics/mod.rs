//! Closed-form reference quantities and diagnostics.

pub mod bessel;
pub mod classicality;
pub mod fit;

pub use bessel::bessel_j;
pub use classicality::{classicality_check, ClassicalityReport, ForceScales, MarginPolicy};
pub use fit::{fit_diffusion, DiffusionFit, FitWeighting};

use crate::error::{Result, RotorError};

/// Shepelyansky's renormalised kick strength `2κ·sin(k̄/2)/k̄`.
pub fn kappa_eff(kappa: f64, kbar: f64) -> f64 {
    2.0 * kappa * (0.5 * kbar).sin() / kbar
}

/// Early-time diffusion rate of the unmeasured quantum rotor,
/// `κ²/2 · (1 − 2J₂(κ_eff) + 2J₂²(κ_eff))`, truncated to `n_terms` terms.
///
/// The `J₂` term carries the sign of the classical correlation correction,
/// so that at `k̄ → 0` the three terms reproduce the classical rate
/// (≈ 31.0 at κ = 10).
pub fn shepelyansky_dinit(kappa: f64, kbar: f64, n_terms: u32) -> Result<f64> {
    if !(1..=3).contains(&n_terms) {
        return Err(RotorError::param("n_terms", "must be 1, 2 or 3"));
    }
    if !(kbar > 0.0) {
        return Err(RotorError::param("kbar", "must be positive"));
    }
    let j2 = bessel_j(2, kappa_eff(kappa, kbar));
    let mut bracket = 1.0;
    if n_terms >= 2 {
        bracket -= 2.0 * j2;
    }
    if n_terms >= 3 {
        bracket += 2.0 * j2 * j2;
    }
    Ok(0.5 * kappa * kappa * bracket)
}
