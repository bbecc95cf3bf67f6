//! Classicality inequalities for a continuously observed particle.
//!
//! Localization requires `8ηk ≫ |∂²F/F|·√(|∂F|/2m)`; bounded measurement
//! noise requires `2|∂F|/(ηs) ≪ k̄·k ≪ |∂F|·s/4`, with `s` the typical
//! action in units of `k̄`. The checker reports margins rather than a
//! verdict: how much is "≫" is a policy ([`MarginPolicy`]).
//!
//! The inequalities assume smooth forces. For the delta-kicked rotor the
//! caller supplies effective scales; [`ForceScales::kicked_rotor`] uses the
//! kick force `κ sin q` (gradient `κ`, curvature ratio 1, unit mass).

use serde::{Deserialize, Serialize};

use crate::error::{Result, RotorError};

/// Measurement efficiency. Only ideal measurements are modelled.
pub const ETA: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForceScales {
    /// `|∂F|`
    pub gradient: f64,
    /// `|∂²F / F|`
    pub curvature_ratio: f64,
    pub mass: f64,
}

impl ForceScales {
    pub fn kicked_rotor(kappa: f64) -> Self {
        ForceScales {
            gradient: kappa,
            curvature_ratio: 1.0,
            mass: 1.0,
        }
    }
}

/// Factor that counts as "much greater than".
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginPolicy {
    pub factor: f64,
}

impl Default for MarginPolicy {
    fn default() -> Self {
        MarginPolicy { factor: 10.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalityReport {
    pub kbar: f64,
    pub k: f64,
    pub action: f64,
    pub force: ForceScales,
    pub policy: MarginPolicy,
    /// `8ηk`
    pub localization_lhs: f64,
    /// `|∂²F/F|·√(|∂F|/2m)`
    pub localization_rhs: f64,
    pub localization_margin: f64,
    pub band_lower: f64,
    pub band_upper: f64,
    /// `k̄·k`, the quantity that must sit inside the band.
    pub band_value: f64,
    pub lower_margin: f64,
    pub upper_margin: f64,
}

impl ClassicalityReport {
    pub fn band_nonempty(&self) -> bool {
        self.band_upper > self.band_lower
    }

    pub fn localization_ok(&self) -> bool {
        self.localization_margin >= self.policy.factor
    }

    pub fn band_ok(&self) -> bool {
        self.band_nonempty()
            && self.lower_margin >= self.policy.factor
            && self.upper_margin >= self.policy.factor
    }

    pub fn satisfied(&self) -> bool {
        self.localization_ok() && self.band_ok()
    }
}

pub fn classicality_check(
    kbar: f64,
    k: f64,
    action: f64,
    force: ForceScales,
    policy: MarginPolicy,
) -> Result<ClassicalityReport> {
    for (name, v) in [
        ("kbar", kbar),
        ("k", k),
        ("action", action),
        ("force.gradient", force.gradient),
        ("force.curvature_ratio", force.curvature_ratio),
        ("force.mass", force.mass),
        ("policy.factor", policy.factor),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(RotorError::param(name, format!("must be positive, got {v}")));
        }
    }
    let localization_lhs = 8.0 * ETA * k;
    let localization_rhs = force.curvature_ratio * (force.gradient / (2.0 * force.mass)).sqrt();
    let band_lower = 2.0 * force.gradient / (ETA * action);
    let band_upper = force.gradient * action / 4.0;
    let band_value = kbar * k;
    Ok(ClassicalityReport {
        kbar,
        k,
        action,
        force,
        policy,
        localization_lhs,
        localization_rhs,
        localization_margin: localization_lhs / localization_rhs,
        band_lower,
        band_upper,
        band_value,
        lower_margin: band_value / band_lower,
        upper_margin: band_upper / band_value,
    })
}
