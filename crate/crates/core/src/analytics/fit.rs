//! Least-squares estimation of the momentum diffusion coefficient.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RotorError};

pub const MIN_FIT_POINTS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionFit {
    /// Fitted slope of `⟨p²⟩(t)`.
    pub d_p: f64,
    pub stderr: f64,
    pub window: (f64, f64),
    pub intercept: f64,
    pub r2: f64,
    pub n_points: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FitWeighting {
    #[default]
    Uniform,
    /// Weights `1/sem²`; the standard error then assumes the SEMs are the
    /// true per-point errors.
    InverseSem,
}

/// Straight-line fit of `y(t)` over the samples with `t_lo <= t <= t_hi`.
///
/// Uniform weighting gives ordinary least squares with the slope error from
/// the residual variance. `sem` is only read for [`FitWeighting::InverseSem`].
pub fn fit_diffusion(
    t: &[f64],
    y: &[f64],
    sem: Option<&[f64]>,
    window: (f64, f64),
    weighting: FitWeighting,
) -> Result<DiffusionFit> {
    if t.len() != y.len() {
        return Err(RotorError::Fit("t and y differ in length".into()));
    }
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(RotorError::Fit(format!("empty window ({lo}, {hi})")));
    }
    let (t_min, t_max) = t
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if lo < t_min || hi > t_max {
        return Err(RotorError::Fit(format!(
            "window ({lo}, {hi}) outside data range ({t_min}, {t_max})"
        )));
    }
    let idx: Vec<usize> = (0..t.len()).filter(|&i| t[i] >= lo && t[i] <= hi).collect();
    if idx.len() < MIN_FIT_POINTS {
        return Err(RotorError::Fit(format!(
            "{} points in window, need at least {MIN_FIT_POINTS}",
            idx.len()
        )));
    }
    let w: Vec<f64> = match weighting {
        FitWeighting::Uniform => vec![1.0; idx.len()],
        FitWeighting::InverseSem => {
            let sem = sem.ok_or_else(|| RotorError::Fit("weighted fit needs SEMs".into()))?;
            if sem.len() != t.len() {
                return Err(RotorError::Fit("sem length mismatch".into()));
            }
            idx.iter()
                .map(|&i| {
                    if sem[i] > 0.0 {
                        Ok(1.0 / (sem[i] * sem[i]))
                    } else {
                        Err(RotorError::Fit(format!("zero SEM at t = {}", t[i])))
                    }
                })
                .collect::<Result<_>>()?
        }
    };

    let sw: f64 = w.iter().sum();
    let tm = idx.iter().zip(&w).map(|(&i, wi)| wi * t[i]).sum::<f64>() / sw;
    let ym = idx.iter().zip(&w).map(|(&i, wi)| wi * y[i]).sum::<f64>() / sw;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&i, wi) in idx.iter().zip(&w) {
        let dx = t[i] - tm;
        let dy = y[i] - ym;
        sxx += wi * dx * dx;
        sxy += wi * dx * dy;
        syy += wi * dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let ssr: f64 = idx
        .iter()
        .zip(&w)
        .map(|(&i, wi)| {
            let r = y[i] - intercept - slope * t[i];
            wi * r * r
        })
        .sum();
    let n = idx.len();
    let stderr = match weighting {
        FitWeighting::Uniform => (ssr / (n - 2) as f64 / sxx).sqrt(),
        FitWeighting::InverseSem => (1.0 / sxx).sqrt(),
    };
    let r2 = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    Ok(DiffusionFit {
        d_p: slope,
        stderr,
        window,
        intercept,
        r2,
        n_points: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn times(n: usize) -> Vec<f64> {
        (0..=n).map(|i| i as f64).collect()
    }

    #[test]
    fn exact_line() {
        let t = times(50);
        let y: Vec<f64> = t.iter().map(|x| 5.0 + 31.2 * x).collect();
        let f = fit_diffusion(&t, &y, None, (30.0, 50.0), FitWeighting::Uniform).unwrap();
        assert!((f.d_p - 31.2).abs() < 1e-12);
        assert!((f.intercept - 5.0).abs() < 1e-9);
        assert!(f.stderr < 1e-10);
        assert_eq!(f.n_points, 21);
    }

    #[test]
    fn constant_series_has_zero_slope() {
        let t = times(50);
        let y = vec![123.4; t.len()];
        let f = fit_diffusion(&t, &y, None, (30.0, 50.0), FitWeighting::Uniform).unwrap();
        assert!(f.d_p.abs() < 1e-12);
    }

    #[test]
    fn window_and_count_errors() {
        let t = times(50);
        let y = t.clone();
        assert!(fit_diffusion(&t, &y, None, (30.0, 60.0), FitWeighting::Uniform).is_err());
        assert!(fit_diffusion(&t, &y, None, (10.0, 13.0), FitWeighting::Uniform).is_err());
        assert!(fit_diffusion(&t, &y, None, (10.0, 14.0), FitWeighting::Uniform).is_ok());
        assert!(fit_diffusion(&t, &y, None, (10.0, 14.0), FitWeighting::InverseSem).is_err());
    }

    #[test]
    fn weighted_fit_recovers_line() {
        let t = times(20);
        let y: Vec<f64> = t.iter().map(|x| 1.0 + 2.0 * x).collect();
        let sem: Vec<f64> = t.iter().map(|x| 0.1 + 0.01 * x).collect();
        let f = fit_diffusion(&t, &y, Some(&sem), (0.0, 20.0), FitWeighting::InverseSem).unwrap();
        assert!((f.d_p - 2.0).abs() < 1e-12);
        assert!(f.stderr > 0.0);
    }

    /// With Gaussian noise the t-statistic has 19 degrees of freedom, for
    /// which P(|T| <= 3) = 0.9927.
    #[test]
    fn three_sigma_coverage_over_many_seeds() {
        let t: Vec<f64> = (0..21).map(|i| i as f64).collect();
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut covered = 0;
        for seed in 0..1000u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y: Vec<f64> = t.iter().map(|x| 10.0 * x + noise.sample(&mut rng)).collect();
            let f = fit_diffusion(&t, &y, None, (0.0, 20.0), FitWeighting::Uniform).unwrap();
            if (f.d_p - 10.0).abs() <= 3.0 * f.stderr {
                covered += 1;
            }
        }
        assert!(covered >= 990, "covered {covered}/1000");
    }

    proptest! {
        #[test]
        fn affine_equivariance(a in -1e3f64..1e3, b in -1e2f64..1e2, seed in 0u64..1000) {
            let t = times(40);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noise = Normal::new(0.0, 5.0).unwrap();
            let y: Vec<f64> = t.iter().map(|x| 3.0 * x + noise.sample(&mut rng)).collect();
            let shifted: Vec<f64> = y.iter().zip(&t).map(|(v, x)| v + a + b * x).collect();
            let f0 = fit_diffusion(&t, &y, None, (10.0, 40.0), FitWeighting::Uniform).unwrap();
            let f1 = fit_diffusion(&t, &shifted, None, (10.0, 40.0), FitWeighting::Uniform).unwrap();
            prop_assert!((f1.d_p - f0.d_p - b).abs() < 1e-9);
            prop_assert!((f1.stderr - f0.stderr).abs() < 1e-8);
        }
    }
}
