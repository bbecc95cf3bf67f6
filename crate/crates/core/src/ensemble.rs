//! Trajectory ensembles, parameter sweeps and sweep checkpoints.
//!
//! Trajectories are independent tasks on a bounded rayon pool. Results are
//! collected by trajectory index and reduced with fixed-order pairwise sums,
//! so the worker count never changes a single bit of the output.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{fit_diffusion, DiffusionFit, FitWeighting};
use crate::error::{Result, RotorError};
use crate::master::DensityMatrix;
use crate::noise::trajectory_seed;
use crate::params::SimParams;
use crate::propagator::{Propagator, TrajectoryResult};
use crate::spectral::pairwise_sum;

/// Trajectories summed sequentially before the pairwise reduction of
/// density matrices.
const DENSITY_BLOCK: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSeries {
    pub t: Vec<f64>,
    pub mean_p2: Vec<f64>,
    pub sem_p2: Vec<f64>,
    /// Ensemble mean of `⟨q⟩`.
    pub mean_q: Vec<f64>,
    /// Total position variance of the ensemble-averaged state.
    pub var_q: Vec<f64>,
    pub n_traj: usize,
    pub base_seed: u64,
    pub params: SimParams,
    /// `⟨p²⟩(t)` of every trajectory, by index.
    #[serde(skip)]
    pub trajectories_p2: Vec<Vec<f64>>,
}

impl EnsembleSeries {
    /// Diffusion fit of the mean series over `window`.
    ///
    /// The slope is the OLS slope of `mean_p2`, which equals the mean of the
    /// per-trajectory OLS slopes. With two or more trajectories the standard
    /// error is the standard error of those slopes, which accounts for the
    /// correlation between times within one trajectory.
    pub fn fit(&self, window: (f64, f64)) -> Result<DiffusionFit> {
        let mut fit = fit_diffusion(&self.t, &self.mean_p2, None, window, FitWeighting::Uniform)?;
        if self.trajectories_p2.len() >= 2 {
            let slopes = self
                .trajectories_p2
                .iter()
                .map(|y| fit_diffusion(&self.t, y, None, window, FitWeighting::Uniform).map(|f| f.d_p))
                .collect::<Result<Vec<_>>>()?;
            let (_, sem) = mean_sem(&slopes);
            fit.stderr = sem;
        }
        Ok(fit)
    }

    pub fn fit_default(&self) -> Result<DiffusionFit> {
        self.fit(self.params.fit_window)
    }
}

/// Mean and standard error, both from fixed-order pairwise sums.
pub fn mean_sem(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, 0.0);
    }
    if xs.iter().all(|x| x.to_bits() == xs[0].to_bits()) {
        return (xs[0], 0.0);
    }
    let mean = pairwise_sum(xs) / n;
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    (mean, (pairwise_sum(&dev) / (n - 1.0) / n).sqrt())
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(RotorError::param("workers", "need at least one worker"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| RotorError::param("workers", e.to_string()))
}

fn first_failure<T>(results: Vec<Result<T>>, base_seed: u64) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(results.len());
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => out.push(v),
            Err(e) => {
                return Err(RotorError::TrajectoryFailed {
                    index,
                    seed: trajectory_seed(base_seed, index as u64),
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(out)
}

/// Run `n_traj` trajectories on `workers` threads and average their moments.
///
/// Trajectory `i` uses `trajectory_seed(base_seed, i)`. Without measurement
/// the evolution is deterministic, so one trajectory is computed and shared.
pub fn run_ensemble(
    params: &SimParams,
    n_traj: usize,
    base_seed: u64,
    workers: usize,
) -> Result<EnsembleSeries> {
    if n_traj == 0 {
        return Err(RotorError::param("n_traj", "need at least one trajectory"));
    }
    let proto = Propagator::new(params)?;
    let pool = build_pool(workers)?;
    let trajectories: Vec<TrajectoryResult> = if params.d_env == 0.0 {
        let one = proto.clone().run(trajectory_seed(base_seed, 0), false);
        let one = first_failure(vec![one], base_seed)?.remove(0);
        vec![one; n_traj]
    } else {
        let results: Vec<Result<TrajectoryResult>> = pool.install(|| {
            (0..n_traj)
                .into_par_iter()
                .map_init(
                    || proto.clone(),
                    |prop, i| prop.run(trajectory_seed(base_seed, i as u64), false),
                )
                .collect()
        });
        first_failure(results, base_seed)?
    };
    Ok(reduce(params, base_seed, &trajectories))
}

fn reduce(params: &SimParams, base_seed: u64, trajectories: &[TrajectoryResult]) -> EnsembleSeries {
    let n_t = params.n_kicks + 1;
    let n = trajectories.len() as f64;
    let mut out = EnsembleSeries {
        t: (0..n_t).map(|i| i as f64).collect(),
        mean_p2: Vec::with_capacity(n_t),
        sem_p2: Vec::with_capacity(n_t),
        mean_q: Vec::with_capacity(n_t),
        var_q: Vec::with_capacity(n_t),
        n_traj: trajectories.len(),
        base_seed,
        params: params.clone(),
        trajectories_p2: trajectories.iter().map(|t| t.p2_series()).collect(),
    };
    let mut buf = Vec::with_capacity(trajectories.len());
    for step in 0..n_t {
        buf.clear();
        buf.extend(trajectories.iter().map(|t| t.moments[step].mean_p2));
        let (m, s) = mean_sem(&buf);
        out.mean_p2.push(m);
        out.sem_p2.push(s);

        buf.clear();
        buf.extend(trajectories.iter().map(|t| t.moments[step].mean_q));
        let mq = pairwise_sum(&buf) / n;
        buf.clear();
        buf.extend(trajectories.iter().map(|t| t.moments[step].mean_q2()));
        let mq2 = pairwise_sum(&buf) / n;
        out.mean_q.push(mq);
        out.var_q.push((mq2 - mq * mq).max(0.0));
    }
    out
}

/// Trajectory-averaged density matrix just before each kick `0..=n_kicks`.
/// Needs `track_frame = false` and a grid small enough for the oracle.
pub fn density_ensemble(
    params: &SimParams,
    n_traj: usize,
    base_seed: u64,
    workers: usize,
) -> Result<Vec<DensityMatrix>> {
    if n_traj == 0 {
        return Err(RotorError::param("n_traj", "need at least one trajectory"));
    }
    if params.track_frame {
        return Err(RotorError::param(
            "track_frame",
            "density averaging needs a fixed lab-frame grid",
        ));
    }
    if params.n_grid > crate::master::MAX_ORACLE_GRID {
        return Err(RotorError::param("n_grid", "too large for density matrices"));
    }
    let proto = Propagator::new(params)?;
    let pool = build_pool(workers)?;
    let n_blocks = n_traj.div_ceil(DENSITY_BLOCK);
    let blocks: Vec<Result<Vec<DensityMatrix>>> = pool.install(|| {
        (0..n_blocks)
            .into_par_iter()
            .map_init(
                || proto.clone(),
                |prop, b| {
                    let grid = std::sync::Arc::clone(prop.grid());
                    let mut acc = vec![DensityMatrix::zeros(grid); params.n_kicks + 1];
                    for i in b * DENSITY_BLOCK..((b + 1) * DENSITY_BLOCK).min(n_traj) {
                        let mut failure = None;
                        let seed = trajectory_seed(base_seed, i as u64);
                        prop.run_observed(seed, false, |n, psi| {
                            if let Err(e) = acc[n].add_pure(psi, 1.0) {
                                failure.get_or_insert(e);
                            }
                        })
                        .map_err(|e| RotorError::TrajectoryFailed {
                            index: i,
                            seed,
                            source: Box::new(e),
                        })?;
                        if let Some(e) = failure {
                            return Err(e);
                        }
                    }
                    Ok(acc)
                },
            )
            .collect()
    });
    let blocks = blocks.into_iter().collect::<Result<Vec<_>>>()?;
    let mut total = pairwise_merge(blocks);
    for rho in &mut total {
        rho.scale(1.0 / n_traj as f64);
    }
    Ok(total)
}

fn pairwise_merge(mut blocks: Vec<Vec<DensityMatrix>>) -> Vec<DensityMatrix> {
    if blocks.len() == 1 {
        return blocks.pop().unwrap_or_default();
    }
    let right = blocks.split_off(blocks.len() / 2);
    let mut a = pairwise_merge(blocks);
    let b = pairwise_merge(right);
    for (x, y) in a.iter_mut().zip(&b) {
        for (u, v) in x.rho.iter_mut().zip(&y.rho) {
            *u += v;
        }
    }
    a
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Kbar,
    DEnv,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Kbar => "kbar",
            SweepAxis::DEnv => "d_env",
        }
    }

    pub fn apply(self, params: &SimParams, value: f64) -> SimParams {
        let mut p = params.clone();
        match self {
            SweepAxis::Kbar => p.kbar = value,
            SweepAxis::DEnv => p.d_env = value,
        }
        p
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub params: SimParams,
    pub n_traj: usize,
    pub base_seed: u64,
    pub fit: Option<DiffusionFit>,
    /// Final-time ensemble `⟨p²⟩` and its SEM.
    pub final_p2: Option<(f64, f64)>,
    pub error: Option<String>,
    pub numerical_failure: bool,
}

impl SweepPoint {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub points: Vec<SweepPoint>,
    pub version: String,
}

impl SweepResult {
    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| !p.ok()).count()
    }
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub params: SimParams,
    pub n_traj: usize,
    pub base_seed: u64,
    pub workers: usize,
    /// Directory for per-point files and the manifest; resumes from it.
    pub checkpoint_dir: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    axis: SweepAxis,
    values: Vec<f64>,
    n_traj: usize,
    base_seed: u64,
    params: SimParams,
    version: String,
    completed: Vec<usize>,
}

pub fn point_file(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("point_{index:03}.json"))
}

pub fn manifest_file(dir: &Path) -> PathBuf {
    dir.join("manifest.json")
}

fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| RotorError::Checkpoint(e.to_string()))?;
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text + "\n")?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn load_point(path: &Path) -> Result<SweepPoint> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| RotorError::Checkpoint(format!("{}: {e}", path.display())))
}

fn run_point(cfg: &SweepConfig, value: f64) -> SweepPoint {
    let params = cfg.axis.apply(&cfg.params, value);
    let mut point = SweepPoint {
        value,
        params: params.clone(),
        n_traj: cfg.n_traj,
        base_seed: cfg.base_seed,
        fit: None,
        final_p2: None,
        error: None,
        numerical_failure: false,
    };
    let outcome = run_ensemble(&params, cfg.n_traj, cfg.base_seed, cfg.workers)
        .and_then(|s| Ok((s.fit_default()?, s)));
    match outcome {
        Ok((fit, series)) => {
            let last = series.mean_p2.len() - 1;
            point.fit = Some(fit);
            point.final_p2 = Some((series.mean_p2[last], series.sem_p2[last]));
        }
        Err(e) => {
            point.numerical_failure = e.is_numerical();
            point.error = Some(e.to_string());
        }
    }
    point
}

/// Run one ensemble and fit per value of `axis`.
///
/// Failed points are recorded and the sweep continues. With a checkpoint
/// directory each finished point is written as its own file and the manifest
/// is refreshed; completed points whose stored inputs match are reused.
/// Progress and timings go to `progress`, never into result files.
pub fn sweep(cfg: &SweepConfig, mut progress: impl FnMut(&SweepPoint, std::time::Duration)) -> Result<SweepResult> {
    if cfg.values.is_empty() {
        return Err(RotorError::param("values", "sweep needs at least one value"));
    }
    for &v in &cfg.values {
        cfg.axis.apply(&cfg.params, v).validate()?;
    }
    let version = env!("CARGO_PKG_VERSION").to_string();
    if let Some(dir) = &cfg.checkpoint_dir {
        fs::create_dir_all(dir)?;
    }
    let mut points = Vec::with_capacity(cfg.values.len());
    for (i, &value) in cfg.values.iter().enumerate() {
        let start = std::time::Instant::now();
        let reused = cfg.checkpoint_dir.as_ref().and_then(|dir| {
            let path = point_file(dir, i);
            let p = load_point(&path).ok()?;
            let expect = cfg.axis.apply(&cfg.params, value);
            (p.value.to_bits() == value.to_bits()
                && p.params == expect
                && p.n_traj == cfg.n_traj
                && p.base_seed == cfg.base_seed)
                .then_some(p)
        });
        let point = match reused {
            Some(p) => p,
            None => {
                let p = run_point(cfg, value);
                if let Some(dir) = &cfg.checkpoint_dir {
                    write_json_atomic(&point_file(dir, i), &p)?;
                }
                p
            }
        };
        progress(&point, start.elapsed());
        points.push(point);
        if let Some(dir) = &cfg.checkpoint_dir {
            let manifest = Manifest {
                axis: cfg.axis,
                values: cfg.values.clone(),
                n_traj: cfg.n_traj,
                base_seed: cfg.base_seed,
                params: cfg.params.clone(),
                version: version.clone(),
                completed: (0..points.len()).collect(),
            };
            write_json_atomic(&manifest_file(dir), &manifest)?;
        }
    }
    Ok(SweepResult {
        axis: cfg.axis,
        values: cfg.values.clone(),
        points,
        version,
    })
}
