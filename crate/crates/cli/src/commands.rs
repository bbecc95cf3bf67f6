use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use kicked_rotor::analytics::{classicality_check, kappa_eff, shepelyansky_dinit, MarginPolicy};
use kicked_rotor::classical::ClassicalEnsemble;
use kicked_rotor::ensemble::{run_ensemble, sweep, SweepAxis, SweepConfig};
use kicked_rotor::output::{classical_table, ensemble_table, sweep_table, CsvTable};
use kicked_rotor::{analytics, RotorError};

use crate::config::{ConfigError, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] RotorError),
    #[error("{failed} of {total} sweep points failed")]
    Partial { failed: usize, total: usize },
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(e) if e.is_numerical() => 3,
            CliError::Run(RotorError::InvalidParam { .. } | RotorError::Fit(_)) => 2,
            CliError::Run(_) | CliError::Write { .. } => 1,
            CliError::Partial { .. } => 4,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = PathBuf::from(&cfg.out);
    fs::create_dir_all(&dir).map_err(|source| CliError::Write {
        path: dir.display().to_string(),
        source,
    })?;
    Ok(dir)
}

fn provenance(table: &mut CsvTable, command: &str, cfg: &RunConfig) {
    table.comment(format!("qdkr {} {command}", env!("CARGO_PKG_VERSION")));
    table.comment(format!("seed = {}", cfg.seed));
    table.comment("resolved config:");
    // pool size and output location never change results
    let mut shown = cfg.clone();
    shown.workers = None;
    shown.out = ".".into();
    table.comment_block(&shown.to_toml());
    table.comment("");
}

fn write_table(mut table: CsvTable, dir: &Path, name: &str, command: &str, cfg: &RunConfig) -> Result<()> {
    let mut header = CsvTable::default();
    provenance(&mut header, command, cfg);
    header.comments.append(&mut table.comments);
    table.comments = header.comments;
    let path = dir.join(name);
    table.write(&path).map_err(|e| CliError::Write {
        path: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    })?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn fit_table(fit: &analytics::DiffusionFit) -> CsvTable {
    let mut t = CsvTable::new(&["window_lo", "window_hi", "d_p", "stderr", "intercept", "r2", "n_points"]);
    t.rows.push(vec![
        fit.window.0,
        fit.window.1,
        fit.d_p,
        fit.stderr,
        fit.intercept,
        fit.r2,
        fit.n_points as f64,
    ]);
    t
}

pub fn quantum(cfg: &RunConfig) -> Result<()> {
    let params = cfg.sim_params()?;
    params.validate()?;
    let dir = out_dir(cfg)?;
    let start = Instant::now();
    let series = run_ensemble(&params, cfg.n_traj, cfg.seed, cfg.workers())?;
    eprintln!("{} trajectories in {:.1?}", cfg.n_traj, start.elapsed());
    let fit = series.fit_default()?;
    write_table(ensemble_table(&series), &dir, "quantum.csv", "quantum", cfg)?;
    let mut ft = fit_table(&fit);
    ft.comment("stderr: standard error of the per-trajectory slopes");
    write_table(ft, &dir, "quantum_fit.csv", "quantum", cfg)?;
    println!("D_p = {} ± {} over {:?}", fit.d_p, fit.stderr, fit.window);
    Ok(())
}

pub fn classical(cfg: &RunConfig) -> Result<()> {
    let params = cfg.classical_params()?;
    let dir = out_dir(cfg)?;
    let series = ClassicalEnsemble::new(params, cfg.seed)?.noisy_evolve();
    let fit = analytics::fit_diffusion(
        &series.t,
        &series.mean_p2,
        None,
        (cfg.sim.fit_window[0], cfg.sim.fit_window[1]),
        analytics::FitWeighting::Uniform,
    )?;
    write_table(classical_table(&series), &dir, "classical.csv", "classical", cfg)?;
    write_table(fit_table(&fit), &dir, "classical_fit.csv", "classical", cfg)?;
    println!("D = {} ± {} over {:?}", fit.d_p, fit.stderr, fit.window);
    Ok(())
}

pub fn sweep_cmd(cfg: &RunConfig, axis: SweepAxis) -> Result<()> {
    let values = cfg.sweep_values()?;
    let params = match axis {
        SweepAxis::Kbar => cfg.sim_params_with(values[0], cfg.d_env()?),
        SweepAxis::DEnv => cfg.sim_params_with(cfg.kbar()?, values[0]),
    };
    let dir = out_dir(cfg)?;
    let name = format!("sweep_{}", axis.name());
    let sc = SweepConfig {
        axis,
        values,
        params,
        n_traj: cfg.n_traj,
        base_seed: cfg.seed,
        workers: cfg.workers(),
        checkpoint_dir: Some(dir.join(&name)),
    };
    let result = sweep(&sc, |p, elapsed| match &p.error {
        None => eprintln!("{} = {}: done in {:.1?}", axis.name(), p.value, elapsed),
        Some(e) => eprintln!("{} = {}: FAILED ({e})", axis.name(), p.value),
    })?;
    let mut table = sweep_table(&result);
    table.comment(format!("checkpoint and manifest: {name}/"));
    for p in result.points.iter().filter(|p| !p.ok()) {
        table.comment(format!(
            "failed {} = {}: {}",
            axis.name(),
            p.value,
            p.error.as_deref().unwrap_or("")
        ));
    }
    let command = format!("sweep-{}", axis.name().replace('_', ""));
    write_table(table, &dir, &format!("{name}.csv"), &command, cfg)?;
    match result.failures() {
        0 => Ok(()),
        failed => Err(CliError::Partial {
            failed,
            total: result.points.len(),
        }),
    }
}

pub fn analytic(cfg: &RunConfig) -> Result<()> {
    let a = &cfg.analytic;
    if !(a.kbar_min > 0.0 && a.kbar_max > a.kbar_min) {
        return Err(ConfigError::Invalid {
            field: "analytic.kbar_max",
            reason: "need 0 < kbar_min < kbar_max".into(),
        }
        .into());
    }
    if a.points < 2 {
        return Err(ConfigError::Invalid {
            field: "analytic.points",
            reason: "need at least 2 points".into(),
        }
        .into());
    }
    let mut kbars: Vec<f64> = (0..a.points)
        .map(|i| a.kbar_min + (a.kbar_max - a.kbar_min) * i as f64 / (a.points - 1) as f64)
        .collect();
    // resonances k̄ = 2πn, where κ_eff vanishes
    let mut n = 1.0;
    while std::f64::consts::TAU * n <= a.kbar_max {
        let r = std::f64::consts::TAU * n;
        if r >= a.kbar_min && !kbars.contains(&r) {
            kbars.push(r);
        }
        n += 1.0;
    }
    kbars.sort_by(f64::total_cmp);
    let kappa = cfg.sim.kappa;
    let mut t = CsvTable::new(&["kbar", "kappa_eff", "d_init"]);
    for kb in kbars {
        t.rows
            .push(vec![kb, kappa_eff(kappa, kb), shepelyansky_dinit(kappa, kb, a.n_terms)?]);
    }
    let dir = out_dir(cfg)?;
    write_table(t, &dir, "analytic.csv", "analytic", cfg)?;
    Ok(())
}

pub fn check(cfg: &RunConfig) -> Result<()> {
    let kbar = cfg.kbar()?;
    let d_env = cfg.d_env()?;
    let action = cfg.check.action.ok_or(ConfigError::Missing("check.action"))?;
    let policy = MarginPolicy {
        factor: cfg.check.margin,
    };
    let report = classicality_check(kbar, d_env / (kbar * kbar), action, cfg.force_scales(), policy)?;
    #[derive(serde::Serialize)]
    struct Verdict<'a> {
        localization_ok: bool,
        band_nonempty: bool,
        band_ok: bool,
        satisfied: bool,
        report: &'a analytics::ClassicalityReport,
    }
    let text = toml::to_string(&Verdict {
        localization_ok: report.localization_ok(),
        band_nonempty: report.band_nonempty(),
        band_ok: report.band_ok(),
        satisfied: report.satisfied(),
        report: &report,
    })
    .expect("report serialises");
    print!("{text}");
    let dir = out_dir(cfg)?;
    let mut header = CsvTable::default();
    provenance(&mut header, "check", cfg);
    let mut file = String::new();
    for c in header.comments {
        file.push_str(if c.is_empty() { "#".into() } else { format!("# {c}") }.as_str());
        file.push('\n');
    }
    file.push_str(&text);
    let path = dir.join("check.toml");
    fs::write(&path, file).map_err(|source| CliError::Write {
        path: path.display().to_string(),
        source,
    })?;
    Ok(())
}
