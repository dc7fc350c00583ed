//! Executes one resolved experiment and writes its CSV.

use std::path::Path;

use anyhow::{Context, Result};
use pagecurve::gaussian_qbm::{
    evolve_trajectory, gaussian_entropy, gaussian_fidelity, ground_state as oscillator_ground,
    wave_packet, OscillatorSpec,
};
use pagecurve::heom::{
    convergence_check, excited_state, ground_state, hierarchy_size, integrate, ConvergenceReport,
    HeomConfig, QubitSpec, Terminator,
};
use pagecurve::observables::{
    gibbs_state, mean_force_entropy_qbm, page_time, page_time_with_population, von_neumann_entropy,
    EntropyCurve, PageTimeReport,
};
use pagecurve::ode::{Stats, Tolerances};
use pagecurve::spectral::BathSpec;
use serde::Serialize;

use crate::config::{ExperimentConfig, Initial, Model};

/// Quadrature error (relative to the covariance scale) above which a QBM run
/// counts as unconverged.
const QBM_QUADRATURE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    NotConverged,
    Failed,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Converged => "converged",
            Status::NotConverged => "NOT CONVERGED",
            Status::Failed => "failed",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub t_page: f64,
    pub s_max: f64,
    pub s_final: f64,
    /// Entropy maximum on the first or last grid point.
    pub page_time_unresolved: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_population_time: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct QbmDiagnostics {
    /// Largest quadrature error estimate over the grid, relative to the covariance scale.
    pub max_quadrature_error: f64,
    /// Absent for an uncoupled oscillator, which has no unique steady state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steady_entropy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_minus_steady: Option<f64>,
    pub min_uncertainty_det: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HeomDiagnostics {
    pub n_k: usize,
    pub n_c: usize,
    pub hierarchy_size: u64,
    pub tolerances: Tolerances,
    pub terminator: Terminator,
    pub integrator: Stats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gibbs_entropy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    #[serde(skip)]
    pub status: Status,
    pub summary: Summary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qbm: Option<QbmDiagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spin_boson: Option<HeomDiagnostics>,
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.into_iter().map(fmt))?;
    }
    w.flush()?;
    Ok(())
}

fn summarize(times: &[f64], s: &[f64], population: Option<&[f64]>) -> Result<Summary> {
    let curve = EntropyCurve::new(times.to_vec(), s.to_vec(), Default::default())?;
    let r: PageTimeReport = match population {
        Some(p) => page_time_with_population(&curve, p)?,
        None => page_time(&curve)?,
    };
    Ok(Summary {
        t_page: r.t_page,
        s_max: r.s_max,
        s_final: *s.last().unwrap_or(&0.0),
        page_time_unresolved: r.unresolved,
        half_population_time: r.crossing_time,
    })
}

/// Run `cfg` and write `<name>.csv` into `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let csv = out.join(format!("{}.csv", cfg.name));
    let bath = BathSpec::new(cfg.gamma, cfg.cutoff, cfg.temperature)?;
    match cfg.model {
        Model::Qbm => run_qbm(cfg, bath, &csv),
        Model::SpinBoson => run_spin_boson(cfg, bath, &csv),
    }
}

fn run_qbm(cfg: &ExperimentConfig, bath: BathSpec, csv: &Path) -> Result<Outcome> {
    let w0 = cfg.omega0.unwrap_or(1.0);
    let spec = OscillatorSpec::new(w0, bath)?;
    let local = oscillator_ground(w0)?;
    let state0 = match cfg.initial {
        Some(Initial::Ground) => local,
        _ => wave_packet(cfg.delta.context("missing delta")?)?,
    };
    let times = cfg.times();
    let traj = evolve_trajectory(&spec, &state0, &times)?;
    let s = traj
        .iter()
        .map(|e| gaussian_entropy(&e.state.cov, cfg.entropy_base))
        .collect::<pagecurve::Result<Vec<_>>>()?;
    let fid: Vec<f64> = traj
        .iter()
        .map(|e| gaussian_fidelity(&e.state, &local))
        .collect();
    write_csv(
        csv,
        &["t", "S", "sxx", "sxp", "spp", "fidelity_ground"],
        traj.iter().zip(&s).zip(&fid).map(|((e, &si), &f)| {
            let c = e.state.cov;
            vec![e.time, si, c.sxx, c.sxp, c.spp, f]
        }),
    )?;

    let max_err = traj
        .iter()
        .map(|e| e.quadrature_error / e.state.cov.sxx.abs().max(e.state.cov.spp.abs()).max(1.0))
        .fold(0.0, f64::max);
    let steady = if bath.gamma > 0.0 {
        Some(mean_force_entropy_qbm(&spec, cfg.entropy_base)?)
    } else {
        None
    };
    let summary = summarize(&times, &s, None)?;
    let converged = max_err.is_finite() && max_err <= QBM_QUADRATURE_TOL;
    Ok(Outcome {
        status: if converged {
            Status::Converged
        } else {
            Status::NotConverged
        },
        qbm: Some(QbmDiagnostics {
            max_quadrature_error: max_err,
            steady_entropy: steady,
            final_minus_steady: steady.map(|s| summary.s_final - s),
            min_uncertainty_det: traj
                .iter()
                .map(|e| e.state.cov.det())
                .fold(f64::INFINITY, f64::min),
        }),
        summary,
        spin_boson: None,
    })
}

fn run_spin_boson(cfg: &ExperimentConfig, bath: BathSpec, csv: &Path) -> Result<Outcome> {
    let spec = QubitSpec::new(cfg.epsilon.unwrap_or(1.0), bath)?;
    let defaults = HeomConfig::default();
    let heom = HeomConfig {
        n_k: cfg.n_k.unwrap_or(defaults.n_k),
        n_c: cfg.n_c.unwrap_or(defaults.n_c),
        terminator: cfg.terminator.unwrap_or(defaults.terminator),
        tolerances: Tolerances {
            rtol: cfg.rtol.unwrap_or(defaults.tolerances.rtol),
            atol: cfg.atol.unwrap_or(defaults.tolerances.atol),
        },
        ..defaults
    };
    let rho0 = match cfg.initial {
        Some(Initial::Ground) => ground_state(),
        _ => excited_state(),
    };
    let times = cfg.times();
    let traj = integrate(&spec, &heom, &rho0, &times)?;
    let s = traj.entropy(cfg.entropy_base)?;
    let p1 = traj.excited_population();
    let coh = traj.coherence();
    write_csv(
        csv,
        &["t", "S", "P1", "rho01_abs"],
        (0..times.len()).map(|i| vec![traj.times[i], s[i], p1[i], coh[i]]),
    )?;

    let convergence = if cfg.check_convergence.unwrap_or(true) {
        let thr = cfg
            .convergence_threshold
            .unwrap_or(pagecurve::heom::CONVERGENCE_THRESHOLD);
        Some(convergence_check(&spec, &heom, &rho0, &traj, thr)?)
    } else {
        None
    };
    let gibbs_entropy = if bath.temperature > 0.0 {
        Some(von_neumann_entropy(&gibbs_state(&spec)?, cfg.entropy_base)?)
    } else {
        None
    };
    let converged = convergence.as_ref().is_none_or(|r| r.converged);
    Ok(Outcome {
        status: if converged {
            Status::Converged
        } else {
            Status::NotConverged
        },
        summary: summarize(&times, &s, Some(&p1))?,
        qbm: None,
        spin_boson: Some(HeomDiagnostics {
            n_k: heom.n_k,
            n_c: heom.n_c,
            // N_k Matsubara terms plus the cutoff term
            hierarchy_size: hierarchy_size(heom.n_k + 1, heom.n_c)
                .map_or(u64::MAX, |c| c.min(u64::MAX as u128) as u64),
            tolerances: heom.tolerances,
            terminator: heom.terminator,
            integrator: traj.stats,
            gibbs_entropy,
            convergence,
        }),
    })
}
