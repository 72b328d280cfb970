//! Runs a configured T-sweep and persists its artifacts.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;
use turnpike_core::{
    assemble_form, control_envelope_constant, endpoint_energy, loglog_slope, solution_map_probe,
    solve_optimal, solve_steady_system, steady_cost, turnpike_report, ControlProblem,
    DeviationNorm, FormMatrices, Grid1D, SolverSettings, StateSystem, SteadyTriple, TimeGrid,
};

use crate::config::{ExperimentConfig, OutputFormat, SCHEMA_VERSION};
use crate::output::{
    horizon_dir, write_deviation_csv, write_json, write_sweep_csv, OutputError, SweepRow,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("steady problem failed: {0}")]
    Setup(#[source] turnpike_core::Error),
    #[error("horizon T = {horizon} failed: {source}")]
    Horizon {
        horizon: f64,
        #[source]
        source: turnpike_core::Error,
    },
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

impl RunError {
    /// Whether the failure came from the numerics rather than the file system.
    pub fn is_solver_failure(&self) -> bool {
        matches!(self, RunError::Setup(_) | RunError::Horizon { .. })
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides `output.directory`.
    pub out_dir: Option<PathBuf>,
    /// Worker threads; `0` lets the pool decide.
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeSummary {
    pub samples: usize,
    pub seed: u64,
    pub max_ratio: f64,
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HorizonSummary {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub steps: usize,
    pub iterations: usize,
    pub cost: f64,
    /// `(T/2) ‖u_d‖²`, the cost of the zero control.
    pub cost_bound: f64,
    pub grad_norm: f64,
    pub optimality_residual: f64,
    pub avg_err_state: f64,
    pub avg_err_control: f64,
    pub gamma_hat: f64,
    #[serde(rename = "C_hat")]
    pub c_hat: f64,
    pub r2: f64,
    pub envelope_pass: bool,
    /// Smallest constant bounding the control deviation by the fitted profile.
    pub control_constant: f64,
    /// `‖p(0)‖ + ‖u(T)‖`.
    pub endpoint_energy: f64,
    pub probe: Option<ProbeSummary>,
}

impl HorizonSummary {
    pub fn sweep_row(&self) -> SweepRow {
        SweepRow {
            horizon: self.horizon,
            avg_err_state: self.avg_err_state,
            avg_err_control: self.avg_err_control,
            gamma_hat: self.gamma_hat,
            c_hat: self.c_hat,
            r2: self.r2,
            envelope_pass: self.envelope_pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadySummary {
    /// `‖ū‖`, `‖p̄‖` in the deviation norm; the scales of the fitted quantity.
    pub state_norm: f64,
    pub adjoint_norm: f64,
    pub control_norm: f64,
    pub cost: f64,
    pub kkt_residual: f64,
}

/// Log-log slopes against `T`; absent with fewer than two horizons or
/// non-positive values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub avg_err_state_slope: Option<f64>,
    pub avg_err_control_slope: Option<f64>,
    pub endpoint_energy_slope: Option<f64>,
    /// `max γ̂ / min γ̂` over the sweep.
    pub gamma_spread: Option<f64>,
    /// `max / min` of the control constants over the sweep.
    pub control_constant_spread: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WallClock {
    pub total_seconds: f64,
    pub horizon_seconds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
    pub steady: SteadySummary,
    pub horizons: Vec<HorizonSummary>,
    pub sweep: SweepSummary,
    pub wall_clock: WallClock,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub report: Report,
}

struct Shared {
    config: ExperimentConfig,
    forms: Arc<FormMatrices>,
    target: nalgebra::DVector<f64>,
    steady: SteadyTriple,
    norm: DeviationNorm,
    settings: SolverSettings,
}

/// Solves every horizon of the sweep (concurrently on a pool of `jobs`
/// threads), writes `T_<T>/deviation.csv`, `sweep.csv` and `report.json`
/// under the output directory, and returns the report.
///
/// Results do not depend on the number of threads.
pub fn run_experiment(
    config: &ExperimentConfig,
    opts: &RunOptions,
) -> Result<RunSummary, RunError> {
    let started = Instant::now();
    let out_dir = opts
        .out_dir
        .clone()
        .unwrap_or_else(|| config.output.directory.clone());
    create_dir(&out_dir)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;

    let (shared, steady_summary) = pool.install(|| setup(config))?;
    let results: Vec<Result<(HorizonSummary, f64), RunError>> = pool.install(|| {
        config
            .sweep
            .horizons
            .par_iter()
            .map(|&t| run_horizon(&shared, t, &out_dir))
            .collect()
    });
    let mut horizons = Vec::with_capacity(results.len());
    let mut seconds = Vec::with_capacity(results.len());
    for r in results {
        let (summary, secs) = r?;
        horizons.push(summary);
        seconds.push(secs);
    }

    if config.writes(OutputFormat::Csv) {
        let rows: Vec<SweepRow> = horizons.iter().map(HorizonSummary::sweep_row).collect();
        write_sweep_csv(&out_dir.join("sweep.csv"), &rows)?;
    }
    let report = Report {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        warnings: config.warnings(),
        steady: steady_summary,
        sweep: sweep_summary(&horizons),
        horizons,
        wall_clock: WallClock {
            total_seconds: started.elapsed().as_secs_f64(),
            horizon_seconds: seconds,
        },
    };
    if config.writes(OutputFormat::Json) {
        write_json(&out_dir.join("report.json"), &report)?;
    }
    Ok(RunSummary { out_dir, report })
}

fn create_dir(path: &Path) -> Result<(), RunError> {
    std::fs::create_dir_all(path).map_err(|source| {
        OutputError::Io {
            path: path.to_path_buf(),
            source,
        }
        .into()
    })
}

fn setup(config: &ExperimentConfig) -> Result<(Shared, SteadySummary), RunError> {
    let spec = config.domain().map_err(RunError::Setup)?;
    let grid = Grid1D::new(&spec, config.discretization.n).map_err(RunError::Setup)?;
    let beta = config.beta_on(&grid).map_err(RunError::Setup)?;
    let forms = Arc::new(assemble_form(&grid, &spec, &beta).map_err(RunError::Setup)?);
    let target = grid.sample_interior(|x| config.problem.target.eval(x));
    let variant = config.variant();
    let system = StateSystem::new(variant, &forms).map_err(RunError::Setup)?;
    let steady = solve_steady_system(&system, &target).map_err(RunError::Setup)?;
    let norm = DeviationNorm::natural(variant);
    let compact = system.restrict(&steady.g_bar).map_err(RunError::Setup)?;
    let summary = SteadySummary {
        state_norm: norm.eval(&forms, &steady.u_bar).map_err(RunError::Setup)?,
        adjoint_norm: norm
            .eval(&forms, &steady.adj_bar)
            .map_err(RunError::Setup)?,
        control_norm: system.control_norm(&compact),
        cost: steady_cost(&system, &target, &compact).map_err(RunError::Setup)?,
        kkt_residual: steady.kkt_residual,
    };
    let settings = SolverSettings {
        cg_tol: config.control.cg_tol,
        max_iter: config.control.max_iter,
    };
    let shared = Shared {
        config: config.clone(),
        forms,
        target,
        steady,
        norm,
        settings,
    };
    Ok((shared, summary))
}

fn run_horizon(
    shared: &Shared,
    horizon: f64,
    out_dir: &Path,
) -> Result<(HorizonSummary, f64), RunError> {
    let started = Instant::now();
    let fail = |source| RunError::Horizon { horizon, source };
    let cfg = &shared.config;
    let forms = &shared.forms;
    let grid = TimeGrid::with_rate(
        horizon,
        cfg.discretization.steps_per_unit,
        cfg.discretization.theta,
    )
    .map_err(fail)?;
    let problem = ControlProblem::new(
        cfg.variant(),
        forms.clone(),
        shared.target.clone(),
        grid,
        shared.settings,
    )
    .map_err(fail)?;
    let sol = solve_optimal(&problem).map_err(fail)?;
    let rep = turnpike_report(forms, &sol.trajectory, &shared.steady, shared.norm).map_err(fail)?;
    let probe = if cfg.probe.samples > 0 {
        let p = solution_map_probe(
            cfg.variant(),
            forms.clone(),
            grid,
            cfg.probe.samples,
            cfg.probe.seed,
            shared.settings,
        )
        .map_err(fail)?;
        Some(ProbeSummary {
            samples: cfg.probe.samples,
            seed: cfg.probe.seed,
            max_ratio: p.max_ratio,
            ratios: p.ratios,
        })
    } else {
        None
    };
    if cfg.writes(OutputFormat::Csv) {
        let dir = horizon_dir(out_dir, horizon);
        create_dir(&dir)?;
        write_deviation_csv(&dir.join("deviation.csv"), &rep.curve)?;
    }
    let summary = HorizonSummary {
        horizon,
        steps: grid.steps(),
        iterations: sol.iterations,
        cost: sol.cost,
        cost_bound: 0.5 * horizon * forms.l2_interior(&shared.target).powi(2),
        grad_norm: sol.grad_norm,
        optimality_residual: sol.optimality_residual,
        avg_err_state: rep.avg_err_state,
        avg_err_control: rep.avg_err_control,
        gamma_hat: rep.fit.gamma,
        c_hat: rep.fit.c,
        r2: rep.fit.r2,
        envelope_pass: rep.envelope_pass,
        control_constant: control_envelope_constant(&rep.curve, &rep.fit, horizon),
        endpoint_energy: endpoint_energy(forms, &sol.trajectory, shared.norm).map_err(fail)?,
        probe,
    };
    Ok((summary, started.elapsed().as_secs_f64()))
}

fn spread(values: &[f64]) -> Option<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(0.0, f64::max);
    (values.len() >= 2 && lo > 0.0 && hi.is_finite()).then(|| hi / lo)
}

fn sweep_summary(h: &[HorizonSummary]) -> SweepSummary {
    let t: Vec<f64> = h.iter().map(|s| s.horizon).collect();
    let slope = |f: fn(&HorizonSummary) -> f64| {
        let y: Vec<f64> = h.iter().map(f).collect();
        loglog_slope(&t, &y).ok()
    };
    let gammas: Vec<f64> = h.iter().map(|s| s.gamma_hat).collect();
    let constants: Vec<f64> = h.iter().map(|s| s.control_constant).collect();
    SweepSummary {
        avg_err_state_slope: slope(|s| s.avg_err_state),
        avg_err_control_slope: slope(|s| s.avg_err_control),
        endpoint_energy_slope: slope(|s| s.endpoint_energy),
        gamma_spread: spread(&gammas),
        control_constant_spread: spread(&constants),
    }
}
