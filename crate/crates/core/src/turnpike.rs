//! Diagnostics for the averaged and exponential turnpike properties.

use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::control::{solve_optimal, ControlProblem, SolverSettings};
use crate::error::{check_len, Error, Result};
use crate::evolution::{TimeGrid, Trajectory};
use crate::nonlocal::{dual_norm, FormMatrices};
use crate::steady::SteadyTriple;
use crate::system::Variant;

/// Deviations below this value are treated as round-off and left out of fits.
pub const DEVIATION_FLOOR: f64 = 1e-13;

/// Slack applied to the fitted envelope when checking domination.
pub const ENVELOPE_SLACK: f64 = 1.05;

/// Spatial norm for state and adjoint deviations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviationNorm {
    L2,
    /// Discrete `H^{-s}(Ω)` norm.
    Dual,
}

impl DeviationNorm {
    /// `L2` for Robin, `Dual` for Dirichlet.
    pub fn natural(variant: Variant) -> Self {
        match variant {
            Variant::Robin => DeviationNorm::L2,
            Variant::Dirichlet => DeviationNorm::Dual,
        }
    }

    pub fn eval(&self, forms: &FormMatrices, v: &DVector<f64>) -> Result<f64> {
        match self {
            DeviationNorm::L2 => Ok(forms.l2_interior(v)),
            DeviationNorm::Dual => dual_norm(forms, v),
        }
    }
}

/// Per-time deviations from the steady optimum at `t_0, …, t_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationCurve {
    pub times: Vec<f64>,
    pub state: Vec<f64>,
    pub adjoint: Vec<f64>,
    pub control: Vec<f64>,
}

impl DeviationCurve {
    /// `e_state + e_adjoint`.
    pub fn combined(&self) -> Vec<f64> {
        self.state
            .iter()
            .zip(&self.adjoint)
            .map(|(a, b)| a + b)
            .collect()
    }

    /// `max(e_state / state_scale, e_adjoint / adjoint_scale)`; a zero scale
    /// leaves its component unscaled.
    pub fn relative(&self, state_scale: f64, adjoint_scale: f64) -> Vec<f64> {
        let div = |v: f64, s: f64| if s > 0.0 { v / s } else { v };
        self.state
            .iter()
            .zip(&self.adjoint)
            .map(|(a, b)| div(*a, state_scale).max(div(*b, adjoint_scale)))
            .collect()
    }
}

/// Fitted envelope `Ĉ (e^{-γ̂ t} + e^{-γ̂ (T - t)})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    /// `f64::INFINITY` when the curve vanishes identically.
    pub gamma: f64,
    pub c: f64,
    pub r2: f64,
}

impl RateFit {
    pub fn envelope(&self, t: f64, horizon: f64) -> f64 {
        if self.gamma.is_infinite() {
            return 0.0;
        }
        self.c * ((-self.gamma * t).exp() + (-self.gamma * (horizon - t)).exp())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurnpikeReport {
    pub horizon: f64,
    pub curve: DeviationCurve,
    /// The fitted quantity: [`DeviationCurve::relative`] with scales `‖ū‖`
    /// and `‖p̄‖`. On an optimal trajectory these equal `e_state(0)` and
    /// `e_adjoint(T)`.
    pub relative: Vec<f64>,
    pub avg_err_state: f64,
    pub avg_err_control: f64,
    pub fit: RateFit,
    pub envelope_pass: bool,
}

/// Time averages of state (trapezoid rule) and control (exact for interval
/// controls), the latter on the full collar.
pub fn time_average(traj: &Trajectory) -> Result<(DVector<f64>, DVector<f64>)> {
    if traj.state.len() < 2 || traj.control.is_empty() {
        return Err(Error::Domain(
            "time average needs a nonempty trajectory".into(),
        ));
    }
    check_len("control time levels", traj.steps(), traj.control.len())?;
    let horizon = traj.horizon();
    let mut u = DVector::zeros(traj.state[0].len());
    for k in 0..traj.steps() {
        let dt = traj.times[k + 1] - traj.times[k];
        u += (&traj.state[k] + &traj.state[k + 1]) * (0.5 * dt);
    }
    let mut g = DVector::zeros(traj.control[0].len());
    for k in 0..traj.steps() {
        g += &traj.control[k] * (traj.times[k + 1] - traj.times[k]);
    }
    Ok((u / horizon, g / horizon))
}

fn control_norm(forms: &FormMatrices, variant: Variant, g: &DVector<f64>) -> f64 {
    match variant {
        Variant::Robin => forms.l2_mu(g),
        Variant::Dirichlet => forms.l2_collar(g),
    }
}

/// Distances of the time averages to the steady optimum: state in `norm`,
/// control in the μ-weighted (Robin) or plain (Dirichlet) `L²` norm.
pub fn averaged_errors(
    forms: &FormMatrices,
    traj: &Trajectory,
    steady: &SteadyTriple,
    norm: DeviationNorm,
) -> Result<(f64, f64)> {
    let (u, g) = time_average(traj)?;
    Ok((
        norm.eval(forms, &(u - &steady.u_bar))?,
        control_norm(forms, traj.variant, &(g - &steady.g_bar)),
    ))
}

/// `e_state(t_k) = ‖u_k - ū‖`, `e_adjoint(t_k) = ‖p_k - p̄‖` in `norm`, and
/// `e_control(t_k)` for the control attributed to `t_k`.
pub fn deviation_curve(
    forms: &FormMatrices,
    traj: &Trajectory,
    steady: &SteadyTriple,
    norm: DeviationNorm,
) -> Result<DeviationCurve> {
    if traj.variant != steady.variant {
        return Err(Error::Domain(format!(
            "trajectory is {} but steady triple is {}",
            traj.variant, steady.variant
        )));
    }
    check_len("adjoint time levels", traj.state.len(), traj.adjoint.len())?;
    check_len("steady state", forms.n_interior(), steady.u_bar.len())?;
    let mut state = Vec::with_capacity(traj.state.len());
    let mut adjoint = Vec::with_capacity(traj.state.len());
    let mut control = Vec::with_capacity(traj.state.len());
    for k in 0..traj.state.len() {
        check_len("state vector", steady.u_bar.len(), traj.state[k].len())?;
        state.push(norm.eval(forms, &(&traj.state[k] - &steady.u_bar))?);
        adjoint.push(norm.eval(forms, &(&traj.adjoint[k] - &steady.adj_bar))?);
        control.push(control_norm(
            forms,
            traj.variant,
            &(traj.control_at(k) - &steady.g_bar),
        ));
    }
    Ok(DeviationCurve {
        times: traj.times.clone(),
        state,
        adjoint,
        control,
    })
}

fn log_profile(gamma: f64, t: f64, horizon: f64) -> f64 {
    // ln(e^{-γt} + e^{-γ(T-t)}) without underflow.
    let (a, b) = (-gamma * t, -gamma * (horizon - t));
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

struct LogFit {
    log_c: f64,
    ssr: f64,
}

fn fit_at(gamma: f64, pts: &[(f64, f64)], horizon: f64) -> LogFit {
    let n = pts.len() as f64;
    let log_c = pts
        .iter()
        .map(|&(t, y)| y - log_profile(gamma, t, horizon))
        .sum::<f64>()
        / n;
    let ssr = pts
        .iter()
        .map(|&(t, y)| {
            let r = y - log_c - log_profile(gamma, t, horizon);
            r * r
        })
        .sum();
    LogFit { log_c, ssr }
}

/// Least-squares fit of `ln e(t) ≈ ln Ĉ + ln(e^{-γt} + e^{-γ(T-t)})`: a scan
/// over `γ ≥ 0` refined by golden-section search, with `Ĉ` in closed form.
/// Values below [`DEVIATION_FLOOR`] are left out; an all-zero curve yields
/// `γ̂ = ∞`, `Ĉ = 0`, `R² = 1`.
pub fn fit_turnpike_rate(times: &[f64], e: &[f64], horizon: f64) -> Result<RateFit> {
    check_len("deviation samples", times.len(), e.len())?;
    if e.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Domain(
            "deviations must be finite and non-negative".into(),
        ));
    }
    let pts = log_points(times, e);
    if pts.is_empty() {
        return Ok(RateFit {
            gamma: f64::INFINITY,
            c: 0.0,
            r2: 1.0,
        });
    }
    let objective = |g: f64| fit_at(g, &pts, horizon).ssr;

    // Scan γ ∈ {0} ∪ [1e-4, 1e3] / T on a log grid, then refine.
    let mut grid = vec![0.0];
    let steps = 280;
    for i in 0..=steps {
        grid.push(1e-4 * 10f64.powf(7.0 * i as f64 / steps as f64) / horizon.max(1e-300) * 10.0);
    }
    let (best, _) = grid
        .iter()
        .enumerate()
        .map(|(i, &g)| (i, objective(g)))
        .fold(
            (0, f64::INFINITY),
            |acc, x| if x.1 < acc.1 { x } else { acc },
        );
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let gamma = golden_section(objective, lo, hi);
    let gamma = [gamma, grid[best]]
        .into_iter()
        .min_by(|a, b| objective(*a).total_cmp(&objective(*b)))
        .unwrap_or(gamma);

    Ok(rate_fit(gamma, &pts, horizon))
}

/// Log-space fit at a fixed `γ`: `Ĉ` in closed form and the resulting `R²`.
pub fn r2_at_rate(times: &[f64], e: &[f64], horizon: f64, gamma: f64) -> Result<RateFit> {
    check_len("deviation samples", times.len(), e.len())?;
    let pts = log_points(times, e);
    if pts.is_empty() {
        return Ok(RateFit {
            gamma,
            c: 0.0,
            r2: 1.0,
        });
    }
    Ok(rate_fit(gamma, &pts, horizon))
}

fn log_points(times: &[f64], e: &[f64]) -> Vec<(f64, f64)> {
    times
        .iter()
        .zip(e)
        .filter(|(_, v)| **v >= DEVIATION_FLOOR)
        .map(|(t, v)| (*t, v.ln()))
        .collect()
}

fn rate_fit(gamma: f64, pts: &[(f64, f64)], horizon: f64) -> RateFit {
    let fit = fit_at(gamma, pts, horizon);
    let mean = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let sst: f64 = pts.iter().map(|p| (p.1 - mean).powi(2)).sum();
    let r2 = if sst <= 1e-300 {
        1.0
    } else {
        (1.0 - fit.ssr / sst).clamp(0.0, 1.0)
    };
    RateFit {
        gamma,
        c: fit.log_c.exp(),
        r2,
    }
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-14 * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// `e(t_k) ≤ slack · Ĉ (e^{-γ̂ t_k} + e^{-γ̂ (T - t_k)})` at every sample above
/// the floor.
pub fn envelope_dominates(
    times: &[f64],
    e: &[f64],
    horizon: f64,
    fit: &RateFit,
    slack: f64,
) -> bool {
    if fit.gamma.is_infinite() {
        return e.iter().all(|v| *v < DEVIATION_FLOOR);
    }
    times
        .iter()
        .zip(e)
        .all(|(&t, &v)| v < DEVIATION_FLOOR || v <= slack * fit.envelope(t, horizon))
}

/// Full report for one horizon: curve, averaged errors, and a rate fit of the
/// state and adjoint deviations measured relative to `‖ū‖` and `‖p̄‖`.
pub fn turnpike_report(
    forms: &FormMatrices,
    traj: &Trajectory,
    steady: &SteadyTriple,
    norm: DeviationNorm,
) -> Result<TurnpikeReport> {
    let curve = deviation_curve(forms, traj, steady, norm)?;
    let (avg_err_state, avg_err_control) = averaged_errors(forms, traj, steady, norm)?;
    let horizon = traj.horizon();
    let relative = curve.relative(
        norm.eval(forms, &steady.u_bar)?,
        norm.eval(forms, &steady.adj_bar)?,
    );
    let fit = fit_turnpike_rate(&curve.times, &relative, horizon)?;
    let envelope_pass = envelope_dominates(&curve.times, &relative, horizon, &fit, ENVELOPE_SLACK);
    Ok(TurnpikeReport {
        horizon,
        curve,
        relative,
        avg_err_state,
        avg_err_control,
        fit,
        envelope_pass,
    })
}

/// Smallest `C` with `e_control(t_k) ≤ C (e^{-γ̂ t_k} + e^{-γ̂ (T - t_k)})` at
/// every sample, for the rate of `fit`. Zero when the fit is degenerate.
pub fn control_envelope_constant(curve: &DeviationCurve, fit: &RateFit, horizon: f64) -> f64 {
    if fit.gamma.is_infinite() {
        return 0.0;
    }
    curve
        .times
        .iter()
        .zip(&curve.control)
        .map(|(&t, &e)| e / RateFit { c: 1.0, ..*fit }.envelope(t, horizon))
        .fold(0.0, f64::max)
}

/// `f(t) = (e^{-γ(T-t)} - e^{-γt}) / (e^{-γt} + e^{-γ(T-t)})`.
pub fn scaling_function(t: f64, horizon: f64, gamma: f64) -> f64 {
    // Equal to tanh(γ (t - T/2)).
    (gamma * (t - 0.5 * horizon)).tanh()
}

/// `L²`-in-time norms (trapezoid rule) of the scaled deviations
/// `w_k / (e^{-γt_k} + e^{-γ(T-t_k)})` for state and adjoint, summed.
pub fn scaled_deviation_check(
    forms: &FormMatrices,
    traj: &Trajectory,
    steady: &SteadyTriple,
    gamma: f64,
    norm: DeviationNorm,
) -> Result<f64> {
    if gamma.is_nan() || gamma < 0.0 {
        return Err(Error::Domain(format!(
            "γ must be non-negative, got {gamma}"
        )));
    }
    let curve = deviation_curve(forms, traj, steady, norm)?;
    let horizon = traj.horizon();
    let weights: Vec<f64> = curve
        .times
        .iter()
        .map(|&t| log_profile(gamma, t, horizon).exp())
        .collect();
    let scaled = |e: &[f64]| -> Vec<f64> { e.iter().zip(&weights).map(|(v, w)| v / w).collect() };
    Ok(l2_in_time(&curve.times, &scaled(&curve.state))
        + l2_in_time(&curve.times, &scaled(&curve.adjoint)))
}

/// Trapezoid-rule `L²(0, T)` norm of sampled values.
pub fn l2_in_time(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] * v[0] + v[1] * v[1]))
        .sum::<f64>()
        .sqrt()
}

/// `‖p(0)‖ + ‖u(T)‖` in `norm`, the quantity growing at most like `√T`.
pub fn endpoint_energy(
    forms: &FormMatrices,
    traj: &Trajectory,
    norm: DeviationNorm,
) -> Result<f64> {
    let p0 = traj
        .adjoint
        .first()
        .ok_or_else(|| Error::Domain("trajectory carries no adjoint".into()))?;
    let u_t = traj
        .state
        .last()
        .ok_or_else(|| Error::Domain("empty trajectory".into()))?;
    Ok(norm.eval(forms, p0)? + norm.eval(forms, u_t)?)
}

/// Result of [`solution_map_probe`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub max_ratio: f64,
    /// Per-sample ratios; `0` for skipped zero data.
    pub ratios: Vec<f64>,
}

/// Samples random data `(w_0, φ_T)`, solves the homogeneous optimality system
/// (`u_d = 0`, initial state `w_0`, terminal adjoint `φ_T`) and records
/// `‖(u, p)‖_{L²(0,T)} / ‖(w_0, φ_T)‖` with spatial norms given by the
/// variant's natural deviation norm. Sample `i` draws from ChaCha stream `i`
/// of `seed`, so results do not depend on scheduling.
pub fn solution_map_probe(
    variant: Variant,
    forms: Arc<FormMatrices>,
    grid: TimeGrid,
    samples: usize,
    seed: u64,
    settings: SolverSettings,
) -> Result<ProbeResult> {
    if samples == 0 {
        return Err(Error::Domain("probe needs at least one sample".into()));
    }
    let n = forms.n_interior();
    let norm = DeviationNorm::natural(variant);
    let ratios = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let w0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let phi = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            probe_ratio(variant, &forms, grid, settings, w0, phi, norm)
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(ProbeResult { max_ratio, ratios })
}

/// Ratio for one data pair; zero data contributes `0`.
pub fn probe_ratio(
    variant: Variant,
    forms: &Arc<FormMatrices>,
    grid: TimeGrid,
    settings: SolverSettings,
    w0: DVector<f64>,
    phi: DVector<f64>,
    norm: DeviationNorm,
) -> Result<f64> {
    let data = (norm.eval(forms, &w0)?.powi(2) + norm.eval(forms, &phi)?.powi(2)).sqrt();
    if data == 0.0 {
        return Ok(0.0);
    }
    let problem = ControlProblem::new(
        variant,
        forms.clone(),
        DVector::zeros(forms.n_interior()),
        grid,
        settings,
    )?
    .without_load()
    .with_initial_state(w0)?
    .with_terminal_adjoint(phi)?;
    let sol = solve_optimal(&problem)?;
    let traj = &sol.trajectory;
    let u: Vec<f64> = traj
        .state
        .iter()
        .map(|v| norm.eval(forms, v))
        .collect::<Result<_>>()?;
    let p: Vec<f64> = traj
        .adjoint
        .iter()
        .map(|v| norm.eval(forms, v))
        .collect::<Result<_>>()?;
    let sol_norm =
        (l2_in_time(&traj.times, &u).powi(2) + l2_in_time(&traj.times, &p).powi(2)).sqrt();
    Ok(sol_norm / data)
}

/// Implicit-Euler approximation of `h(t) = ∫_0^t η(σ) e^{-k(t-σ)} dσ`:
/// `h_0 = 0`, `(1 + τk) h_{j+1} = h_j + τ η_{j+1}`.
pub fn convolution_response(eta: &[f64], decay: f64, tau: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(eta.len());
    let mut cur = 0.0;
    h.push(cur);
    for &e in &eta[1..] {
        cur = (cur + tau * e) / (1.0 + tau * decay);
        h.push(cur);
    }
    h
}

/// Rectangle-rule `L^p(0, T)` norm of samples at spacing `τ` (skipping the
/// first sample); `p = ∞` gives the max.
pub fn lp_norm(values: &[f64], tau: f64, p: f64) -> f64 {
    let tail = &values[values.len().min(1)..];
    if p.is_infinite() {
        tail.iter().fold(0.0, |m, v| m.max(v.abs()))
    } else {
        (tau * tail.iter().map(|v| v.abs().powf(p)).sum::<f64>()).powf(1.0 / p)
    }
}

/// Fitted slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    check_len("slope samples", x.len(), y.len())?;
    if x.len() < 2 || x.iter().chain(y).any(|v| v.is_nan() || *v <= 0.0) {
        return Err(Error::Domain(
            "log-log slope needs at least two positive samples".into(),
        ));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    Ok(sxy / sxx)
}
