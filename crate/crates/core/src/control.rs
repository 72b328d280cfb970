//! Finite-horizon linear-quadratic exterior control.
//!
//! Discrete cost, for compact interval controls `g_0, …, g_{K-1}`:
//!
//! `J(g) = ½ Σ_{k=1}^{K} τ ‖u_k - u_d‖²_M + ½ Σ_{k=0}^{K-1} τ ‖g_k‖²_W + τ φ_Tᵀ F u_K`
//!
//! The last term is absent unless a terminal adjoint value `φ_T` is set (used
//! by the solution-map probe); it is the pairing for which `p_K = φ_T` is the
//! exact adjoint terminal value, and equals `⟨φ_T, u_K⟩_M` at `θ = 1`.
//! Gradients are taken in the inner product `Σ_k τ aᵀ W b`, in which the
//! gradient reads `g_k + W⁻¹ ℬᵀ p_k`.

use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{check_len, Error, Result};
use crate::evolution::{Stepper, TimeGrid, Trajectory};
use crate::nonlocal::FormMatrices;
use crate::system::{StateSystem, Variant};

/// Compact control time series: `K` vectors over the control nodes.
pub type ControlSeries = Vec<DVector<f64>>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub cg_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            cg_tol: 1e-10,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ControlProblem {
    forms: Arc<FormMatrices>,
    stepper: Stepper,
    u_d: DVector<f64>,
    u0: DVector<f64>,
    terminal: DVector<f64>,
    with_load: bool,
    settings: SolverSettings,
}

impl ControlProblem {
    pub fn new(
        variant: Variant,
        forms: Arc<FormMatrices>,
        u_d: DVector<f64>,
        grid: TimeGrid,
        settings: SolverSettings,
    ) -> Result<Self> {
        check_len("target", forms.n_interior(), u_d.len())?;
        if u_d.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("target must be finite".into()));
        }
        if settings.cg_tol.is_nan() || settings.cg_tol <= 0.0 {
            return Err(Error::Domain(format!(
                "cg_tol must be positive, got {}",
                settings.cg_tol
            )));
        }
        let system = StateSystem::new(variant, &forms)?;
        let stepper = Stepper::new(system, grid)?;
        let n = forms.n_interior();
        Ok(Self {
            forms,
            stepper,
            u_d,
            u0: DVector::zeros(n),
            terminal: DVector::zeros(n),
            with_load: true,
            settings,
        })
    }

    /// Nonzero initial state (the optimal-control path proper starts at 0).
    pub fn with_initial_state(mut self, u0: DVector<f64>) -> Result<Self> {
        check_len("initial state", self.n_state(), u0.len())?;
        self.u0 = u0;
        Ok(self)
    }

    /// Terminal adjoint value `p_K`.
    pub fn with_terminal_adjoint(mut self, phi: DVector<f64>) -> Result<Self> {
        check_len("terminal adjoint", self.n_state(), phi.len())?;
        self.terminal = phi;
        Ok(self)
    }

    /// Drops the far-field load of a constant tail (homogeneous dynamics).
    pub fn without_load(mut self) -> Self {
        self.with_load = false;
        self
    }

    pub fn variant(&self) -> Variant {
        self.stepper.system().variant()
    }

    pub fn forms(&self) -> &FormMatrices {
        &self.forms
    }

    pub fn system(&self) -> &StateSystem {
        self.stepper.system()
    }

    pub fn stepper(&self) -> &Stepper {
        &self.stepper
    }

    pub fn time_grid(&self) -> &TimeGrid {
        self.stepper.grid()
    }

    pub fn target(&self) -> &DVector<f64> {
        &self.u_d
    }

    pub fn initial_state(&self) -> &DVector<f64> {
        &self.u0
    }

    pub fn terminal_adjoint(&self) -> &DVector<f64> {
        &self.terminal
    }

    pub fn includes_load(&self) -> bool {
        self.with_load
    }

    pub fn settings(&self) -> SolverSettings {
        self.settings
    }

    pub fn n_state(&self) -> usize {
        self.system().n_state()
    }

    pub fn n_control(&self) -> usize {
        self.system().n_control()
    }

    pub fn zero_control(&self) -> ControlSeries {
        vec![DVector::zeros(self.n_control()); self.time_grid().steps()]
    }

    fn tau(&self) -> f64 {
        self.time_grid().tau()
    }

    fn states(&self, g: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        if self.with_load {
            self.stepper.forward(g, &self.u0)
        } else {
            self.stepper.forward_linear(g, &self.u0)
        }
    }

    fn adjoints(&self, states: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        let sources: Vec<DVector<f64>> = states[1..].iter().map(|u| u - &self.u_d).collect();
        self.stepper.backward(&sources, &self.terminal)
    }

    /// `Σ_k τ aᵀ W b`.
    pub fn inner(&self, a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
        let sys = self.system();
        self.tau()
            * a.iter()
                .zip(b)
                .map(|(x, y)| sys.control_dot(x, y))
                .sum::<f64>()
    }

    pub fn norm(&self, a: &[DVector<f64>]) -> f64 {
        self.inner(a, a).max(0.0).sqrt()
    }

    fn check_controls(&self, g: &[DVector<f64>]) -> Result<()> {
        check_len("control time levels", self.time_grid().steps(), g.len())?;
        for gk in g {
            check_len("control vector", self.n_control(), gk.len())?;
        }
        Ok(())
    }

    fn gradient_from(&self, g: &[DVector<f64>], adjoint: &[DVector<f64>]) -> ControlSeries {
        g.iter()
            .zip(adjoint)
            .map(|(gk, pk)| gk + self.system().trace(pk))
            .collect()
    }

    /// Reduced Hessian applied to `d` (the gradient of the linear part).
    fn hessian_apply(&self, d: &[DVector<f64>]) -> Result<ControlSeries> {
        let zero = DVector::zeros(self.n_state());
        let states = self.stepper.forward_linear(d, &zero)?;
        let adjoint = self.stepper.backward(&states[1..], &zero)?;
        Ok(self.gradient_from(d, &adjoint))
    }

    fn cost_from(&self, g: &[DVector<f64>], states: &[DVector<f64>]) -> f64 {
        let tau = self.tau();
        let mass = self.system().mass();
        let tracking: f64 = states[1..]
            .iter()
            .map(|u| (u - &self.u_d).norm_squared())
            .sum::<f64>()
            * mass;
        let control: f64 = g
            .iter()
            .map(|gk| self.system().control_norm(gk).powi(2))
            .sum();
        let terminal = tau
            * self
                .terminal
                .dot(&self.stepper.apply_explicit(states.last().unwrap()));
        0.5 * tau * tracking + 0.5 * tau * control + terminal
    }

    /// Max over `k` of `‖grad_k‖_{L²(collar)}` with unit weight.
    fn per_step_residual(&self, grad: &[DVector<f64>]) -> f64 {
        let h = self.forms.h();
        grad.iter()
            .map(|r| (h * r.norm_squared()).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Optimal control run: trajectory with adjoint `p_0, …, p_K`, cost, and the
/// CG statistics at termination.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalSolution {
    pub trajectory: Trajectory,
    pub cost: f64,
    pub grad_norm: f64,
    pub control_norm: f64,
    pub iterations: usize,
    pub optimality_residual: f64,
}

/// Forward solve plus rectangle-rule quadrature of the cost.
pub fn evaluate_cost(problem: &ControlProblem, g: &[DVector<f64>]) -> Result<f64> {
    problem.check_controls(g)?;
    let states = problem.states(g)?;
    Ok(problem.cost_from(g, &states))
}

/// Exact gradient of the discrete cost: `g_k + W⁻¹ ℬᵀ p_k`, i.e. `g_k` plus the
/// Robin extension of `ψ_k` (Robin) or minus `𝒩_{s,h} λ_k` (Dirichlet).
pub fn reduced_gradient(problem: &ControlProblem, g: &[DVector<f64>]) -> Result<ControlSeries> {
    problem.check_controls(g)?;
    let states = problem.states(g)?;
    let adjoint = problem.adjoints(&states)?;
    Ok(problem.gradient_from(g, &adjoint))
}

/// Conjugate gradients on the reduced cost, starting from zero.
///
/// Stops when `‖∇J‖ ≤ cg_tol (1 + ‖g‖)` and every step satisfies
/// `‖g_k + trace_k‖_{L²(collar)} ≤ cg_tol`, both checked on a freshly computed
/// gradient.
pub fn solve_optimal(problem: &ControlProblem) -> Result<OptimalSolution> {
    let tol = problem.settings.cg_tol;
    let converged = |grad: &[DVector<f64>], g: &[DVector<f64>]| {
        problem.norm(grad) <= tol * (1.0 + problem.norm(g))
            && problem.per_step_residual(grad) <= tol
    };
    let axpy = |a: f64, x: &[DVector<f64>], y: &mut [DVector<f64>]| {
        for (yk, xk) in y.iter_mut().zip(x) {
            yk.axpy(a, xk, 1.0);
        }
    };

    let mut g = problem.zero_control();
    let mut grad = reduced_gradient(problem, &g)?;
    let mut r: ControlSeries = grad.iter().map(|x| -x).collect();
    let mut d = r.clone();
    let mut rr = problem.inner(&r, &r);
    let mut iterations = 0;
    loop {
        let neg_r: ControlSeries = r.iter().map(|x| -x).collect();
        if converged(&neg_r, &g) {
            grad = reduced_gradient(problem, &g)?;
            if converged(&grad, &g) {
                break;
            }
            // Recursive residual drifted: restart from the true gradient.
            r = grad.iter().map(|x| -x).collect();
            d = r.clone();
            rr = problem.inner(&r, &r);
        }
        if iterations >= problem.settings.max_iter {
            let grad = reduced_gradient(problem, &g)?;
            return Err(Error::NotConverged {
                iterations,
                grad_norm: problem.norm(&grad),
                last_iterate: g.iter().flat_map(|x| x.iter().copied()).collect(),
            });
        }
        let hd = problem.hessian_apply(&d)?;
        let dhd = problem.inner(&d, &hd);
        if dhd.is_nan() || dhd <= 0.0 {
            return Err(Error::LinearSolve(format!(
                "reduced Hessian lost positivity (dᵀHd = {dhd:e})"
            )));
        }
        let alpha = rr / dhd;
        axpy(alpha, &d, &mut g);
        axpy(-alpha, &hd, &mut r);
        let rr_new = problem.inner(&r, &r);
        let beta = rr_new / rr;
        for (dk, rk) in d.iter_mut().zip(&r) {
            *dk *= beta;
            *dk += rk;
        }
        rr = rr_new;
        iterations += 1;
    }

    let states = problem.states(&g)?;
    let adjoint = problem.adjoints(&states)?;
    let cost = problem.cost_from(&g, &states);
    let control = g
        .iter()
        .map(|gk| problem.system().expand(gk))
        .collect::<Result<Vec<_>>>()?;
    Ok(OptimalSolution {
        trajectory: Trajectory {
            variant: problem.variant(),
            times: problem.time_grid().times(),
            state: states,
            control,
            adjoint,
        },
        cost,
        grad_norm: problem.norm(&grad),
        control_norm: problem.norm(&g),
        iterations,
        optimality_residual: problem.per_step_residual(&grad),
    })
}

/// `max_k ‖g_k + trace_k‖_{L²(collar)}` for the controls stored in `sol`,
/// recomputed from scratch.
pub fn optimality_residual(problem: &ControlProblem, sol: &OptimalSolution) -> Result<f64> {
    let g = sol
        .trajectory
        .control
        .iter()
        .map(|c| problem.system().restrict(c))
        .collect::<Result<Vec<_>>>()?;
    let grad = reduced_gradient(problem, &g)?;
    Ok(problem.per_step_residual(&grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{BetaField, DomainSpec, Grid1D, TailMode};
    use crate::nonlocal::assemble_form;

    fn problem(variant: Variant, amplitude: f64) -> ControlProblem {
        let spec = DomainSpec::new(-1.0, 1.0, 0.5, 0.5, TailMode::Zero).unwrap();
        let grid = Grid1D::new(&spec, 16).unwrap();
        let beta = BetaField::constant(&grid, 1.0).unwrap();
        let forms = Arc::new(assemble_form(&grid, &spec, &beta).unwrap());
        let ud = grid.sample_interior(|x| amplitude * (-(x * x) / 0.2).exp());
        let tg = TimeGrid::new(1.0, 8, 1.0).unwrap();
        ControlProblem::new(variant, forms, ud, tg, SolverSettings::default()).unwrap()
    }

    #[test]
    fn zero_target_is_trivial() {
        for v in [Variant::Robin, Variant::Dirichlet] {
            let p = problem(v, 0.0);
            let sol = solve_optimal(&p).unwrap();
            assert_eq!(sol.cost, 0.0);
            assert_eq!(sol.iterations, 0);
            assert!(sol.trajectory.control.iter().all(|g| g.amax() == 0.0));
        }
    }

    #[test]
    fn zero_control_cost() {
        let p = problem(Variant::Robin, 1.0);
        let j = evaluate_cost(&p, &p.zero_control()).unwrap();
        let expected = 0.5 * 1.0 * p.forms().l2_interior(p.target()).powi(2);
        assert!((j - expected).abs() < 1e-14 * expected);
    }

    #[test]
    fn optimum_is_stationary_and_cheaper() {
        for v in [Variant::Robin, Variant::Dirichlet] {
            let p = problem(v, 1.0);
            let sol = solve_optimal(&p).unwrap();
            assert!(sol.grad_norm <= 1e-10 * (1.0 + sol.control_norm));
            assert!(optimality_residual(&p, &sol).unwrap() <= 1e-10);
            assert!(sol.cost <= evaluate_cost(&p, &p.zero_control()).unwrap());
            assert_eq!(sol.trajectory.adjoint.last().unwrap().amax(), 0.0);
        }
    }

    #[test]
    fn iteration_cap_reports_last_iterate() {
        let mut p = problem(Variant::Dirichlet, 1.0);
        p.settings.max_iter = 1;
        match solve_optimal(&p) {
            Err(Error::NotConverged {
                iterations,
                last_iterate,
                ..
            }) => {
                assert_eq!(iterations, 1);
                assert_eq!(last_iterate.len(), p.n_control() * 8);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }
}
