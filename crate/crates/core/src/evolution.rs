//! θ-scheme time stepping of the fractional heat equation with Robin or
//! Dirichlet exterior data, and the matching backward adjoint recursion.
//!
//! Controls are constant on each interval `(t_k, t_{k+1}]`. One forward step
//! reads `E u_{k+1} = F u_k + ℬ g_k + ℓ` with `E = M/τ + θ𝒜` and
//! `F = M/τ - (1-θ)𝒜`. The backward recursion `E p_k = F p_{k+1} + r_k` is the
//! exact transpose of the forward one, so the adjoint of the discrete cost is
//! obtained without any consistency error in time.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_len, Error, Result};
use crate::nonlocal::FormMatrices;
use crate::system::{StateSystem, Variant};

/// Uniform time grid on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
    theta: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize, theta: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Domain(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if steps < 2 {
            return Err(Error::Domain(format!(
                "need at least two time steps, got {steps}"
            )));
        }
        if !(0.5..=1.0).contains(&theta) {
            return Err(Error::Domain(format!(
                "θ must lie in [1/2, 1], got {theta}"
            )));
        }
        Ok(Self {
            horizon,
            steps,
            theta,
        })
    }

    /// Grid with `round(T · steps_per_unit)` steps (at least two).
    pub fn with_rate(horizon: f64, steps_per_unit: f64, theta: f64) -> Result<Self> {
        let steps = (horizon * steps_per_unit).round().max(2.0) as usize;
        Self::new(horizon, steps, theta)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn tau(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.tau()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }
}

/// Discrete state, control and adjoint on a time grid.
///
/// `state` and `adjoint` hold `K + 1` interior vectors at `t_0, …, t_K`;
/// `control` holds `K` full collar vectors, `control[k]` acting on
/// `(t_k, t_{k+1}]`. `adjoint` is empty for plain forward solves.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub variant: Variant,
    pub times: Vec<f64>,
    pub state: Vec<DVector<f64>>,
    pub control: Vec<DVector<f64>>,
    pub adjoint: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn steps(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    /// Control value attributed to time level `k`: the interval ending at
    /// `t_k`, or the first interval for `k = 0`.
    pub fn control_at(&self, k: usize) -> &DVector<f64> {
        &self.control[k.saturating_sub(1).min(self.control.len() - 1)]
    }
}

/// Factorized θ-scheme for one state system and time grid. Immutable and
/// shareable across threads.
#[derive(Debug, Clone)]
pub struct Stepper {
    system: StateSystem,
    grid: TimeGrid,
    implicit: Cholesky<f64, Dyn>,
    explicit: DMatrix<f64>,
}

impl Stepper {
    pub fn new(system: StateSystem, grid: TimeGrid) -> Result<Self> {
        let n = system.n_state();
        let tau = grid.tau();
        let theta = grid.theta();
        let m_tau = DMatrix::from_diagonal_element(n, n, system.mass() / tau);
        let e = &m_tau + system.operator() * theta;
        let f = &m_tau - system.operator() * (1.0 - theta);
        let implicit = Cholesky::new(e).ok_or_else(|| {
            Error::LinearSolve(format!(
                "{} step matrix is not positive definite",
                system.variant()
            ))
        })?;
        Ok(Self {
            system,
            grid,
            implicit,
            explicit: f,
        })
    }

    pub fn system(&self) -> &StateSystem {
        &self.system
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// `F y`.
    pub fn apply_explicit(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.explicit * y
    }

    /// Solves `E x = F y + rhs`.
    fn step(&self, y: &DVector<f64>, rhs: &DVector<f64>) -> DVector<f64> {
        let mut b = &self.explicit * y;
        b += rhs;
        self.implicit.solve(&b)
    }

    /// Forward sweep from `u0` for compact interval controls. Returns the
    /// `K + 1` states.
    pub fn forward(
        &self,
        controls: &[DVector<f64>],
        u0: &DVector<f64>,
    ) -> Result<Vec<DVector<f64>>> {
        self.forward_with(controls, u0, true)
    }

    /// Forward sweep of the linear part only (no far-field load).
    pub fn forward_linear(
        &self,
        controls: &[DVector<f64>],
        u0: &DVector<f64>,
    ) -> Result<Vec<DVector<f64>>> {
        self.forward_with(controls, u0, false)
    }

    fn forward_with(
        &self,
        controls: &[DVector<f64>],
        u0: &DVector<f64>,
        with_load: bool,
    ) -> Result<Vec<DVector<f64>>> {
        let k_steps = self.grid.steps();
        check_len("control time levels", k_steps, controls.len())?;
        check_len("initial state", self.system.n_state(), u0.len())?;
        let mut out = Vec::with_capacity(k_steps + 1);
        out.push(u0.clone());
        for g in controls {
            check_len("control vector", self.system.n_control(), g.len())?;
            let mut rhs = self.system.input() * g;
            if with_load {
                rhs += self.system.load();
            }
            let next = self.step(out.last().unwrap(), &rhs);
            out.push(next);
        }
        Ok(out)
    }

    /// Backward sweep `E p_k = F p_{k+1} + M r_k`, `p_K = terminal`, where
    /// `sources[k]` is the source attached to `t_{k+1}`. Returns `p_0, …, p_K`.
    pub fn backward(
        &self,
        sources: &[DVector<f64>],
        terminal: &DVector<f64>,
    ) -> Result<Vec<DVector<f64>>> {
        let k_steps = self.grid.steps();
        check_len("adjoint source levels", k_steps, sources.len())?;
        check_len("terminal value", self.system.n_state(), terminal.len())?;
        let mut out = vec![DVector::zeros(0); k_steps + 1];
        out[k_steps] = terminal.clone();
        for k in (0..k_steps).rev() {
            check_len("adjoint source", self.system.n_state(), sources[k].len())?;
            let rhs = &sources[k] * self.system.mass();
            out[k] = self.step(&out[k + 1], &rhs);
        }
        Ok(out)
    }
}

fn compact_controls(system: &StateSystem, g: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    g.iter().map(|gk| system.restrict(gk)).collect()
}

fn forward_trajectory(
    variant: Variant,
    forms: &FormMatrices,
    g: &[DVector<f64>],
    u0: &DVector<f64>,
    grid: TimeGrid,
) -> Result<Trajectory> {
    let system = StateSystem::new(variant, forms)?;
    let compact = compact_controls(&system, g)?;
    let stepper = Stepper::new(system, grid)?;
    let state = stepper.forward(&compact, u0)?;
    let control = compact
        .iter()
        .map(|c| stepper.system().expand(c))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        variant,
        times: grid.times(),
        state,
        control,
        adjoint: Vec::new(),
    })
}

/// Robin problem as an index-1 DAE: on each step the algebraic collar rows
/// `𝒩_{s,h} y + β y = β g_k` hold for the θ-weighted level and are eliminated
/// exactly. `g` gives `K` full collar vectors; entries on nodes with `β = 0`
/// are ignored.
pub fn solve_parabolic_robin(
    forms: &FormMatrices,
    g: &[DVector<f64>],
    u0: &DVector<f64>,
    grid: TimeGrid,
) -> Result<Trajectory> {
    forward_trajectory(Variant::Robin, forms, g, u0, grid)
}

/// Dirichlet problem with zero initial state; the datum enters through the
/// load `-A_IE g`.
pub fn solve_parabolic_dirichlet(
    forms: &FormMatrices,
    g: &[DVector<f64>],
    grid: TimeGrid,
) -> Result<Trajectory> {
    let u0 = DVector::zeros(forms.n_interior());
    forward_trajectory(Variant::Dirichlet, forms, g, &u0, grid)
}

/// Backward adjoint sweep with zero terminal value. `source[k]` is
/// `u_{k+1} - u_d` (attached to `t_{k+1}`); returns `p_0, …, p_K`.
///
/// The exterior values of the adjoint are zero for Dirichlet and the Robin
/// extension of `p_k` for Robin; neither enters the interior recursion.
pub fn solve_adjoint(
    variant: Variant,
    forms: &FormMatrices,
    source: &[DVector<f64>],
    grid: TimeGrid,
) -> Result<Vec<DVector<f64>>> {
    let stepper = Stepper::new(StateSystem::new(variant, forms)?, grid)?;
    stepper.backward(source, &DVector::zeros(forms.n_interior()))
}

/// `𝔹*φ = -𝒩_{s,h}(A_II⁻¹ M φ)` on the collar. With `⟨·,·⟩` the discrete
/// `H^{-s}` pairing on the interior and the `L²` pairing on the collar,
/// `⟨𝔹 g, φ⟩ = ⟨g, 𝔹*φ⟩` where `𝔹 g = -M⁻¹ A_IE g`.
pub fn control_operator_adjoint(forms: &FormMatrices, phi: &DVector<f64>) -> Result<DVector<f64>> {
    check_len("interior vector", forms.n_interior(), phi.len())?;
    let w = forms.solve_interior(&(phi * forms.h()))?;
    Ok(-(forms.a_ei() * w) / forms.h())
}

/// Partial sums `S_m = Σ_{j<m} τ ‖𝔹* S(jτ) φ‖²_{L²(collar)}` for `m = 0..=K`,
/// where `S(t)` is the heat semigroup of the zero-exterior operator,
/// approximated by implicit Euler steps. Admissibility of `𝔹*` asks that
/// `S_m` stays below a multiple of `‖φ‖²_{H^{-s}}` independent of `m`.
pub fn admissibility_sums(
    forms: &FormMatrices,
    phi: &DVector<f64>,
    grid: TimeGrid,
) -> Result<Vec<f64>> {
    check_len("interior vector", forms.n_interior(), phi.len())?;
    let tau = grid.tau();
    let h = forms.h();
    let e = DMatrix::from_diagonal_element(forms.n_interior(), forms.n_interior(), h / tau)
        + forms.a_ii();
    let chol = Cholesky::new(e)
        .ok_or_else(|| Error::LinearSolve("semigroup step is not positive definite".into()))?;
    let mut v = phi.clone();
    let mut sums = Vec::with_capacity(grid.steps() + 1);
    let mut acc = 0.0;
    sums.push(acc);
    for _ in 0..grid.steps() {
        acc += tau
            * forms
                .l2_collar(&control_operator_adjoint(forms, &v)?)
                .powi(2);
        sums.push(acc);
        v = chol.solve(&(&v * (h / tau)));
    }
    Ok(sums)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{BetaField, DomainSpec, Grid1D, TailMode};
    use crate::nonlocal::assemble_form;
    use crate::steady::{dirichlet_map, solve_robin_steady};

    fn forms(n: usize, tail: TailMode, beta: f64) -> FormMatrices {
        let spec = DomainSpec::new(-1.0, 1.0, 1.0, 0.5, tail).unwrap();
        let grid = Grid1D::new(&spec, n).unwrap();
        let beta = BetaField::constant(&grid, beta).unwrap();
        assemble_form(&grid, &spec, &beta).unwrap()
    }

    #[test]
    fn time_grid_validation() {
        assert!(TimeGrid::new(0.0, 4, 1.0).is_err());
        assert!(TimeGrid::new(1.0, 1, 1.0).is_err());
        assert!(TimeGrid::new(1.0, 4, 0.4).is_err());
        let tg = TimeGrid::with_rate(3.0, 16.0, 1.0).unwrap();
        assert_eq!(tg.steps(), 48);
        assert!((tg.tau() * 48.0 - 3.0).abs() < 1e-12 * 3.0);
        assert_eq!(tg.times().last(), Some(&3.0));
    }

    #[test]
    fn zero_data_stays_zero() {
        let f = forms(16, TailMode::Zero, 1.0);
        let tg = TimeGrid::new(1.0, 8, 1.0).unwrap();
        let g = vec![DVector::zeros(f.n_collar()); 8];
        let tr = solve_parabolic_robin(&f, &g, &DVector::zeros(16), tg).unwrap();
        assert!(tr.state.iter().all(|u| u.amax() == 0.0));
        let tr = solve_parabolic_dirichlet(&f, &g, tg).unwrap();
        assert!(tr.state.iter().all(|u| u.amax() == 0.0));
    }

    #[test]
    fn constant_data_relaxes_to_steady_state() {
        let c = 0.8;
        let f = forms(32, TailMode::Constant(c), 1.0);
        let tg = TimeGrid::new(20.0, 200, 1.0).unwrap();
        let g = vec![DVector::from_element(f.n_collar(), c); 200];
        let robin = solve_parabolic_robin(&f, &g, &DVector::zeros(32), tg).unwrap();
        let steady = solve_robin_steady(&f, &DVector::zeros(32), &g[0]).unwrap();
        let (steady_i, _) = f.split(&steady).unwrap();
        assert!((robin.state.last().unwrap() - &steady_i).amax() < 1e-6);
        let dir = solve_parabolic_dirichlet(&f, &g, tg).unwrap();
        let target = dirichlet_map(&f, &g[0]).unwrap();
        assert!((dir.state.last().unwrap() - target).amax() < 1e-6);
        assert!(dir
            .state
            .last()
            .unwrap()
            .iter()
            .all(|v| (v - c).abs() < 1e-6));
    }

    #[test]
    fn backward_is_forward_reversed() {
        let f = forms(16, TailMode::Zero, 1.0);
        let tg = TimeGrid::new(2.0, 10, 1.0).unwrap();
        let stepper = Stepper::new(StateSystem::new(Variant::Dirichlet, &f).unwrap(), tg).unwrap();
        let sources: Vec<DVector<f64>> = (0..10)
            .map(|k| f.grid().sample_interior(|x| (x + k as f64 * 0.3).sin()))
            .collect();
        let p = stepper.backward(&sources, &DVector::zeros(16)).unwrap();
        // Forward with the same source: E u_{k+1} = F u_k + M r.
        let mut u = DVector::zeros(16);
        for k in 0..10 {
            u = stepper.step(&u, &(&sources[9 - k] * f.h()));
            assert!((&u - &p[9 - k]).amax() <= 1e-12 * u.amax().max(1.0));
        }
    }

    #[test]
    fn control_adjoint_identity() {
        let f = forms(16, TailMode::Zero, 0.0);
        let phi = f.grid().sample_interior(|x| x * x - 0.3);
        let g = f.grid().sample_collar(|x| (2.0 * x).cos());
        let bstar = control_operator_adjoint(&f, &phi).unwrap();
        let direct = -(f.a_ei() * f.solve_interior(&(&phi * f.h())).unwrap()) / f.h();
        assert!((&bstar - direct).amax() < 1e-12);
        // ⟨𝔹g, φ⟩ in H^{-s}: (M 𝔹g)ᵀ A_II⁻¹ (M φ) with M 𝔹 g = -A_IE g.
        let lhs = (-(f.a_ie() * &g)).dot(&f.solve_interior(&(&phi * f.h())).unwrap());
        let rhs = f.h() * g.dot(&bstar);
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }
}
