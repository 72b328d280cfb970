//! Stationary exterior-value problems and the stationary optimality systems.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::nonlocal::{robin_extension, FormMatrices};
use crate::system::{StateSystem, Variant};

/// Stationary optimal state, control and adjoint.
///
/// `g_bar` lives on the full collar (zero on nodes without a control
/// unknown). `adj_bar` is `ψ̄` for Robin and `λ̄` for Dirichlet; both solve
/// `𝒜 p = M (ū - u_d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyTriple {
    pub variant: Variant,
    pub u_bar: DVector<f64>,
    pub g_bar: DVector<f64>,
    pub adj_bar: DVector<f64>,
    /// Relative residual of the KKT system at the returned triple.
    pub kkt_residual: f64,
}

/// Solves `A_full x = [h f + ℓ; M_μ g]` over all nodes, `ℓ` being the far-field
/// load of a constant tail.
pub fn solve_robin_steady(
    forms: &FormMatrices,
    f: &DVector<f64>,
    g: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_len("interior source", forms.n_interior(), f.len())?;
    check_len("collar datum", forms.n_collar(), g.len())?;
    let a = forms.a_full();
    let rhs_i = f * forms.h() + forms.tail_load();
    let rhs_e = g.component_mul(&forms.mass_mu());
    let rhs = forms.join(&rhs_i, &rhs_e)?;
    let chol = Cholesky::new(a.clone()).ok_or_else(|| Error::Degenerate {
        reason: "Robin system is singular".into(),
        nodes: forms
            .beta()
            .values()
            .iter()
            .enumerate()
            .filter(|(_, b)| **b == 0.0)
            .map(|(k, _)| k)
            .collect(),
    })?;
    let x = chol.solve(&rhs);
    let res = (&a * &x - &rhs).amax();
    let scale = rhs.amax().max(a.amax() * x.amax()).max(f64::MIN_POSITIVE);
    if res > 1e-10 * scale {
        return Err(Error::LinearSolve(format!(
            "Robin steady residual {res:e} too large"
        )));
    }
    Ok(x)
}

/// Discrete Dirichlet map: interior values of the s-harmonic extension of the
/// collar datum `g` (with the far-field load of a constant tail).
pub fn dirichlet_map(forms: &FormMatrices, g: &DVector<f64>) -> Result<DVector<f64>> {
    check_len("collar datum", forms.n_collar(), g.len())?;
    let rhs = forms.tail_load() - forms.a_ie() * g;
    forms.solve_interior(&rhs)
}

/// Operator norm of the linear part `g ↦ -A_II⁻¹ A_IE g` from `L²(collar)` to
/// `L²(Ω)`.
pub fn dirichlet_map_norm(forms: &FormMatrices) -> Result<f64> {
    let d = -forms.solve_interior_many(&forms.a_ie())?;
    // Both norms carry the same weight h, which cancels.
    Ok(d.singular_values().max())
}

/// `|Σ_Ω u (-Δ)^s_h v h + Σ_collar g 𝒩_{s,h} v h - ⟨ℓ, v⟩|` for `v` with zero
/// exterior values. The last term is the far-field datum of a constant tail
/// and vanishes for a zero tail. Zero up to round-off iff `u = 𝔻 g`.
pub fn transposition_residual(
    forms: &FormMatrices,
    u: &DVector<f64>,
    g: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<f64> {
    check_len("interior vector", forms.n_interior(), u.len())?;
    check_len("collar datum", forms.n_collar(), g.len())?;
    check_len("test vector", forms.n_interior(), v.len())?;
    // h (-Δ)^s_h v = A_II v and h 𝒩_{s,h} v = A_EI v for zero exterior values.
    let lap = forms.a_ii() * v;
    let normal = forms.a_ei() * v;
    Ok((u.dot(&lap) + g.dot(&normal) - forms.tail_load().dot(v)).abs())
}

/// Magnitude of the terms entering [`transposition_residual`], for relative
/// tolerances.
pub fn transposition_scale(
    forms: &FormMatrices,
    u: &DVector<f64>,
    g: &DVector<f64>,
    v: &DVector<f64>,
) -> f64 {
    let lap = forms.a_ii() * v;
    let normal = forms.a_ei() * v;
    let abs_dot = |a: &DVector<f64>, b: &DVector<f64>| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x * y).abs())
            .sum::<f64>()
    };
    abs_dot(u, &lap) + abs_dot(g, &normal) + abs_dot(forms.tail_load(), v)
}

/// Steady cost `½‖u - u_d‖² + ½‖g‖²_W` for a compact control.
pub fn steady_cost(system: &StateSystem, u_d: &DVector<f64>, g: &DVector<f64>) -> Result<f64> {
    check_len("target", system.n_state(), u_d.len())?;
    let u = system
        .factor()?
        .solve(&(system.input() * g + system.load()));
    let e = u - u_d;
    Ok(0.5 * system.mass() * e.norm_squared() + 0.5 * system.control_norm(g).powi(2))
}

/// Solves the stationary optimality system of
/// `J(g) = ½‖u - u_d‖²_{L²(Ω)} + ½‖g‖²` (μ-weighted for Robin) subject to the
/// discrete state equation, by a Cholesky solve of the reduced Hessian.
pub fn solve_steady_optimality(
    variant: Variant,
    forms: &FormMatrices,
    u_d: &DVector<f64>,
) -> Result<SteadyTriple> {
    let system = StateSystem::new(variant, forms)?;
    solve_steady_system(&system, u_d)
}

pub fn solve_steady_system(system: &StateSystem, u_d: &DVector<f64>) -> Result<SteadyTriple> {
    check_len("target", system.n_state(), u_d.len())?;
    let chol = system.factor()?;
    let mass = system.mass();
    let sol_b = chol.solve(system.input());
    let u_free = chol.solve(system.load());
    let m = system.n_control();
    let mut hess = sol_b.tr_mul(&sol_b) * mass;
    for c in 0..m {
        hess[(c, c)] += system.weight()[c];
    }
    let hess = (&hess + hess.transpose()) * 0.5;
    let rhs = -sol_b.tr_mul(&(&u_free - u_d)) * mass;
    let hchol = Cholesky::new(hess.clone()).ok_or_else(|| {
        Error::LinearSolve("reduced steady Hessian is not positive definite".into())
    })?;
    let mut g = hchol.solve(&rhs);
    // One step of iterative refinement.
    let r = &rhs - &hess * &g;
    g += hchol.solve(&r);

    let u = chol.solve(&(system.input() * &g + system.load()));
    let p = chol.solve(&((&u - u_d) * mass));
    let kkt_residual = steady_kkt_residual(system, u_d, &u, &g, &p);
    if kkt_residual > 1e-10 {
        return Err(Error::LinearSolve(format!(
            "steady {} KKT residual {kkt_residual:e} exceeds 1e-10",
            system.variant()
        )));
    }
    Ok(SteadyTriple {
        variant: system.variant(),
        u_bar: u,
        g_bar: system.expand(&g)?,
        adj_bar: p,
        kkt_residual,
    })
}

/// Largest relative residual among state equation, adjoint equation and
/// gradient condition `W g + ℬᵀ p = 0` (compact control).
pub fn steady_kkt_residual(
    system: &StateSystem,
    u_d: &DVector<f64>,
    u: &DVector<f64>,
    g: &DVector<f64>,
    p: &DVector<f64>,
) -> f64 {
    let op = system.operator();
    let mass = system.mass();
    let rel = |r: DVector<f64>, scale: f64| r.amax() / scale.max(f64::MIN_POSITIVE);
    let bg = system.input() * g;
    let state = rel(
        op * u - &bg - system.load(),
        (op * u).amax() + bg.amax() + system.load().amax(),
    );
    let src = (u - u_d) * mass;
    let adjoint = rel(op * p - &src, (op * p).amax() + src.amax());
    let wg = g.component_mul(system.weight());
    let btp = system.input().tr_mul(p);
    let grad = rel(&wg + &btp, wg.amax() + btp.amax());
    state.max(adjoint).max(grad)
}

/// First-order identity of a steady triple on the control nodes: Robin
/// `ḡ + ψ̄_R`, Dirichlet `ḡ - 𝒩_{s,h} λ̄`. Returns the max-norm.
pub fn steady_first_order_residual(forms: &FormMatrices, triple: &SteadyTriple) -> Result<f64> {
    let system = StateSystem::new(triple.variant, forms)?;
    let g = system.restrict(&triple.g_bar)?;
    let r = match triple.variant {
        Variant::Robin => {
            let ext = system.restrict(&robin_extension(forms, &triple.adj_bar)?)?;
            g + ext
        }
        Variant::Dirichlet => {
            let nd = forms.a_ei() * &triple.adj_bar / forms.h();
            g - nd
        }
    };
    Ok(r.amax())
}

/// Dense reference: the stationary KKT system assembled over all unknowns and
/// solved by LU, independent of the reduced Hessian path.
pub fn steady_kkt_dense(
    system: &StateSystem,
    u_d: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let n = system.n_state();
    let m = system.n_control();
    let size = 2 * n + m;
    let mut k = DMatrix::zeros(size, size);
    let mut rhs = DVector::zeros(size);
    let op = system.operator();
    let b = system.input();
    // Rows: state (n), adjoint (n), gradient (m). Unknowns: u, p, g.
    k.view_mut((0, 0), (n, n)).copy_from(op);
    k.view_mut((0, 2 * n), (n, m)).copy_from(&(-b));
    rhs.rows_mut(0, n).copy_from(system.load());
    k.view_mut((n, n), (n, n)).copy_from(op);
    for i in 0..n {
        k[(n + i, i)] = -system.mass();
    }
    rhs.rows_mut(n, n).copy_from(&(-u_d * system.mass()));
    k.view_mut((2 * n, n), (m, n)).copy_from(&b.transpose());
    for c in 0..m {
        k[(2 * n + c, 2 * n + c)] = system.weight()[c];
    }
    let x = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::LinearSolve("dense steady KKT system is singular".into()))?;
    Ok((
        x.rows(0, n).into_owned(),
        x.rows(2 * n, m).into_owned(),
        x.rows(n, n).into_owned(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{BetaField, DomainSpec, Grid1D, TailMode};
    use crate::nonlocal::assemble_form;

    fn forms(n: usize, tail: TailMode, beta: f64) -> FormMatrices {
        let spec = DomainSpec::new(-1.0, 1.0, 1.0, 0.5, tail).unwrap();
        let grid = Grid1D::new(&spec, n).unwrap();
        let beta = BetaField::constant(&grid, beta).unwrap();
        assemble_form(&grid, &spec, &beta).unwrap()
    }

    #[test]
    fn robin_steady_trivial_and_constant() {
        let f = forms(32, TailMode::Zero, 1.0);
        let x = solve_robin_steady(&f, &DVector::zeros(32), &DVector::zeros(f.n_collar())).unwrap();
        assert_eq!(x.amax(), 0.0);

        let c = 0.7;
        let f = forms(32, TailMode::Constant(c), 2.0);
        let x = solve_robin_steady(
            &f,
            &DVector::zeros(32),
            &DVector::from_element(f.n_collar(), c),
        )
        .unwrap();
        assert!(x.iter().all(|v| (v - c).abs() < 1e-10));
    }

    #[test]
    fn dirichlet_map_constants_and_max_principle() {
        let c = -1.3;
        let f = forms(32, TailMode::Constant(c), 0.0);
        let u = dirichlet_map(&f, &DVector::from_element(f.n_collar(), c)).unwrap();
        assert!(u.iter().all(|v| (v - c).abs() < 1e-10));

        let f = forms(24, TailMode::Zero, 0.0);
        let g = f.grid().sample_collar(|x| 0.5 + 0.5 * (5.0 * x).sin());
        let u = dirichlet_map(&f, &g).unwrap();
        assert!(u.iter().all(|&v| (-1e-14..=1.0 + 1e-14).contains(&v)));
        let r = transposition_residual(&f, &u, &g, &f.grid().sample_interior(|x| x.cos())).unwrap();
        assert!(r < 1e-12);
    }

    #[test]
    fn steady_optimality_matches_dense_kkt() {
        for variant in [Variant::Robin, Variant::Dirichlet] {
            let f = forms(16, TailMode::Zero, 1.0);
            let ud = f.grid().sample_interior(|x| (-(x * x) / 0.1).exp());
            let t = solve_steady_optimality(variant, &f, &ud).unwrap();
            let sys = StateSystem::new(variant, &f).unwrap();
            let (u, g, p) = steady_kkt_dense(&sys, &ud).unwrap();
            assert!((&t.u_bar - u).amax() < 1e-10);
            assert!((sys.restrict(&t.g_bar).unwrap() - g).amax() < 1e-10);
            assert!((&t.adj_bar - p).amax() < 1e-10);
            assert!(steady_first_order_residual(&f, &t).unwrap() < 1e-9);
        }
    }

    #[test]
    fn zero_target_gives_zero_triple() {
        let f = forms(16, TailMode::Zero, 1.0);
        let t = solve_steady_optimality(Variant::Robin, &f, &DVector::zeros(16)).unwrap();
        assert_eq!(t.u_bar.amax() + t.g_bar.amax() + t.adj_bar.amax(), 0.0);
    }
}
