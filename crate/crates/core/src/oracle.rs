//! Dense reference solvers for small instances.
//!
//! The space-time KKT system is assembled directly from the form blocks. For
//! Robin every collar node carries an algebraic unknown `y_k` (the θ-weighted
//! exterior value on step `k`) and its own constraint row, so the Schur
//! elimination used by the reduced solver is not involved.

use nalgebra::{DMatrix, DVector};

use crate::control::ControlProblem;
use crate::error::{Error, Result};
use crate::system::Variant;

/// Solution of the dense space-time KKT system.
#[derive(Debug, Clone)]
pub struct DenseKkt {
    /// `u_1, …, u_K`.
    pub states: Vec<DVector<f64>>,
    /// Compact controls `g_0, …, g_{K-1}`.
    pub controls: Vec<DVector<f64>>,
    /// `p_0, …, p_{K-1}` recovered from the interior multipliers.
    pub adjoints: Vec<DVector<f64>>,
}

/// Assembles and solves the equality-constrained quadratic program behind
/// `problem` by dense LU. Meant for `n K` in the hundreds.
pub fn dense_kkt_solve(problem: &ControlProblem) -> Result<DenseKkt> {
    let forms = problem.forms();
    let grid = problem.time_grid();
    let (tau, theta, k_steps) = (grid.tau(), grid.theta(), grid.steps());
    let h = forms.h();
    let n = forms.n_interior();
    let n_e = forms.n_collar();
    let nodes = problem.system().control_nodes().to_vec();
    let m = nodes.len();
    let robin = problem.variant() == Variant::Robin;
    if problem.terminal_adjoint().amax() != 0.0 {
        return Err(Error::Domain(
            "dense KKT reference does not model a terminal adjoint value".into(),
        ));
    }
    let u0 = problem.initial_state();

    let a_ii = forms.a_ii();
    let a_ie = forms.a_ie();
    let load = forms.tail_load();
    let mass_mu = forms.mass_mu();
    let d = forms.a_ee_diagonal();

    // Unknown layout per step k: u_{k+1} (n), y_k (n_e, Robin only), g_k (m).
    let ny = if robin { n_e } else { 0 };
    let block = n + ny + m;
    let n_var = k_steps * block;
    let rows_per_step = n + ny;
    let n_con = k_steps * rows_per_step;
    let u_at = |k: usize| k * block;
    let y_at = |k: usize| k * block + n;
    let g_at = |k: usize| k * block + n + ny;

    let size = n_var + n_con;
    let mut kkt = DMatrix::zeros(size, size);
    let mut rhs = DVector::zeros(size);

    // Objective: ½ τ h ‖u - u_d‖² + ½ τ gᵀ W g.
    let weight = problem.system().weight();
    for k in 0..k_steps {
        for i in 0..n {
            kkt[(u_at(k) + i, u_at(k) + i)] = tau * h;
            rhs[u_at(k) + i] = tau * h * problem.target()[i];
        }
        for c in 0..m {
            kkt[(g_at(k) + c, g_at(k) + c)] = tau * weight[c];
        }
    }

    let put = |row: usize, col: usize, v: f64, kkt: &mut DMatrix<f64>| {
        kkt[(n_var + row, col)] += v;
        kkt[(col, n_var + row)] += v;
    };

    for k in 0..k_steps {
        let r0 = k * rows_per_step;
        // Interior rows: (h/τ)(u_{k+1} - u_k) + A_II (θ u_{k+1} + (1-θ) u_k) + A_IE y_k = ℓ
        // (Robin) or ... + A_IE g_k = ℓ (Dirichlet).
        for i in 0..n {
            for j in 0..n {
                let mut v = theta * a_ii[(i, j)];
                if i == j {
                    v += h / tau;
                }
                put(r0 + i, u_at(k) + j, v, &mut kkt);
                if k > 0 {
                    let mut w = (1.0 - theta) * a_ii[(i, j)];
                    if i == j {
                        w -= h / tau;
                    }
                    put(r0 + i, u_at(k - 1) + j, w, &mut kkt);
                }
            }
            if robin {
                for e in 0..n_e {
                    put(r0 + i, y_at(k) + e, a_ie[(i, e)], &mut kkt);
                }
            } else {
                for (c, &e) in nodes.iter().enumerate() {
                    put(r0 + i, g_at(k) + c, a_ie[(i, e)], &mut kkt);
                }
            }
            rhs[n_var + r0 + i] = if problem.includes_load() {
                load[i]
            } else {
                0.0
            };
            if k == 0 {
                let a_u0 = (0..n).map(|j| a_ii[(i, j)] * u0[j]).sum::<f64>();
                rhs[n_var + r0 + i] += h / tau * u0[i] - (1.0 - theta) * a_u0;
            }
        }
        // Robin collar rows: A_EI (θ u_{k+1} + (1-θ) u_k) + D y_k - M_μ g_k = 0.
        if robin {
            for e in 0..n_e {
                let row = r0 + n + e;
                for j in 0..n {
                    put(row, u_at(k) + j, theta * a_ie[(j, e)], &mut kkt);
                    if k > 0 {
                        put(row, u_at(k - 1) + j, (1.0 - theta) * a_ie[(j, e)], &mut kkt);
                    }
                }
                put(row, y_at(k) + e, d[e], &mut kkt);
                if k == 0 {
                    rhs[n_var + row] =
                        -(1.0 - theta) * (0..n).map(|j| a_ie[(j, e)] * u0[j]).sum::<f64>();
                }
            }
            for (c, &e) in nodes.iter().enumerate() {
                put(r0 + n + e, g_at(k) + c, -mass_mu[e], &mut kkt);
            }
        }
    }

    let x = kkt
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::LinearSolve("dense space-time KKT system is singular".into()))?;

    let states = (0..k_steps)
        .map(|k| x.rows(u_at(k), n).into_owned())
        .collect();
    let controls = (0..k_steps)
        .map(|k| x.rows(g_at(k), m).into_owned())
        .collect();
    // Interior multipliers are -τ p_k.
    let adjoints = (0..k_steps)
        .map(|k| -x.rows(n_var + k * rows_per_step, n).into_owned() / tau)
        .collect();
    Ok(DenseKkt {
        states,
        controls,
        adjoints,
    })
}
