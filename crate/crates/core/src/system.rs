//! Interior state equation `𝒜 u = ℬ g + ℓ` obtained from the assembled form
//! for either kind of exterior control.
//!
//! * Robin: the collar rows `𝒩_{s,h} u + β u = β g` are algebraic and the
//!   collar block of the form is diagonal, so they are eliminated exactly:
//!   `𝒜 = A_II - A_IE D⁻¹ A_EI`, `ℬ = -A_IE D⁻¹ M_μ`. Only collar nodes with
//!   `β > 0` carry a control unknown.
//! * Dirichlet: the exterior datum is the control itself, `𝒜 = A_II` and
//!   `ℬ = -A_IE`, which realizes `𝔹 = 𝔸𝔻` without forming `𝔻`.
//!
//! The control space carries the diagonal weight `W` (`β h` or `h`), the state
//! space the lumped mass `h`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_len, Error, Result};
use crate::nonlocal::FormMatrices;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Robin,
    Dirichlet,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Robin => "robin",
            Variant::Dirichlet => "dirichlet",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct StateSystem {
    variant: Variant,
    operator: DMatrix<f64>,
    input: DMatrix<f64>,
    load: DVector<f64>,
    weight: DVector<f64>,
    control_nodes: Vec<usize>,
    n_collar: usize,
    mass: f64,
    // Robin only: collar diagonal D and coupling A_EI, to rebuild exterior values.
    collar_diagonal: DVector<f64>,
    coupling: DMatrix<f64>,
    mass_mu: DVector<f64>,
}

impl StateSystem {
    pub fn new(variant: Variant, forms: &FormMatrices) -> Result<Self> {
        let a_ie = forms.a_ie();
        let a_ei = a_ie.transpose();
        let h = forms.h();
        let n_collar = forms.n_collar();
        let mass_mu = forms.mass_mu();
        match variant {
            Variant::Robin => {
                let control_nodes = forms.beta().support();
                if control_nodes.is_empty() {
                    return Err(Error::Degenerate {
                        reason: "β vanishes on the whole collar, no Robin control acts".into(),
                        nodes: (0..n_collar).collect(),
                    });
                }
                let d = forms.a_ee_diagonal();
                if let Some(k) = d.iter().position(|&v| v.is_nan() || v <= 0.0) {
                    return Err(Error::Degenerate {
                        reason: "collar row decoupled from the interior".into(),
                        nodes: vec![k],
                    });
                }
                let mut scaled = a_ie.clone();
                for (k, mut col) in scaled.column_iter_mut().enumerate() {
                    col /= d[k];
                }
                let operator = forms.a_ii() - &scaled * &a_ei;
                let input = DMatrix::from_fn(a_ie.nrows(), control_nodes.len(), |i, c| {
                    let k = control_nodes[c];
                    -scaled[(i, k)] * mass_mu[k]
                });
                let weight = DVector::from_iterator(
                    control_nodes.len(),
                    control_nodes.iter().map(|&k| mass_mu[k]),
                );
                Ok(Self {
                    variant,
                    operator: symmetrize(operator),
                    input,
                    load: forms.tail_load().clone(),
                    weight,
                    control_nodes,
                    n_collar,
                    mass: h,
                    collar_diagonal: d,
                    coupling: a_ei,
                    mass_mu,
                })
            }
            Variant::Dirichlet => Ok(Self {
                variant,
                operator: forms.a_ii(),
                input: -&a_ie,
                load: forms.tail_load().clone(),
                weight: DVector::from_element(n_collar, h),
                control_nodes: (0..n_collar).collect(),
                n_collar,
                mass: h,
                collar_diagonal: DVector::zeros(0),
                coupling: a_ei,
                mass_mu,
            }),
        }
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Number of interior state unknowns.
    pub fn n_state(&self) -> usize {
        self.operator.nrows()
    }

    /// Number of control unknowns per time level.
    pub fn n_control(&self) -> usize {
        self.control_nodes.len()
    }

    pub fn operator(&self) -> &DMatrix<f64> {
        &self.operator
    }

    pub fn input(&self) -> &DMatrix<f64> {
        &self.input
    }

    pub fn load(&self) -> &DVector<f64> {
        &self.load
    }

    /// Diagonal control weight `W`.
    pub fn weight(&self) -> &DVector<f64> {
        &self.weight
    }

    /// Lumped interior mass (a multiple of the identity).
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Collar positions carrying a control unknown.
    pub fn control_nodes(&self) -> &[usize] {
        &self.control_nodes
    }

    /// Embeds a compact control into a full collar vector (zero elsewhere).
    pub fn expand(&self, g: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("control vector", self.n_control(), g.len())?;
        let mut out = DVector::zeros(self.n_collar);
        for (c, &k) in self.control_nodes.iter().enumerate() {
            out[k] = g[c];
        }
        Ok(out)
    }

    /// Restricts a collar vector to the control nodes.
    pub fn restrict(&self, g: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("collar vector", self.n_collar, g.len())?;
        Ok(DVector::from_iterator(
            self.n_control(),
            self.control_nodes.iter().map(|&k| g[k]),
        ))
    }

    /// `W⁻¹ ℬᵀ p`: the adjoint contribution to the gradient of the reduced cost
    /// in the `W` inner product. For Robin this equals the Robin extension of
    /// `p` on the control nodes; for Dirichlet it equals `-𝒩_{s,h} p`.
    pub fn trace(&self, p: &DVector<f64>) -> DVector<f64> {
        let mut t = self.input.tr_mul(p);
        t.component_div_assign(&self.weight);
        t
    }

    /// `sqrt(gᵀ W g)`.
    pub fn control_norm(&self, g: &DVector<f64>) -> f64 {
        g.iter()
            .zip(self.weight.iter())
            .map(|(x, w)| w * x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn control_dot(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        a.iter()
            .zip(b.iter())
            .zip(self.weight.iter())
            .map(|((x, y), w)| w * x * y)
            .sum()
    }

    /// Exterior values of the state for a compact control: the Robin collar
    /// rows solved for the collar unknowns, or the datum itself for Dirichlet.
    pub fn collar_values(&self, u: &DVector<f64>, g: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("interior vector", self.n_state(), u.len())?;
        let full = self.expand(g)?;
        match self.variant {
            Variant::Dirichlet => Ok(full),
            Variant::Robin => {
                let mut x = full.component_mul(&self.mass_mu) - &self.coupling * u;
                x.component_div_assign(&self.collar_diagonal);
                Ok(x)
            }
        }
    }

    pub fn factor(&self) -> Result<Cholesky<f64, Dyn>> {
        Cholesky::new(self.operator.clone()).ok_or_else(|| {
            Error::LinearSolve(format!(
                "{} state operator is not positive definite",
                self.variant
            ))
        })
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}
