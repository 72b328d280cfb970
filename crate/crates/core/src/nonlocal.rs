//! Quadrature discretization of the fractional Laplacian, the nonlocal normal
//! derivative and the energy form on a truncated 1-D domain.
//!
//! Every node carries weight `h`. For nodes `i != j` with at least one of them
//! in the interior, the stiffness matrix holds `-C h² |x_i - x_j|^{-1-2s}`;
//! pairs of collar nodes do not interact (the energy form ignores
//! exterior-exterior pairs). Each diagonal entry is minus the sum of its row,
//! plus, on interior rows, `C h T_i` where `T_i` is the exact integral of the
//! kernel over the region beyond the collar. With a constant tail datum `c`
//! the far field contributes the load `C h T_i c`, so that the pair
//! (stiffness, load) annihilates the constant `c`.

use std::sync::OnceLock;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use crate::domain::{BetaField, DomainSpec, Grid1D, TailMode};
use crate::error::{check_len, Error, Result};

/// `C_{N,s} = s 2^{2s} Γ((2s+N)/2) / (π^{N/2} Γ(1-s))`.
pub fn normalization_constant(dim: u32, s: f64) -> Result<f64> {
    if dim < 1 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain(format!("s must lie in (0, 1), got {s}")));
    }
    let n = f64::from(dim);
    let num = s * 2f64.powf(2.0 * s) * libm::tgamma((2.0 * s + n) / 2.0);
    let den = std::f64::consts::PI.powf(n / 2.0) * libm::tgamma(1.0 - s);
    Ok(num / den)
}

/// `ρ(x) = ∫_a^b |x - y|^{-1-2s} dy` for `x` outside `[a, b]`.
pub fn kernel_tail_rho(x: f64, spec: &DomainSpec) -> Result<f64> {
    if !x.is_finite() || (x >= spec.a && x <= spec.b) {
        return Err(Error::Domain(format!(
            "ρ is only defined outside [{}, {}], got x = {x}",
            spec.a, spec.b
        )));
    }
    let (near, far) = if x < spec.a {
        (spec.a - x, spec.b - x)
    } else {
        (x - spec.b, x - spec.a)
    };
    Ok(ray_integral(near, spec.s) - ray_integral(far, spec.s))
}

/// `∫_d^∞ r^{-1-2s} dr`.
fn ray_integral(d: f64, s: f64) -> f64 {
    d.powf(-2.0 * s) / (2.0 * s)
}

/// Assembled discrete energy form and the associated mass matrices.
///
/// Immutable after assembly; the interior Cholesky factor is computed on first
/// use and shared.
#[derive(Debug)]
pub struct FormMatrices {
    spec: DomainSpec,
    grid: Grid1D,
    beta: BetaField,
    constant: f64,
    stiffness: DMatrix<f64>,
    tail_integral: DVector<f64>,
    tail_load: DVector<f64>,
    interior_factor: OnceLock<Option<Cholesky<f64, Dyn>>>,
}

/// Assembles the form matrices, parallel over rows.
pub fn assemble_form(grid: &Grid1D, spec: &DomainSpec, beta: &BetaField) -> Result<FormMatrices> {
    assemble(grid, spec, beta, true)
}

/// Serial assembly; produces exactly the same matrices as [`assemble_form`].
pub fn assemble_form_serial(
    grid: &Grid1D,
    spec: &DomainSpec,
    beta: &BetaField,
) -> Result<FormMatrices> {
    assemble(grid, spec, beta, false)
}

fn assemble(
    grid: &Grid1D,
    spec: &DomainSpec,
    beta: &BetaField,
    parallel: bool,
) -> Result<FormMatrices> {
    spec.validate()?;
    grid.check_against(spec)?;
    if beta.len() != grid.n_collar() {
        return Err(Error::Consistency(format!(
            "β has {} values but the grid has {} collar nodes",
            beta.len(),
            grid.n_collar()
        )));
    }
    let constant = normalization_constant(1, spec.s)?;
    let h = grid.h();
    let total = grid.len();
    let exponent = -1.0 - 2.0 * spec.s;

    // Off-diagonal entries only depend on the lattice offset.
    let offsets: Vec<f64> = (0..total)
        .map(|d| {
            if d == 0 {
                0.0
            } else {
                -constant * h * h * grid.distance(0, d).powf(exponent)
            }
        })
        .collect();

    let (lo, hi) = (grid.outer_left(), grid.outer_right());
    let tail_integral = DVector::from_iterator(
        grid.n_interior(),
        grid.interior_nodes()
            .iter()
            .map(|&x| ray_integral(x - lo, spec.s) + ray_integral(hi - x, spec.s)),
    );

    let interior = grid.interior_indices();
    let first = interior.start;
    let row = |i: usize| -> Vec<f64> {
        let i_inside = interior.contains(&i);
        let mut r = vec![0.0; total];
        let mut diag = 0.0;
        for (j, slot) in r.iter_mut().enumerate() {
            if j == i || !(i_inside || interior.contains(&j)) {
                continue;
            }
            let v = offsets[i.abs_diff(j)];
            *slot = v;
            diag -= v;
        }
        if i_inside {
            diag += constant * h * tail_integral[i - first];
        }
        r[i] = diag;
        r
    };
    let rows: Vec<Vec<f64>> = if parallel {
        (0..total).into_par_iter().map(row).collect()
    } else {
        (0..total).map(row).collect()
    };
    let stiffness = DMatrix::from_fn(total, total, |i, j| rows[i][j]);

    let tail_value = match spec.tail_mode {
        TailMode::Zero => 0.0,
        TailMode::Constant(c) => c,
    };
    let tail_load = tail_integral.map(|t| constant * h * t * tail_value);

    Ok(FormMatrices {
        spec: *spec,
        grid: grid.clone(),
        beta: beta.clone(),
        constant,
        stiffness,
        tail_integral,
        tail_load,
        interior_factor: OnceLock::new(),
    })
}

impl FormMatrices {
    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn beta(&self) -> &BetaField {
        &self.beta
    }

    /// `C_{1,s}`.
    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn h(&self) -> f64 {
        self.grid.h()
    }

    pub fn n_interior(&self) -> usize {
        self.grid.n_interior()
    }

    pub fn n_collar(&self) -> usize {
        self.grid.n_collar()
    }

    /// Kernel part of the form (no β term).
    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    /// Kernel part plus the collar mass `M_μ` on the collar diagonal.
    pub fn a_full(&self) -> DMatrix<f64> {
        let mut a = self.stiffness.clone();
        for (k, i) in self.grid.collar_indices().enumerate() {
            a[(i, i)] += self.beta.values()[k] * self.h();
        }
        a
    }

    /// Exact kernel integral beyond the collar, per interior node.
    pub fn tail_integral(&self) -> &DVector<f64> {
        &self.tail_integral
    }

    /// Far-field load `C h T_i c` on interior rows (zero for a zero tail).
    pub fn tail_load(&self) -> &DVector<f64> {
        &self.tail_load
    }

    pub fn mass_interior(&self) -> DVector<f64> {
        DVector::from_element(self.n_interior(), self.h())
    }

    /// `M_μ`: lumped collar mass weighted by β.
    pub fn mass_mu(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.n_collar(),
            self.beta.values().iter().map(|b| b * self.h()),
        )
    }

    pub fn a_ii(&self) -> DMatrix<f64> {
        let r = self.grid.interior_indices();
        self.stiffness
            .view((r.start, r.start), (r.len(), r.len()))
            .into_owned()
    }

    /// Interior rows, collar columns.
    pub fn a_ie(&self) -> DMatrix<f64> {
        let rows: Vec<usize> = self.grid.interior_indices().collect();
        let cols: Vec<usize> = self.grid.collar_indices().collect();
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
            self.stiffness[(rows[i], cols[j])]
        })
    }

    pub fn a_ei(&self) -> DMatrix<f64> {
        self.a_ie().transpose()
    }

    /// Diagonal of the collar block of `A_full` (the block is diagonal since
    /// collar nodes do not interact with each other).
    pub fn a_ee_diagonal(&self) -> DVector<f64> {
        let beta = self.beta.values();
        DVector::from_iterator(
            self.n_collar(),
            self.grid
                .collar_indices()
                .enumerate()
                .map(|(k, i)| self.stiffness[(i, i)] + beta[k] * self.h()),
        )
    }

    /// Discrete `ρ_h(x_k) = Σ_{j ∈ Ω} h |x_k - x_j|^{-1-2s}` at collar node `k`.
    pub fn rho_discrete(&self, k: usize) -> f64 {
        let i = self.grid.collar_node_index(k);
        self.stiffness[(i, i)] / (self.constant * self.h())
    }

    /// Splits a node vector into its interior and collar parts.
    pub fn split(&self, u: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        check_len("node vector", self.grid.len(), u.len())?;
        let r = self.grid.interior_indices();
        let interior = u.rows(r.start, r.len()).into_owned();
        let collar =
            DVector::from_iterator(self.n_collar(), self.grid.collar_indices().map(|i| u[i]));
        Ok((interior, collar))
    }

    /// Joins interior and collar parts into a node vector.
    pub fn join(&self, interior: &DVector<f64>, collar: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("interior vector", self.n_interior(), interior.len())?;
        check_len("collar vector", self.n_collar(), collar.len())?;
        let mut u = DVector::zeros(self.grid.len());
        let r = self.grid.interior_indices();
        u.rows_mut(r.start, r.len()).copy_from(interior);
        for (k, i) in self.grid.collar_indices().enumerate() {
            u[i] = collar[k];
        }
        Ok(u)
    }

    /// Robin form `vᵀ A_full u`: the nonlocal energy plus the β-weighted
    /// collar term, with a zero far field.
    pub fn bilinear_form(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        check_len("node vector", self.grid.len(), u.len())?;
        check_len("node vector", self.grid.len(), v.len())?;
        let mut e = v.dot(&(&self.stiffness * u));
        for (k, i) in self.grid.collar_indices().enumerate() {
            e += self.beta.values()[k] * self.h() * u[i] * v[i];
        }
        Ok(e)
    }

    fn interior_cholesky(&self) -> Result<&Cholesky<f64, Dyn>> {
        self.interior_factor
            .get_or_init(|| Cholesky::new(self.a_ii()))
            .as_ref()
            .ok_or_else(|| Error::LinearSolve("interior block is not positive definite".into()))
    }

    /// Solves `A_II x = rhs`.
    pub fn solve_interior(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("interior rhs", self.n_interior(), rhs.len())?;
        Ok(self.interior_cholesky()?.solve(rhs))
    }

    /// Solves `A_II X = B` for several right-hand sides.
    pub fn solve_interior_many(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_len("interior rhs", self.n_interior(), rhs.nrows())?;
        Ok(self.interior_cholesky()?.solve(rhs))
    }

    /// Energy norm `sqrt(wᵀ A_II w)` of an interior vector with zero exterior.
    pub fn energy_norm(&self, w: &DVector<f64>) -> Result<f64> {
        check_len("interior vector", self.n_interior(), w.len())?;
        Ok(w.dot(&(self.a_ii() * w)).max(0.0).sqrt())
    }

    /// Discrete `L²(Ω)` norm.
    pub fn l2_interior(&self, v: &DVector<f64>) -> f64 {
        (self.h() * v.norm_squared()).sqrt()
    }

    /// Discrete `L²` norm over the collar with unit weight.
    pub fn l2_collar(&self, g: &DVector<f64>) -> f64 {
        (self.h() * g.norm_squared()).sqrt()
    }

    /// Discrete `L²(μ)` norm over the collar.
    pub fn l2_mu(&self, g: &DVector<f64>) -> f64 {
        let h = self.h();
        g.iter()
            .zip(self.beta.values())
            .map(|(x, b)| b * h * x * x)
            .sum::<f64>()
            .sqrt()
    }
}

/// Collocation approximation of `(-Δ)^s u` at the interior nodes. Collar
/// entries of `u` are the exterior datum; beyond the collar the tail mode
/// applies.
pub fn apply_fractional_laplacian(forms: &FormMatrices, u: &DVector<f64>) -> Result<DVector<f64>> {
    check_len("node vector", forms.grid.len(), u.len())?;
    let r = forms.grid.interior_indices();
    let rows = forms.stiffness.rows(r.start, r.len());
    Ok((rows * u - &forms.tail_load) / forms.h())
}

/// Quadrature of `𝒩_s u(x_k) = C Σ_{j ∈ Ω} h (u_k - u_j) |x_k - x_j|^{-1-2s}`
/// at the collar nodes.
pub fn nonlocal_normal_derivative(forms: &FormMatrices, u: &DVector<f64>) -> Result<DVector<f64>> {
    check_len("node vector", forms.grid.len(), u.len())?;
    let h = forms.h();
    Ok(DVector::from_iterator(
        forms.n_collar(),
        forms
            .grid
            .collar_indices()
            .map(|i| forms.stiffness.row(i).transpose().dot(u) / h),
    ))
}

/// Exterior values of the Robin extension of an interior vector:
/// `u_R(x_k) = C Σ_j h u_j |x_k - x_j|^{-1-2s} / (C ρ_h(x_k) + β_k)`.
///
/// Uses the discrete `ρ_h`, so the result satisfies the discrete condition
/// `𝒩_{s,h} u_R + β u_R = 0` up to round-off.
pub fn robin_extension(forms: &FormMatrices, u: &DVector<f64>) -> Result<DVector<f64>> {
    check_len("interior vector", forms.n_interior(), u.len())?;
    let h = forms.h();
    let r = forms.grid.interior_indices();
    let beta = forms.beta.values();
    let mut out = DVector::zeros(forms.n_collar());
    for (k, i) in forms.grid.collar_indices().enumerate() {
        let row = forms.stiffness.view((i, r.start), (1, r.len()));
        // -A_EI u / h = C Σ_j h u_j K_kj
        let numerator = -(row * u)[0] / h;
        let denominator = forms.constant * forms.rho_discrete(k) + beta[k];
        if denominator.is_nan() || denominator <= 0.0 {
            return Err(Error::Degenerate {
                reason: "Robin extension denominator vanishes".into(),
                nodes: vec![k],
            });
        }
        out[k] = numerator / denominator;
    }
    Ok(out)
}

/// Discrete `H^{-s}(Ω)` norm `sqrt((M v)ᵀ A_II^{-1} (M v))`.
pub fn dual_norm(forms: &FormMatrices, v: &DVector<f64>) -> Result<f64> {
    check_len("interior vector", forms.n_interior(), v.len())?;
    let mv = v * forms.h();
    let x = forms.solve_interior(&mv)?;
    Ok(mv.dot(&x).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::TailMode;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize, s: f64, tail: TailMode, beta: f64) -> FormMatrices {
        let spec = DomainSpec::new(-1.0, 1.0, 1.0, s, tail).unwrap();
        let grid = Grid1D::new(&spec, n).unwrap();
        let beta = BetaField::constant(&grid, beta).unwrap();
        assemble_form(&grid, &spec, &beta).unwrap()
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    #[allow(clippy::excessive_precision, clippy::approx_constant)]
    fn normalization_constant_values() {
        // 40-digit reference values
        let cases = [
            (1, 0.5, 0.318_309_886_183_790_671_54),
            (2, 0.5, 0.159_154_943_091_895_335_77),
            (1, 0.25, 0.199_471_140_200_716_338_97),
            (1, 0.75, 0.299_206_710_301_074_508_45),
            (3, 0.3, 0.058_593_562_451_505_897_626),
            (1, 0.9, 0.164_904_938_818_302_724_9),
        ];
        for (dim, s, expected) in cases {
            assert_relative_eq!(
                normalization_constant(dim, s).unwrap(),
                expected,
                max_relative = 1e-12
            );
        }
        let tiny = normalization_constant(1, 1e-6).unwrap();
        assert_relative_eq!(tiny, 9.999_988_455_709_815e-7, max_relative = 1e-12);
        assert!(normalization_constant(1, 1.5).is_err());
        assert!(normalization_constant(1, 0.0).is_err());
        assert!(normalization_constant(0, 0.5).is_err());
    }

    #[test]
    fn rho_closed_form() {
        let spec = DomainSpec::new(-1.0, 1.0, 1.0, 0.5, TailMode::Zero).unwrap();
        assert_relative_eq!(
            kernel_tail_rho(2.0, &spec).unwrap(),
            2.0 / 3.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            kernel_tail_rho(-2.0, &spec).unwrap(),
            2.0 / 3.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            kernel_tail_rho(1.125, &spec).unwrap(),
            8.0 - 1.0 / 2.125,
            max_relative = 1e-14
        );
        let mut last = f64::INFINITY;
        for k in 1..40 {
            let x = 1.0 + 0.25 * f64::from(k) * f64::from(k);
            let r = kernel_tail_rho(x, &spec).unwrap();
            assert!(r > 0.0 && r < last);
            last = r;
        }
        assert!(last < 1e-3);
        assert!(kernel_tail_rho(0.3, &spec).is_err());
        assert!(kernel_tail_rho(1.0, &spec).is_err());
    }

    #[test]
    fn zero_beta_gives_zero_mass() {
        let f = setup(8, 0.5, TailMode::Zero, 0.0);
        assert!(f.mass_mu().iter().all(|&m| m == 0.0));
        assert_eq!(f.a_full(), f.stiffness().clone());
    }

    #[test]
    fn hand_computed_entry() {
        // n = 8 on (-1, 1): h = 1/4; nodes 5 and 7 are interior at x = -0.625, -0.125.
        let f = setup(8, 0.5, TailMode::Zero, 1.0);
        let a = f.a_full();
        let h = 0.25;
        let expected = -(1.0 / std::f64::consts::PI) * h * h / (0.5f64 * 0.5);
        assert_relative_eq!(a[(5, 7)], expected, max_relative = 1e-14);
        assert_relative_eq!(a[(7, 5)], expected, max_relative = 1e-14);
        // collar node 0 (x = -1.875) against interior node 4 (x = -0.875)
        assert_relative_eq!(
            a[(0, 4)],
            -(1.0 / std::f64::consts::PI) * h * h,
            max_relative = 1e-14
        );
        // collar pairs do not interact
        assert_eq!(a[(0, 1)], 0.0);
        assert_eq!(a[(0, 15)], 0.0);
    }

    #[test]
    fn symmetric_and_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (s, tail) in [
            (0.3, TailMode::Zero),
            (0.5, TailMode::Constant(2.0)),
            (0.8, TailMode::Zero),
        ] {
            let f = setup(24, s, tail, 0.7);
            let a = f.a_full();
            let max = a.amax();
            assert!((&a - a.transpose()).amax() <= 1e-12 * max);
            for _ in 0..50 {
                let x = random_vec(&mut rng, a.nrows());
                let q = x.dot(&(&a * &x)) / x.norm_squared();
                assert!(q >= -1e-10);
                let mu = f.bilinear_form(&x, &x).unwrap();
                let collar_mass: f64 = f
                    .grid()
                    .collar_indices()
                    .enumerate()
                    .map(|(k, i)| f.mass_mu()[k] * x[i] * x[i])
                    .sum();
                assert!(mu >= collar_mass - 1e-12 * mu.abs());
            }
        }
    }

    #[test]
    fn constant_tail_annihilates_matching_constant() {
        let c = 1.7;
        let f = setup(32, 0.4, TailMode::Constant(c), 0.0);
        let ones = DVector::from_element(f.grid().len(), c);
        let (interior, collar) = f.split(&(f.stiffness() * &ones)).unwrap();
        let maxdiag = f.stiffness().diagonal().amax();
        assert!((interior - f.tail_load()).amax() <= 1e-10 * maxdiag);
        assert!(collar.amax() <= 1e-10 * maxdiag);
        let lap = apply_fractional_laplacian(&f, &ones).unwrap();
        assert!(lap.amax() <= 1e-10);
    }

    #[test]
    fn parallel_assembly_is_bitwise_serial() {
        let spec = DomainSpec::new(-1.0, 2.0, 0.5, 0.35, TailMode::Constant(0.5)).unwrap();
        let grid = Grid1D::new(&spec, 40).unwrap();
        let beta = BetaField::from_fn(&grid, |x| x.abs()).unwrap();
        let p = assemble_form(&grid, &spec, &beta).unwrap();
        let q = assemble_form_serial(&grid, &spec, &beta).unwrap();
        assert_eq!(p.a_full(), q.a_full());
        assert_eq!(p.tail_load(), q.tail_load());
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let spec = DomainSpec::new(-1.0, 1.0, 1.0, 0.5, TailMode::Zero).unwrap();
        let other = DomainSpec::new(-1.0, 3.0, 1.0, 0.5, TailMode::Zero).unwrap();
        let grid = Grid1D::new(&other, 8).unwrap();
        let beta = BetaField::zero(&grid);
        assert!(matches!(
            assemble_form(&grid, &spec, &beta),
            Err(Error::Consistency(_))
        ));
        let grid = Grid1D::new(&spec, 8).unwrap();
        let beta = BetaField::new(vec![1.0; 3]).unwrap();
        assert!(matches!(
            assemble_form(&grid, &spec, &beta),
            Err(Error::Consistency(_))
        ));
    }

    #[test]
    fn laplacian_is_linear() {
        let f = setup(20, 0.6, TailMode::Zero, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_vec(&mut rng, f.grid().len());
        let v = random_vec(&mut rng, f.grid().len());
        let (al, be) = (0.7, -2.3);
        let lhs = apply_fractional_laplacian(&f, &(&u * al + &v * be)).unwrap();
        let rhs = apply_fractional_laplacian(&f, &u).unwrap() * al
            + apply_fractional_laplacian(&f, &v).unwrap() * be;
        assert!((lhs - &rhs).amax() <= 1e-12 * rhs.amax());
        assert!(apply_fractional_laplacian(&f, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn normal_derivative_of_constants_and_indicator() {
        let f = setup(512, 0.5, TailMode::Zero, 0.0);
        let ones = DVector::from_element(f.grid().len(), 1.0);
        assert!(nonlocal_normal_derivative(&f, &ones).unwrap().amax() < 1e-12);

        let indicator = f
            .grid()
            .sample_all(|x| if x.abs() < 1.0 { 1.0 } else { 0.0 });
        let nd = nonlocal_normal_derivative(&f, &indicator).unwrap();
        let collar = f.grid().collar_nodes();
        let k = collar
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - 2.0).abs().total_cmp(&(b.1 - 2.0).abs()))
            .unwrap()
            .0;
        let expected = -f.constant() * kernel_tail_rho(collar[k], f.spec()).unwrap();
        assert!((nd[k] - expected).abs() <= 0.02 * expected.abs());
        assert!((expected + 0.2122).abs() < 2e-3);
    }

    #[test]
    fn robin_extension_properties() {
        let f = setup(32, 0.5, TailMode::Zero, 0.0);
        let c = DVector::from_element(32, 2.5);
        let ext = robin_extension(&f, &c).unwrap();
        assert!((ext.add_scalar(-2.5)).amax() < 1e-12, "{}", ext);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = *f.spec();
        let grid = f.grid().clone();
        let beta = BetaField::from_fn(&grid, |x| 0.5 + x.abs()).unwrap();
        let g = assemble_form(&grid, &spec, &beta).unwrap();
        let u = random_vec(&mut rng, 32);
        let ext = robin_extension(&g, &u).unwrap();
        let full = g.join(&u, &ext).unwrap();
        let nd = nonlocal_normal_derivative(&g, &full).unwrap();
        let residual = nd
            + DVector::from_iterator(ext.len(), ext.iter().zip(beta.values()).map(|(e, b)| e * b));
        assert!(residual.amax() <= 1e-10);

        let big = BetaField::constant(&grid, 1e12).unwrap();
        let g = assemble_form(&grid, &spec, &big).unwrap();
        let ext = robin_extension(&g, &c).unwrap();
        assert!(ext.amax() < 1e-9);
    }

    #[test]
    fn dual_norm_cases() {
        let f = setup(24, 0.5, TailMode::Zero, 1.0);
        assert_eq!(dual_norm(&f, &DVector::zeros(24)).unwrap(), 0.0);

        // generic vector against an LU solve
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v = random_vec(&mut rng, 24);
        let mv = &v * f.h();
        let x = f.a_ii().lu().solve(&mv).unwrap();
        assert_relative_eq!(
            dual_norm(&f, &v).unwrap(),
            mv.dot(&x).sqrt(),
            max_relative = 1e-10
        );

        // saturation on generalized eigenvectors (M = h I)
        let eig = nalgebra::SymmetricEigen::new(f.a_ii() / f.h());
        for k in [0, 5, 23] {
            let w = eig.eigenvectors.column(k).into_owned();
            let lhs = dual_norm(&f, &w).unwrap() * f.energy_norm(&w).unwrap();
            assert_relative_eq!(lhs, f.h() * w.norm_squared(), max_relative = 1e-10);
        }
    }
}
