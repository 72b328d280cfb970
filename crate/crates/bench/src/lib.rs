//! Shared fixtures for the solver benchmarks.

use std::sync::Arc;

use nalgebra::DVector;
use turnpike_core::{
    assemble_form, BetaField, ControlProblem, DomainSpec, FormMatrices, Grid1D, SolverSettings,
    TailMode, TimeGrid, Variant,
};

/// Reference geometry: `s = 1/2` on `(-1, 1)` with a unit collar and unit `β`.
pub fn reference_grid(n: usize) -> (DomainSpec, Grid1D, BetaField) {
    let spec = DomainSpec::new(-1.0, 1.0, 1.0, 0.5, TailMode::Zero).unwrap();
    let grid = Grid1D::new(&spec, n).unwrap();
    let beta = BetaField::constant(&grid, 1.0).unwrap();
    (spec, grid, beta)
}

pub fn reference_forms(n: usize) -> Arc<FormMatrices> {
    let (spec, grid, beta) = reference_grid(n);
    Arc::new(assemble_form(&grid, &spec, &beta).unwrap())
}

pub fn gaussian_target(forms: &FormMatrices) -> DVector<f64> {
    forms
        .grid()
        .sample_interior(|x| (-(x * x) / (2.0 * 0.3 * 0.3)).exp())
}

pub fn reference_problem(variant: Variant, n: usize, horizon: f64, steps: usize) -> ControlProblem {
    let forms = reference_forms(n);
    let target = gaussian_target(&forms);
    let grid = TimeGrid::new(horizon, steps, 1.0).unwrap();
    ControlProblem::new(variant, forms, target, grid, SolverSettings::default()).unwrap()
}
