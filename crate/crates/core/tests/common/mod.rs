#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use turnpike_core::{assemble_form, BetaField, DomainSpec, FormMatrices, Grid1D, TailMode};

pub fn forms_with(n: usize, s: f64, collar: f64, tail: TailMode, beta: f64) -> Arc<FormMatrices> {
    let spec = DomainSpec::new(-1.0, 1.0, collar, s, tail).unwrap();
    let grid = Grid1D::new(&spec, n).unwrap();
    let beta = BetaField::constant(&grid, beta).unwrap();
    Arc::new(assemble_form(&grid, &spec, &beta).unwrap())
}

pub fn forms(n: usize) -> Arc<FormMatrices> {
    forms_with(n, 0.5, 1.0, TailMode::Zero, 1.0)
}

pub fn gaussian(forms: &FormMatrices, width: f64, amplitude: f64) -> DVector<f64> {
    forms
        .grid()
        .sample_interior(|x| amplitude * (-(x * x) / (2.0 * width * width)).exp())
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_series(rng: &mut ChaCha8Rng, steps: usize, n: usize) -> Vec<DVector<f64>> {
    (0..steps).map(|_| random_vec(rng, n)).collect()
}
