use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use turnpike_bench::{gaussian_target, reference_forms, reference_grid, reference_problem};
use turnpike_core::{
    assemble_form, assemble_form_serial, solve_optimal, solve_steady_system, StateSystem, Variant,
};

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assemble_form");
    for n in [128, 256, 512] {
        let (spec, grid, beta) = reference_grid(n);
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, _| {
            b.iter(|| assemble_form(&grid, &spec, &beta).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("serial", n), &n, |b, _| {
            b.iter(|| assemble_form_serial(&grid, &spec, &beta).unwrap())
        });
    }
    group.finish();
}

fn steady(c: &mut Criterion) {
    let mut group = c.benchmark_group("steady_solve");
    let forms = reference_forms(256);
    let target = gaussian_target(&forms);
    for variant in [Variant::Robin, Variant::Dirichlet] {
        let system = StateSystem::new(variant, &forms).unwrap();
        group.bench_function(variant.to_string(), |b| {
            b.iter(|| solve_steady_system(&system, &target).unwrap())
        });
    }
    group.finish();
}

fn optimal(c: &mut Criterion) {
    let mut group = c.benchmark_group("optimal_solve");
    group.sample_size(10);
    for variant in [Variant::Robin, Variant::Dirichlet] {
        let p = reference_problem(variant, 64, 2.0, 32);
        group.bench_function(variant.to_string(), |b| {
            b.iter(|| solve_optimal(&p).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, assembly, steady, optimal);
criterion_main!(benches);
