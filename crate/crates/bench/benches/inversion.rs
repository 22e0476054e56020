//! Timings of the expensive stages of a sine-decay inversion.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use heatsource_core::harness::{self, ManufacturedCase};
use heatsource_core::{
    solve, ForwardModel, MeasurementMesh, Measurements, Objective, ObjectiveConfig,
    SensitivityTables, SolverConfig, TruncationPolicy,
};

fn setup(
    n_x: usize,
    n_t: usize,
) -> (
    ForwardModel,
    MeasurementMesh,
    SensitivityTables,
    Measurements,
) {
    let case = ManufacturedCase::sine_decay(2.97).unwrap();
    let mesh = MeasurementMesh::new(&case.geometry, 100, 100).unwrap();
    let trunc = TruncationPolicy::default();
    let meas = harness::generate_measurements(&case, &mesh, &trunc, 0.0, 42).unwrap();
    let model = ForwardModel::new(case.geometry, trunc);
    let tables = model.sensitivities(&mesh, n_x, n_t).unwrap();
    (model, mesh, tables, meas)
}

fn benches(c: &mut Criterion) {
    for (n_x, n_t) in [(6, 5), (12, 9)] {
        let (model, mesh, tables, meas) = setup(n_x, n_t);
        let obj = Objective::new(&tables, &meas, ObjectiveConfig::new(1e-6).unwrap()).unwrap();
        let mut group = c.benchmark_group(format!("{n_x}x{n_t}"));
        group.sample_size(20);
        group.bench_function("sensitivities", |b| {
            b.iter(|| model.sensitivities(black_box(&mesh), n_x, n_t).unwrap())
        });
        group.bench_function("solve_default", |b| {
            b.iter(|| solve(black_box(&obj), &SolverConfig::default()).unwrap())
        });
        group.bench_function("ridge_solve", |b| {
            b.iter(|| black_box(&obj).ridge_solve().unwrap())
        });
        group.finish();
    }
}

criterion_group!(inversion, benches);
criterion_main!(inversion);
