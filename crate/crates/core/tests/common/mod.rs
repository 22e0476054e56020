#![allow(dead_code)]

use heatsource_core::harness::{self, ManufacturedCase};
use heatsource_core::{
    ForwardModel, Geometry, MeasurementMesh, Measurements, PolyParams, SensitivityTables,
    TruncationPolicy,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Composite double-exponential quadrature over `pieces` equal panels,
/// each refined to a relative accuracy of about 1e-14.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, pieces: usize) -> f64 {
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|p| {
            let lo = a + p as f64 * h;
            let rough = quadrature::double_exponential::integrate(&f, lo, lo + h, 1e-6).integral;
            let target = (1e-14 * rough.abs()).max(1e-300);
            quadrature::double_exponential::integrate(&f, lo, lo + h, target).integral
        })
        .sum()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_params(rng: &mut ChaCha8Rng, n_x: usize, n_t: usize) -> PolyParams {
    let mut v = |n: usize| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let phi = v(n_t);
    let theta = v(n_x);
    PolyParams::new(phi, theta).unwrap()
}

/// A small, well-conditioned problem: short domain, few terms.
pub fn small_problem(
    i_x: usize,
    i_t: usize,
    n_x: usize,
    n_t: usize,
) -> (SensitivityTables, Measurements) {
    let g = Geometry::new(0.0, 1.0, 0.5, 0.4).unwrap();
    let mesh = MeasurementMesh::new(&g, i_x, i_t).unwrap();
    let tables = ForwardModel::new(g, TruncationPolicy::default())
        .sensitivities(&mesh, n_x, n_t)
        .unwrap();
    let truth = PolyParams::new(
        (0..n_t).map(|k| 1.0 / (k + 1) as f64).collect(),
        (0..n_x).map(|m| if m == 1 { 1.0 } else { -0.3 }).collect(),
    )
    .unwrap();
    let r = tables.predict(&truth).unwrap();
    let meas = Measurements::new(r.final_profile, r.sensor_history).unwrap();
    (tables, meas)
}

/// Noiseless sine-decay data and tables.
pub fn sine_decay(
    sensor: f64,
    i: usize,
    n_x: usize,
    n_t: usize,
) -> (ManufacturedCase, SensitivityTables, Measurements) {
    let case = ManufacturedCase::sine_decay(sensor).unwrap();
    let mesh = MeasurementMesh::new(&case.geometry, i, i).unwrap();
    let trunc = TruncationPolicy::default();
    let meas = harness::generate_measurements(&case, &mesh, &trunc, 0.0, 42).unwrap();
    let tables = ForwardModel::new(case.geometry, trunc)
        .sensitivities(&mesh, n_x, n_t)
        .unwrap();
    (case, tables, meas)
}
