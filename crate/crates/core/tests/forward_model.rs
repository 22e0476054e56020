//! Forward responses: analytic solutions, linearity, finite differences and
//! boundary behaviour.

mod common;

use std::f64::consts::PI;

use common::{random_params, rng};
use heatsource_core::harness::{self, sensitivity_geometry, ManufacturedCase};
use heatsource_core::{
    Error, ForwardModel, Geometry, MeasurementMesh, PolyParams, Probe, TruncationPolicy,
};
use proptest::prelude::*;

fn model(g: Geometry) -> ForwardModel {
    ForwardModel::new(g, TruncationPolicy::default())
}

/// Largest deviation of a reference fit from the exact unknowns on a fine grid.
fn fit_deviation(case: &ManufacturedCase, p: &PolyParams) -> (f64, f64) {
    let g = case.geometry;
    let df = (0..=400)
        .map(|j| g.t_final * j as f64 / 400.0)
        .map(|t| ((case.exact_source)(t) - p.source(t)).abs())
        .fold(0.0, f64::max);
    let du = (0..=400)
        .map(|i| g.length * i as f64 / 400.0)
        .map(|x| ((case.exact_initial)(g.unshift(x)) - p.initial(x)).abs())
        .fold(0.0, f64::max);
    (df, du)
}

#[test]
fn zero_params_give_zero_temperature() {
    let m = model(sensitivity_geometry());
    let p = PolyParams::zeros(5, 4);
    for i in 0..=10 {
        assert_eq!(m.eval_u_final(&p, 0.6 * i as f64).unwrap(), 0.0);
    }
    for j in 1..=10 {
        assert_eq!(m.eval_u_interior(&p, 0.2 * j as f64).unwrap(), 0.0);
    }
}

#[test]
fn sine_decay_final_profile_matches_analytic_solution() {
    let case = ManufacturedCase::sine_decay(PI).unwrap();
    let mesh = MeasurementMesh::new(&case.geometry, 100, 100).unwrap();
    let fit = harness::reference_params(&case, &mesh, 14, 14)
        .unwrap()
        .params;
    let (df, du) = fit_deviation(&case, &fit);
    // |δu| <= max|δu₀| + t_f max|δF| by the maximum principle.
    let tol = du + 2.0 * df + 1e-8;
    let m = model(case.geometry);
    for i in 0..=40 {
        let x = -PI / 2.0 + 2.0 * PI * i as f64 / 40.0;
        let u = m.eval_u_final(&fit, x).unwrap();
        let exact = (x.sin() + 1.0) * (-2f64).exp();
        assert!(
            (u - exact).abs() <= tol,
            "x={x}: {u} vs {exact} (tol {tol:e})"
        );
    }
    let u = m.eval_u_interior(&fit, 1.0).unwrap();
    assert!((u - (-1f64).exp()).abs() <= tol, "{u}");
}

#[test]
fn polynomial_case_satisfies_the_heat_equation() {
    let g = sensitivity_geometry();
    let case = ManufacturedCase::polynomial(g);
    let l = g.length;
    let p = PolyParams::new(vec![1.0, -0.5], vec![0.0, 1.0, -1.0 / l]).unwrap();
    let m = model(g);
    let u = |x: f64, t: f64| m.row(x, t, 3, 2).unwrap().response(&p);
    let h = 1e-3;
    for &(x, t) in &[(1.0, 0.5), (3.0, 1.0), (5.5, 1.7)] {
        let u_t = (u(x, t + h) - u(x, t - h)) / (2.0 * h);
        let u_xx = (u(x + h, t) - 2.0 * u(x, t) + u(x - h, t)) / (h * h);
        let residual = u_t - u_xx - (case.exact_source)(t);
        assert!(residual.abs() < 1e-4, "({x}, {t}): {residual:e}");
    }
    // Initial condition: u(x, t) → u₀(x) as t → 0.
    for &x in &[0.5, 2.0, 4.0] {
        let u0 = (case.exact_initial)(x);
        assert!((u(x, 1e-5) - u0).abs() < 1e-3, "x={x}");
    }
}

#[test]
fn final_profile_vanishes_at_both_ends() {
    let g = Geometry::new(-PI / 2.0, 2.0 * PI, 2.0, 1.0).unwrap();
    let m = model(g);
    let p = random_params(&mut rng(3), 7, 6);
    for x in [g.offset, g.right()] {
        assert!(m.eval_u_final(&p, x).unwrap().abs() < 1e-10);
    }
}

#[test]
fn sensitivities_equal_finite_differences() {
    let g = Geometry::new(-PI / 2.0, 2.0 * PI, 2.0, 0.99).unwrap();
    let m = model(g);
    let mut r = rng(11);
    let base = random_params(&mut r, 6, 5);
    let probes = [
        Probe::Final(0.3),
        Probe::Final(2.5),
        Probe::Sensor(0.7),
        Probe::Sensor(2.0),
    ];
    for probe in probes {
        let row = match probe {
            Probe::Final(x) => m.final_row(x, 6, 5).unwrap(),
            Probe::Sensor(t) => m.sensor_row(t, 6, 5).unwrap(),
        };
        let eval = |p: &PolyParams| match probe {
            Probe::Final(x) => m.eval_u_final(p, x).unwrap(),
            Probe::Sensor(t) => m.eval_u_interior(p, t).unwrap(),
        };
        let n = base.len();
        for c in 0..n {
            let mut e = vec![0.0; n];
            e[c] = 1.0;
            let e = PolyParams::from_flat(&e, 6, 5).unwrap();
            let h = 1e-3;
            let fd = (eval(&base.add_scaled(h, &e)) - eval(&base.add_scaled(-h, &e))) / (2.0 * h);
            let exact = if c < 5 { row.phi[c] } else { row.theta[c - 5] };
            assert!(
                (fd - exact).abs() <= 1e-6 * exact.abs().max(1e-8),
                "{probe:?} coefficient {c}: {fd} vs {exact}"
            );
        }
    }
}

#[test]
fn direction_response_contract() {
    let g = sensitivity_geometry();
    let m = model(g);
    // Unit source direction equals the source sensitivity.
    let mut d = PolyParams::zeros(3, 4);
    d.phi[2] = 1.0;
    let row = m.final_row(1.7, 3, 4).unwrap();
    assert_eq!(
        m.direction_response(&d, Probe::Final(1.7)).unwrap(),
        row.phi[2]
    );
    assert_eq!(
        m.direction_response(&PolyParams::zeros(3, 4), Probe::Sensor(1.0))
            .unwrap(),
        0.0
    );
    // Both blocks at once is rejected.
    d.theta[0] = 1.0;
    assert!(matches!(
        m.direction_response(&d, Probe::Final(1.0)),
        Err(Error::MixedDirection)
    ));
    // u(φ - βd_φ, θ) = u(φ, θ) - β response(d_φ).
    let mut r = rng(5);
    let p = random_params(&mut r, 3, 4);
    let dir = random_params(&mut r, 3, 4).source_part();
    let beta = 0.37;
    for probe in [Probe::Final(2.2), Probe::Sensor(0.9)] {
        let eval = |q: &PolyParams| match probe {
            Probe::Final(x) => m.eval_u_final(q, x).unwrap(),
            Probe::Sensor(t) => m.eval_u_interior(q, t).unwrap(),
        };
        let lhs = eval(&p.add_scaled(-beta, &dir));
        let rhs = eval(&p) - beta * m.direction_response(&dir, probe).unwrap();
        assert!((lhs - rhs).abs() < 1e-13, "{lhs} vs {rhs}");
    }
}

#[test]
fn difference_of_responses_is_response_of_difference() {
    let g = Geometry::new(-PI / 2.0, 2.0 * PI, 2.0, 2.15).unwrap();
    let mesh = MeasurementMesh::new(&g, 30, 20).unwrap();
    let tables = model(g).sensitivities(&mesh, 6, 5).unwrap();
    let mut r = rng(9);
    let (p, q) = (random_params(&mut r, 6, 5), random_params(&mut r, 6, 5));
    let (up, uq) = (tables.predict(&p).unwrap(), tables.predict(&q).unwrap());
    let v = tables.predict(&p.add_scaled(-1.0, &q)).unwrap();
    for i in 0..v.final_profile.len() {
        assert!((up.final_profile[i] - uq.final_profile[i] - v.final_profile[i]).abs() < 1e-12);
    }
    for j in 0..v.sensor_history.len() {
        assert!((up.sensor_history[j] - uq.sensor_history[j] - v.sensor_history[j]).abs() < 1e-12);
    }
}

#[test]
fn sensitivity_shapes_on_default_geometry() {
    let g = sensitivity_geometry();
    let mesh = MeasurementMesh::new(&g, 60, 60).unwrap();
    let tables = model(g).sensitivities(&mesh, 6, 5).unwrap();
    let last = tables.final_rows.len() - 1;
    for m in 0..6 {
        assert!(tables.final_rows[0].theta[m].abs() < 1e-10);
        assert!(tables.final_rows[last].theta[m].abs() < 1e-10);
    }
    for k in 0..5 {
        assert!(tables.final_rows[0].phi[k].abs() < 1e-10);
        assert!(tables.final_rows[last].phi[k].abs() < 1e-10);
    }
    // A constant unit source only ever adds heat at the sensor.
    let j22_1: Vec<f64> = tables.sensor_rows.iter().map(|r| r.phi[0]).collect();
    assert!(j22_1.windows(2).all(|w| w[1] >= w[0]));
    assert!(j22_1.iter().all(|&v| v > 0.0));
    assert_eq!(tables.exhausted, 0);
}

#[test]
fn domain_violations_are_errors() {
    let m = model(sensitivity_geometry());
    let p = PolyParams::zeros(2, 2);
    assert!(m.eval_u_final(&p, -0.1).is_err());
    assert!(m.eval_u_final(&p, 7.0).is_err());
    assert!(m.eval_u_interior(&p, 0.0).is_err());
    assert!(m.eval_u_interior(&p, 2.5).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn superposition(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0, x in 0.0f64..6.2, t in 0.05f64..2.0) {
        let m = model(sensitivity_geometry());
        let mut r = rng(seed);
        let (p, q) = (random_params(&mut r, 5, 4), random_params(&mut r, 5, 4));
        let combo = p.scaled(a).add_scaled(b, &q);
        let lhs = m.eval_u_final(&combo, x).unwrap();
        let rhs = a * m.eval_u_final(&p, x).unwrap() + b * m.eval_u_final(&q, x).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-11 * (1.0 + lhs.abs()));
        let lhs = m.eval_u_interior(&combo, t).unwrap();
        let rhs = a * m.eval_u_interior(&p, t).unwrap() + b * m.eval_u_interior(&q, t).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-11 * (1.0 + lhs.abs()));
    }
}
