//! Manufactured cases, synthetic data, error metrics and parameter sweeps.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::cgm::{self, SolveOutcome, SolverConfig, Status};
use crate::csv_out;
use crate::error::{check_range, Error, Result};
use crate::forward::{ForwardModel, Geometry, MeasurementMesh, PolyParams};
use crate::objective::{Measurements, Objective, ObjectiveConfig};
use crate::series::TruncationPolicy;

/// Scalar function of one variable.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// Function of physical `x` and `t`.
pub type FieldFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A problem with known source, initial temperature and (optionally) the
/// full solution.
#[derive(Clone)]
pub struct ManufacturedCase {
    pub name: String,
    pub geometry: Geometry,
    pub exact_source: ScalarFn,
    /// In physical coordinates.
    pub exact_initial: ScalarFn,
    /// In physical coordinates.
    pub exact_solution: Option<FieldFn>,
}

impl fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManufacturedCase")
            .field("name", &self.name)
            .field("geometry", &self.geometry)
            .field("exact_solution", &self.exact_solution.is_some())
            .finish()
    }
}

/// Names accepted by [`builtin_case`].
pub const BUILTIN_CASES: &[&str] = &["sine_decay", "polynomial"];

/// Sensor positions of the standard error study.
pub const STUDY_SENSORS: [f64; 5] = [-1.34, -0.17, 0.99, 2.15, 2.97];
/// `(N_x, N_t)` sizes of the standard error study.
pub const STUDY_SIZES: [(usize, usize); 2] = [(6, 5), (12, 9)];

impl ManufacturedCase {
    /// `u = (sin x + 1) e^{-t}` on `(-π/2, 3π/2) × (0, 2)`, so
    /// `F = -e^{-t}` and `u₀ = sin x + 1`.
    pub fn sine_decay(sensor: f64) -> Result<Self> {
        Ok(Self {
            name: "sine_decay".into(),
            geometry: Geometry::new(-PI / 2.0, 2.0 * PI, 2.0, sensor)?,
            exact_source: Arc::new(|t| -(-t).exp()),
            exact_initial: Arc::new(|x| x.sin() + 1.0),
            exact_solution: Some(Arc::new(|x, t| (x.sin() + 1.0) * (-t).exp())),
        })
    }

    /// `F = 1 - t/2`, `u₀ = x'(L - x')/L`: inside the polynomial model space,
    /// so data come from the forward model.
    pub fn polynomial(geometry: Geometry) -> Self {
        let (a, l) = (geometry.offset, geometry.length);
        Self {
            name: "polynomial".into(),
            geometry,
            exact_source: Arc::new(|t| 1.0 - 0.5 * t),
            exact_initial: Arc::new(move |x| (x - a) * (l - (x - a)) / l),
            exact_solution: None,
        }
    }

    pub fn with_geometry(mut self, geometry: Geometry) -> Self {
        if self.name == "polynomial" {
            return Self::polynomial(geometry);
        }
        self.geometry = geometry;
        self
    }

    pub fn with_sensor(self, sensor: f64) -> Result<Self> {
        let g = self.geometry;
        let geom = Geometry::new(g.offset, g.length, g.t_final, sensor)?;
        Ok(self.with_geometry(geom))
    }

    /// Checks that `u₀` vanishes at both ends of the domain.
    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        for x in [g.offset, g.right()] {
            let v = (self.exact_initial)(x);
            if v.abs() > 1e-8 {
                return Err(Error::Invalid(format!(
                    "case {}: initial temperature {v:e} at boundary x = {x} is not zero",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// Built-in case registry.
pub fn builtin_case(name: &str, geometry: Option<Geometry>) -> Result<ManufacturedCase> {
    let case = match name {
        "sine_decay" => ManufacturedCase::sine_decay(2.97)?,
        "polynomial" => ManufacturedCase::polynomial(Geometry::new(0.0, 2.0 * PI, 2.0, PI)?),
        other => {
            return Err(Error::Invalid(format!(
                "unknown case {other:?}; known cases: {}",
                BUILTIN_CASES.join(", ")
            )))
        }
    };
    Ok(match geometry {
        Some(g) => case.with_geometry(g),
        None => case,
    })
}

/// Least-squares monomial fit `Σ c_p x^p`, `p < n`, of samples.
/// Returns the coefficients and the RMS fit residual.
pub fn fit_polynomial(nodes: &[f64], values: &[f64], n: usize) -> Result<(Vec<f64>, f64)> {
    if nodes.len() != values.len() {
        return Err(Error::Shape {
            what: "fit samples",
            expected: nodes.len(),
            actual: values.len(),
        });
    }
    check_range(
        "n",
        n as f64,
        n >= 1 && n <= nodes.len(),
        format!("[1, {}]", nodes.len()),
    )?;
    let mut a = DMatrix::from_fn(nodes.len(), n, |i, p| nodes[i].powi(p as i32));
    let scales: Vec<f64> = (0..n)
        .map(|c| 1.0 / a.column(c).norm().max(f64::MIN_POSITIVE))
        .collect();
    for (c, s) in scales.iter().enumerate() {
        a.column_mut(c).scale_mut(*s);
    }
    let b = DVector::from_column_slice(values);
    let svd = a.clone().svd(true, true);
    let y = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::Invalid(format!("fit failed: {e}")))?;
    let resid = (&a * &y - &b).norm() / (nodes.len() as f64).sqrt();
    Ok((y.iter().zip(&scales).map(|(v, s)| v * s).collect(), resid))
}

/// Polynomial stand-ins for a case's exact unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceParams {
    pub params: PolyParams,
    /// RMS residual of the source fit on the time mesh.
    pub source_fit_rms: f64,
    /// RMS residual of the initial-temperature fit on the space mesh.
    pub initial_fit_rms: f64,
}

/// Fits `F` and `u₀` on all mesh nodes with `n_t` and `n_x` coefficients.
pub fn reference_params(
    case: &ManufacturedCase,
    mesh: &MeasurementMesh,
    n_x: usize,
    n_t: usize,
) -> Result<ReferenceParams> {
    let g = &case.geometry;
    let f: Vec<f64> = mesh
        .t_nodes
        .iter()
        .map(|&t| (case.exact_source)(t))
        .collect();
    let u0: Vec<f64> = mesh
        .x_nodes
        .iter()
        .map(|&x| (case.exact_initial)(g.unshift(x)))
        .collect();
    let (phi, source_fit_rms) = fit_polynomial(&mesh.t_nodes, &f, n_t)?;
    let (theta, initial_fit_rms) = fit_polynomial(&mesh.x_nodes, &u0, n_x)?;
    Ok(ReferenceParams {
        params: PolyParams::new(phi, theta)?,
        source_fit_rms,
        initial_fit_rms,
    })
}

/// Degree used when a case without a closed-form solution is pushed
/// through the forward model.
const DATA_FIT_TERMS: usize = 14;

/// Samples `u(x_i, t_f)`, `i = 1..=I_x`, and `u(x*, t_j)`, `j = 1..=I_t`,
/// adding seeded Gaussian noise of standard deviation
/// `noise_level * max|u|` when `noise_level > 0`.
pub fn generate_measurements(
    case: &ManufacturedCase,
    mesh: &MeasurementMesh,
    trunc: &TruncationPolicy,
    noise_level: f64,
    seed: u64,
) -> Result<Measurements> {
    check_range(
        "noise_level",
        noise_level,
        noise_level >= 0.0 && noise_level.is_finite(),
        "[0, inf)",
    )?;
    let g = case.geometry;
    let (mut final_profile, mut sensor_history): (Vec<f64>, Vec<f64>) = match &case.exact_solution {
        Some(u) => (
            mesh.x_data()
                .iter()
                .map(|&x| u(g.unshift(x), g.t_final))
                .collect(),
            mesh.t_data().iter().map(|&t| u(g.sensor, t)).collect(),
        ),
        None => {
            let n_x = DATA_FIT_TERMS.min(mesh.x_nodes.len());
            let n_t = DATA_FIT_TERMS.min(mesh.t_nodes.len());
            let p = reference_params(case, mesh, n_x, n_t)?.params;
            let model = ForwardModel::new(g, *trunc);
            (
                mesh.x_data()
                    .iter()
                    .map(|&x| model.row(x, g.t_final, n_x, n_t).map(|r| r.response(&p)))
                    .collect::<Result<_>>()?,
                mesh.t_data()
                    .iter()
                    .map(|&t| model.sensor_row(t, n_x, n_t).map(|r| r.response(&p)))
                    .collect::<Result<_>>()?,
            )
        }
    };
    if noise_level > 0.0 {
        let peak = final_profile
            .iter()
            .chain(&sensor_history)
            .fold(0.0, |m: f64, v| m.max(v.abs()));
        let normal = Normal::new(0.0, noise_level * peak)
            .map_err(|e| Error::Invalid(format!("noise model: {e}")))?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for v in final_profile.iter_mut().chain(sensor_history.iter_mut()) {
            *v += normal.sample(&mut rng);
        }
    }
    Measurements::new(final_profile, sensor_history)
}

/// `(E_F, E_u₀)`: root-mean-square errors on all mesh nodes, normalized by
/// `I_t` and `I_x`.
pub fn rmse(case: &ManufacturedCase, params: &PolyParams, mesh: &MeasurementMesh) -> (f64, f64) {
    let g = &case.geometry;
    let e_f = mesh
        .t_nodes
        .iter()
        .map(|&t| ((case.exact_source)(t) - params.source(t)).powi(2))
        .sum::<f64>()
        / mesh.i_t() as f64;
    let e_u0 = mesh
        .x_nodes
        .iter()
        .map(|&x| ((case.exact_initial)(g.unshift(x)) - params.initial(x)).powi(2))
        .sum::<f64>()
        / mesh.i_x() as f64;
    (e_f.sqrt(), e_u0.sqrt())
}

/// Everything needed to run one inversion besides the case itself.
#[derive(Debug, Clone, PartialEq)]
pub struct InversionSpec {
    pub n_x: usize,
    pub n_t: usize,
    pub i_x: usize,
    pub i_t: usize,
    pub alpha: f64,
    pub noise_level: f64,
    pub seed: u64,
    pub trunc: TruncationPolicy,
    pub solver: SolverConfig,
}

impl Default for InversionSpec {
    fn default() -> Self {
        Self {
            n_x: 12,
            n_t: 9,
            i_x: 100,
            i_t: 100,
            alpha: 1e-6,
            noise_level: 0.0,
            seed: 42,
            trunc: TruncationPolicy::default(),
            solver: SolverConfig::default(),
        }
    }
}

/// Reconstruction errors and run metadata for one inversion.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub e_f: f64,
    pub e_u0: f64,
    pub iterations: usize,
    pub final_cost: f64,
    pub status: Status,
    pub n_x: usize,
    pub n_t: usize,
    pub sensor: f64,
    pub alpha: f64,
    /// RMS error of the best polynomial fit with the same number of terms.
    pub source_fit_rms: f64,
    pub initial_fit_rms: f64,
}

/// Result of [`run_inversion`].
#[derive(Debug, Clone)]
pub struct Inversion {
    pub mesh: MeasurementMesh,
    pub measurements: Measurements,
    pub outcome: SolveOutcome,
    pub report: ErrorReport,
}

/// Data generation, CGM solve and error evaluation for one case.
pub fn run_inversion(case: &ManufacturedCase, spec: &InversionSpec) -> Result<Inversion> {
    case.validate()?;
    let mesh = MeasurementMesh::new(&case.geometry, spec.i_x, spec.i_t)?;
    let meas = generate_measurements(case, &mesh, &spec.trunc, spec.noise_level, spec.seed)?;
    let model = ForwardModel::new(case.geometry, spec.trunc);
    let tables = model.sensitivities(&mesh, spec.n_x, spec.n_t)?;
    let obj = Objective::new(&tables, &meas, ObjectiveConfig::new(spec.alpha)?)?;
    let outcome = cgm::solve(&obj, &spec.solver)?;
    let (e_f, e_u0) = rmse(case, &outcome.params, &mesh);
    let fit = reference_params(case, &mesh, spec.n_x, spec.n_t)?;
    let (fit_f, fit_u0) = rmse(case, &fit.params, &mesh);
    let report = ErrorReport {
        e_f,
        e_u0,
        iterations: outcome.report.iterations,
        final_cost: outcome.report.final_cost,
        status: outcome.report.status,
        n_x: spec.n_x,
        n_t: spec.n_t,
        sensor: case.geometry.sensor,
        alpha: spec.alpha,
        source_fit_rms: fit_f,
        initial_fit_rms: fit_u0,
    };
    Ok(Inversion {
        mesh,
        measurements: meas,
        outcome,
        report,
    })
}

/// One point of a sweep grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub n_x: usize,
    pub n_t: usize,
    pub sensor: f64,
    pub alpha: f64,
}

/// Cartesian product in the order sizes, sensors, alphas.
pub fn sweep_grid(sizes: &[(usize, usize)], sensors: &[f64], alphas: &[f64]) -> Vec<SweepCell> {
    let mut cells = Vec::new();
    for &(n_x, n_t) in sizes {
        for &sensor in sensors {
            for &alpha in alphas {
                cells.push(SweepCell {
                    n_x,
                    n_t,
                    sensor,
                    alpha,
                });
            }
        }
    }
    cells
}

/// The ten cells of the standard error study.
pub fn study_grid(alpha: f64) -> Vec<SweepCell> {
    sweep_grid(&STUDY_SIZES, &STUDY_SENSORS, &[alpha])
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub cell: SweepCell,
    pub result: std::result::Result<ErrorReport, String>,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Soft observations (logged, never fatal).
    pub notes: Vec<String>,
}

/// Runs every cell of `grid`; failures are recorded per row. `jobs > 1`
/// runs cells on a dedicated thread pool. Row order follows `grid`.
pub fn sweep(
    case: &ManufacturedCase,
    grid: &[SweepCell],
    base: &InversionSpec,
    jobs: usize,
) -> Result<SweepTable> {
    if grid.is_empty() {
        return Err(Error::Invalid("sweep grid is empty".into()));
    }
    let run_cell = |cell: &SweepCell| -> SweepRow {
        let result = case
            .clone()
            .with_sensor(cell.sensor)
            .and_then(|c| {
                let spec = InversionSpec {
                    n_x: cell.n_x,
                    n_t: cell.n_t,
                    alpha: cell.alpha,
                    ..base.clone()
                };
                run_inversion(&c, &spec)
            })
            .map(|inv| inv.report)
            .map_err(|e| e.to_string());
        SweepRow {
            cell: *cell,
            result,
        }
    };
    let rows: Vec<SweepRow> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
        pool.install(|| grid.par_iter().map(run_cell).collect())
    } else {
        grid.iter().map(run_cell).collect()
    };
    let notes = sensor_trend_notes(&rows);
    for n in &notes {
        log::info!("{n}");
    }
    Ok(SweepTable { rows, notes })
}

/// For each `(N_x, N_t, α)` group, notes whether `E_u₀` decreases as the
/// sensor moves right.
fn sensor_trend_notes(rows: &[SweepRow]) -> Vec<String> {
    // (n_x, n_t, alpha bits) -> (sensor, E_u0) pairs.
    type Group = ((usize, usize, u64), Vec<(f64, f64)>);
    let mut groups: Vec<Group> = Vec::new();
    for row in rows {
        let Ok(rep) = &row.result else { continue };
        let key = (row.cell.n_x, row.cell.n_t, row.cell.alpha.to_bits());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push((row.cell.sensor, rep.e_u0)),
            None => groups.push((key, vec![(row.cell.sensor, rep.e_u0)])),
        }
    }
    groups
        .into_iter()
        .filter(|(_, v)| v.len() > 1)
        .map(|((n_x, n_t, a), mut v)| {
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            let decreasing = v.windows(2).all(|w| w[1].1 <= w[0].1);
            format!(
                "{n_x}x{n_t} alpha={:e}: E_u0 {} as the sensor moves right",
                f64::from_bits(a),
                if decreasing {
                    "decreases monotonically"
                } else {
                    "does not decrease monotonically"
                }
            )
        })
        .collect()
}

/// Writes the four sensitivity families as `{run_id}_j11.csv`,
/// `{run_id}_j21.csv`, `{run_id}_j12.csv`, `{run_id}_j22.csv`.
///
/// Spatial tables use the physical `x` of every mesh node; temporal tables
/// use `t_j`, `j >= 1`.
pub fn emit_sensitivity_data(
    model: &ForwardModel,
    n_x: usize,
    n_t: usize,
    mesh: &MeasurementMesh,
    out_dir: &Path,
    run_id: &str,
) -> Result<Vec<PathBuf>> {
    if mesh.x_nodes.len() < 2 || mesh.t_nodes.len() < 2 {
        return Err(Error::Invalid("sensitivity mesh is empty".into()));
    }
    let tables = model.sensitivities(mesh, n_x, n_t)?;
    let g = &model.geometry;
    let header = |abscissa: &str, prefix: &str, n: usize| -> Vec<String> {
        std::iter::once(abscissa.to_string())
            .chain((1..=n).map(|i| format!("{prefix}{i}")))
            .collect()
    };
    let spatial = |pick: &dyn Fn(&crate::forward::SensitivityRow) -> Vec<f64>| -> Vec<Vec<f64>> {
        mesh.x_nodes
            .iter()
            .zip(&tables.final_rows)
            .map(|(&x, row)| std::iter::once(g.unshift(x)).chain(pick(row)).collect())
            .collect()
    };
    let temporal = |pick: &dyn Fn(&crate::forward::SensitivityRow) -> Vec<f64>| -> Vec<Vec<f64>> {
        mesh.t_data()
            .iter()
            .zip(&tables.sensor_rows)
            .map(|(&t, row)| std::iter::once(t).chain(pick(row)).collect())
            .collect()
    };
    let theta = |r: &crate::forward::SensitivityRow| r.theta.clone();
    let phi = |r: &crate::forward::SensitivityRow| r.phi.clone();
    let outputs = [
        ("j11", header("x", "m", n_x), spatial(&theta)),
        ("j21", header("t", "m", n_x), temporal(&theta)),
        ("j12", header("x", "k", n_t), spatial(&phi)),
        ("j22", header("t", "k", n_t), temporal(&phi)),
    ];
    let mut paths = Vec::with_capacity(4);
    for (name, header, rows) in outputs {
        let path = csv_out::table_path(out_dir, run_id, name);
        csv_out::write_table(&path, &header, &rows)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Default geometry of the sensitivity tables: `L = 2π`, `t_f = 2`, `x* = π`.
pub fn sensitivity_geometry() -> Geometry {
    Geometry {
        offset: 0.0,
        length: 2.0 * PI,
        t_final: 2.0,
        sensor: PI,
    }
}

/// Samples of the exact and reconstructed unknowns on the full mesh:
/// rows `(t, F_exact, F_rec)` and `(x, u0_exact, u0_rec)` with physical `x`.
pub fn reconstruction_samples(
    case: &ManufacturedCase,
    params: &PolyParams,
    mesh: &MeasurementMesh,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let g = &case.geometry;
    let source = mesh
        .t_nodes
        .iter()
        .map(|&t| vec![t, (case.exact_source)(t), params.source(t)])
        .collect();
    let initial = mesh
        .x_nodes
        .iter()
        .map(|&x| {
            let xp = g.unshift(x);
            vec![xp, (case.exact_initial)(xp), params.initial(x)]
        })
        .collect();
    (source, initial)
}
