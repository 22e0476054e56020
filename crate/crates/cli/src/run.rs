//! Command execution and artifact writing.

use std::path::{Path, PathBuf};

use heatsource_core::csv_out::{self, table_path, write_atomic, write_table};
use heatsource_core::harness::{self, InversionSpec, ManufacturedCase, SweepCell};
use heatsource_core::{
    ForwardModel, Geometry, InitPolicy, MeasurementMesh, PolyParams, SolverConfig, Status,
    TruncationPolicy,
};

use crate::config::{Command, RunConfig};
use crate::error::CliError;

/// Files written by a run and its final status line.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub summary: PathBuf,
    /// `result.*` pairs, also written to the summary.
    pub results: Vec<(String, String)>,
    /// Set when an inversion stopped on its iteration cap.
    pub not_converged: Option<(usize, f64)>,
}

impl RunOutput {
    pub fn result(&self, key: &str) -> Option<&str> {
        self.results
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

fn geometry(cfg: &RunConfig) -> Result<Geometry, CliError> {
    Ok(Geometry::new(
        cfg.offset,
        cfg.length,
        cfg.t_final,
        cfg.sensor,
    )?)
}

fn trunc(cfg: &RunConfig) -> Result<TruncationPolicy, CliError> {
    Ok(TruncationPolicy::new(cfg.tol, cfg.max_terms)?)
}

fn case(cfg: &RunConfig) -> Result<ManufacturedCase, CliError> {
    Ok(harness::builtin_case(&cfg.case, Some(geometry(cfg)?))?)
}

fn inversion_spec(cfg: &RunConfig) -> Result<InversionSpec, CliError> {
    let init = match (&cfg.init_phi, &cfg.init_theta) {
        (Some(p), Some(t)) => InitPolicy::Given(PolyParams::new(p.clone(), t.clone())?),
        _ => InitPolicy::Zeros,
    };
    Ok(InversionSpec {
        n_x: cfg.n_x,
        n_t: cfg.n_t,
        i_x: cfg.i_x,
        i_t: cfg.i_t,
        alpha: cfg.alpha,
        noise_level: cfg.noise_level,
        seed: cfg.seed,
        trunc: trunc(cfg)?,
        solver: SolverConfig {
            variant: cfg.variant,
            epsilon: cfg.epsilon,
            max_iters: cfg.max_iters,
            restart_period: cfg.restart_period,
            init,
            ..SolverConfig::default()
        },
    })
}

fn fmt(v: f64) -> String {
    csv_out::format_value(v)
}

fn list(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn write_summary(cfg: &RunConfig, results: &[(String, String)]) -> Result<PathBuf, CliError> {
    let path = cfg.out_dir.join(format!("{}_summary.txt", cfg.run_id));
    let mut text = cfg.summary_lines().join("\n");
    text.push('\n');
    for (k, v) in results {
        text.push_str(&format!("result.{k}={v}\n"));
    }
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

/// Runs the configured command and writes its artifacts under `out_dir`.
pub fn dispatch(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let (files, results, not_converged) = match cfg.command {
        Command::Forward => forward(cfg)?,
        Command::Invert => invert(cfg)?,
        Command::Sweep => sweep(cfg)?,
        Command::Sensitivity => sensitivity(cfg)?,
    };
    let summary = write_summary(cfg, &results)?;
    Ok(RunOutput {
        files,
        summary,
        results,
        not_converged,
    })
}

type Artifacts = (Vec<PathBuf>, Vec<(String, String)>, Option<(usize, f64)>);

fn forward(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let case = case(cfg)?;
    let g = case.geometry;
    let mesh = MeasurementMesh::new(&g, cfg.i_x, cfg.i_t)?;
    let params = match (&cfg.phi, &cfg.theta) {
        (Some(p), Some(t)) => PolyParams::new(p.clone(), t.clone())?,
        _ => harness::reference_params(&case, &mesh, cfg.n_x, cfg.n_t)?.params,
    };
    let model = ForwardModel::new(g, trunc(cfg)?);
    let tables = model.sensitivities(&mesh, params.n_x(), params.n_t())?;
    let final_rows: Vec<Vec<f64>> = mesh
        .x_nodes
        .iter()
        .zip(&tables.final_rows)
        .map(|(&x, row)| vec![g.unshift(x), row.response(&params)])
        .collect();
    let sensor_rows: Vec<Vec<f64>> = mesh
        .t_data()
        .iter()
        .zip(&tables.sensor_rows)
        .map(|(&t, row)| vec![t, row.response(&params)])
        .collect();
    let final_path = table_path(&cfg.out_dir, &cfg.run_id, "final");
    write_table(&final_path, &["x", "u"], &final_rows)?;
    let sensor_path = table_path(&cfg.out_dir, &cfg.run_id, "sensor");
    write_table(&sensor_path, &["t", "u"], &sensor_rows)?;
    let results = vec![
        ("phi".to_string(), list(&params.phi)),
        ("theta".to_string(), list(&params.theta)),
        (
            "truncation_exhausted_rows".to_string(),
            tables.exhausted.to_string(),
        ),
    ];
    Ok((vec![final_path, sensor_path], results, None))
}

fn invert(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let case = case(cfg)?;
    let inv = harness::run_inversion(&case, &inversion_spec(cfg)?)?;
    let r = &inv.report;

    let trace: Vec<Vec<f64>> = inv
        .outcome
        .trace
        .records
        .iter()
        .map(|rec| {
            vec![
                rec.iteration as f64,
                rec.cost,
                rec.grad_phi_norm,
                rec.grad_theta_norm,
                rec.gamma_phi,
                rec.gamma_theta,
                rec.beta_phi,
                rec.beta_theta,
            ]
        })
        .collect();
    let trace_path = table_path(&cfg.out_dir, &cfg.run_id, "trace");
    write_table(
        &trace_path,
        &[
            "iteration",
            "cost",
            "grad_phi_norm",
            "grad_theta_norm",
            "gamma_phi",
            "gamma_theta",
            "beta_phi",
            "beta_theta",
        ],
        &trace,
    )?;
    let (source, initial) = harness::reconstruction_samples(&case, &inv.outcome.params, &inv.mesh);
    let source_path = table_path(&cfg.out_dir, &cfg.run_id, "source");
    write_table(&source_path, &["t", "F_exact", "F_reconstructed"], &source)?;
    let initial_path = table_path(&cfg.out_dir, &cfg.run_id, "initial");
    write_table(
        &initial_path,
        &["x", "u0_exact", "u0_reconstructed"],
        &initial,
    )?;

    let st = &inv.outcome.report.stationarity;
    let results = vec![
        ("status".to_string(), r.status.to_string()),
        ("iterations".to_string(), r.iterations.to_string()),
        ("final_cost".to_string(), fmt(r.final_cost)),
        ("e_f".to_string(), fmt(r.e_f)),
        ("e_u0".to_string(), fmt(r.e_u0)),
        ("source_fit_rms".to_string(), fmt(r.source_fit_rms)),
        ("initial_fit_rms".to_string(), fmt(r.initial_fit_rms)),
        (
            "stationarity_margin_mixed".to_string(),
            fmt(st.min_margin_mixed),
        ),
        (
            "stationarity_margin_symmetric".to_string(),
            fmt(st.min_margin_symmetric),
        ),
        ("phi".to_string(), list(&inv.outcome.params.phi)),
        ("theta".to_string(), list(&inv.outcome.params.theta)),
    ];
    let not_converged = (r.status == Status::NotConverged).then_some((r.iterations, r.final_cost));
    Ok((
        vec![trace_path, source_path, initial_path],
        results,
        not_converged,
    ))
}

fn sweep(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let case = case(cfg)?;
    let grid: Vec<SweepCell> =
        harness::sweep_grid(&cfg.sweep_sizes, &cfg.sweep_sensors, &cfg.sweep_alphas);
    let table = harness::sweep(&case, &grid, &inversion_spec(cfg)?, cfg.jobs)?;
    let path = table_path(&cfg.out_dir, &cfg.run_id, "sweep");
    write_sweep(&path, &table.rows)?;
    let failed = table.rows.iter().filter(|r| r.result.is_err()).count();
    let converged = table
        .rows
        .iter()
        .filter(|r| matches!(&r.result, Ok(rep) if rep.status == Status::Converged))
        .count();
    let mut results = vec![
        ("cells".to_string(), table.rows.len().to_string()),
        ("converged".to_string(), converged.to_string()),
        ("failed".to_string(), failed.to_string()),
    ];
    for (i, note) in table.notes.iter().enumerate() {
        results.push((format!("note{}", i + 1), note.clone()));
    }
    Ok((vec![path], results, None))
}

fn write_sweep(path: &Path, rows: &[harness::SweepRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    w.write_record([
        "n_x",
        "n_t",
        "sensor",
        "alpha",
        "e_f",
        "e_u0",
        "iterations",
        "final_cost",
        "status",
    ])
    .map_err(csv_err)?;
    for row in rows {
        let c = &row.cell;
        let mut rec = vec![
            c.n_x.to_string(),
            c.n_t.to_string(),
            fmt(c.sensor),
            fmt(c.alpha),
        ];
        match &row.result {
            Ok(r) => rec.extend([
                fmt(r.e_f),
                fmt(r.e_u0),
                r.iterations.to_string(),
                fmt(r.final_cost),
                r.status.to_string(),
            ]),
            Err(e) => {
                log::warn!("sweep cell {c:?} failed: {e}");
                rec.extend([
                    "nan".into(),
                    "nan".into(),
                    "0".into(),
                    "nan".into(),
                    "error".into(),
                ]);
            }
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    write_atomic(path, &bytes)?;
    Ok(())
}

fn sensitivity(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let g = geometry(cfg)?;
    let mesh = MeasurementMesh::new(&g, cfg.i_x, cfg.i_t)?;
    let model = ForwardModel::new(g, trunc(cfg)?);
    let files =
        harness::emit_sensitivity_data(&model, cfg.n_x, cfg.n_t, &mesh, &cfg.out_dir, &cfg.run_id)?;
    let results = vec![("tables".to_string(), files.len().to_string())];
    Ok((files, results, None))
}
