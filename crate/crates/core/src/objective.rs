//! Tikhonov functional, its gradient, and a direct least-squares minimizer.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_range, Error, Result};
use crate::forward::{dot, powers, PolyParams, Responses, SensitivityTables};

/// Sampled overdetermination data.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurements {
    /// `u_f(x_i)`, `i = 1..=I_x`.
    pub final_profile: Vec<f64>,
    /// `u*(t_j)`, `j = 1..=I_t`.
    pub sensor_history: Vec<f64>,
}

impl Measurements {
    pub fn new(final_profile: Vec<f64>, sensor_history: Vec<f64>) -> Result<Self> {
        if final_profile
            .iter()
            .chain(&sensor_history)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Invalid("measurements must be finite".into()));
        }
        Ok(Self {
            final_profile,
            sensor_history,
        })
    }

    pub fn zeros(i_x: usize, i_t: usize) -> Self {
        Self {
            final_profile: vec![0.0; i_x],
            sensor_history: vec![0.0; i_t],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveConfig {
    pub alpha: f64,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self { alpha: 1e-6 }
    }
}

impl ObjectiveConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        check_range(
            "alpha",
            alpha,
            alpha >= 0.0 && alpha.is_finite(),
            "[0, inf)",
        )?;
        Ok(Self { alpha })
    }
}

/// Gradient blocks share the parameter layout.
pub type Gradient = PolyParams;

/// Penalty sums of a parameter vector at the data nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySums {
    /// `Σ_i u₀(x_i)²`.
    pub initial: f64,
    /// `Σ_j F(t_j)²`.
    pub source: f64,
}

/// The functional
///
/// ```text
/// S_α = Σ_i [u_f(x_i) - u(x_i, t_f)]² + Σ_j [u*(t_j) - u(x*, t_j)]²
///     + α Σ_i [u₀(x_i)]² + α Σ_j [F(t_j)]²
/// ```
///
/// with all sums starting at index 1.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    tables: &'a SensitivityTables,
    meas: &'a Measurements,
    alpha: f64,
    /// `x_i^{m-1}` for `i = 1..=I_x`.
    x_basis: Vec<Vec<f64>>,
    /// `t_j^{k-1}` for `j = 1..=I_t`.
    t_basis: Vec<Vec<f64>>,
}

impl<'a> Objective<'a> {
    pub fn new(
        tables: &'a SensitivityTables,
        meas: &'a Measurements,
        cfg: ObjectiveConfig,
    ) -> Result<Self> {
        ObjectiveConfig::new(cfg.alpha)?;
        let i_x = tables.mesh.i_x();
        let i_t = tables.mesh.i_t();
        if meas.final_profile.len() != i_x {
            return Err(Error::Shape {
                what: "final-time measurements",
                expected: i_x,
                actual: meas.final_profile.len(),
            });
        }
        if meas.sensor_history.len() != i_t {
            return Err(Error::Shape {
                what: "sensor measurements",
                expected: i_t,
                actual: meas.sensor_history.len(),
            });
        }
        let x_basis = tables
            .mesh
            .x_data()
            .iter()
            .map(|&x| powers(x, tables.n_x))
            .collect();
        let t_basis = tables
            .mesh
            .t_data()
            .iter()
            .map(|&t| powers(t, tables.n_t))
            .collect();
        Ok(Self {
            tables,
            meas,
            alpha: cfg.alpha,
            x_basis,
            t_basis,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn tables(&self) -> &SensitivityTables {
        self.tables
    }

    pub fn measurements(&self) -> &Measurements {
        self.meas
    }

    /// Model minus data at every data node.
    pub fn residuals(&self, params: &PolyParams) -> Result<Responses> {
        let mut r = self.tables.predict(params)?;
        for (u, d) in r.final_profile.iter_mut().zip(&self.meas.final_profile) {
            *u -= d;
        }
        for (u, d) in r.sensor_history.iter_mut().zip(&self.meas.sensor_history) {
            *u -= d;
        }
        Ok(r)
    }

    /// `u₀(x_i)` for `i >= 1`.
    pub fn initial_samples(&self, params: &PolyParams) -> Vec<f64> {
        self.x_basis.iter().map(|b| dot(b, &params.theta)).collect()
    }

    /// `F(t_j)` for `j >= 1`.
    pub fn source_samples(&self, params: &PolyParams) -> Vec<f64> {
        self.t_basis.iter().map(|b| dot(b, &params.phi)).collect()
    }

    pub fn penalty_sums(&self, params: &PolyParams) -> PenaltySums {
        PenaltySums {
            initial: self.initial_samples(params).iter().map(|v| v * v).sum(),
            source: self.source_samples(params).iter().map(|v| v * v).sum(),
        }
    }

    pub fn cost(&self, params: &PolyParams) -> Result<f64> {
        let r = self.residuals(params)?;
        let misfit: f64 = r
            .final_profile
            .iter()
            .chain(&r.sensor_history)
            .map(|v| v * v)
            .sum();
        let pen = self.penalty_sums(params);
        Ok(misfit + self.alpha * (pen.initial + pen.source))
    }

    pub fn gradient(&self, params: &PolyParams) -> Result<Gradient> {
        let r = self.residuals(params)?;
        self.gradient_from_residuals(params, &r)
    }

    /// Gradient given the residuals (model minus data) at `params`.
    pub(crate) fn gradient_from_residuals(
        &self,
        params: &PolyParams,
        r: &Responses,
    ) -> Result<Gradient> {
        let mut g = PolyParams::zeros(self.tables.n_x, self.tables.n_t);
        let rows = self
            .tables
            .final_data_rows()
            .iter()
            .zip(&r.final_profile)
            .chain(self.tables.sensor_rows.iter().zip(&r.sensor_history));
        for (row, &res) in rows {
            for (gk, j) in g.phi.iter_mut().zip(&row.phi) {
                *gk += 2.0 * res * j;
            }
            for (gm, j) in g.theta.iter_mut().zip(&row.theta) {
                *gm += 2.0 * res * j;
            }
        }
        if self.alpha > 0.0 {
            for (b, f) in self.t_basis.iter().zip(self.source_samples(params)) {
                for (gk, bk) in g.phi.iter_mut().zip(b) {
                    *gk += 2.0 * self.alpha * bk * f;
                }
            }
            for (b, u0) in self.x_basis.iter().zip(self.initial_samples(params)) {
                for (gm, bm) in g.theta.iter_mut().zip(b) {
                    *gm += 2.0 * self.alpha * bm * u0;
                }
            }
        }
        Ok(g)
    }

    /// Diagonal of the Hessian `∇²S_α`, without the factor 2.
    pub fn hessian_diagonal(&self) -> PolyParams {
        let mut d = PolyParams::zeros(self.tables.n_x, self.tables.n_t);
        let rows = self
            .tables
            .final_data_rows()
            .iter()
            .chain(&self.tables.sensor_rows);
        for row in rows {
            for (dk, j) in d.phi.iter_mut().zip(&row.phi) {
                *dk += j * j;
            }
            for (dm, j) in d.theta.iter_mut().zip(&row.theta) {
                *dm += j * j;
            }
        }
        for b in &self.t_basis {
            for (dk, bk) in d.phi.iter_mut().zip(b) {
                *dk += self.alpha * bk * bk;
            }
        }
        for b in &self.x_basis {
            for (dm, bm) in d.theta.iter_mut().zip(b) {
                *dm += self.alpha * bm * bm;
            }
        }
        d
    }

    /// Stacked least-squares system `A p ≈ b` whose squared residual is
    /// `S_α`. Columns ordered `[phi..., theta...]`.
    pub fn design(&self) -> (DMatrix<f64>, DVector<f64>) {
        let (n_x, n_t) = (self.tables.n_x, self.tables.n_t);
        let n = n_x + n_t;
        let data_rows = self.tables.final_data_rows().len() + self.tables.sensor_rows.len();
        let pen_rows = if self.alpha > 0.0 {
            self.x_basis.len() + self.t_basis.len()
        } else {
            0
        };
        let mut a = DMatrix::zeros(data_rows + pen_rows, n);
        let mut b = DVector::zeros(data_rows + pen_rows);
        let data = self
            .tables
            .final_data_rows()
            .iter()
            .zip(&self.meas.final_profile)
            .chain(
                self.tables
                    .sensor_rows
                    .iter()
                    .zip(&self.meas.sensor_history),
            );
        for (r, (row, &d)) in data.enumerate() {
            for k in 0..n_t {
                a[(r, k)] = row.phi[k];
            }
            for m in 0..n_x {
                a[(r, n_t + m)] = row.theta[m];
            }
            b[r] = d;
        }
        if pen_rows > 0 {
            let s = self.alpha.sqrt();
            let mut r = data_rows;
            for basis in &self.x_basis {
                for m in 0..n_x {
                    a[(r, n_t + m)] = s * basis[m];
                }
                r += 1;
            }
            for basis in &self.t_basis {
                for k in 0..n_t {
                    a[(r, k)] = s * basis[k];
                }
                r += 1;
            }
        }
        (a, b)
    }

    /// Global minimizer of `S_α` by a dense direct solve.
    ///
    /// The problem is linear least squares; it is solved through an SVD of
    /// the column-equilibrated stacked system, which yields the normal
    /// equations' solution without squaring the condition number.
    pub fn ridge_solve(&self) -> Result<PolyParams> {
        let (mut a, b) = self.design();
        let n = a.ncols();
        let scales: Vec<f64> = (0..n)
            .map(|c| {
                let norm = a.column(c).norm();
                if norm > 0.0 {
                    1.0 / norm
                } else {
                    1.0
                }
            })
            .collect();
        for (c, s) in scales.iter().enumerate() {
            a.column_mut(c).scale_mut(*s);
        }
        let rows = a.nrows();
        let svd = a.svd(true, true);
        let sigma_max = svd.singular_values.max();
        let rank_tol = sigma_max * f64::EPSILON * (rows.max(n) as f64);
        if self.alpha == 0.0 && svd.singular_values.iter().any(|&s| s <= rank_tol) {
            return Err(Error::Singular);
        }
        if sigma_max == 0.0 {
            return Err(Error::Singular);
        }
        let y = svd
            .solve(&b, 0.0)
            .map_err(|e| Error::Invalid(format!("svd solve failed: {e}")))?;
        let flat: Vec<f64> = y.iter().zip(&scales).map(|(v, s)| v * s).collect();
        PolyParams::from_flat(&flat, self.tables.n_x, self.tables.n_t)
    }
}
