//! Parametrized forward responses and their sensitivity coefficients.
//!
//! With `F(t) = Σ φ_k t^{k-1}` and `u₀(x') = Σ θ_m x'^{m-1}` the temperature
//! at any point is linear in `(φ, θ)`:
//!
//! ```text
//! u(x, t) = Σ_m θ_m ∫₀^L ξ^{m-1} G(x, ξ, t) dξ + Σ_k φ_k ∫₀^t τ^{k-1} H(x, t-τ) dτ
//! ```
//!
//! The integrals are the sensitivity coefficients. They are assembled per
//! harmonic from [`sine_moments_into`] and [`exp_moments_into`].

use rayon::prelude::*;

use crate::error::{check_range, Error, Result};
use crate::series::{exp_moments_into, sine_moments_into, sum_harmonics, TruncationPolicy};

/// Physical setup of the heat problem.
///
/// The model itself lives on `(0, L)`; `offset` maps it onto a physical
/// domain `(a, a + L)`. The sensor is stored in physical coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub offset: f64,
    pub length: f64,
    pub t_final: f64,
    pub sensor: f64,
}

impl Geometry {
    pub fn new(offset: f64, length: f64, t_final: f64, sensor: f64) -> Result<Self> {
        check_range("offset", offset, offset.is_finite(), "finite")?;
        check_range(
            "length",
            length,
            length > 0.0 && length.is_finite(),
            "(0, inf)",
        )?;
        check_range(
            "t_final",
            t_final,
            t_final > 0.0 && t_final.is_finite(),
            "(0, inf)",
        )?;
        check_range(
            "sensor",
            sensor,
            sensor > offset && sensor < offset + length,
            format!("({offset}, {})", offset + length),
        )?;
        Ok(Self {
            offset,
            length,
            t_final,
            sensor,
        })
    }

    /// Maps a physical coordinate into `[0, L]`.
    pub fn shift(&self, x: f64) -> Result<f64> {
        let xs = x - self.offset;
        // Allow round-off at the end points.
        let slack = 1e-12 * self.length;
        check_range(
            "x",
            x,
            xs >= -slack && xs <= self.length + slack,
            format!("[{}, {}]", self.offset, self.offset + self.length),
        )?;
        Ok(xs.clamp(0.0, self.length))
    }

    pub fn unshift(&self, x_shifted: f64) -> f64 {
        x_shifted + self.offset
    }

    pub fn sensor_shifted(&self) -> f64 {
        self.sensor - self.offset
    }

    pub fn right(&self) -> f64 {
        self.offset + self.length
    }
}

/// Polynomial coefficients of the source (`phi`, in powers of `t`) and of
/// the initial temperature (`theta`, in powers of the shifted `x'`).
#[derive(Debug, Clone, PartialEq)]
pub struct PolyParams {
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
}

impl PolyParams {
    pub fn new(phi: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
        if phi.is_empty() || theta.is_empty() {
            return Err(Error::Invalid(
                "both coefficient blocks need at least one entry".into(),
            ));
        }
        Ok(Self { phi, theta })
    }

    pub fn zeros(n_x: usize, n_t: usize) -> Self {
        Self {
            phi: vec![0.0; n_t],
            theta: vec![0.0; n_x],
        }
    }

    pub fn n_x(&self) -> usize {
        self.theta.len()
    }

    pub fn n_t(&self) -> usize {
        self.phi.len()
    }

    pub fn len(&self) -> usize {
        self.phi.len() + self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `F(t) = Σ φ_k t^{k-1}`.
    pub fn source(&self, t: f64) -> f64 {
        horner(&self.phi, t)
    }

    /// `u₀(x') = Σ θ_m x'^{m-1}`, `x'` in the shifted frame.
    pub fn initial(&self, x_shifted: f64) -> f64 {
        horner(&self.theta, x_shifted)
    }

    /// Flattened `[phi..., theta...]`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.phi.iter().chain(&self.theta).copied().collect()
    }

    pub fn from_flat(flat: &[f64], n_x: usize, n_t: usize) -> Result<Self> {
        if flat.len() != n_x + n_t {
            return Err(Error::Shape {
                what: "flat parameter vector",
                expected: n_x + n_t,
                actual: flat.len(),
            });
        }
        Self::new(flat[..n_t].to_vec(), flat[n_t..].to_vec())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.n_x() == other.n_x() && self.n_t() == other.n_t()
    }

    /// `self + scale * other`.
    pub fn add_scaled(&self, scale: f64, other: &Self) -> Self {
        debug_assert!(self.same_shape(other));
        let comb = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + scale * y).collect();
        Self {
            phi: comb(&self.phi, &other.phi),
            theta: comb(&self.theta, &other.theta),
        }
    }

    pub fn scaled(&self, scale: f64) -> Self {
        Self {
            phi: self.phi.iter().map(|v| v * scale).collect(),
            theta: self.theta.iter().map(|v| v * scale).collect(),
        }
    }

    /// Source block only, initial block zeroed.
    pub fn source_part(&self) -> Self {
        Self {
            phi: self.phi.clone(),
            theta: vec![0.0; self.n_x()],
        }
    }

    /// Initial block only, source block zeroed.
    pub fn initial_part(&self) -> Self {
        Self {
            phi: vec![0.0; self.n_t()],
            theta: self.theta.clone(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.to_flat()
            .iter()
            .zip(other.to_flat())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.phi.iter().chain(&self.theta).all(|v| v.is_finite())
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// `[1, x, x², ..., x^{n-1}]`.
pub(crate) fn powers(x: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut p = 1.0;
    for _ in 0..n {
        out.push(p);
        p *= x;
    }
    out
}

/// Equispaced measurement nodes `x_i = i L / I_x` (shifted frame) and
/// `t_j = j t_f / I_t`, end points included.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMesh {
    pub x_nodes: Vec<f64>,
    pub t_nodes: Vec<f64>,
}

impl MeasurementMesh {
    pub fn new(geom: &Geometry, i_x: usize, i_t: usize) -> Result<Self> {
        check_range("i_x", i_x as f64, i_x >= 1, "[1, inf)")?;
        check_range("i_t", i_t as f64, i_t >= 1, "[1, inf)")?;
        let hx = geom.length / i_x as f64;
        let ht = geom.t_final / i_t as f64;
        let mut x_nodes: Vec<f64> = (0..=i_x).map(|i| i as f64 * hx).collect();
        let mut t_nodes: Vec<f64> = (0..=i_t).map(|j| j as f64 * ht).collect();
        x_nodes[i_x] = geom.length;
        t_nodes[i_t] = geom.t_final;
        Ok(Self { x_nodes, t_nodes })
    }

    pub fn i_x(&self) -> usize {
        self.x_nodes.len() - 1
    }

    pub fn i_t(&self) -> usize {
        self.t_nodes.len() - 1
    }

    /// Spatial nodes `i = 1..=I_x` entering the objective.
    pub fn x_data(&self) -> &[f64] {
        &self.x_nodes[1..]
    }

    /// Time nodes `j = 1..=I_t` entering the objective.
    pub fn t_data(&self) -> &[f64] {
        &self.t_nodes[1..]
    }
}

/// Sensitivities of one observation with respect to every coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityRow {
    /// `∂u/∂θ_m`, `m = 1..=N_x`.
    pub theta: Vec<f64>,
    /// `∂u/∂φ_k`, `k = 1..=N_t`.
    pub phi: Vec<f64>,
    pub exhausted: bool,
}

impl SensitivityRow {
    pub fn response(&self, params: &PolyParams) -> f64 {
        dot(&self.theta, &params.theta) + dot(&self.phi, &params.phi)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Where a model response is read off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Probe {
    /// Final-time profile at physical `x`.
    Final(f64),
    /// Sensor history at time `t`.
    Sensor(f64),
}

/// Linear forward map from polynomial coefficients to temperatures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardModel {
    pub geometry: Geometry,
    pub trunc: TruncationPolicy,
}

impl ForwardModel {
    pub fn new(geometry: Geometry, trunc: TruncationPolicy) -> Self {
        Self { geometry, trunc }
    }

    /// Sensitivities of `u(x', t)` with `x'` in the shifted frame.
    ///
    /// The source part uses `J_p = t^p/λ² + R_p` with `R_0 = -e^{-λ²t}/λ²` and
    /// `R_p = -p J_{p-1}/λ²`; the `t^p/λ²` parts sum in closed form to
    /// `t^p x'(L - x')/2`, so only the faster-decaying remainder is summed.
    pub fn row(&self, x_shifted: f64, t: f64, n_x: usize, n_t: usize) -> Result<SensitivityRow> {
        let length = self.geometry.length;
        check_range(
            "x",
            x_shifted,
            (0.0..=length).contains(&x_shifted),
            format!("[0, {length}]"),
        )?;
        check_range("t", t, t > 0.0 && t.is_finite(), "(0, inf)")?;
        check_range("n_x", n_x as f64, n_x >= 1, "[1, inf)")?;
        check_range("n_t", n_t as f64, n_t >= 1, "[1, inf)")?;

        // Initial-temperature block: (2/L) Σ_n sin(λx) S_{m-1}(λ) e^{-λ²t}.
        let mut theta = vec![0.0; n_x];
        let mut moments = vec![0.0; n_x];
        // |S_p| <= min(L^{p+1}/(p+1), 2 L^p / λ).
        let moment_caps: Vec<(f64, f64)> = (0..n_x)
            .map(|p| {
                let lp = length.powi(p as i32);
                (lp * length / (p + 1) as f64, 2.0 * lp)
            })
            .collect();
        let scale_g = 2.0 / length;
        let (_, ex_theta) = sum_harmonics(
            length,
            &self.trunc,
            |j| j,
            |e| {
                let decay = (-e.lambda_sq() * t).exp();
                let w = scale_g * (e.lambda * x_shifted).sin() * decay;
                sine_moments_into(e.lambda, length, &mut moments);
                for (acc, s) in theta.iter_mut().zip(&moments) {
                    *acc += w * s;
                }
                let cap = moment_caps
                    .iter()
                    .map(|&(a, b)| a.min(b / e.lambda))
                    .fold(0.0, f64::max);
                scale_g * decay * cap
            },
        );

        // Source block.
        let steady = 0.5 * x_shifted * (length - x_shifted);
        let mut phi = powers(t, n_t);
        for v in &mut phi {
            *v *= steady;
        }
        let mut j_moms = vec![0.0; n_t];
        let scale_h = 4.0 / length;
        let (_, ex_phi) = sum_harmonics(
            length,
            &self.trunc,
            |j| 2 * j - 1,
            |e| {
                let l2 = e.lambda_sq();
                let w = scale_h / e.lambda * (e.lambda * x_shifted).sin();
                exp_moments_into(l2, t, &mut j_moms[..n_t.saturating_sub(1).max(1)]);
                let decay = (-l2 * t).exp();
                phi[0] -= w * decay / l2;
                let mut bound = decay / l2;
                let mut t_pow = 1.0;
                for p in 1..n_t {
                    phi[p] -= w * p as f64 * j_moms[p - 1] / l2;
                    bound = bound.max(p as f64 * t_pow / (l2 * l2));
                    t_pow *= t;
                }
                scale_h / e.lambda * bound
            },
        );

        Ok(SensitivityRow {
            theta,
            phi,
            exhausted: ex_theta || ex_phi,
        })
    }

    /// `J¹¹_m(x)` and `J¹²_k(x)` at the final time, physical `x`.
    pub fn final_row(&self, x: f64, n_x: usize, n_t: usize) -> Result<SensitivityRow> {
        let xs = self.geometry.shift(x)?;
        self.row(xs, self.geometry.t_final, n_x, n_t)
    }

    /// `J²¹_m(t)` and `J²²_k(t)` at the sensor.
    pub fn sensor_row(&self, t: f64, n_x: usize, n_t: usize) -> Result<SensitivityRow> {
        self.row(self.geometry.sensor_shifted(), t, n_x, n_t)
    }

    fn probe_row(&self, probe: Probe, n_x: usize, n_t: usize) -> Result<SensitivityRow> {
        match probe {
            Probe::Final(x) => self.final_row(x, n_x, n_t),
            Probe::Sensor(t) => self.sensor_row(t, n_x, n_t),
        }
    }

    /// `u(x, t_f; φ, θ)` at physical `x`.
    pub fn eval_u_final(&self, params: &PolyParams, x: f64) -> Result<f64> {
        Ok(self
            .final_row(x, params.n_x(), params.n_t())?
            .response(params))
    }

    /// `u(x*, t; φ, θ)`.
    pub fn eval_u_interior(&self, params: &PolyParams, t: f64) -> Result<f64> {
        check_range(
            "t",
            t,
            t > 0.0 && t <= self.geometry.t_final,
            format!("(0, {}]", self.geometry.t_final),
        )?;
        Ok(self
            .sensor_row(t, params.n_x(), params.n_t())?
            .response(params))
    }

    /// Response of the homogeneous model to a search direction that lives in
    /// exactly one coefficient block.
    pub fn direction_response(&self, direction: &PolyParams, probe: Probe) -> Result<f64> {
        check_single_block(direction)?;
        Ok(self
            .probe_row(probe, direction.n_x(), direction.n_t())?
            .response(direction))
    }

    /// All four sensitivity families on the measurement mesh.
    pub fn sensitivities(
        &self,
        mesh: &MeasurementMesh,
        n_x: usize,
        n_t: usize,
    ) -> Result<SensitivityTables> {
        let t_f = self.geometry.t_final;
        let final_rows: Vec<SensitivityRow> = mesh
            .x_nodes
            .par_iter()
            .map(|&x| self.row(x, t_f, n_x, n_t))
            .collect::<Result<_>>()?;
        let xs = self.geometry.sensor_shifted();
        let sensor_rows: Vec<SensitivityRow> = mesh
            .t_data()
            .par_iter()
            .map(|&t| self.row(xs, t, n_x, n_t))
            .collect::<Result<_>>()?;
        let exhausted = final_rows
            .iter()
            .chain(&sensor_rows)
            .filter(|r| r.exhausted)
            .count();
        Ok(SensitivityTables {
            n_x,
            n_t,
            mesh: mesh.clone(),
            final_rows,
            sensor_rows,
            exhausted,
        })
    }
}

pub(crate) fn check_single_block(direction: &PolyParams) -> Result<()> {
    let nonzero = |v: &[f64]| v.iter().any(|&c| c != 0.0);
    if nonzero(&direction.phi) && nonzero(&direction.theta) {
        Err(Error::MixedDirection)
    } else {
        Ok(())
    }
}

/// Model responses at the data nodes: `i = 1..=I_x` at the final time and
/// `j = 1..=I_t` at the sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Responses {
    pub final_profile: Vec<f64>,
    pub sensor_history: Vec<f64>,
}

/// Precomputed sensitivity coefficients for one geometry and mesh.
///
/// The model is linear, so these never change during an inversion.
#[derive(Debug, Clone)]
pub struct SensitivityTables {
    pub n_x: usize,
    pub n_t: usize,
    pub mesh: MeasurementMesh,
    /// Rows for `x_i`, `i = 0..=I_x` (`J¹¹`, `J¹²`).
    pub final_rows: Vec<SensitivityRow>,
    /// Rows for `t_j`, `j = 1..=I_t` (`J²¹`, `J²²`).
    pub sensor_rows: Vec<SensitivityRow>,
    /// Number of rows whose series hit `max_terms`.
    pub exhausted: usize,
}

impl SensitivityTables {
    fn check_shape(&self, params: &PolyParams) -> Result<()> {
        if params.n_x() != self.n_x {
            return Err(Error::Shape {
                what: "theta",
                expected: self.n_x,
                actual: params.n_x(),
            });
        }
        if params.n_t() != self.n_t {
            return Err(Error::Shape {
                what: "phi",
                expected: self.n_t,
                actual: params.n_t(),
            });
        }
        Ok(())
    }

    /// Rows entering the objective at the final time (`i >= 1`).
    pub fn final_data_rows(&self) -> &[SensitivityRow] {
        &self.final_rows[1..]
    }

    pub fn predict(&self, params: &PolyParams) -> Result<Responses> {
        self.check_shape(params)?;
        Ok(Responses {
            final_profile: self
                .final_data_rows()
                .iter()
                .map(|r| r.response(params))
                .collect(),
            sensor_history: self
                .sensor_rows
                .iter()
                .map(|r| r.response(params))
                .collect(),
        })
    }

    /// Vectorized [`ForwardModel::direction_response`] on the data nodes.
    pub fn direction_response(&self, direction: &PolyParams) -> Result<Responses> {
        check_single_block(direction)?;
        self.predict(direction)
    }
}
