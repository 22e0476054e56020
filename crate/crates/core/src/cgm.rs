//! Fletcher–Reeves conjugate-gradient minimization of the Tikhonov
//! functional with exact line search.
//!
//! Each iteration of the [`Variant::Blockwise`] scheme:
//!
//! 1. evaluate the model and the gradient at `(φⁿ, θⁿ)`;
//! 2. `γ = ‖∇ⁿ‖² / ‖∇ⁿ⁻¹‖²` per block (zero on the first step or a restart);
//! 3. `dⁿ = ∇ⁿ + γ dⁿ⁻¹` per block;
//! 4. `β = E / F` per block, the exact minimizer of `S_α` along `-dⁿ` with
//!    the other block frozen;
//! 5. `φⁿ⁺¹ = φⁿ - β_φ d_φ`, `θⁿ⁺¹ = θⁿ - β_θ d_θ`;
//! 6. stop once `S_α < ε`.
//!
//! Monomial coefficients of different degree differ in sensitivity by many
//! orders of magnitude, so the blockwise scheme stalls on realistic
//! problems. The default [`Variant::Preconditioned`] scheme runs the same
//! loop on the joint vector `(φ, θ)` with the gradient scaled by the
//! inverse Hessian diagonal and a single exact step.

use crate::error::{check_range, Block, Error, Result};
use crate::forward::{dot, PolyParams, Responses};
use crate::objective::{Gradient, Objective};

/// Starting point of the iteration.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitPolicy {
    #[default]
    Zeros,
    Given(PolyParams),
}

/// Direction and step rule of the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    /// Jacobi-preconditioned Fletcher–Reeves on the joint parameter vector
    /// with one exact step per iteration.
    #[default]
    Preconditioned,
    /// Separate Fletcher–Reeves coefficients and exact steps per block.
    Blockwise,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Preconditioned => "preconditioned",
            Variant::Blockwise => "blockwise",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "preconditioned" => Ok(Variant::Preconditioned),
            "blockwise" => Ok(Variant::Blockwise),
            other => Err(Error::Invalid(format!(
                "unknown solver variant {other:?} (expected preconditioned or blockwise)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub variant: Variant,
    /// Stop once `S_α < epsilon`.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Reset the conjugate coefficients every `restart_period` iterations.
    pub restart_period: Option<usize>,
    pub init: InitPolicy,
    /// Stop with [`Status::Stationary`] once `‖∇S_α‖∞` falls below this.
    pub grad_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Preconditioned,
            epsilon: 1e-3,
            max_iters: 10_000,
            restart_period: None,
            init: InitPolicy::Zeros,
            grad_tol: 1e-14,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        check_range(
            "epsilon",
            self.epsilon,
            self.epsilon > 0.0 && self.epsilon.is_finite(),
            "(0, inf)",
        )?;
        check_range("grad_tol", self.grad_tol, self.grad_tol >= 0.0, "[0, inf)")?;
        if let Some(p) = self.restart_period {
            check_range("restart_period", p as f64, p >= 1, "[1, inf)")?;
        }
        Ok(())
    }
}

/// Diagnostics for one iteration. The preconditioned variant records its
/// single `γ` and `β` in both block fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub cost: f64,
    pub grad_phi_norm: f64,
    pub grad_theta_norm: f64,
    pub gamma_phi: f64,
    pub gamma_theta: f64,
    pub beta_phi: f64,
    pub beta_theta: f64,
}

/// One record per visited iterate; the last one describes the returned
/// parameters and carries zero step data.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn costs(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.cost)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Largest cost increase between consecutive records.
    pub fn max_increase(&self) -> f64 {
        self.records
            .windows(2)
            .map(|w| w[1].cost - w[0].cost)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// `S_α < ε`.
    Converged,
    /// Gradient vanished before `S_α < ε` was reached.
    Stationary,
    /// Iteration budget exhausted.
    NotConverged,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::Stationary => "stationary",
            Status::NotConverged => "not_converged",
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Both sides of the first-order optimality inequality at a minimizer
/// `p*` for a trial point `p`, with `v` the response to `p - p*`:
///
/// ```text
/// lhs = 2α (Σ_i u₀(x_i) v₀(x_i) + Σ_j F(t_j) v_F(t_j))     evaluated at p
/// rhs = c_f Σ_i [u_f - u*](x_i) v(x_i, t_f) + c_s Σ_j [u*_data - u*](t_j) v(x*, t_j)
/// ```
///
/// where `v₀`, `v_F` are the polynomials of `p - p*` and `(c_f, c_s)` is
/// `(2, 1)` or `(2, 2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityCheck {
    pub trials: usize,
    /// Smallest `lhs - rhs` with weights `(2, 1)`.
    pub min_margin_mixed: f64,
    /// Smallest `lhs - rhs` with weights `(2, 2)`.
    pub min_margin_symmetric: f64,
}

impl StationarityCheck {
    pub fn holds(&self, slack: f64) -> (bool, bool) {
        (
            self.min_margin_mixed >= -slack,
            self.min_margin_symmetric >= -slack,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub status: Status,
    pub iterations: usize,
    pub final_cost: f64,
    pub stationarity: StationarityCheck,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub params: PolyParams,
    pub trace: IterationTrace,
    pub report: ConvergenceReport,
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Fletcher–Reeves coefficients `(γ_φ, γ_θ)`; zero on the first iteration.
///
/// A vanishing previous gradient block with a nonzero current one is
/// reported as [`Error::DegenerateDirection`].
pub fn fr_coefficients(
    grad_now: &Gradient,
    grad_prev: Option<&Gradient>,
    n: usize,
) -> Result<(f64, f64)> {
    if n == 0 {
        return Ok((0.0, 0.0));
    }
    let prev =
        grad_prev.ok_or_else(|| Error::Invalid("previous gradient required for n > 0".into()))?;
    let ratio = |now: &[f64], prev: &[f64], block| {
        let (a, b) = (norm_sq(now), norm_sq(prev));
        if b > 0.0 {
            Ok(a / b)
        } else if a == 0.0 {
            Ok(0.0)
        } else {
            Err(Error::DegenerateDirection { block })
        }
    };
    Ok((
        ratio(&grad_now.phi, &prev.phi, Block::Source)?,
        ratio(&grad_now.theta, &prev.theta, Block::Initial)?,
    ))
}

/// `d = ∇ + γ d_prev` per block; `d = ∇` when `n == 0`.
pub fn directions(
    grad_now: &Gradient,
    dir_prev: Option<&PolyParams>,
    gammas: (f64, f64),
    n: usize,
) -> PolyParams {
    match dir_prev {
        Some(prev) if n > 0 => {
            let comb = |g: &[f64], d: &[f64], gamma: f64| {
                g.iter().zip(d).map(|(a, b)| a + gamma * b).collect()
            };
            PolyParams {
                phi: comb(&grad_now.phi, &prev.phi, gammas.0),
                theta: comb(&grad_now.theta, &prev.theta, gammas.1),
            }
        }
        _ => grad_now.clone(),
    }
}

/// Numerator and denominator of the exact step along `-direction` in one
/// block, the other block held fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineTerms {
    pub numerator: f64,
    pub denominator: f64,
}

/// Line-search terms along `direction`; `block` selects a single-block
/// direction, `None` a joint one.
fn line_terms(
    obj: &Objective<'_>,
    params: &PolyParams,
    residuals: &Responses,
    direction: &PolyParams,
    block: Option<Block>,
) -> Result<LineTerms> {
    let resp = match block {
        Some(_) => obj.tables().direction_response(direction)?,
        None => obj.tables().predict(direction)?,
    };
    let mut numerator = dot(&residuals.final_profile, &resp.final_profile)
        + dot(&residuals.sensor_history, &resp.sensor_history);
    let mut denominator = norm_sq(&resp.final_profile) + norm_sq(&resp.sensor_history);
    let alpha = obj.alpha();
    if alpha > 0.0 {
        if block != Some(Block::Initial) {
            let dir = obj.source_samples(direction);
            numerator += alpha * dot(&obj.source_samples(params), &dir);
            denominator += alpha * norm_sq(&dir);
        }
        if block != Some(Block::Source) {
            let dir = obj.initial_samples(direction);
            numerator += alpha * dot(&obj.initial_samples(params), &dir);
            denominator += alpha * norm_sq(&dir);
        }
    }
    Ok(LineTerms {
        numerator,
        denominator,
    })
}

fn ratio(terms: LineTerms, block: Block) -> Result<f64> {
    if terms.denominator > 0.0 && terms.denominator.is_finite() {
        Ok(terms.numerator / terms.denominator)
    } else {
        Err(Error::DegenerateDirection { block })
    }
}

/// Exact step size for one block: `β = E / F`.
pub fn block_step_size(
    obj: &Objective<'_>,
    params: &PolyParams,
    residuals: &Responses,
    dirs: &PolyParams,
    block: Block,
) -> Result<f64> {
    let direction = match block {
        Block::Source => dirs.source_part(),
        Block::Initial => dirs.initial_part(),
    };
    ratio(
        line_terms(obj, params, residuals, &direction, Some(block))?,
        block,
    )
}

/// Exact step size along the joint direction `-dirs`.
///
/// A direction with no response and no penalty is reported as degenerate
/// in the source block.
pub fn joint_step_size(
    obj: &Objective<'_>,
    params: &PolyParams,
    residuals: &Responses,
    dirs: &PolyParams,
) -> Result<f64> {
    ratio(
        line_terms(obj, params, residuals, dirs, None)?,
        Block::Source,
    )
}

/// Inverse Hessian diagonal used to scale the gradient; unit weight where
/// the diagonal vanishes.
pub fn jacobi_weights(obj: &Objective<'_>) -> PolyParams {
    let mut w = obj.hessian_diagonal();
    for v in w.phi.iter_mut().chain(w.theta.iter_mut()) {
        *v = if *v > 0.0 { 1.0 / *v } else { 1.0 };
    }
    w
}

fn scale_by(v: &PolyParams, w: &PolyParams) -> PolyParams {
    let mul = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).collect();
    PolyParams {
        phi: mul(&v.phi, &w.phi),
        theta: mul(&v.theta, &w.theta),
    }
}

fn flat_dot(a: &PolyParams, b: &PolyParams) -> f64 {
    dot(&a.phi, &b.phi) + dot(&a.theta, &b.theta)
}

/// `(β_φ, β_θ)` for the current state.
pub fn step_sizes(
    obj: &Objective<'_>,
    params: &PolyParams,
    dirs: &PolyParams,
) -> Result<(f64, f64)> {
    let r = obj.residuals(params)?;
    Ok((
        block_step_size(obj, params, &r, dirs, Block::Source)?,
        block_step_size(obj, params, &r, dirs, Block::Initial)?,
    ))
}

/// Evaluates the optimality inequality at `minimizer` for each trial point.
pub fn stationarity_check(
    obj: &Objective<'_>,
    minimizer: &PolyParams,
    trials: &[PolyParams],
) -> Result<StationarityCheck> {
    let r = obj.residuals(minimizer)?;
    let mut mixed = f64::INFINITY;
    let mut symmetric = f64::INFINITY;
    for trial in trials {
        let delta = trial.add_scaled(-1.0, minimizer);
        // v is linear: response to the difference, both blocks at once.
        let v = obj.tables().predict(&delta)?;
        // Data minus model at the minimizer.
        let final_sum = -dot(&r.final_profile, &v.final_profile);
        let sensor_sum = -dot(&r.sensor_history, &v.sensor_history);
        let lhs = 2.0
            * obj.alpha()
            * (dot(&obj.initial_samples(trial), &obj.initial_samples(&delta))
                + dot(&obj.source_samples(trial), &obj.source_samples(&delta)));
        mixed = mixed.min(lhs - (2.0 * final_sum + sensor_sum));
        symmetric = symmetric.min(lhs - (2.0 * final_sum + 2.0 * sensor_sum));
    }
    Ok(StationarityCheck {
        trials: trials.len(),
        min_margin_mixed: mixed,
        min_margin_symmetric: symmetric,
    })
}

/// Deterministic trial points around `center` for the optimality check.
pub fn trial_points(center: &PolyParams, count: usize, seed: u64) -> Vec<PolyParams> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut p = center.clone();
            for v in p.phi.iter_mut().chain(p.theta.iter_mut()) {
                *v += rng.random_range(-1.0..1.0) * (1.0 + v.abs());
            }
            p
        })
        .collect()
}

fn max_abs(v: &PolyParams) -> f64 {
    v.phi
        .iter()
        .chain(&v.theta)
        .fold(0.0, |m, x| f64::max(m, x.abs()))
}

/// Runs the conjugate-gradient iteration on `obj`.
pub fn solve(obj: &Objective<'_>, cfg: &SolverConfig) -> Result<SolveOutcome> {
    cfg.validate()?;
    let (n_x, n_t) = (obj.tables().n_x, obj.tables().n_t);
    let mut params = match &cfg.init {
        InitPolicy::Zeros => PolyParams::zeros(n_x, n_t),
        InitPolicy::Given(p) => {
            if p.n_x() != n_x || p.n_t() != n_t {
                return Err(Error::Shape {
                    what: "initial guess",
                    expected: n_x + n_t,
                    actual: p.len(),
                });
            }
            p.clone()
        }
    };
    let weights = match cfg.variant {
        Variant::Preconditioned => Some(jacobi_weights(obj)),
        Variant::Blockwise => None,
    };

    let mut trace = IterationTrace::default();
    let mut grad_prev: Option<Gradient> = None;
    // Preconditioned variant: `∇ᵀ W ∇` of the previous iterate.
    let mut scaled_prev = 0.0;
    let mut dir_prev: Option<PolyParams> = None;
    let mut restart_next = false;
    let mut n = 0usize;

    let diverged = |trace: &IterationTrace, n, quantity| Error::Divergence {
        iteration: n,
        quantity,
        trace: Box::new(trace.clone()),
    };

    let status = loop {
        // Forward responses and residuals.
        let r = obj.residuals(&params)?;
        let cost = obj.cost(&params)?;
        if !cost.is_finite() {
            return Err(diverged(&trace, n, "cost"));
        }
        // Gradient.
        let grad = obj.gradient_from_residuals(&params, &r)?;
        if !grad.is_finite() {
            return Err(diverged(&trace, n, "gradient"));
        }
        let mut record = IterationRecord {
            iteration: n,
            cost,
            grad_phi_norm: norm_sq(&grad.phi).sqrt(),
            grad_theta_norm: norm_sq(&grad.theta).sqrt(),
            gamma_phi: 0.0,
            gamma_theta: 0.0,
            beta_phi: 0.0,
            beta_theta: 0.0,
        };

        // Stopping rules, checked for the current iterate before stepping again.
        if cost < cfg.epsilon {
            trace.records.push(record);
            break Status::Converged;
        }
        if max_abs(&grad) < cfg.grad_tol {
            trace.records.push(record);
            break Status::Stationary;
        }
        if n >= cfg.max_iters {
            trace.records.push(record);
            break Status::NotConverged;
        }

        let restart = restart_next
            || cfg
                .restart_period
                .is_some_and(|p| n > 0 && n.is_multiple_of(p));
        let k = if restart { 0 } else { n };
        restart_next = false;
        let (gammas, dirs, betas) = match &weights {
            None => {
                // Conjugate coefficients.
                let gammas = match fr_coefficients(&grad, grad_prev.as_ref(), k) {
                    Ok(g) => g,
                    Err(Error::DegenerateDirection { block }) => {
                        log::debug!("zero previous gradient in {block} block, restarting");
                        (0.0, 0.0)
                    }
                    Err(e) => return Err(e),
                };
                // Directions.
                let dirs = directions(&grad, dir_prev.as_ref(), gammas, k);
                // Exact step sizes.
                let mut step = |block| match block_step_size(obj, &params, &r, &dirs, block) {
                    Ok(b) => Ok(b),
                    Err(Error::DegenerateDirection { .. }) => {
                        restart_next = true;
                        Ok(0.0)
                    }
                    Err(e) => Err(e),
                };
                let betas = (step(Block::Source)?, step(Block::Initial)?);
                (gammas, dirs, betas)
            }
            Some(w) => {
                let z = scale_by(&grad, w);
                let scaled = flat_dot(&grad, &z);
                let gamma = if k == 0 || scaled_prev <= 0.0 {
                    0.0
                } else {
                    scaled / scaled_prev
                };
                scaled_prev = scaled;
                let dirs = match dir_prev.as_ref() {
                    Some(prev) if gamma != 0.0 => z.add_scaled(gamma, prev),
                    _ => z,
                };
                let beta = match joint_step_size(obj, &params, &r, &dirs) {
                    Ok(b) => b,
                    Err(Error::DegenerateDirection { .. }) => {
                        restart_next = true;
                        0.0
                    }
                    Err(e) => return Err(e),
                };
                ((gamma, gamma), dirs, (beta, beta))
            }
        };
        let (beta_phi, beta_theta) = betas;
        if !(beta_phi.is_finite() && beta_theta.is_finite()) {
            return Err(diverged(&trace, n, "step size"));
        }

        record.gamma_phi = gammas.0;
        record.gamma_theta = gammas.1;
        record.beta_phi = beta_phi;
        record.beta_theta = beta_theta;
        trace.records.push(record);

        // Update.
        for (p, d) in params.phi.iter_mut().zip(&dirs.phi) {
            *p -= beta_phi * d;
        }
        for (p, d) in params.theta.iter_mut().zip(&dirs.theta) {
            *p -= beta_theta * d;
        }
        grad_prev = Some(grad);
        dir_prev = Some(dirs);
        n += 1;
    };

    let final_cost = trace.records.last().map(|r| r.cost).unwrap_or(f64::NAN);
    let trials = trial_points(&params, 20, 0x5eed);
    let stationarity = stationarity_check(obj, &params, &trials)?;
    Ok(SolveOutcome {
        params,
        trace,
        report: ConvergenceReport {
            status,
            iterations: n,
            final_cost,
            stationarity,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grad(phi: Vec<f64>, theta: Vec<f64>) -> Gradient {
        PolyParams { phi, theta }
    }

    #[test]
    fn fr_first_iteration_is_zero() {
        let g = grad(vec![1.0, 2.0], vec![3.0]);
        assert_eq!(fr_coefficients(&g, None, 0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn fr_equal_and_doubled() {
        let g = grad(vec![1.0, 2.0], vec![3.0]);
        assert_eq!(fr_coefficients(&g, Some(&g), 3).unwrap(), (1.0, 1.0));
        let g2 = grad(vec![2.0, 4.0], vec![3.0]);
        assert_eq!(fr_coefficients(&g2, Some(&g), 1).unwrap(), (4.0, 1.0));
    }

    #[test]
    fn fr_guards_zero_previous_gradient() {
        let prev = grad(vec![0.0, 0.0], vec![1.0]);
        let now = grad(vec![1.0, 0.0], vec![1.0]);
        assert!(matches!(
            fr_coefficients(&now, Some(&prev), 2),
            Err(Error::DegenerateDirection {
                block: Block::Source
            })
        ));
        let now = grad(vec![0.0, 0.0], vec![1.0]);
        assert_eq!(fr_coefficients(&now, Some(&prev), 2).unwrap(), (0.0, 1.0));
        assert!(fr_coefficients(&now, None, 2).is_err());
    }

    #[test]
    fn direction_rules() {
        let g = grad(vec![1.0, -2.0], vec![0.5]);
        assert_eq!(directions(&g, None, (0.0, 0.0), 0), g);
        let prev = grad(vec![9.0, 9.0], vec![9.0]);
        assert_eq!(directions(&g, Some(&prev), (0.0, 0.0), 4), g);
        assert_eq!(directions(&g, Some(&g), (1.0, 1.0), 1), g.scaled(2.0));
        assert_eq!(directions(&g, Some(&prev), (5.0, 5.0), 0), g);
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::default();
        assert!(c.validate().is_ok());
        c.epsilon = -1.0;
        assert!(c.validate().is_err());
        c.epsilon = 1e-3;
        c.restart_period = Some(0);
        assert!(c.validate().is_err());
    }
}
