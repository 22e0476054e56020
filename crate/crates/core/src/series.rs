//! Eigenfunction series for the Dirichlet heat kernel on `(0, L)`.
//!
//! Everything here works in the shifted frame `x ∈ [0, L]`. The Green's
//! function and the source kernel are evaluated as truncated sine series;
//! the polynomial moments that the forward model needs per harmonic are
//! closed-form, so no quadrature is involved anywhere in this module.

use std::f64::consts::PI;

use crate::error::{check_range, Result};

/// Controls where an infinite eigenfunction series is cut off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    /// Absolute bound on the magnitude of the first neglected term.
    pub tol: f64,
    /// Hard cap on the number of terms summed.
    pub max_terms: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_terms: 10_000,
        }
    }
}

impl TruncationPolicy {
    pub fn new(tol: f64, max_terms: usize) -> Result<Self> {
        check_range("tol", tol, tol > 0.0 && tol.is_finite(), "(0, inf)")?;
        check_range("max_terms", max_terms as f64, max_terms >= 1, "[1, inf)")?;
        Ok(Self { tol, max_terms })
    }
}

/// Dirichlet eigenvalue `λ_n = nπ/L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenvalue {
    pub index: usize,
    pub lambda: f64,
}

impl Eigenvalue {
    #[inline]
    pub fn new(index: usize, length: f64) -> Self {
        Self {
            index,
            lambda: index as f64 * PI / length,
        }
    }

    #[inline]
    pub fn lambda_sq(&self) -> f64 {
        self.lambda * self.lambda
    }
}

/// A truncated series value together with how it was truncated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSum {
    pub value: f64,
    pub terms: usize,
    /// `max_terms` was reached before the term bound dropped below `tol`.
    pub exhausted: bool,
}

fn check_point(x: f64, length: f64, t: f64) -> Result<()> {
    check_range(
        "length",
        length,
        length > 0.0 && length.is_finite(),
        "(0, inf)",
    )?;
    check_range(
        "x",
        x,
        (0.0..=length).contains(&x),
        format!("[0, {length}]"),
    )?;
    check_range("t", t, t > 0.0 && t.is_finite(), "(0, inf)")
}

/// Visits harmonics `index(1), index(2), ...`; `visit` accumulates the term
/// and returns a bound on its magnitude. Stops once the bound drops below
/// `tol` or after `max_terms` visits. Returns `(terms, exhausted)`.
pub(crate) fn sum_harmonics(
    length: f64,
    trunc: &TruncationPolicy,
    index: impl Fn(usize) -> usize,
    mut visit: impl FnMut(&Eigenvalue) -> f64,
) -> (usize, bool) {
    for j in 1..=trunc.max_terms {
        let eig = Eigenvalue::new(index(j), length);
        if visit(&eig) < trunc.tol {
            return (j, false);
        }
    }
    log::warn!(
        "series truncated at max_terms = {} before reaching tol = {:e}",
        trunc.max_terms,
        trunc.tol
    );
    (trunc.max_terms, true)
}

fn truncated_sum(
    length: f64,
    trunc: &TruncationPolicy,
    index: impl Fn(usize) -> usize,
    term: impl Fn(&Eigenvalue) -> f64,
    bound: impl Fn(&Eigenvalue) -> f64,
) -> SeriesSum {
    let mut value = 0.0;
    let (terms, exhausted) = sum_harmonics(length, trunc, index, |e| {
        value += term(e);
        bound(e)
    });
    SeriesSum {
        value,
        terms,
        exhausted,
    }
}

/// `G(x, ξ, t) = (2/L) Σ sin(λ_n x) sin(λ_n ξ) exp(-λ_n² t)` with truncation
/// diagnostics.
pub fn green_g_series(
    x: f64,
    xi: f64,
    t: f64,
    length: f64,
    trunc: &TruncationPolicy,
) -> Result<SeriesSum> {
    check_point(x, length, t)?;
    check_range(
        "xi",
        xi,
        (0.0..=length).contains(&xi),
        format!("[0, {length}]"),
    )?;
    let scale = 2.0 / length;
    Ok(truncated_sum(
        length,
        trunc,
        |j| j,
        |e| scale * (e.lambda * x).sin() * (e.lambda * xi).sin() * (-e.lambda_sq() * t).exp(),
        |e| scale * (-e.lambda_sq() * t).exp(),
    ))
}

/// Green's function of the heat equation on `(0, L)` with homogeneous
/// Dirichlet conditions.
pub fn green_g(x: f64, xi: f64, t: f64, length: f64, trunc: &TruncationPolicy) -> Result<f64> {
    green_g_series(x, xi, t, length, trunc).map(|s| s.value)
}

/// `H(x, t) = ∫₀^L G(x, ξ, t) dξ`; only odd harmonics survive.
pub fn kernel_h_series(x: f64, t: f64, length: f64, trunc: &TruncationPolicy) -> Result<SeriesSum> {
    check_point(x, length, t)?;
    let scale = 4.0 / length;
    Ok(truncated_sum(
        length,
        trunc,
        |j| 2 * j - 1,
        |e| scale / e.lambda * (e.lambda * x).sin() * (-e.lambda_sq() * t).exp(),
        |e| scale / e.lambda * (-e.lambda_sq() * t).exp(),
    ))
}

/// Response at `(x, t)` to a unit source switched on at time zero.
pub fn kernel_h(x: f64, t: f64, length: f64, trunc: &TruncationPolicy) -> Result<f64> {
    kernel_h_series(x, t, length, trunc).map(|s| s.value)
}

/// Fills `out[p] = ∫₀^L ξ^p sin(λ ξ) dξ` for `p = 0..out.len()`.
///
/// Uses the paired recurrence
/// `S_p = (-L^p cos λL + p C_{p-1}) / λ`, `C_p = (L^p sin λL - p S_{p-1}) / λ`.
pub(crate) fn sine_moments_into(lambda: f64, length: f64, out: &mut [f64]) {
    let (sin_l, cos_l) = (lambda * length).sin_cos();
    let mut s_prev = (1.0 - cos_l) / lambda;
    let mut c_prev = sin_l / lambda;
    let mut l_pow = 1.0;
    for (p, slot) in out.iter_mut().enumerate() {
        if p > 0 {
            l_pow *= length;
            let pf = p as f64;
            let s = (-l_pow * cos_l + pf * c_prev) / lambda;
            let c = (l_pow * sin_l - pf * s_prev) / lambda;
            s_prev = s;
            c_prev = c;
        }
        *slot = s_prev;
    }
}

/// `∫₀^L ξ^{m-1} sin(λ_n ξ) dξ` in closed form.
pub fn sine_moment(m: usize, n: usize, length: f64) -> Result<f64> {
    check_range("m", m as f64, m >= 1, "[1, inf)")?;
    check_range("n", n as f64, n >= 1, "[1, inf)")?;
    check_range(
        "length",
        length,
        length > 0.0 && length.is_finite(),
        "(0, inf)",
    )?;
    let mut out = vec![0.0; m];
    sine_moments_into(Eigenvalue::new(n, length).lambda, length, &mut out);
    Ok(out[m - 1])
}

/// Fills `out[p] = ∫₀^t τ^p exp(-λ²(t - τ)) dτ` for `p = 0..out.len()`.
///
/// The upward recurrence `J_p = (t^p - p J_{p-1}) / λ²` multiplies the
/// error of `J_{p-1}` by `p/(λ²t)`, so it is only used when `λ²t` exceeds
/// the highest power requested. Below that the positive series
/// `J_p = t^{p+1} e^{-a} Σ_j a^j / (j! (p+j+1))`, `a = λ²t`, is summed
/// instead; it has no cancellation.
pub(crate) fn exp_moments_into(lambda_sq: f64, t: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    if t == 0.0 {
        out.fill(0.0);
        return;
    }
    let a = lambda_sq * t;
    if a >= out.len() as f64 {
        let mut j = -(-a).exp_m1() / lambda_sq;
        let mut t_pow = 1.0;
        out[0] = j;
        for (p, slot) in out.iter_mut().enumerate().skip(1) {
            t_pow *= t;
            j = (t_pow - p as f64 * j) / lambda_sq;
            *slot = j;
        }
    } else {
        let decay = (-a).exp();
        let mut t_pow = t;
        for (p, slot) in out.iter_mut().enumerate() {
            let mut weight = 1.0; // a^j / j!
            let mut sum = 0.0;
            let mut j = 0usize;
            loop {
                let term = weight / (p + j + 1) as f64;
                sum += term;
                j += 1;
                if term <= f64::EPSILON * 0.25 * sum && j as f64 > a {
                    break;
                }
                weight *= a / j as f64;
            }
            *slot = t_pow * decay * sum;
            t_pow *= t;
        }
    }
}

/// `∫₀^t τ^{k-1} exp(-λ²(t - τ)) dτ` in closed form.
pub fn exp_moment(k: usize, lambda_sq: f64, t: f64) -> Result<f64> {
    check_range("k", k as f64, k >= 1, "[1, inf)")?;
    check_range(
        "lambda_sq",
        lambda_sq,
        lambda_sq > 0.0 && lambda_sq.is_finite(),
        "(0, inf)",
    )?;
    check_range("t", t, t >= 0.0 && t.is_finite(), "[0, inf)")?;
    let mut out = vec![0.0; k];
    exp_moments_into(lambda_sq, t, &mut out);
    Ok(out[k - 1])
}
