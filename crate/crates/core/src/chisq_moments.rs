//! Inverse moments `E[(1/χ²_k(λ))^m]`, `m ∈ {1, 2}`, of the noncentral
//! chi-square law.
//!
//! `χ²_k(λ)` is a central chi-square with `k + 2J` degrees of freedom where
//! `J ~ Poisson(λ/2)`, and for a central law `E[(1/χ²_k)^m] = ∏_{i=1..m} 1/(k − 2i)`
//! whenever `k > 2m`. The inverse moment is therefore the Poisson mixture
//!
//! ```text
//! Σ_{j≥0} P(J = j) · ∏_{i=1..m} 1/(k + 2j − 2i).
//! ```
//!
//! The series is summed outward from the Poisson mode with weights built in
//! log space, so very large noncentralities do not underflow. Beyond
//! `λ = 10⁶` (with `k ≪ λ`) an asymptotic expansion of the Laplace-transform
//! integral replaces the series, whose length grows like `√λ`.

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-12;

/// A request for `E[(1/χ²_k(λ))^order]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvMomentQuery {
    pub k: u32,
    pub lambda: f64,
    pub order: u32,
    /// Relative truncation tolerance, in `(0, 1e-6]`.
    pub tol: f64,
}

impl InvMomentQuery {
    pub fn new(k: u32, lambda: f64, order: u32) -> Result<Self> {
        Self::with_tol(k, lambda, order, DEFAULT_TOL)
    }

    pub fn with_tol(k: u32, lambda: f64, order: u32, tol: f64) -> Result<Self> {
        if !(order == 1 || order == 2) {
            return Err(Error::InvalidArgument(format!("order must be 1 or 2, got {order}")));
        }
        if k <= 2 * order {
            return Err(Error::MomentNotFinite { k, order });
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("noncentrality must be finite and >= 0, got {lambda}")));
        }
        if !(tol > 0.0 && tol <= 1e-6) {
            return Err(Error::InvalidArgument(format!("tolerance must lie in (0, 1e-6], got {tol}")));
        }
        Ok(InvMomentQuery { k, lambda, order, tol })
    }
}

/// `∏_{i=1..order} 1/(dof − 2i)` for a central law with `dof` degrees of freedom.
fn central(dof: f64, order: u32) -> f64 {
    match order {
        1 => 1.0 / (dof - 2.0),
        _ => 1.0 / ((dof - 2.0) * (dof - 4.0)),
    }
}

/// `ln(j!)`.
fn ln_factorial(j: u64) -> f64 {
    if j < 256 {
        (2..=j).map(|i| (i as f64).ln()).sum()
    } else {
        // Stirling series; the truncation error is below 1e-19 for j ≥ 256.
        let x = j as f64;
        let inv = 1.0 / x;
        let inv2 = inv * inv;
        x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln()
            + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
    }
}

/// Evaluates `E[(1/χ²_k(λ))^order]` to relative accuracy `tol`.
pub fn inv_moment(query: &InvMomentQuery) -> f64 {
    let k = query.k as f64;
    let m = query.order;
    if query.lambda == 0.0 {
        return central(k, m);
    }
    if use_large_lambda(k, query.lambda) {
        return large_lambda_expansion(k, query.lambda, m, query.tol);
    }
    poisson_series(k, query.lambda, m, query.tol)
}

/// Noncentralities beyond this go through [`large_lambda_expansion`] once
/// `k/λ` is small as well; the Poisson bulk would need `O(√λ)` terms.
pub const LARGE_LAMBDA: f64 = 1e6;

fn use_large_lambda(k: f64, lambda: f64) -> bool {
    lambda >= LARGE_LAMBDA && k <= 1e-4 * lambda
}

/// Expansion of the Laplace-transform integrals
/// `E[1/X] = ½∫₀¹ (1−v)^a e^{−λv/2} dv` (`a = k/2 − 2`) and
/// `E[1/X²] = ¼∫₀¹ v(1−v)^b e^{−λv/2} dv` (`b = k/2 − 3`) in powers of `2/λ`:
///
/// ```text
/// E[1/X]  = λ⁻¹ Σ_r (a)↓r (−2/λ)^r
/// E[1/X²] = λ⁻² Σ_r (r+1)(b)↓r (−2/λ)^r
/// ```
///
/// with `(a)↓r` the falling factorial. Terms shrink like `(k/λ)^r`; the
/// neglected `e^{−λ/2}` tail is far below any admissible tolerance here.
fn large_lambda_expansion(k: f64, lambda: f64, order: u32, tol: f64) -> f64 {
    let (a, scale) = match order {
        1 => (0.5 * k - 2.0, 1.0 / lambda),
        _ => (0.5 * k - 3.0, 1.0 / (lambda * lambda)),
    };
    let x = -2.0 / lambda;
    let mut falling = 1.0;
    let mut power = 1.0;
    let mut sum = 1.0;
    for r in 1..64u32 {
        falling *= a - (r - 1) as f64;
        power *= x;
        let weight = if order == 1 { 1.0 } else { (r + 1) as f64 };
        let term = weight * falling * power;
        sum += term;
        if term.abs() < 0.1 * tol * sum.abs() {
            break;
        }
    }
    scale * sum
}

/// Poisson-mixture series. Truncation stops on each side of the mode once
/// (tail mass bound) × (largest remaining term) falls below `tol/2` times the
/// running sum. The upper tail uses `P(J > j) ≤ P(J = j+1) / (1 − μ/(j+2))`,
/// the lower tail `P(J < j) ≤ P(J = j−1) / (1 − (j−1)/μ)`, with `μ = λ/2`.
fn poisson_series(k: f64, lambda: f64, m: u32, tol: f64) -> f64 {
    let mu = 0.5 * lambda;
    let term = |j: u64| central(k + 2.0 * j as f64, m);
    let half_tol = 0.5 * tol;

    let mode = mu.floor() as u64;
    let w_mode = (-mu + mode as f64 * mu.ln() - ln_factorial(mode)).exp();
    let mut sum = w_mode * term(mode);
    // Rounding in ln w_mode is O(μ·ε) and shifts every weight by the same
    // factor; dividing by the summed weights cancels it.
    let mut mass = w_mode;

    // Upward from the mode; terms decrease in j.
    let mut w = w_mode;
    let mut j = mode;
    loop {
        let w_next = w * mu / (j + 1) as f64;
        let tail = w_next / (1.0 - mu / (j + 2) as f64);
        if tail * term(j + 1) < half_tol * sum {
            break;
        }
        j += 1;
        w = w_next;
        sum += w * term(j);
        mass += w;
    }

    // Downward from the mode; the largest remaining term is the j = 0 term.
    let top = term(0);
    let mut w = w_mode;
    let mut j = mode;
    while j > 0 {
        let w_prev = w * j as f64 / mu;
        j -= 1;
        w = w_prev;
        sum += w * term(j);
        mass += w;
        if j == 0 {
            break;
        }
        let below = w * j as f64 / mu;
        let ratio = (j - 1) as f64 / mu;
        let tail = below / (1.0 - ratio);
        if tail * top < half_tol * sum {
            break;
        }
    }
    sum / mass
}

/// Convenience wrapper with the default tolerance.
pub fn inv_moment_of(k: u32, lambda: f64, order: u32) -> Result<f64> {
    Ok(inv_moment(&InvMomentQuery::new(k, lambda, order)?))
}

/// `(k + λ)^order · E[(1/χ²_k(λ))^order]`, which tends to 1 as `k + λ → ∞`.
pub fn moment_ratio(k: u32, lambda: f64, order: u32) -> Result<f64> {
    let v = inv_moment_of(k, lambda, order)?;
    Ok((k as f64 + lambda).powi(order as i32) * v)
}
