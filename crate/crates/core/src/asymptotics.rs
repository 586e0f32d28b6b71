//! Large-`n` limits of the conditional out-of-sample risk with `p/n → t`.
//!
//! Pointwise limit (signal strength `δ² = lim β′Σβ`):
//!
//! ```text
//! r(δ², c, t) = t/(1−t)·(1 − c·t/(t+δ²))² + c²·t²δ²/(t+δ²)²
//! ```
//!
//! Worst-case limit (supremum over β): the last term is divided by
//! `(1 − √t)²`, the squared lower edge of the Marchenko–Pastur support.
//! Both equal `t/(1−t)` at `δ² = ∞`, and `t/(t+δ²)` is read as 0 when
//! `t = δ² = 0`. `δ² = ∞` is passed as `f64::INFINITY`.

use nalgebra::DVector;
use serde::Serialize;

use crate::chisq_moments::inv_moment_of;
use crate::error::{Error, Result};
use crate::linmodel::{check_dims, ResponseVector};
use crate::optim::{grid_golden_max, GRID_POINTS, U_TOL};
use crate::risk_exact::check_c;

/// Tolerance on the worst-case gap below which the numerical supremum is
/// treated as indistinguishable from the maximum-likelihood limit.
pub const GAP_TOL: f64 = 1e-9;

/// A point `(t, δ², c)` of the asymptotic regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticRegime {
    pub t: f64,
    pub delta2: f64,
    pub c: f64,
}

impl AsymptoticRegime {
    pub fn new(t: f64, delta2: f64, c: f64) -> Result<Self> {
        check_t(t)?;
        check_delta2(delta2)?;
        check_c(c)?;
        Ok(AsymptoticRegime { t, delta2, c })
    }

    pub fn r(&self) -> f64 {
        r_core(self.delta2, self.c, self.t, 1.0)
    }

    pub fn big_r(&self) -> f64 {
        r_core(self.delta2, self.c, self.t, (1.0 - self.t.sqrt()).powi(2))
    }
}

fn check_t(t: f64) -> Result<()> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::AspectRatio(t));
    }
    Ok(())
}

fn check_delta2(delta2: f64) -> Result<()> {
    if !(delta2 >= 0.0) {
        return Err(Error::InvalidArgument(format!("signal strength δ² = {delta2} must be >= 0")));
    }
    Ok(())
}

/// `t/(1−t)`, the limit of the maximum-likelihood risk.
pub fn ml_limit(t: f64) -> f64 {
    t / (1.0 - t)
}

fn r_core(delta2: f64, c: f64, t: f64, edge: f64) -> f64 {
    let ml = ml_limit(t);
    if delta2.is_infinite() {
        return ml;
    }
    let denom = t + delta2;
    if denom == 0.0 {
        return 0.0;
    }
    let s = t / denom;
    ml * (1.0 - c * s).powi(2) + c * c * s * s * delta2 / edge
}

/// `r(δ², c, t)`.
pub fn r_limit(delta2: f64, c: f64, t: f64) -> Result<f64> {
    Ok(AsymptoticRegime::new(t, delta2, c)?.r())
}

/// `R(δ², c, t)`.
pub fn big_r_limit(delta2: f64, c: f64, t: f64) -> Result<f64> {
    Ok(AsymptoticRegime::new(t, delta2, c)?.big_r())
}

/// Maximum of a function of `δ² ∈ [0, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Supremum {
    pub value: f64,
    /// Maximizer; `f64::INFINITY` when the supremum is the limit at ∞.
    pub argmax: f64,
}

/// `δ² = u/(1−u)`.
fn u_to_delta2(u: f64) -> f64 {
    if u >= 1.0 {
        f64::INFINITY
    } else {
        u / (1.0 - u)
    }
}

fn sup_over_delta2<F: Fn(f64) -> f64>(f: F) -> Result<Supremum> {
    let m = grid_golden_max(|u| f(u_to_delta2(u)), 0.0, 1.0, GRID_POINTS, U_TOL)?;
    Ok(Supremum { value: m.value, argmax: u_to_delta2(m.arg) })
}

/// `sup_{δ² ∈ [0,∞]} R(δ², c, t)` by grid and golden-section search in
/// `u = δ²/(1+δ²)`.
pub fn sup_big_r(c: f64, t: f64) -> Result<Supremum> {
    check_t(t)?;
    check_c(c)?;
    if c == 0.0 {
        return Ok(Supremum { value: ml_limit(t), argmax: f64::INFINITY });
    }
    let edge = (1.0 - t.sqrt()).powi(2);
    sup_over_delta2(|d2| r_core(d2, c, t, edge))
}

/// Plug-in signal estimate `δ̂² = max{Y′Y/n − 1, 0}` and the risk estimate
/// `r(δ̂², c, p/n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlugIn {
    pub delta_hat2: f64,
    pub risk: f64,
}

pub fn delta_hat_plug_in(y: &ResponseVector, c: f64, n: usize, p: usize) -> Result<PlugIn> {
    check_dims(n, p)?;
    if n == p {
        return Err(Error::Dimension(format!("plug-in estimate needs n > p, got n = p = {n}")));
    }
    if y.y.len() != n {
        return Err(Error::Dimension(format!("response has length {}, expected {n}", y.y.len())));
    }
    let delta_hat2 = (y.mean_square() - 1.0).max(0.0);
    let risk = r_limit(delta_hat2, c, p as f64 / n as f64)?;
    Ok(PlugIn { delta_hat2, risk })
}

/// Worst-case finite-sample risk over `d² = β′X′Xβ/n` for a given `V′V`
/// spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiniteSup {
    pub value: f64,
    pub argmax: f64,
    /// `tr((V′V)⁻¹)`, the maximum-likelihood risk.
    pub ml: f64,
}

impl FiniteSup {
    /// `(value − ml)/2` if positive.
    pub fn epsilon(&self) -> Option<f64> {
        let gap = self.value - self.ml;
        (gap > 0.0).then_some(gap / 2.0)
    }
}

/// Evaluates `R*(d², c, n, p)` for fixed spectrum data.
#[derive(Debug, Clone, Copy)]
pub struct FiniteWorstCase {
    c: f64,
    n: usize,
    p: usize,
    trace_inv: f64,
    min_eig_over_n: f64,
}

impl FiniteWorstCase {
    /// `v_spectrum` holds the eigenvalues of `V′V` in any order.
    pub fn new(c: f64, v_spectrum: &[f64], n: usize, p: usize) -> Result<Self> {
        check_dims(n, p)?;
        check_c(c)?;
        if v_spectrum.len() != p {
            return Err(Error::Dimension(format!("spectrum has {} values, expected {p}", v_spectrum.len())));
        }
        let min = v_spectrum.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min > 0.0) {
            return Err(Error::SingularGram);
        }
        let trace_inv = v_spectrum.iter().map(|l| 1.0 / l).sum();
        Ok(FiniteWorstCase { c, n, p, trace_inv, min_eig_over_n: min / n as f64 })
    }

    pub fn trace_inv(&self) -> f64 {
        self.trace_inv
    }

    /// `R*(d²)`; the limit at `d² = ∞` is `tr((V′V)⁻¹)`.
    pub fn eval(&self, d2: f64) -> Result<f64> {
        let (c, pf) = (self.c, self.p as f64);
        if c == 0.0 || d2.is_infinite() {
            return Ok(self.trace_inv);
        }
        let lambda = self.n as f64 * d2;
        let p = self.p as u32;
        let m1 = inv_moment_of(p, lambda, 1)?;
        let m2 = inv_moment_of(p + 2, lambda, 2)?;
        let m4 = inv_moment_of(p + 4, lambda, 2)?;
        let quad = (c * c + 4.0 * c / pf) * pf * pf;
        Ok(self.trace_inv * (1.0 - 2.0 * c * pf * m1 + quad * m2) + quad * d2 * m4 / self.min_eig_over_n)
    }

    pub fn sup(&self) -> Result<FiniteSup> {
        if self.c == 0.0 {
            return Ok(FiniteSup { value: self.trace_inv, argmax: f64::INFINITY, ml: self.trace_inv });
        }
        let s = sup_over_delta2(|d2| self.eval(d2).unwrap_or(f64::NAN))?;
        Ok(FiniteSup { value: s.value, argmax: s.argmax, ml: self.trace_inv })
    }
}

pub fn finite_sup_risk(c: f64, v_spectrum: &[f64], n: usize, p: usize) -> Result<FiniteSup> {
    FiniteWorstCase::new(c, v_spectrum, n, p)?.sup()
}

pub fn finite_sup_risk_vec(c: f64, v_spectrum: &DVector<f64>, n: usize, p: usize) -> Result<FiniteSup> {
    finite_sup_risk(c, v_spectrum.as_slice(), n, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    WorstCaseFails,
    WorstCaseHolds,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::WorstCaseFails => "worst-case-fails",
            Region::WorstCaseHolds => "worst-case-holds",
        }
    }
}

/// Closed-form region: failure iff `0 < c ≤ 2` and `t > ((c−2)/(c+2))²`, or
/// `c > 2` and `t > 0`. Boundary points belong to the holds region.
pub fn analytic_region(c: f64, t: f64) -> Region {
    let fails = if c <= 0.0 {
        false
    } else if c <= 2.0 {
        t > ((c - 2.0) / (c + 2.0)).powi(2)
    } else {
        t > 0.0
    };
    if fails {
        Region::WorstCaseFails
    } else {
        Region::WorstCaseHolds
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseVerdict {
    pub c: f64,
    pub t: f64,
    pub region: Region,
    pub sup_r: f64,
    /// Maximizing `δ²` (∞ when the supremum is only approached).
    pub argmax_delta2: f64,
    pub ml_limit: f64,
    pub gap: f64,
    /// `gap/2` in the failure region.
    pub epsilon: Option<f64>,
    /// Pointwise dominance holds for every fixed β when `c ≤ 2`.
    pub pointwise_safe: bool,
    /// The numerical gap agrees with the closed-form region, or is within
    /// [`GAP_TOL`] of zero.
    pub consistent: bool,
}

pub fn phase_classify(c: f64, t: f64) -> Result<PhaseVerdict> {
    check_t(t)?;
    check_c(c)?;
    let sup = sup_big_r(c, t)?;
    let ml = ml_limit(t);
    let gap = sup.value - ml;
    let region = analytic_region(c, t);
    let numeric_fails = gap > GAP_TOL;
    let consistent = gap.abs() <= GAP_TOL || numeric_fails == (region == Region::WorstCaseFails);
    let epsilon = (region == Region::WorstCaseFails && gap > 0.0).then_some(gap / 2.0);
    Ok(PhaseVerdict {
        c,
        t,
        region,
        sup_r: sup.value,
        argmax_delta2: sup.argmax,
        ml_limit: ml,
        gap,
        epsilon,
        pointwise_safe: c <= 2.0,
        consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn r_limit_values() {
        assert_relative_eq!(r_limit(f64::INFINITY, 0.7, 0.8).unwrap(), 4.0, max_relative = 1e-14);
        for &(d, t) in &[(0.0, 0.3), (1.0, 0.5), (50.0, 0.9), (0.0, 0.0)] {
            assert_relative_eq!(r_limit(d, 0.0, t).unwrap(), t / (1.0 - t), max_relative = 1e-15);
        }
        assert_relative_eq!(r_limit(1.0, 1.0, 0.5).unwrap(), 5.0 / 9.0, max_relative = 1e-14);
        assert_eq!(r_limit(0.0, 1.7, 0.0).unwrap(), 0.0);
        assert!(matches!(r_limit(1.0, 1.0, 1.0), Err(Error::AspectRatio(_))));
        assert!(r_limit(-1.0, 1.0, 0.5).is_err());
        assert!(r_limit(f64::NAN, 1.0, 0.5).is_err());
        assert!(r_limit(1.0, -0.1, 0.5).is_err());
    }

    #[test]
    fn big_r_values() {
        for &(d, c) in &[(0.0, 1.0), (3.0, 2.5), (f64::INFINITY, 1.0)] {
            assert_eq!(big_r_limit(d, c, 0.0).unwrap(), 0.0);
        }
        for t in [0.1, 0.5, 0.9] {
            assert!(big_r_limit(0.0, 1.0, t).unwrap().abs() < 1e-15);
        }
        let expected = 4.0 / 9.0 + 0.25 / ((1.0 - 0.5f64.sqrt()).powi(2) * 2.25);
        assert_relative_eq!(big_r_limit(1.0, 1.0, 0.5).unwrap(), expected, max_relative = 1e-14);
        assert!((expected - 1.7397).abs() < 5e-5);
    }

    #[test]
    fn r_below_big_r() {
        for ti in 0..20 {
            let t = ti as f64 * 0.05;
            for ci in 0..=15 {
                let c = ci as f64 * 0.2;
                for &d in &[0.0, 0.01, 0.3, 1.0, 4.0, 100.0, f64::INFINITY] {
                    let r = r_limit(d, c, t).unwrap();
                    let big = big_r_limit(d, c, t).unwrap();
                    assert!(r <= big + 1e-15);
                    let equal = t == 0.0 || d == 0.0 || d.is_infinite() || c == 0.0;
                    if !equal {
                        assert!(r < big, "t={t} c={c} d={d}");
                    }
                    if c <= 2.0 {
                        assert!(r <= ml_limit(t) * (1.0 + 1e-14) + 1e-15, "r > ml at t={t} c={c} d={d}");
                    }
                }
            }
        }
    }

    #[test]
    fn sup_examples() {
        let s = sup_big_r(0.0, 0.4).unwrap();
        assert_relative_eq!(s.value, 0.4 / 0.6, max_relative = 1e-15);
        assert!(s.argmax.is_infinite());

        let s = sup_big_r(1.0, 0.5).unwrap();
        assert!(s.value >= big_r_limit(1.0, 1.0, 0.5).unwrap());
        assert!(s.value > 1.0);
        // stationary point: nearby values are not larger
        for f in [0.999, 1.001] {
            assert!(big_r_limit(s.argmax * f, 1.0, 0.5).unwrap() <= s.value + 1e-12);
        }

        let s = sup_big_r(1.0, 0.05).unwrap();
        assert_relative_eq!(s.value, 0.05 / 0.95, max_relative = 1e-12);
        assert!(s.argmax.is_infinite());
    }

    #[test]
    fn phase_examples() {
        let v = phase_classify(1.0, 0.15).unwrap();
        assert_eq!(v.region, Region::WorstCaseFails);
        assert!(v.gap > 0.0 && v.epsilon == Some(v.gap / 2.0) && v.consistent);
        let v = phase_classify(1.0, 0.10).unwrap();
        assert_eq!(v.region, Region::WorstCaseHolds);
        assert!(v.epsilon.is_none() && v.gap <= GAP_TOL && v.consistent);
        let v = phase_classify(2.0, 0.5).unwrap();
        assert_eq!(v.region, Region::WorstCaseFails);
        let v = phase_classify(3.0, 0.0).unwrap();
        assert_eq!(v.region, Region::WorstCaseHolds);
        assert!(!v.pointwise_safe);
        // exact boundary of the c = 1 region is classified as holding
        assert_eq!(analytic_region(1.0, 1.0 / 9.0), Region::WorstCaseHolds);
        assert!(phase_classify(1.0, 1.0).is_err());
    }

    #[test]
    fn plug_in() {
        let mk = |ms: f64| ResponseVector { y: DVector::from_element(100, ms.sqrt()), seed: 0 };
        let e = delta_hat_plug_in(&mk(0.8), 1.0, 100, 50).unwrap();
        assert_eq!(e.delta_hat2, 0.0);
        let e = delta_hat_plug_in(&mk(3.5), 1.0, 100, 50).unwrap();
        assert_relative_eq!(e.delta_hat2, 2.5, max_relative = 1e-14);
        assert_relative_eq!(e.risk, r_limit(2.5, 1.0, 0.5).unwrap(), max_relative = 1e-14);
        assert!(delta_hat_plug_in(&mk(1.0), 1.0, 100, 100).is_err());
        assert!(delta_hat_plug_in(&mk(1.0), 1.0, 99, 50).is_err());
    }

    #[test]
    fn finite_sup_c_zero_and_errors() {
        let spec = [2.0, 3.0, 5.0, 8.0];
        let f = FiniteWorstCase::new(0.0, &spec, 10, 4).unwrap();
        let tr = 1.0 / 2.0 + 1.0 / 3.0 + 1.0 / 5.0 + 1.0 / 8.0;
        for d in [0.0, 1.0, 100.0] {
            assert_relative_eq!(f.eval(d).unwrap(), tr, max_relative = 1e-15);
        }
        assert!(finite_sup_risk(1.0, &[0.0, 1.0, 2.0, 3.0], 10, 4).is_err());
        assert!(finite_sup_risk(1.0, &[1.0, 2.0, 3.0], 10, 4).is_err());
    }

    #[test]
    fn finite_sup_matches_limit_for_spiked_spectrum() {
        // V′V = n·diag(a, 1, …, 1): for large p,
        // R*(d²) ≈ tr·(1 − ct/(t+d²))² + c²t²d²/((t+d²)²·a).
        let (n, p, c, a) = (4000, 2000, 1.0, 0.1);
        let t = p as f64 / n as f64;
        let mut spec = vec![n as f64; p];
        spec[0] = a * n as f64;
        let tr = (p - 1) as f64 / n as f64 + 1.0 / (a * n as f64);
        let f = finite_sup_risk(c, &spec, n, p).unwrap();
        assert_relative_eq!(f.ml, tr, max_relative = 1e-12);
        let limit = |d2: f64| {
            let s = t + d2;
            tr * (1.0 - c * t / s).powi(2) + c * c * t * t * d2 / (s * s * a)
        };
        let brute = (1..=20_000).map(|i| limit(i as f64 * 1e-3)).fold(tr, f64::max);
        assert_relative_eq!(f.value, brute, max_relative = 1e-2);
        assert!(f.value > f.ml);
    }
}
