//! Exact conditional prediction risks of `β̂(c)` given the design.
//!
//! In-sample: `ρ₁(c) = p/n − (1/n)[2cp(p−2) − c²p²]·E[1/χ²_p(λ)]`.
//!
//! Out-of-sample, with `T = tr(Σ(X′X)⁻¹)`, `λ = β′X′Xβ`, `s = β′Σβ`:
//!
//! ```text
//! ρ₂(c) = T·[1 − 2cp·M₁ + (c² + 4c/p)·p²·M₂] + (c² + 4c/p)·s·p²·M₄
//! M₁ = E[1/χ²_p(λ)],  M₂ = E[1/χ²_{p+2}(λ)²],  M₄ = E[1/χ²_{p+4}(λ)²]
//! ```

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::chisq_moments::inv_moment_of;
use crate::error::{Error, Result};
use crate::linmodel::{quad_form, DesignMatrix};

/// James–Stein tuning `(p − 2)/p`.
pub fn js_c(p: usize) -> f64 {
    (p as f64 - 2.0) / p as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShrinkageConfig {
    pub c: f64,
}

impl ShrinkageConfig {
    pub fn new(c: f64) -> Result<Self> {
        check_c(c)?;
        Ok(ShrinkageConfig { c })
    }

    pub fn james_stein(p: usize) -> Self {
        ShrinkageConfig { c: js_c(p) }
    }

    pub fn maximum_likelihood() -> Self {
        ShrinkageConfig { c: 0.0 }
    }
}

pub(crate) fn check_c(c: f64) -> Result<()> {
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("tuning parameter c = {c} must be finite and >= 0")));
    }
    Ok(())
}

fn check_p(p: usize) -> Result<()> {
    if p < 3 {
        return Err(Error::Dimension(format!("shrinkage needs p >= 3, got {p}")));
    }
    Ok(())
}

fn check_instance(design: &DesignMatrix, sigma_cov: &DMatrix<f64>, beta: Option<&DVector<f64>>) -> Result<()> {
    let p = design.p();
    if sigma_cov.nrows() != p || sigma_cov.ncols() != p {
        return Err(Error::Dimension(format!(
            "design has p = {p}, covariance is {}x{}",
            sigma_cov.nrows(),
            sigma_cov.ncols()
        )));
    }
    if let Some(b) = beta {
        if b.len() != p {
            return Err(Error::Dimension(format!("design has p = {p}, beta has length {}", b.len())));
        }
    }
    Ok(())
}

/// `tr(Σ(X′X)⁻¹)`, solving against the columns of `Σ` with the cached
/// Cholesky factor instead of forming the inverse.
pub fn trace_sigma_gram_inv(design: &DesignMatrix, sigma_cov: &DMatrix<f64>) -> f64 {
    let solved = design.cholesky().solve(sigma_cov);
    solved.trace()
}

/// `(ρ₁, ρ₂)` of maximum likelihood: `(p/n, tr(Σ(X′X)⁻¹))`.
pub fn ml_risks(design: &DesignMatrix, sigma_cov: &DMatrix<f64>) -> Result<(f64, f64)> {
    check_instance(design, sigma_cov, None)?;
    let rho1 = design.p() as f64 / design.n() as f64;
    let rho2 = trace_sigma_gram_inv(design, sigma_cov);
    if !(rho2.is_finite() && rho2 > 0.0) {
        return Err(Error::SingularGram);
    }
    Ok((rho1, rho2))
}

/// In-sample risk `ρ₁(β̂(c))`, a function of `ncp = β′X′Xβ` only.
pub fn shrink_risk_in(c: f64, n: usize, p: usize, ncp: f64) -> Result<f64> {
    check_p(p)?;
    check_c(c)?;
    if n < p {
        return Err(Error::Dimension(format!("need n >= p, got n = {n}, p = {p}")));
    }
    let (nf, pf) = (n as f64, p as f64);
    if c == 0.0 {
        return Ok(pf / nf);
    }
    let m1 = inv_moment_of(p as u32, ncp, 1)?;
    Ok(pf / nf - (2.0 * c * pf * (pf - 2.0) - c * c * pf * pf) * m1 / nf)
}

/// The three inverse moments entering `ρ₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OosMoments {
    /// `E[1/χ²_p(λ)]`
    pub m1: f64,
    /// `E[1/χ²_{p+2}(λ)²]`
    pub m2: f64,
    /// `E[1/χ²_{p+4}(λ)²]`
    pub m4: f64,
}

impl OosMoments {
    pub fn new(p: usize, ncp: f64) -> Result<Self> {
        check_p(p)?;
        let p = p as u32;
        Ok(OosMoments {
            m1: inv_moment_of(p, ncp, 1)?,
            m2: inv_moment_of(p + 2, ncp, 2)?,
            m4: inv_moment_of(p + 4, ncp, 2)?,
        })
    }

    /// `E[1/(β̂′X′Xβ̂)]`
    pub fn e_inv_norm(&self) -> f64 {
        self.m1
    }

    /// `E[β̂′Σβ̂ / (β̂′X′Xβ̂)²]`
    pub fn e_ratio(&self, trace: f64, snr: f64) -> f64 {
        trace * self.m2 + snr * self.m4
    }
}

/// `ρ₂(β̂(c))` from its invariants: `trace = tr(Σ(X′X)⁻¹)`, `ncp = β′X′Xβ`,
/// `snr = β′Σβ`.
pub fn shrink_risk_out_from_invariants(c: f64, p: usize, trace: f64, ncp: f64, snr: f64) -> Result<f64> {
    signed_risk_out(c, p, trace, ncp, snr, 1.0)
}

/// Same as [`shrink_risk_out_from_invariants`] with the sign of the
/// `−2cp·M₁` term replaced by `−cross_sign`. Only used to check that the
/// verification suite detects a corrupted formula.
#[doc(hidden)]
pub fn signed_risk_out(c: f64, p: usize, trace: f64, ncp: f64, snr: f64, cross_sign: f64) -> Result<f64> {
    check_p(p)?;
    check_c(c)?;
    if c == 0.0 {
        return Ok(trace);
    }
    let pf = p as f64;
    let mo = OosMoments::new(p, ncp)?;
    let quad = (c * c + 4.0 * c / pf) * pf * pf;
    Ok(trace * (1.0 - cross_sign * 2.0 * c * pf * mo.m1 + quad * mo.m2) + quad * snr * mo.m4)
}

/// `ρ₂` assembled term by term from the two expectations of the shrinkage
/// risk expansion: `T − 2cp·T·E[1/‖Xβ̂‖²] + (c²p² + 4cp)·E[β̂′Σβ̂/‖Xβ̂‖⁴]`.
pub fn risk_out_from_expectations(c: f64, p: usize, trace: f64, e_inv_norm: f64, e_ratio: f64) -> f64 {
    let pf = p as f64;
    trace - 2.0 * c * pf * trace * e_inv_norm + (c * c * pf * pf + 4.0 * c * pf) * e_ratio
}

/// Out-of-sample risk `ρ₂(β̂(c), β, X)`.
pub fn shrink_risk_out(c: f64, design: &DesignMatrix, sigma_cov: &DMatrix<f64>, beta: &DVector<f64>) -> Result<f64> {
    check_instance(design, sigma_cov, Some(beta))?;
    let (_, trace) = ml_risks(design, sigma_cov)?;
    shrink_risk_out_from_invariants(c, design.p(), trace, design.ncp(beta), quad_form(sigma_cov, beta))
}

/// `ρ₂(β̂(c)) / ρ₂(β̂_ML)`.
pub fn relative_oos(c: f64, design: &DesignMatrix, sigma_cov: &DMatrix<f64>, beta: &DVector<f64>) -> Result<f64> {
    let (_, ml) = ml_risks(design, sigma_cov)?;
    Ok(shrink_risk_out(c, design, sigma_cov, beta)? / ml)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskReport {
    pub c: f64,
    pub rho1_ml: f64,
    pub rho1_c: f64,
    pub rho2_ml: f64,
    pub rho2_c: f64,
    pub rel_oos: f64,
    /// `β′X′Xβ`
    pub ncp: f64,
    /// `β′Σβ`
    pub snr: f64,
}

pub fn risk_report(c: f64, design: &DesignMatrix, sigma_cov: &DMatrix<f64>, beta: &DVector<f64>) -> Result<RiskReport> {
    check_instance(design, sigma_cov, Some(beta))?;
    let (rho1_ml, rho2_ml) = ml_risks(design, sigma_cov)?;
    let ncp = design.ncp(beta);
    let snr = quad_form(sigma_cov, beta);
    let rho1_c = shrink_risk_in(c, design.n(), design.p(), ncp)?;
    let rho2_c = shrink_risk_out_from_invariants(c, design.p(), rho2_ml, ncp, snr)?;
    Ok(RiskReport {
        c,
        rho1_ml,
        rho1_c,
        rho2_ml,
        rho2_c,
        rel_oos: rho2_c / rho2_ml,
        ncp,
        snr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linmodel::{beta_along_eigvec, design_from_v, sample_design, sample_v, EntryLaw};
    use approx::assert_relative_eq;

    fn scaled_identity_design(n: usize, p: usize) -> DesignMatrix {
        // X′X = n·I
        let mut x = DMatrix::zeros(n, p);
        let s = (n as f64 / 2.0).sqrt();
        for j in 0..p {
            x[(2 * j, j)] = s;
            x[(2 * j + 1, j)] = s;
        }
        DesignMatrix::from_matrix(x).unwrap()
    }

    fn random_spd(p: usize, seed: u64) -> DMatrix<f64> {
        let a = sample_v(p, p, EntryLaw::StandardNormal, seed);
        a.tr_mul(&a) / p as f64 + DMatrix::identity(p, p) * 0.2
    }

    #[test]
    fn ml_risks_identity() {
        let d = scaled_identity_design(10, 5);
        let (r1, r2) = ml_risks(&d, &DMatrix::identity(5, 5)).unwrap();
        assert_eq!(r1, 0.5);
        assert_relative_eq!(r2, 0.5, max_relative = 1e-14);
    }

    #[test]
    fn ml_risks_equal_when_sigma_matches_gram() {
        let d = sample_design(30, 6, &random_spd(6, 1), EntryLaw::StandardNormal, 2).unwrap();
        let sigma = d.gram() / 30.0;
        let (r1, r2) = ml_risks(&d, &sigma).unwrap();
        assert_relative_eq!(r1, r2, max_relative = 1e-12);
    }

    #[test]
    fn in_sample_hand_values() {
        assert_eq!(shrink_risk_in(0.0, 10, 5, 3.0).unwrap(), 0.5);
        // 0.5 − (1/10)[2·(3/5)·5·3 − (9/25)·25]·(1/3) = 0.2
        assert_relative_eq!(shrink_risk_in(js_c(5), 10, 5, 0.0).unwrap(), 0.2, max_relative = 1e-14);
        assert!(shrink_risk_in(0.5, 10, 2, 0.0).is_err());
        assert!(shrink_risk_in(-0.1, 10, 5, 0.0).is_err());
    }

    #[test]
    fn in_sample_minimized_at_js() {
        let (n, p) = (20, 5);
        let cmax = 2.0 * js_c(p);
        let grid: Vec<f64> = (0..=400).map(|i| cmax * i as f64 / 400.0).collect();
        for ncp in [0.0, 10.0, 1000.0] {
            let vals: Vec<f64> = grid.iter().map(|&c| shrink_risk_in(c, n, p, ncp).unwrap()).collect();
            let (imin, _) = vals.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
            assert!((grid[imin] - js_c(p)).abs() <= cmax / 400.0);
            for (i, v) in vals.iter().enumerate().skip(1).take(399) {
                assert!(*v < p as f64 / n as f64, "c = {} not dominating", grid[i]);
            }
        }
    }

    #[test]
    fn out_of_sample_hand_value_beta_zero() {
        // β = 0, c = 3/5, Σ = I, X′X = 10·I, p = 5:
        // 0.5·[1 − 2·(3/5)·5·(1/3) + (9/25 + 12/25)·25·(1/15)] = 0.5·0.4 = 0.2
        let d = scaled_identity_design(10, 5);
        let v = shrink_risk_out(js_c(5), &d, &DMatrix::identity(5, 5), &DVector::zeros(5)).unwrap();
        assert_relative_eq!(v, 0.2, max_relative = 1e-13);
    }

    #[test]
    fn c_zero_is_ml() {
        let sigma = random_spd(7, 3);
        let d = sample_design(25, 7, &sigma, EntryLaw::StandardNormal, 4).unwrap();
        let beta = DVector::from_fn(7, |i, _| i as f64 - 3.0);
        let (_, ml) = ml_risks(&d, &sigma).unwrap();
        assert_eq!(shrink_risk_out(0.0, &d, &sigma, &beta).unwrap(), ml);
        assert_eq!(relative_oos(0.0, &d, &sigma, &beta).unwrap(), 1.0);
    }

    #[test]
    fn display_matches_expectation_form() {
        let sigma = random_spd(6, 9);
        let d = sample_design(18, 6, &sigma, EntryLaw::StandardNormal, 10).unwrap();
        let beta = DVector::from_fn(6, |i, _| 0.4 * i as f64);
        let (_, trace) = ml_risks(&d, &sigma).unwrap();
        let ncp = d.ncp(&beta);
        let snr = quad_form(&sigma, &beta);
        let mo = OosMoments::new(6, ncp).unwrap();
        for c in [0.0, 0.3, js_c(6), 1.5, 3.0] {
            let display = shrink_risk_out_from_invariants(c, 6, trace, ncp, snr).unwrap();
            let raw = risk_out_from_expectations(c, 6, trace, mo.e_inv_norm(), mo.e_ratio(trace, snr));
            assert_relative_eq!(display, raw, max_relative = 1e-12);
        }
    }

    #[test]
    fn depends_only_on_invariants() {
        // Two β with equal β′X′Xβ and β′Σβ give equal risk (Σ = I, X′X = n·I).
        let d = scaled_identity_design(12, 6);
        let id = DMatrix::identity(6, 6);
        let b1 = DVector::from_vec(vec![1.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        let b2 = DVector::from_vec(vec![0.0, 0.0, 0.0, 2.0, 0.0, -1.0]);
        let r1 = shrink_risk_out(0.8, &d, &id, &b1).unwrap();
        let r2 = shrink_risk_out(0.8, &d, &id, &b2).unwrap();
        assert!((r1 - r2).abs() <= 1e-12 * r1);
    }

    #[test]
    fn ml_risk_invariant_to_sigma_for_shared_v() {
        let v = sample_v(40, 8, EntryLaw::StandardNormal, 77);
        let d1 = design_from_v(&v, &DMatrix::identity(8, 8)).unwrap();
        let s2 = random_spd(8, 78);
        let d2 = design_from_v(&v, &s2).unwrap();
        let (_, a) = ml_risks(&d1, &DMatrix::identity(8, 8)).unwrap();
        let (_, b) = ml_risks(&d2, &s2).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-10);
        let vtv_inv = (v.transpose() * &v).try_inverse().unwrap();
        assert_relative_eq!(a, vtv_inv.trace(), max_relative = 1e-10);
    }

    #[test]
    fn large_signal_ratio_tends_to_one() {
        let id = DMatrix::identity(160, 160);
        let d = sample_design(200, 160, &id, EntryLaw::StandardNormal, 1).unwrap();
        for i in [1, 80, 160] {
            let beta = beta_along_eigvec(&d, &id, i, 1e6).unwrap();
            let r = relative_oos(js_c(160), &d, &id, &beta).unwrap();
            assert!((r - 1.0).abs() < 0.05, "index {i}: ratio {r}");
        }
    }

    #[test]
    fn dimension_mismatch() {
        let d = scaled_identity_design(10, 5);
        assert!(shrink_risk_out(0.5, &d, &DMatrix::identity(4, 4), &DVector::zeros(5)).is_err());
        assert!(shrink_risk_out(0.5, &d, &DMatrix::identity(5, 5), &DVector::zeros(4)).is_err());
    }

    #[test]
    fn report_fields() {
        let d = scaled_identity_design(10, 5);
        let r = risk_report(0.0, &d, &DMatrix::identity(5, 5), &DVector::from_element(5, 1.0)).unwrap();
        assert_eq!(r.rho1_ml, 0.5);
        assert_eq!(r.rel_oos, 1.0);
        assert_relative_eq!(r.ncp, 50.0, max_relative = 1e-14);
        assert_relative_eq!(r.snr, 5.0, max_relative = 1e-14);
    }
}
