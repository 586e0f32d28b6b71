//! Marchenko–Pastur law and spectral diagnostics for `V′V/n`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::integrate;

/// Absolute tolerance of the closed-form/quadrature comparison.
pub const EDGE_INTEGRAL_TOL: f64 = 1e-9;
/// Size of the tabulated CDF.
pub const CDF_TABLE_POINTS: usize = 10_000;

/// Marchenko–Pastur law with ratio `t ∈ (0, 1)`, supported on `[a, b]` with
/// `a = (1−√t)²`, `b = (1+√t)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MpLaw {
    pub t: f64,
    pub a: f64,
    pub b: f64,
}

impl MpLaw {
    pub fn new(t: f64) -> Result<Self> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::InvalidArgument(format!("Marchenko–Pastur ratio t = {t} must lie in (0, 1)")));
        }
        let s = t.sqrt();
        Ok(MpLaw { t, a: (1.0 - s).powi(2), b: (1.0 + s).powi(2) })
    }

    pub fn density(&self, x: f64) -> f64 {
        if x <= self.a || x >= self.b {
            return 0.0;
        }
        ((x - self.a) * (self.b - x)).sqrt() / (2.0 * PI * self.t * x)
    }

    /// `x = a + (b−a)·sin²θ`, `θ ∈ [0, π/2]`.
    fn x_of(&self, theta: f64) -> f64 {
        self.a + (self.b - self.a) * theta.sin().powi(2)
    }

    fn theta_of(&self, x: f64) -> f64 {
        ((x - self.a) / (self.b - self.a)).clamp(0.0, 1.0).sqrt().asin()
    }

    /// Density in the θ variable; the edge square roots cancel against the
    /// Jacobian, leaving a smooth integrand.
    fn theta_density(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        let w = self.b - self.a;
        w * w * s * s * c * c / (PI * self.t * self.x_of(theta))
    }

    /// Tabulated CDF on a uniform θ grid.
    pub fn cdf_table(&self) -> MpCdf {
        let h = 0.5 * PI / (CDF_TABLE_POINTS - 1) as f64;
        let mut values = Vec::with_capacity(CDF_TABLE_POINTS);
        let mut acc = 0.0;
        values.push(0.0);
        for i in 1..CDF_TABLE_POINTS {
            let lo = h * (i - 1) as f64;
            acc += gauss_legendre_5(|th| self.theta_density(th), lo, lo + h);
            values.push(acc);
        }
        // The total is 1 to quadrature accuracy; pin the top end exactly.
        let total = acc;
        for v in values.iter_mut() {
            *v /= total;
        }
        MpCdf { law: *self, step: h, values }
    }
}

fn gauss_legendre_5<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> f64 {
    const X: [f64; 3] = [0.0, 0.538_469_310_105_683_1, 0.906_179_845_938_664];
    const W: [f64; 3] = [0.568_888_888_888_888_9, 0.478_628_670_499_366_5, 0.236_926_885_056_189_1];
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let mut s = W[0] * f(c);
    for i in 1..3 {
        s += W[i] * (f(c - h * X[i]) + f(c + h * X[i]));
    }
    s * h
}

#[derive(Debug, Clone)]
pub struct MpCdf {
    law: MpLaw,
    step: f64,
    values: Vec<f64>,
}

impl MpCdf {
    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.law.a {
            return 0.0;
        }
        if x >= self.law.b {
            return 1.0;
        }
        let th = self.law.theta_of(x) / self.step;
        let i = (th.floor() as usize).min(self.values.len() - 2);
        let frac = th - i as f64;
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }
}

/// Marchenko–Pastur density; 0 outside `[a, b]`.
pub fn mp_density(x: f64, t: f64) -> Result<f64> {
    Ok(MpLaw::new(t)?.density(x))
}

/// Kolmogorov distance between the empirical CDF of `sample` and `cdf`.
pub fn kolmogorov_distance<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeIntegral {
    pub t: f64,
    /// `2π·min{1,t}/|1−t|`; infinite at `t = 1`.
    pub closed: f64,
    /// Numerical value of `∫_a^b x⁻²√((b−x)(x−a)) dx`; absent at `t = 1`.
    pub quadrature: Option<f64>,
}

impl EdgeIntegral {
    pub fn abs_diff(&self) -> Option<f64> {
        self.quadrature.map(|q| (q - self.closed).abs())
    }
}

/// Closed form and quadrature of `∫_a^b x⁻²√((b−x)(x−a)) dx` with
/// `a = (1−√t)²`, `b = (1+√t)²`, for `t ≥ 0`.
pub fn edge_integral(t: f64) -> Result<EdgeIntegral> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("t = {t} must be finite and >= 0")));
    }
    if t == 1.0 {
        return Ok(EdgeIntegral { t, closed: f64::INFINITY, quadrature: None });
    }
    let closed = 2.0 * PI * t.min(1.0) / (1.0 - t).abs();
    if t == 0.0 {
        return Ok(EdgeIntegral { t, closed, quadrature: Some(0.0) });
    }
    let s = t.sqrt();
    let a = (1.0 - s).powi(2);
    let b = (1.0 + s).powi(2);
    let w = b - a;
    // x = a + (b−a)sin²θ: dx = 2(b−a) sinθ cosθ dθ, √((b−x)(x−a)) = (b−a) sinθ cosθ
    let q = integrate(
        |th: f64| {
            let (sn, cs) = th.sin_cos();
            let x = a + w * sn * sn;
            2.0 * w * w * sn * sn * cs * cs / (x * x)
        },
        0.0,
        0.5 * PI,
        EDGE_INTEGRAL_TOL,
        0.0,
        10_000,
    )?;
    Ok(EdgeIntegral { t, closed, quadrature: Some(q.value) })
}

/// Spectral summary of `V′V` against its Marchenko–Pastur limits with
/// `t = p/n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub n: usize,
    pub p: usize,
    pub t: f64,
    /// `Σ 1/λᵢ`; infinite if any eigenvalue is zero.
    pub inv_sum: f64,
    pub inv_sum_limit: f64,
    /// `λ₁/n` (largest).
    pub top: f64,
    pub top_limit: f64,
    /// `λ_p/n` (smallest).
    pub bottom: f64,
    pub bottom_limit: f64,
    /// Kolmogorov distance of the spectrum of `V′V/n` to the MP law; absent
    /// unless `0 < t < 1`.
    pub kolmogorov: Option<f64>,
}

pub fn spectrum_diagnostics(v_spectrum: &[f64], n: usize, p: usize) -> Result<SpectrumReport> {
    if v_spectrum.len() != p || p == 0 || n == 0 {
        return Err(Error::Dimension(format!(
            "spectrum has {} values, expected p = {p} (n = {n})",
            v_spectrum.len()
        )));
    }
    if v_spectrum.iter().any(|&l| !(l >= 0.0)) {
        return Err(Error::InvalidArgument("eigenvalues must be >= 0".into()));
    }
    let nf = n as f64;
    let t = p as f64 / nf;
    let inv_sum = if v_spectrum.contains(&0.0) {
        f64::INFINITY
    } else {
        v_spectrum.iter().map(|l| 1.0 / l).sum()
    };
    let top = v_spectrum.iter().copied().fold(f64::NEG_INFINITY, f64::max) / nf;
    let bottom = v_spectrum.iter().copied().fold(f64::INFINITY, f64::min) / nf;
    let kolmogorov = match MpLaw::new(t) {
        Ok(law) => {
            let cdf = law.cdf_table();
            let scaled: Vec<f64> = v_spectrum.iter().map(|l| l / nf).collect();
            Some(kolmogorov_distance(&scaled, |x| cdf.eval(x)))
        }
        Err(_) => None,
    };
    Ok(SpectrumReport {
        n,
        p,
        t,
        inv_sum,
        inv_sum_limit: if t < 1.0 { t / (1.0 - t) } else { f64::INFINITY },
        top,
        top_limit: (1.0 + t.sqrt()).powi(2),
        bottom,
        bottom_limit: (1.0 - t.sqrt()).powi(2),
        kolmogorov,
    })
}
