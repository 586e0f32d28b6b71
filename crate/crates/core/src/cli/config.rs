use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linmodel::EntryLaw;
use crate::risk_exact::js_c;

/// Tuning parameter: the James–Stein value `(p−2)/p` or an explicit `c`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Tuning {
    #[default]
    Js,
    Value(f64),
}

impl Tuning {
    pub fn resolve(self, p: usize) -> f64 {
        match self {
            Tuning::Js => js_c(p),
            Tuning::Value(c) => c,
        }
    }
}

impl FromStr for Tuning {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("js") {
            return Ok(Tuning::Js);
        }
        let c: f64 = s
            .parse()
            .map_err(|_| Error::Config(format!("tuning parameter must be `js` or a number, got `{s}`")))?;
        Ok(Tuning::Value(c))
    }
}

impl fmt::Display for Tuning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tuning::Js => f.write_str("js"),
            Tuning::Value(c) => write!(f, "{c}"),
        }
    }
}

impl Serialize for Tuning {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Tuning::Js => s.serialize_str("js"),
            Tuning::Value(c) => s.serialize_f64(*c),
        }
    }
}

impl<'de> Deserialize<'de> for Tuning {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(c) => Ok(Tuning::Value(c)),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Flat experiment configuration. Every key can be set in a JSON config file
/// and overridden by a CLI flag of the same name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub n: usize,
    pub p: usize,
    pub c: Tuning,
    /// Tuning used for the asymptotic column of `figure1`.
    pub asymptotic_c: Tuning,
    /// AR(1) correlation of `Σ` (`Σᵢⱼ = ρ^|i−j|`); 0 gives the identity.
    pub sigma_ar1: f64,
    pub entry_law: EntryLaw,
    pub snr_min: f64,
    pub snr_max: f64,
    pub snr_points: usize,
    pub snr_log: bool,
    /// 1-based eigenvector indices (ascending eigenvalue order) for the
    /// `figure1` curves; empty selects `1, p/4, p/2, 3p/4, p`.
    pub eigen_indices: Vec<usize>,
    pub c_min: f64,
    pub c_max: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub phase_points: usize,
    pub reps: usize,
    /// `β′Σβ` for the `risk` command.
    pub snr: f64,
    /// Eigenvector index for the `risk` command's β; 0 draws a random direction.
    pub beta_index: usize,
    pub rmt_n: usize,
    pub rmt_p: usize,
    pub verify: bool,
    pub out_path: Option<PathBuf>,
    pub threads: Option<usize>,
    #[serde(skip_serializing)]
    pub inject_fault: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            n: 200,
            p: 160,
            c: Tuning::Js,
            asymptotic_c: Tuning::Js,
            sigma_ar1: 0.0,
            entry_law: EntryLaw::StandardNormal,
            snr_min: 0.1,
            snr_max: 1.0e4,
            snr_points: 121,
            snr_log: true,
            eigen_indices: Vec::new(),
            c_min: 0.0,
            c_max: 3.0,
            t_min: 0.0,
            t_max: 0.95,
            phase_points: 60,
            reps: 20_000,
            snr: 1.0,
            beta_index: 0,
            rmt_n: 2000,
            rmt_p: 1000,
            verify: false,
            out_path: None,
            threads: None,
            inject_fault: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.p < 3 || self.n < self.p {
            return bad(format!("need n >= p >= 3, got n = {}, p = {}", self.n, self.p));
        }
        if self.rmt_p == 0 || self.rmt_n < self.rmt_p {
            return bad(format!("need rmt_n >= rmt_p >= 1, got {} and {}", self.rmt_n, self.rmt_p));
        }
        for (name, t) in [("c", self.c), ("asymptotic_c", self.asymptotic_c)] {
            if let Tuning::Value(v) = t {
                if !(v >= 0.0 && v.is_finite()) {
                    return bad(format!("{name} = {v} must be finite and >= 0"));
                }
            }
        }
        if !(self.sigma_ar1 > -1.0 && self.sigma_ar1 < 1.0) {
            return bad(format!("sigma_ar1 = {} must lie in (-1, 1)", self.sigma_ar1));
        }
        if self.snr_points == 0 || self.phase_points == 0 {
            return bad("grids must be non-empty".into());
        }
        if !(self.snr_min >= 0.0 && self.snr_max >= self.snr_min && self.snr_max.is_finite()) {
            return bad(format!("bad snr range [{}, {}]", self.snr_min, self.snr_max));
        }
        if self.snr_log && self.snr_min <= 0.0 {
            return bad("log-spaced snr grid needs snr_min > 0".into());
        }
        if !(self.c_min >= 0.0 && self.c_max >= self.c_min && self.c_max.is_finite()) {
            return bad(format!("bad c range [{}, {}]", self.c_min, self.c_max));
        }
        if !(self.t_min >= 0.0 && self.t_max >= self.t_min && self.t_max < 1.0) {
            return bad(format!("bad t range [{}, {}]; need 0 <= t_min <= t_max < 1", self.t_min, self.t_max));
        }
        if self.reps < 100 {
            return bad(format!("reps = {} must be at least 100", self.reps));
        }
        if !(self.snr >= 0.0 && self.snr.is_finite()) {
            return bad(format!("snr = {} must be finite and >= 0", self.snr));
        }
        if self.beta_index > self.p {
            return bad(format!("beta_index = {} exceeds p = {}", self.beta_index, self.p));
        }
        if let Some(&i) = self.eigen_indices.iter().find(|&&i| i == 0 || i > self.p) {
            return bad(format!("eigen index {i} outside 1..={}", self.p));
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        if let Some(path) = &self.out_path {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() && !parent.is_dir() {
                    return bad(format!("output directory {} does not exist", parent.display()));
                }
            }
        }
        Ok(())
    }

    pub fn sigma_cov(&self, p: usize) -> DMatrix<f64> {
        let rho = self.sigma_ar1;
        DMatrix::from_fn(p, p, |i, j| if rho == 0.0 { f64::from(u8::from(i == j)) } else { rho.powi((i as i32 - j as i32).abs()) })
    }

    pub fn curve_indices(&self) -> Vec<usize> {
        if !self.eigen_indices.is_empty() {
            return self.eigen_indices.clone();
        }
        // 1, 40, 80, 120, 160 at p = 160
        let p = self.p;
        let mut v = vec![1, p / 4, p / 2, 3 * p / 4, p];
        v.retain(|&i| i >= 1);
        v.dedup();
        v
    }

    pub fn snr_grid(&self) -> Vec<f64> {
        grid(self.snr_min, self.snr_max, self.snr_points, self.snr_log)
    }
}

/// `points` values from `lo` to `hi` inclusive, uniform or log-uniform.
pub fn grid(lo: f64, hi: f64, points: usize, log: bool) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    (0..points)
        .map(|i| {
            let f = i as f64 / (points - 1) as f64;
            if i == points - 1 {
                hi
            } else if log {
                (lo.ln() + f * (hi.ln() - lo.ln())).exp()
            } else {
                lo + f * (hi - lo)
            }
        })
        .collect()
}
