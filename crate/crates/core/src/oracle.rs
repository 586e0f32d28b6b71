//! Brute-force Monte Carlo estimators for every closed-form quantity in the
//! crate. Nothing here calls into `chisq_moments` or `risk_exact` except
//! where the closed form is the explicit inner step (`mc_unconditional`
//! with `reps_noise = 0`).
//!
//! Replications are grouped into fixed-size blocks, each with its own
//! generator stream keyed by `(seed, block index)`, and reduced with pairwise
//! summation in block order. Results are therefore identical for any thread
//! count.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linmodel::{quad_form, sample_design, DesignMatrix, EntryLaw};
use crate::rng;
use crate::risk_exact::{check_c, ml_risks, shrink_risk_out_from_invariants};
pub use crate::stats::McEstimate;

pub const MIN_RISK_REPS: usize = 100;
pub const MIN_MOMENT_REPS: usize = 10_000;
pub const MIN_DESIGN_REPS: usize = 50;

/// Runs `reps` replications in blocks of `block`, each block drawing from
/// its own stream; returns the per-replication outputs in replication order.
fn run_blocks<T, F>(reps: usize, block: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync,
{
    let blocks = reps.div_ceil(block);
    let chunks: Vec<Vec<T>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng::stream(seed, b as u64);
            let count = block.min(reps - b * block);
            (0..count).map(|_| f(&mut rng)).collect()
        })
        .collect();
    chunks.into_iter().flatten().collect()
}

fn normal_vec(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample(StandardNormal))
}

/// Monte Carlo estimates of `(ρ₁, ρ₂)` for `β̂(c)` given the design.
///
/// Each replication draws `u ~ N(0, Iₙ)`, forms `β̂_ML = (X′X)⁻¹X′(Xβ + u)`
/// and `β̂(c) = [1 − cp/(β̂_ML′X′Xβ̂_ML)]β̂_ML`, and records
/// `(β̂−β)′(X′X/n)(β̂−β)` and `(β̂−β)′Σ(β̂−β)`.
pub fn mc_risk(
    c: f64,
    design: &DesignMatrix,
    sigma_cov: &DMatrix<f64>,
    beta: &DVector<f64>,
    reps: usize,
    seed: u64,
) -> Result<(McEstimate, McEstimate)> {
    check_c(c)?;
    if reps < MIN_RISK_REPS {
        return Err(Error::InvalidArgument(format!("need at least {MIN_RISK_REPS} replications, got {reps}")));
    }
    let (n, p) = (design.n(), design.p());
    if sigma_cov.nrows() != p || beta.len() != p {
        return Err(Error::Dimension("covariance or beta does not match the design".into()));
    }
    let x = design.x();
    let gram = design.gram();
    let signal = x * beta;
    let losses = run_blocks(reps, 256, seed, |rng| {
        let y = &signal + normal_vec(rng, n);
        let b_ml = design.solve_gram(&x.tr_mul(&y));
        let norm = quad_form(gram, &b_ml);
        let est = b_ml * (1.0 - c * p as f64 / norm);
        let err = est - beta;
        (quad_form(gram, &err) / n as f64, quad_form(sigma_cov, &err))
    });
    let (l1, l2): (Vec<f64>, Vec<f64>) = losses.into_iter().unzip();
    Ok((McEstimate::from_samples(&l1, seed), McEstimate::from_samples(&l2, seed)))
}

/// Monte Carlo estimates of the two expectations in the shrinkage risk
/// expansion, `E[1/(β̂′X′Xβ̂)]` and `E[β̂′Σβ̂/(β̂′X′Xβ̂)²]`, from draws of
/// `β̂_ML ~ N(β, (X′X)⁻¹)`.
pub fn mc_risk_expectations(
    design: &DesignMatrix,
    sigma_cov: &DMatrix<f64>,
    beta: &DVector<f64>,
    reps: usize,
    seed: u64,
) -> Result<(McEstimate, McEstimate)> {
    if reps < MIN_RISK_REPS {
        return Err(Error::InvalidArgument(format!("need at least {MIN_RISK_REPS} replications, got {reps}")));
    }
    let n = design.n();
    let x = design.x();
    let gram = design.gram();
    let signal = x * beta;
    let draws = run_blocks(reps, 256, seed, |rng| {
        let y = &signal + normal_vec(rng, n);
        let b_ml = design.solve_gram(&x.tr_mul(&y));
        let norm = quad_form(gram, &b_ml);
        (1.0 / norm, quad_form(sigma_cov, &b_ml) / (norm * norm))
    });
    let (a, b): (Vec<f64>, Vec<f64>) = draws.into_iter().unzip();
    Ok((McEstimate::from_samples(&a, seed), McEstimate::from_samples(&b, seed)))
}

/// Monte Carlo estimate of `E[(1/χ²_k(λ))^order]`.
///
/// `χ²_k(λ)` is realized as `‖Z + μ‖²` with `μ = √λ·e₁`; the squared norm of
/// the `k − 1` unshifted coordinates is drawn directly as a central `χ²_{k−1}`.
pub fn mc_inv_moment(k: u32, lambda: f64, order: u32, reps: usize, seed: u64) -> Result<McEstimate> {
    if !(order == 1 || order == 2) {
        return Err(Error::InvalidArgument(format!("order must be 1 or 2, got {order}")));
    }
    if k <= 2 * order {
        return Err(Error::MomentNotFinite { k, order });
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("noncentrality must be finite and >= 0, got {lambda}")));
    }
    if reps < MIN_MOMENT_REPS {
        return Err(Error::InvalidArgument(format!("need at least {MIN_MOMENT_REPS} replications, got {reps}")));
    }
    let rest = ChiSquared::new((k - 1) as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let shift = lambda.sqrt();
    let draws = run_blocks(reps, 65_536, seed, |rng| {
        let z: f64 = rng.sample(StandardNormal);
        let x = (z + shift).powi(2) + rest.sample(rng);
        x.recip().powi(order as i32)
    });
    Ok(McEstimate::from_samples(&draws, seed))
}

/// Design-averaged out-of-sample risks of `β̂(c)` and `β̂_ML`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnconditionalComparison {
    pub shrink: McEstimate,
    pub ml: McEstimate,
    /// Paired per-design difference `ρ₂(c) − ρ₂(ML)`.
    pub diff: McEstimate,
    /// Design draws rejected as degenerate.
    pub skipped: usize,
}

impl UnconditionalComparison {
    /// `√(se_shrink² + se_ml²)`.
    pub fn combined_se(&self) -> f64 {
        self.shrink.se.hypot(self.ml.se)
    }
}

/// Averages `ρ₂` over Gaussian designs with rows `N(0, Σ)`.
///
/// With `reps_noise = 0` the per-design risks use the closed form; otherwise
/// each design's risks are themselves estimated with `reps_noise` noise draws
/// through [`mc_risk`].
#[allow(clippy::too_many_arguments)]
pub fn mc_unconditional(
    c: f64,
    n: usize,
    p: usize,
    sigma_cov: &DMatrix<f64>,
    beta: &DVector<f64>,
    reps_design: usize,
    reps_noise: usize,
    seed: u64,
) -> Result<UnconditionalComparison> {
    check_c(c)?;
    if reps_design < MIN_DESIGN_REPS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_DESIGN_REPS} design draws, got {reps_design}"
        )));
    }
    if reps_noise != 0 && reps_noise < MIN_RISK_REPS {
        return Err(Error::InvalidArgument(format!(
            "noise replications must be 0 or at least {MIN_RISK_REPS}"
        )));
    }
    crate::linmodel::check_dims(n, p)?;
    if beta.len() != p {
        return Err(Error::Dimension(format!("beta has length {}, expected {p}", beta.len())));
    }
    let snr = quad_form(sigma_cov, beta);
    let per_design: Vec<Result<Option<(f64, f64)>>> = (0..reps_design)
        .into_par_iter()
        .map(|r| {
            let design_seed = seed ^ (r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let design = match sample_design(n, p, sigma_cov, EntryLaw::StandardNormal, design_seed) {
                Ok(d) => d,
                Err(Error::DegenerateGram { .. }) | Err(Error::SingularGram) => return Ok(None),
                Err(e) => return Err(e),
            };
            if reps_noise == 0 {
                let (_, ml) = ml_risks(&design, sigma_cov)?;
                let js = shrink_risk_out_from_invariants(c, p, ml, design.ncp(beta), snr)?;
                Ok(Some((js, ml)))
            } else {
                let noise_seed = design_seed.wrapping_add(1);
                let (_, js) = mc_risk(c, &design, sigma_cov, beta, reps_noise, noise_seed)?;
                let (_, ml) = mc_risk(0.0, &design, sigma_cov, beta, reps_noise, noise_seed)?;
                Ok(Some((js.mean, ml.mean)))
            }
        })
        .collect();
    let mut js = Vec::with_capacity(reps_design);
    let mut ml = Vec::with_capacity(reps_design);
    let mut skipped = 0;
    for r in per_design {
        match r? {
            Some((a, b)) => {
                js.push(a);
                ml.push(b);
            }
            None => skipped += 1,
        }
    }
    if js.len() < 2 {
        return Err(Error::DegenerateGram { attempts: reps_design, ratio: 0.0 });
    }
    let diff: Vec<f64> = js.iter().zip(&ml).map(|(a, b)| a - b).collect();
    Ok(UnconditionalComparison {
        shrink: McEstimate::from_samples(&js, seed),
        ml: McEstimate::from_samples(&ml, seed),
        diff: McEstimate::from_samples(&diff, seed),
        skipped,
    })
}

/// Samples `w′V′Vw/n` over independent draws of `V`. The returned estimate's
/// `variance` field is the empirical variance of the draws.
pub fn mc_quadratic_form(
    unit_w: &DVector<f64>,
    n: usize,
    law: EntryLaw,
    reps: usize,
    seed: u64,
) -> Result<McEstimate> {
    if ((unit_w.norm() - 1.0).abs()) > 1e-10 {
        return Err(Error::InvalidArgument(format!("w must have unit norm, got {}", unit_w.norm())));
    }
    if n == 0 || reps < 2 {
        return Err(Error::InvalidArgument("need n > 0 and at least two replications".into()));
    }
    let p = unit_w.len();
    let draws = run_blocks(reps, 16, seed, |rng| {
        let mut acc = 0.0;
        for _ in 0..n {
            let row: f64 = (0..p).map(|j| law.sample(rng) * unit_w[j]).sum();
            acc += row * row;
        }
        acc / n as f64
    });
    Ok(McEstimate::from_samples(&draws, seed))
}
