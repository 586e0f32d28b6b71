use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use super::config::{grid, ExperimentConfig};
use crate::asymptotics::{big_r_limit, delta_hat_plug_in, ml_limit, phase_classify, r_limit, Region};
use crate::chisq_moments::inv_moment_of;
use crate::error::Result;
use crate::linmodel::{beta_along_eigvec, quad_form, sample_design, sample_response, sample_v, DesignMatrix, EntryLaw, ModelSpec};
use crate::oracle::{mc_inv_moment, mc_quadratic_form, mc_risk, mc_unconditional, MIN_MOMENT_REPS};
use crate::risk_exact::{js_c, ml_risks, risk_report, shrink_risk_in, signed_risk_out, trace_sigma_gram_inv};
use crate::rmt::{edge_integral, spectrum_diagnostics};
use crate::stats::McEstimate;

pub const FIGURE1_HEADER: &str = "curve_id,eigen_index,eigenvalue,snr,rho2_js,rho2_ml,ratio_finite,ratio_asymptotic";
pub const PHASE_HEADER: &str = "c,t,region,sup_R,ml_limit,gap,epsilon";

/// Agreement band for closed form vs. Monte Carlo, in standard errors.
const N_SE: f64 = 4.0;
const IDENTITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Figure1Row {
    pub curve_id: usize,
    pub eigen_index: usize,
    pub eigenvalue: f64,
    pub snr: f64,
    pub rho2_js: f64,
    pub rho2_ml: f64,
    pub ratio_finite: f64,
    pub ratio_asymptotic: f64,
}

/// Relative out-of-sample risk along selected eigenvectors of `X′X/n` for a
/// single sampled design.
pub fn figure1_rows(cfg: &ExperimentConfig) -> Result<Vec<Figure1Row>> {
    let (n, p) = (cfg.n, cfg.p);
    let sigma = cfg.sigma_cov(p);
    let design = sample_design(n, p, &sigma, cfg.entry_law, cfg.seed)?;
    let c = cfg.c.resolve(p);
    let c_asym = cfg.asymptotic_c.resolve(p);
    let t = p as f64 / n as f64;
    let ml_t = ml_limit(t);
    let rho2_ml = trace_sigma_gram_inv(&design, &sigma);
    let snrs = cfg.snr_grid();
    let cells: Vec<(usize, usize, f64)> = cfg
        .curve_indices()
        .into_iter()
        .enumerate()
        .flat_map(|(id, i)| snrs.iter().map(move |&s| (id, i, s)))
        .collect();
    cells
        .into_par_iter()
        .map(|(curve_id, eigen_index, snr)| {
            let beta = beta_along_eigvec(&design, &sigma, eigen_index, snr)?;
            let rho2_js = signed_risk_out(c, p, rho2_ml, design.ncp(&beta), snr, 1.0)?;
            Ok(Figure1Row {
                curve_id,
                eigen_index,
                eigenvalue: design.spectrum()[eigen_index - 1],
                snr,
                rho2_js,
                rho2_ml,
                ratio_finite: rho2_js / rho2_ml,
                ratio_asymptotic: r_limit(snr, c_asym, t)? / ml_t,
            })
        })
        .collect()
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_figure1_csv<W: Write>(mut w: W, rows: &[Figure1Row]) -> Result<()> {
    writeln!(w, "{FIGURE1_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.curve_id,
            r.eigen_index,
            fmt(r.eigenvalue),
            fmt(r.snr),
            fmt(r.rho2_js),
            fmt(r.rho2_ml),
            fmt(r.ratio_finite),
            fmt(r.ratio_asymptotic)
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseRow {
    pub c: f64,
    pub t: f64,
    pub region: Region,
    pub sup_r: f64,
    pub ml_limit: f64,
    pub gap: f64,
    pub epsilon: Option<f64>,
    /// Numerical gap sign agrees with the closed-form region.
    pub consistent: bool,
}

/// `phase_points × phase_points` grid over `[c_min, c_max] × [t_min, t_max]`,
/// `c` varying slowest.
pub fn phase_rows(cfg: &ExperimentConfig) -> Result<Vec<PhaseRow>> {
    let cs = grid(cfg.c_min, cfg.c_max, cfg.phase_points, false);
    let ts = grid(cfg.t_min, cfg.t_max, cfg.phase_points, false);
    let cells: Vec<(f64, f64)> = cs.iter().flat_map(|&c| ts.iter().map(move |&t| (c, t))).collect();
    cells
        .into_par_iter()
        .map(|(c, t)| {
            let v = phase_classify(c, t)?;
            Ok(PhaseRow {
                c,
                t,
                region: v.region,
                sup_r: v.sup_r,
                ml_limit: v.ml_limit,
                gap: v.gap,
                epsilon: v.epsilon,
                consistent: v.consistent,
            })
        })
        .collect()
}

pub fn write_phase_csv<W: Write>(mut w: W, rows: &[PhaseRow]) -> Result<()> {
    writeln!(w, "{PHASE_HEADER}")?;
    for r in rows {
        let eps = r.epsilon.map(fmt).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            fmt(r.c),
            fmt(r.t),
            r.region.as_str(),
            fmt(r.sup_r),
            fmt(r.ml_limit),
            fmt(r.gap),
            eps
        )?;
    }
    Ok(())
}

/// JSON number, with non-finite values spelled out as strings.
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

/// The config without the keys that do not affect results.
fn config_echo(cfg: &ExperimentConfig) -> Result<Value> {
    let mut v = serde_json::to_value(cfg)?;
    if let Value::Object(m) = &mut v {
        m.remove("out_path");
        m.remove("threads");
    }
    Ok(v)
}

/// Random direction scaled to `β′Σβ = snr`.
fn random_beta(p: usize, sigma: &DMatrix<f64>, snr: f64, seed: u64) -> DVector<f64> {
    let mut rng = crate::rng::stream(seed, 1 << 32);
    let w = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = quad_form(sigma, &w);
    w * (snr / q).sqrt()
}

fn mc_json(e: &McEstimate, exact: f64) -> Value {
    json!({ "mean": e.mean, "se": e.se, "reps": e.reps, "z": num(e.z_score(exact)), "pass": e.within(exact, N_SE) })
}

/// Exact risks of one instance, the plug-in estimate from one simulated
/// response, and the matching asymptotic limits. The flag is false only when
/// `verify` is set and the Monte Carlo check fails.
pub fn risk_json(cfg: &ExperimentConfig) -> Result<(Value, bool)> {
    let (n, p) = (cfg.n, cfg.p);
    let sigma = cfg.sigma_cov(p);
    let design = sample_design(n, p, &sigma, cfg.entry_law, cfg.seed)?;
    let beta = if cfg.beta_index == 0 {
        random_beta(p, &sigma, cfg.snr, cfg.seed)
    } else {
        beta_along_eigvec(&design, &sigma, cfg.beta_index, cfg.snr)?
    };
    let c = cfg.c.resolve(p);
    let report = risk_report(c, &design, &sigma, &beta)?;
    let spec = ModelSpec::new(n, p, sigma.clone(), beta.clone())?;
    let y = sample_response(&spec, &design, cfg.seed.wrapping_add(1))?;
    let t = p as f64 / n as f64;
    let plug_in = if n > p { Some(delta_hat_plug_in(&y, c, n, p)?) } else { None };

    let mut out = Map::new();
    out.insert("config".into(), config_echo(cfg)?);
    out.insert("report".into(), serde_json::to_value(report)?);
    out.insert(
        "plug_in".into(),
        plug_in.map_or(Value::Null, |pi| json!({ "delta_hat2": pi.delta_hat2, "risk": num(pi.risk) })),
    );
    out.insert(
        "asymptotic".into(),
        json!({
            "t": t,
            "delta2": cfg.snr,
            "r": num(if t < 1.0 { r_limit(cfg.snr, c, t)? } else { f64::INFINITY }),
            "big_r": num(if t < 1.0 { big_r_limit(cfg.snr, c, t)? } else { f64::INFINITY }),
            "ml_limit": num(ml_limit(t)),
        }),
    );
    let mut pass = true;
    if cfg.verify {
        let (m1, m2) = mc_risk(c, &design, &sigma, &beta, cfg.reps, cfg.seed.wrapping_add(2))?;
        let v1 = mc_json(&m1, report.rho1_c);
        let v2 = mc_json(&m2, report.rho2_c);
        pass = v1["pass"] == true && v2["pass"] == true;
        out.insert("verification".into(), json!({ "rho1": v1, "rho2": v2, "pass": pass }));
    }
    Ok((Value::Object(out), pass))
}

const IDENTITY_TS: [f64; 6] = [0.0, 0.1, 0.25, 0.5, 0.9, 1.0];

fn identity_checks() -> Result<(Vec<Value>, bool)> {
    let mut all = true;
    let mut rows = Vec::new();
    for t in IDENTITY_TS {
        let l = edge_integral(t)?;
        let pass = match l.abs_diff() {
            Some(d) => d <= IDENTITY_TOL,
            None => l.closed.is_infinite(),
        };
        all &= pass;
        rows.push(json!({
            "t": t,
            "closed": num(l.closed),
            "quadrature": l.quadrature.map_or(Value::Null, num),
            "abs_diff": l.abs_diff().map_or(Value::Null, num),
            "pass": pass,
        }));
    }
    Ok((rows, all))
}

/// Eigenvalues of `V′V` for a sampled `n × p` matrix.
fn v_spectrum(n: usize, p: usize, law: EntryLaw, seed: u64) -> Vec<f64> {
    let v = sample_v(n, p, law, seed);
    v.tr_mul(&v).symmetric_eigenvalues().as_slice().to_vec()
}

fn within_rel(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target.abs()
}

/// The integral identity over a grid of `t` and the spectrum of one
/// `rmt_n × rmt_p` draw against its Marchenko–Pastur limits.
pub fn rmt_check_json(cfg: &ExperimentConfig) -> Result<(Value, bool)> {
    let (identity, identity_pass) = identity_checks()?;
    let (n, p) = (cfg.rmt_n, cfg.rmt_p);
    let spec = v_spectrum(n, p, cfg.entry_law, cfg.seed);
    let d = spectrum_diagnostics(&spec, n, p)?;
    let mut checks = Map::new();
    let mut all = identity_pass;
    if d.t < 1.0 {
        let inv = within_rel(d.inv_sum, d.inv_sum_limit, 0.05);
        let bottom = within_rel(d.bottom, d.bottom_limit, 0.10);
        let top = within_rel(d.top, d.top_limit, 0.10);
        let ks = d.kolmogorov.is_none_or(|k| k <= 0.05);
        all &= inv && bottom && top && ks;
        checks.insert("inv_sum_within_5pct".into(), json!(inv));
        checks.insert("bottom_within_10pct".into(), json!(bottom));
        checks.insert("top_within_10pct".into(), json!(top));
        checks.insert("kolmogorov_le_0_05".into(), json!(ks));
    }
    let out = json!({
        "config": config_echo(cfg)?,
        "integral_identity": identity,
        "spectrum": {
            "n": d.n,
            "p": d.p,
            "t": d.t,
            "inv_sum": num(d.inv_sum),
            "inv_sum_limit": num(d.inv_sum_limit),
            "top": d.top,
            "top_limit": d.top_limit,
            "bottom": d.bottom,
            "bottom_limit": d.bottom_limit,
            "kolmogorov": d.kolmogorov.map_or(Value::Null, num),
            "checks": checks,
        },
        "pass": all,
    });
    Ok((out, all))
}

struct Suite {
    checks: Vec<Value>,
    pass: bool,
}

impl Suite {
    fn push(&mut self, name: &str, pass: bool, detail: Value) {
        self.pass &= pass;
        self.checks.push(json!({ "name": name, "pass": pass, "detail": detail }));
    }
}

/// Closed forms against their Monte Carlo and quadrature oracles on small
/// instances. Runs in seconds at the default `reps`.
pub fn verify_json(cfg: &ExperimentConfig) -> Result<(Value, bool)> {
    let seed = cfg.seed;
    let mut suite = Suite { checks: Vec::new(), pass: true };

    // Conditional risks on a small instance with moderate signal.
    let (n, p) = (40, 10);
    let sigma = ExperimentConfig { sigma_ar1: 0.3, ..cfg.clone() }.sigma_cov(p);
    let design: DesignMatrix = sample_design(n, p, &sigma, EntryLaw::StandardNormal, seed)?;
    let beta = random_beta(p, &sigma, 0.5, seed);
    let (rho1_ml, rho2_ml) = ml_risks(&design, &sigma)?;
    let (m1, m2) = mc_risk(0.0, &design, &sigma, &beta, cfg.reps, seed.wrapping_add(10))?;
    suite.push(
        "ml_risk_vs_mc",
        m1.within(rho1_ml, N_SE) && m2.within(rho2_ml, N_SE),
        json!({ "rho1": mc_json(&m1, rho1_ml), "rho2": mc_json(&m2, rho2_ml) }),
    );

    let c = js_c(p);
    let ncp = design.ncp(&beta);
    let snr = quad_form(&sigma, &beta);
    let rho1_c = shrink_risk_in(c, n, p, ncp)?;
    let cross_sign = if cfg.inject_fault { -1.0 } else { 1.0 };
    let rho2_c = signed_risk_out(c, p, rho2_ml, ncp, snr, cross_sign)?;
    let (s1, s2) = mc_risk(c, &design, &sigma, &beta, cfg.reps, seed.wrapping_add(11))?;
    suite.push(
        "shrink_risk_vs_mc",
        s1.within(rho1_c, N_SE) && s2.within(rho2_c, N_SE),
        json!({ "c": c, "rho1": mc_json(&s1, rho1_c), "rho2": mc_json(&s2, rho2_c) }),
    );

    // Queries with k > 4·order, so the sampled reciprocals have finite variance.
    let moment_reps = (cfg.reps * 10).max(MIN_MOMENT_REPS);
    let mut moments = Vec::new();
    let mut moments_pass = true;
    for (i, (k, lambda, order)) in [(6, 0.0, 1), (10, 0.0, 2), (5, 2.0, 1), (12, 30.0, 2), (9, 150.0, 1)].into_iter().enumerate() {
        let exact = inv_moment_of(k, lambda, order)?;
        let mc = mc_inv_moment(k, lambda, order, moment_reps, seed.wrapping_add(20 + i as u64))?;
        moments_pass &= mc.within(exact, N_SE);
        moments.push(json!({ "k": k, "lambda": lambda, "order": order, "exact": exact, "mc": mc_json(&mc, exact) }));
    }
    suite.push("inv_moment_vs_mc", moments_pass, json!(moments));

    let (identity, identity_pass) = identity_checks()?;
    suite.push("integral_identity", identity_pass, json!(identity));

    // Design-averaged comparison: shrinkage never loses on average.
    let (un, up) = (60, 20);
    let eye = DMatrix::identity(up, up);
    let mut uncond = Vec::new();
    let mut uncond_pass = true;
    for (i, bb) in [0.0, 5.0].into_iter().enumerate() {
        let beta = DVector::from_element(up, (bb / up as f64).sqrt());
        let cmp = mc_unconditional(js_c(up), un, up, &eye, &beta, 200, 0, seed.wrapping_add(30 + i as u64))?;
        let bound = cmp.ml.mean + 2.0 * cmp.combined_se();
        let mut pass = cmp.shrink.mean <= bound;
        if bb == 0.0 {
            pass &= cmp.shrink.mean < cmp.ml.mean - 2.0 * cmp.combined_se();
        }
        uncond_pass &= pass;
        uncond.push(json!({
            "beta_norm2": bb,
            "shrink_mean": cmp.shrink.mean,
            "ml_mean": cmp.ml.mean,
            "combined_se": cmp.combined_se(),
            "skipped": cmp.skipped,
            "pass": pass,
        }));
    }
    suite.push("unconditional_direction", uncond_pass, json!(uncond));

    // Quadratic-form concentration: mean 1, variance within the proof's bound.
    let (qn, qp) = (50, 10);
    let w = DVector::from_element(qp, 1.0 / (qp as f64).sqrt());
    let law = EntryLaw::StandardNormal;
    let q = mc_quadratic_form(&w, qn, law, 1000, seed.wrapping_add(40))?;
    let var_bound = 1.5 * (law.fourth_moment() + 1.0) / qn as f64;
    suite.push(
        "quadratic_form_concentration",
        q.within(1.0, N_SE) && q.variance <= var_bound,
        json!({ "mean": q.mean, "se": q.se, "variance": q.variance, "variance_bound": var_bound }),
    );

    // Phase diagram: numerical supremum agrees with the closed-form region.
    let coarse = ExperimentConfig { phase_points: 12, ..cfg.clone() };
    let rows = phase_rows(&coarse)?;
    let bad = rows.iter().filter(|r| !r.consistent).count();
    suite.push("phase_consistency", bad == 0, json!({ "cells": rows.len(), "inconsistent": bad }));

    let out = json!({
        "config": config_echo(cfg)?,
        "checks": suite.checks,
        "pass": suite.pass,
    });
    Ok((out, suite.pass))
}
