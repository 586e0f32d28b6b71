//! One-dimensional maximization on a closed interval: a uniform grid locates
//! the best cell, golden-section search refines inside it.

use crate::error::{Error, Result};

pub const GRID_POINTS: usize = 1025;
pub const U_TOL: f64 = 1e-10;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub arg: f64,
    pub value: f64,
}

/// Golden-section search for a maximum of a unimodal `f` on `[lo, hi]`.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, tol: f64) -> Maximum {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    let arg = 0.5 * (lo + hi);
    let value = f(arg);
    // The interior probe can beat the midpoint at the final resolution.
    [(arg, value), (x1, f1), (x2, f2)]
        .into_iter()
        .fold(Maximum { arg, value }, |best, (a, v)| if v > best.value { Maximum { arg: a, value: v } } else { best })
}

/// Maximizes `f` over `[lo, hi]` by a `points`-point grid followed by
/// golden-section refinement on the two cells adjacent to the best grid
/// point. Endpoints are always candidates.
pub fn grid_golden_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, points: usize, tol: f64) -> Result<Maximum> {
    if !(lo < hi) || points < 3 {
        return Err(Error::InvalidArgument(format!("bad search interval [{lo}, {hi}] with {points} points")));
    }
    let step = (hi - lo) / (points - 1) as f64;
    let grid: Vec<(f64, f64)> = (0..points)
        .map(|i| {
            let u = if i == points - 1 { hi } else { lo + step * i as f64 };
            (u, f(u))
        })
        .collect();
    if let Some(&(u, v)) = grid.iter().find(|(_, v)| v.is_nan()) {
        return Err(Error::InvalidArgument(format!("objective is NaN at {u} ({v})")));
    }
    let (ibest, &(ubest, vbest)) = grid
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("grid is non-empty");
    let mut best = Maximum { arg: ubest, value: vbest };
    let left = grid[ibest.saturating_sub(1)].0;
    let right = grid[(ibest + 1).min(points - 1)].0;
    let refined = golden_section_max(&f, left, right, tol);
    if refined.value > best.value {
        best = refined;
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_max() {
        let m = grid_golden_max(|x| -(x - 0.3141592653).powi(2), 0.0, 1.0, GRID_POINTS, U_TOL).unwrap();
        assert!((m.arg - 0.3141592653).abs() < 1e-8);
    }

    #[test]
    fn endpoint_max() {
        let m = grid_golden_max(|x| x, 0.0, 1.0, GRID_POINTS, U_TOL).unwrap();
        assert_eq!(m.arg, 1.0);
        assert_eq!(m.value, 1.0);
        let m = grid_golden_max(|x| -x, 0.0, 1.0, GRID_POINTS, U_TOL).unwrap();
        assert_eq!(m.arg, 0.0);
    }

    #[test]
    fn picks_global_of_two_peaks() {
        let f = |x: f64| (-(x - 0.2).powi(2) / 1e-3).exp() + 1.5 * (-(x - 0.8).powi(2) / 1e-3).exp();
        let m = grid_golden_max(f, 0.0, 1.0, GRID_POINTS, U_TOL).unwrap();
        assert!((m.arg - 0.8).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_interval() {
        assert!(grid_golden_max(|x| x, 1.0, 0.0, 10, 1e-6).is_err());
        assert!(grid_golden_max(|_| f64::NAN, 0.0, 1.0, 10, 1e-6).is_err());
    }
}
