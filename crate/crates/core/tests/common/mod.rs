#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, p: usize) -> DVector<f64> {
    DVector::from_fn(p, |_, _| rng.sample(StandardNormal))
}

/// Haar-ish random orthogonal matrix from the QR factor of a Gaussian matrix.
pub fn orthogonal(rng: &mut ChaCha8Rng, p: usize) -> DMatrix<f64> {
    gaussian_matrix(rng, p, p).qr().q()
}

/// Well-conditioned random SPD matrix.
pub fn random_spd(rng: &mut ChaCha8Rng, p: usize) -> DMatrix<f64> {
    let a = gaussian_matrix(rng, p, p);
    a.tr_mul(&a) / p as f64 + DMatrix::identity(p, p) * 0.5
}

/// SPD matrix with eigenvalues geometric from 1 down to `1/cond`, in a random
/// basis.
pub fn ill_conditioned_spd(rng: &mut ChaCha8Rng, p: usize, cond: f64) -> DMatrix<f64> {
    let q = orthogonal(rng, p);
    let d = DVector::from_fn(p, |i, _| cond.powf(-(i as f64) / (p - 1) as f64));
    let s = &q * DMatrix::from_diagonal(&d) * q.transpose();
    (&s + s.transpose()) * 0.5
}

/// Random direction scaled to `β′Σβ = snr`.
pub fn beta_with_snr(rng: &mut ChaCha8Rng, sigma: &DMatrix<f64>, snr: f64) -> DVector<f64> {
    let w = gaussian_vec(rng, sigma.nrows());
    let q = (w.transpose() * sigma * &w)[(0, 0)];
    w * (snr / q).sqrt()
}

/// `tr(Σ(X′X)⁻¹)` through an explicit inverse.
pub fn trace_by_inverse(x: &DMatrix<f64>, sigma: &DMatrix<f64>) -> f64 {
    let inv = x.tr_mul(x).try_inverse().expect("invertible Gram");
    (sigma * inv).trace()
}
