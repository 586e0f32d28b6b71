//! Gaussian linear model `Y = Xβ + u`, `u ~ N(0, Iₙ)`, with designs of the
//! form `X = VΣ^{1/2}` where `V` has i.i.d. standardized entries.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Relative symmetry tolerance for covariance matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Smallest admissible eigenvalue of `Σ`, relative to its largest.
pub const SPD_RATIO: f64 = 1e-10;
/// A Gram matrix whose eigenvalue ratio falls below this is treated as singular.
pub const DEGENERATE_RATIO: f64 = 1e-12;
/// Draws attempted by [`sample_design`] before giving up on a degenerate Gram.
pub const MAX_DRAWS: usize = 3;

/// Distribution of the entries of `V`. All have mean 0, variance 1 and a
/// finite fourth moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryLaw {
    #[default]
    StandardNormal,
    /// ±1 with equal probability. Not absolutely continuous, so singular
    /// Grams have positive probability; those draws are rejected.
    Rademacher,
    /// Uniform on `[−√3, √3]`.
    CenteredUniformScaled,
}

impl EntryLaw {
    pub fn fourth_moment(self) -> f64 {
        match self {
            EntryLaw::StandardNormal => 3.0,
            EntryLaw::Rademacher => 1.0,
            EntryLaw::CenteredUniformScaled => 9.0 / 5.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            EntryLaw::StandardNormal => rng.sample(StandardNormal),
            EntryLaw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            EntryLaw::CenteredUniformScaled => {
                let s = 3f64.sqrt();
                rng.random_range(-s..s)
            }
        }
    }
}

impl std::str::FromStr for EntryLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard-normal" | "normal" => Ok(EntryLaw::StandardNormal),
            "rademacher" => Ok(EntryLaw::Rademacher),
            "centered-uniform-scaled" | "uniform" => Ok(EntryLaw::CenteredUniformScaled),
            other => Err(Error::InvalidArgument(format!("unknown entry law `{other}`"))),
        }
    }
}

/// Checks that `sigma` is square, symmetric and numerically positive definite.
pub fn validate_covariance(sigma: &DMatrix<f64>) -> Result<()> {
    if !sigma.is_square() {
        return Err(Error::Dimension(format!(
            "covariance is {}x{}, expected square",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let scale = sigma.amax();
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::NotSpd("zero or non-finite entries".into()));
    }
    let asym = (sigma - sigma.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSpd(format!("asymmetry {asym:e} exceeds tolerance")));
    }
    let eig = sigma.clone().symmetric_eigenvalues();
    let lo = eig.min();
    let hi = eig.max();
    if !(hi > 0.0 && lo > SPD_RATIO * hi) {
        return Err(Error::NotSpd(format!("eigenvalue range [{lo:e}, {hi:e}]")));
    }
    Ok(())
}

/// Symmetric square root of an SPD matrix via its eigendecomposition.
pub fn sym_sqrt(sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(sigma.clone());
    let root = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let q = &eig.eigenvectors;
    q * DMatrix::from_diagonal(&root) * q.transpose()
}

/// A problem instance. The noise variance is fixed at 1.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    n: usize,
    p: usize,
    sigma_cov: DMatrix<f64>,
    beta: DVector<f64>,
}

impl ModelSpec {
    pub fn new(n: usize, p: usize, sigma_cov: DMatrix<f64>, beta: DVector<f64>) -> Result<Self> {
        check_dims(n, p)?;
        if sigma_cov.nrows() != p || beta.len() != p {
            return Err(Error::Dimension(format!(
                "p = {p} but covariance is {}x{} and beta has length {}",
                sigma_cov.nrows(),
                sigma_cov.ncols(),
                beta.len()
            )));
        }
        validate_covariance(&sigma_cov)?;
        Ok(ModelSpec { n, p, sigma_cov, beta })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn sigma_cov(&self) -> &DMatrix<f64> {
        &self.sigma_cov
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    /// Signal strength `β′Σβ`.
    pub fn snr(&self) -> f64 {
        quad_form(&self.sigma_cov, &self.beta)
    }
}

pub(crate) fn check_dims(n: usize, p: usize) -> Result<()> {
    if p < 3 || n < p {
        return Err(Error::Dimension(format!("need n >= p >= 3, got n = {n}, p = {p}")));
    }
    Ok(())
}

/// `v′Av`.
pub fn quad_form(a: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(a * v))
}

/// A realized design with its Gram matrix and the ordered spectrum of `X′X/n`.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    x: DMatrix<f64>,
    gram: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    /// Eigenvalues of `X′X/n`, ascending.
    eigenvalues: DVector<f64>,
    /// Orthonormal eigenvectors as columns, matching `eigenvalues`.
    eigenvectors: DMatrix<f64>,
}

impl DesignMatrix {
    /// Wraps a given `n × p` matrix. Fails on dimension violations or a
    /// rank-deficient Gram.
    pub fn from_matrix(x: DMatrix<f64>) -> Result<Self> {
        let (n, p) = x.shape();
        check_dims(n, p)?;
        let gram = x.tr_mul(&x);
        let eig = SymmetricEigen::new(&gram / n as f64);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = DVector::from_iterator(p, order.iter().map(|&i| eig.eigenvalues[i]));
        let eigenvectors = DMatrix::from_fn(p, p, |r, c| eig.eigenvectors[(r, order[c])]);

        let hi = eigenvalues[p - 1];
        let lo = eigenvalues[0];
        if !(hi > 0.0 && lo > DEGENERATE_RATIO * hi) {
            return Err(Error::DegenerateGram {
                attempts: 1,
                ratio: if hi > 0.0 { lo / hi } else { 0.0 },
            });
        }
        let chol = Cholesky::new(gram.clone()).ok_or(Error::SingularGram)?;
        Ok(DesignMatrix { x, gram, chol, eigenvalues, eigenvectors })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// `X′X`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn cholesky(&self) -> &Cholesky<f64, Dyn> {
        &self.chol
    }

    /// Eigenvalues `ν₁ ≤ … ≤ ν_p` of `X′X/n`.
    pub fn spectrum(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Eigenvector `w_i` for the `i`-th smallest eigenvalue, 1-based.
    pub fn eigenvector(&self, i: usize) -> Result<DVector<f64>> {
        if i == 0 || i > self.p() {
            return Err(Error::InvalidArgument(format!(
                "eigenvector index {i} outside 1..={}",
                self.p()
            )));
        }
        Ok(self.eigenvectors.column(i - 1).into_owned())
    }

    /// `(X′X)⁻¹ b`.
    pub fn solve_gram(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    /// `β′X′Xβ = ‖Xβ‖²`.
    pub fn ncp(&self, beta: &DVector<f64>) -> f64 {
        (&self.x * beta).norm_squared()
    }
}

/// Draws the `n × p` matrix `V` of i.i.d. entries. Entries are filled row by
/// row from a single stream.
pub fn sample_v(n: usize, p: usize, law: EntryLaw, seed: u64) -> DMatrix<f64> {
    sample_v_attempt(n, p, law, seed, 0)
}

fn sample_v_attempt(n: usize, p: usize, law: EntryLaw, seed: u64, attempt: u64) -> DMatrix<f64> {
    let mut rng = rng::stream(seed, attempt);
    let mut v = DMatrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            v[(i, j)] = law.sample(&mut rng);
        }
    }
    v
}

/// `X = VΣ^{1/2}` for a given `V`.
pub fn design_from_v(v: &DMatrix<f64>, sigma_cov: &DMatrix<f64>) -> Result<DesignMatrix> {
    if v.ncols() != sigma_cov.nrows() {
        return Err(Error::Dimension(format!(
            "V has {} columns, covariance is {}x{}",
            v.ncols(),
            sigma_cov.nrows(),
            sigma_cov.ncols()
        )));
    }
    validate_covariance(sigma_cov)?;
    DesignMatrix::from_matrix(v * sym_sqrt(sigma_cov))
}

/// Samples `X = VΣ^{1/2}`, deterministically in `seed`. A degenerate Gram is
/// redrawn (up to [`MAX_DRAWS`] draws in total) from a fresh stream.
pub fn sample_design(
    n: usize,
    p: usize,
    sigma_cov: &DMatrix<f64>,
    law: EntryLaw,
    seed: u64,
) -> Result<DesignMatrix> {
    check_dims(n, p)?;
    if sigma_cov.nrows() != p {
        return Err(Error::Dimension(format!(
            "p = {p} but covariance is {}x{}",
            sigma_cov.nrows(),
            sigma_cov.ncols()
        )));
    }
    validate_covariance(sigma_cov)?;
    let root = sym_sqrt(sigma_cov);
    let mut last_ratio = 0.0;
    for attempt in 0..MAX_DRAWS {
        let v = sample_v_attempt(n, p, law, seed, attempt as u64);
        match DesignMatrix::from_matrix(v * &root) {
            Ok(d) => return Ok(d),
            Err(Error::DegenerateGram { ratio, .. }) => last_ratio = ratio,
            Err(Error::SingularGram) => last_ratio = 0.0,
            Err(e) => return Err(e),
        }
    }
    Err(Error::DegenerateGram { attempts: MAX_DRAWS, ratio: last_ratio })
}

/// A realized response vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseVector {
    pub y: DVector<f64>,
    pub seed: u64,
}

impl ResponseVector {
    /// `Y = Xβ + u` for a caller-supplied noise vector.
    pub fn from_noise(design: &DesignMatrix, beta: &DVector<f64>, u: &DVector<f64>, seed: u64) -> Result<Self> {
        if beta.len() != design.p() || u.len() != design.n() {
            return Err(Error::Dimension(format!(
                "design is {}x{}, beta has length {}, noise has length {}",
                design.n(),
                design.p(),
                beta.len(),
                u.len()
            )));
        }
        Ok(ResponseVector { y: design.x() * beta + u, seed })
    }

    /// `Y′Y/n`.
    pub fn mean_square(&self) -> f64 {
        self.y.norm_squared() / self.y.len() as f64
    }
}

/// Draws `Y = Xβ + u` with standard normal noise.
pub fn sample_response(spec: &ModelSpec, design: &DesignMatrix, seed: u64) -> Result<ResponseVector> {
    if spec.n() != design.n() || spec.p() != design.p() {
        return Err(Error::Dimension(format!(
            "model is {}x{}, design is {}x{}",
            spec.n(),
            spec.p(),
            design.n(),
            design.p()
        )));
    }
    let mut rng = rng::stream(seed, 0);
    let u = DVector::from_fn(design.n(), |_, _| rng.sample::<f64, _>(StandardNormal));
    ResponseVector::from_noise(design, spec.beta(), &u, seed)
}

/// `β = s·w_i` scaled so that `β′Σβ = target`. `i` is 1-based in ascending
/// eigenvalue order of `X′X/n`.
pub fn beta_along_eigvec(
    design: &DesignMatrix,
    sigma_cov: &DMatrix<f64>,
    i: usize,
    target: f64,
) -> Result<DVector<f64>> {
    if !(target >= 0.0 && target.is_finite()) {
        return Err(Error::InvalidArgument(format!("target β′Σβ = {target} must be finite and >= 0")));
    }
    if sigma_cov.nrows() != design.p() {
        return Err(Error::Dimension("covariance does not match design".into()));
    }
    let w = design.eigenvector(i)?;
    let q = quad_form(sigma_cov, &w);
    if q <= 0.0 {
        return Err(Error::NotSpd(format!("w′Σw = {q:e} for eigenvector {i}")));
    }
    Ok(w * (target / q).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spd(p: usize, seed: u64) -> DMatrix<f64> {
        let a = sample_v(p, p, EntryLaw::StandardNormal, seed);
        a.tr_mul(&a) / p as f64 + DMatrix::identity(p, p) * 0.5
    }

    #[test]
    fn identity_design() {
        let d = DesignMatrix::from_matrix(DMatrix::identity(3, 3)).unwrap();
        assert_eq!(d.x(), &DMatrix::identity(3, 3));
        for v in d.spectrum().iter() {
            assert_relative_eq!(*v, 1.0 / 3.0, epsilon = 1e-15);
        }
        let d = design_from_v(&DMatrix::identity(3, 3), &DMatrix::identity(3, 3)).unwrap();
        assert_relative_eq!(d.x(), &DMatrix::identity(3, 3), epsilon = 1e-15);
    }

    #[test]
    fn design_invariants() {
        let sigma = spd(6, 11);
        let d = sample_design(40, 6, &sigma, EntryLaw::StandardNormal, 3).unwrap();
        let gram = d.x().transpose() * d.x();
        assert!((&gram - d.gram()).amax() <= 1e-10 * gram.amax());
        let s = d.spectrum();
        assert!(s.as_slice().windows(2).all(|w| w[0] <= w[1]));
        let w = d.eigenvectors();
        assert!((w.transpose() * w - DMatrix::identity(6, 6)).amax() < 1e-8);
        assert_relative_eq!(d.gram().trace() / 40.0, s.sum(), max_relative = 1e-10);
        // eigen-equation
        for i in 1..=6 {
            let wi = d.eigenvector(i).unwrap();
            let lhs = d.gram() / 40.0 * &wi;
            assert!((lhs - &wi * s[i - 1]).amax() < 1e-10);
        }
    }

    #[test]
    fn design_is_deterministic() {
        let sigma = DMatrix::identity(5, 5);
        for law in [EntryLaw::StandardNormal, EntryLaw::Rademacher, EntryLaw::CenteredUniformScaled] {
            let a = sample_design(12, 5, &sigma, law, 99).unwrap();
            let b = sample_design(12, 5, &sigma, law, 99).unwrap();
            assert_eq!(a.x(), b.x());
            let c = sample_design(12, 5, &sigma, law, 100).unwrap();
            assert_ne!(a.x(), c.x());
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let id = DMatrix::identity(3, 3);
        assert!(matches!(sample_design(2, 3, &id, EntryLaw::StandardNormal, 0), Err(Error::Dimension(_))));
        assert!(matches!(
            sample_design(10, 2, &DMatrix::identity(2, 2), EntryLaw::StandardNormal, 0),
            Err(Error::Dimension(_))
        ));
        let mut asym = DMatrix::identity(3, 3);
        asym[(0, 1)] = 0.1;
        assert!(matches!(validate_covariance(&asym), Err(Error::NotSpd(_))));
        let sing = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 0.0]));
        assert!(matches!(validate_covariance(&sing), Err(Error::NotSpd(_))));
        let neg = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0, 1.0]));
        assert!(validate_covariance(&neg).is_err());
        assert!(ModelSpec::new(10, 3, id.clone(), DVector::zeros(4)).is_err());
    }

    #[test]
    fn degenerate_gram_rejected() {
        let mut x = DMatrix::zeros(5, 3);
        for i in 0..5 {
            x[(i, 0)] = 1.0 + i as f64;
            x[(i, 1)] = 2.0 * (1.0 + i as f64);
            x[(i, 2)] = (i * i) as f64;
        }
        assert!(matches!(DesignMatrix::from_matrix(x), Err(Error::DegenerateGram { .. })));
    }

    #[test]
    fn rademacher_tiny_design_may_fail_after_three_draws() {
        // n = p = 3 with ±1 entries is singular with probability ~ 0.6, so some
        // seed in this range exhausts all draws.
        let id = DMatrix::identity(3, 3);
        let failures = (0..200)
            .filter(|&s| {
                matches!(
                    sample_design(3, 3, &id, EntryLaw::Rademacher, s),
                    Err(Error::DegenerateGram { attempts: MAX_DRAWS, .. })
                )
            })
            .count();
        assert!(failures > 0);
        assert!(failures < 200);
    }

    #[test]
    fn zero_noise_zero_beta_gives_zero_response() {
        let d = sample_design(10, 3, &DMatrix::identity(3, 3), EntryLaw::StandardNormal, 1).unwrap();
        let y = ResponseVector::from_noise(&d, &DVector::zeros(3), &DVector::zeros(10), 0).unwrap();
        assert_eq!(y.y, DVector::zeros(10));
    }

    #[test]
    fn response_is_deterministic() {
        let sigma = DMatrix::identity(4, 4);
        let d = sample_design(20, 4, &sigma, EntryLaw::StandardNormal, 1).unwrap();
        let spec = ModelSpec::new(20, 4, sigma, DVector::from_element(4, 0.5)).unwrap();
        let a = sample_response(&spec, &d, 8).unwrap();
        let b = sample_response(&spec, &d, 8).unwrap();
        assert_eq!(a, b);
        let wrong = ModelSpec::new(21, 4, DMatrix::identity(4, 4), DVector::zeros(4)).unwrap();
        assert!(sample_response(&wrong, &d, 8).is_err());
    }

    #[test]
    fn response_mean_square_expectation() {
        // E[Y′Y/n | X] = 1 + β′X′Xβ/n
        let (n, p) = (30, 5);
        let sigma = spd(p, 4);
        let d = sample_design(n, p, &sigma, EntryLaw::StandardNormal, 2).unwrap();
        let beta = DVector::from_fn(p, |i, _| 0.3 * (i as f64 + 1.0));
        let spec = ModelSpec::new(n, p, sigma, beta.clone()).unwrap();
        let q = d.ncp(&beta) / n as f64;
        let draws: Vec<f64> = (0..10_000)
            .map(|s| sample_response(&spec, &d, 1000 + s).unwrap().mean_square())
            .collect();
        let est = crate::stats::McEstimate::from_samples(&draws, 0);
        assert!(est.within(1.0 + q, 4.0), "mean {} vs {} (se {})", est.mean, 1.0 + q, est.se);
    }

    #[test]
    fn beta_along_eigvec_hits_target() {
        let id = DMatrix::identity(5, 5);
        let d = sample_design(20, 5, &id, EntryLaw::StandardNormal, 5).unwrap();
        for i in 1..=5 {
            let b = beta_along_eigvec(&d, &id, i, 4.0).unwrap();
            assert_relative_eq!(b.norm_squared(), 4.0, max_relative = 1e-12);
            let w = d.eigenvector(i).unwrap();
            assert_relative_eq!(b.dot(&w).abs(), 2.0, max_relative = 1e-12);
        }
        assert_eq!(beta_along_eigvec(&d, &id, 2, 0.0).unwrap(), DVector::zeros(5));
        assert!(beta_along_eigvec(&d, &id, 0, 1.0).is_err());
        assert!(beta_along_eigvec(&d, &id, 6, 1.0).is_err());
        assert!(beta_along_eigvec(&d, &id, 1, -1.0).is_err());

        let sigma = spd(5, 8);
        let d = sample_design(20, 5, &sigma, EntryLaw::StandardNormal, 6).unwrap();
        for (i, target) in [(1, 0.3), (3, 17.0), (5, 1e4)] {
            let b = beta_along_eigvec(&d, &sigma, i, target).unwrap();
            assert!((quad_form(&sigma, &b) - target).abs() <= 1e-10 * (1.0 + target));
        }
    }

    #[test]
    fn entry_laws_are_standardized() {
        let mut rng = crate::rng::stream(1, 0);
        for law in [EntryLaw::StandardNormal, EntryLaw::Rademacher, EntryLaw::CenteredUniformScaled] {
            let xs: Vec<f64> = (0..200_000).map(|_| law.sample(&mut rng)).collect();
            let m = crate::stats::mean(&xs);
            let v = crate::stats::sample_variance(&xs);
            let m4 = crate::stats::mean(&xs.iter().map(|x| x.powi(4)).collect::<Vec<_>>());
            assert!(m.abs() < 0.015, "{law:?} mean {m}");
            assert!((v - 1.0).abs() < 0.02, "{law:?} var {v}");
            assert!((m4 - law.fourth_moment()).abs() < 0.1, "{law:?} m4 {m4}");
        }
    }

    #[test]
    fn smallest_eigenvalue_near_lower_edge() {
        // n = 200, p = 160: ν₁ near (1 − √0.8)² within ±50% for typical seeds.
        let edge = (1.0 - 0.8f64.sqrt()).powi(2);
        let id = DMatrix::identity(160, 160);
        let hits = (0..20)
            .filter(|&s| {
                let d = sample_design(200, 160, &id, EntryLaw::StandardNormal, s).unwrap();
                (d.spectrum()[0] / edge - 1.0).abs() <= 0.5
            })
            .count();
        assert!(hits >= 18, "only {hits}/20 seeds within ±50% of {edge}");
    }
}
