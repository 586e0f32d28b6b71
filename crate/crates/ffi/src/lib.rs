//! C ABI over `shrinkrisk`.
//!
//! Every function returns a [`ShrStatus`]; results go through out-pointers.
//! Designs live behind an opaque [`ShrDesign`] handle that the caller frees
//! with [`shr_design_free`]. The message of the most recent failure on the
//! calling thread is available from [`shr_last_error`].

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::{DMatrix, DVector};
use shrinkrisk::asymptotics::{big_r_limit, phase_classify, r_limit, sup_big_r, Region};
use shrinkrisk::chisq_moments::{inv_moment, InvMomentQuery};
use shrinkrisk::linmodel::{design_from_v, sample_design, DesignMatrix, EntryLaw};
use shrinkrisk::risk_exact::risk_report;
use shrinkrisk::rmt::edge_integral;
use shrinkrisk::Error;

/// Status codes shared by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    NotSpd = 4,
    DegenerateGram = 5,
    SingularGram = 6,
    MomentNotFinite = 7,
    AspectRatio = 8,
    Panic = 9,
}

impl From<&Error> for ShrStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Dimension(_) => ShrStatus::Dimension,
            Error::NotSpd(_) => ShrStatus::NotSpd,
            Error::DegenerateGram { .. } => ShrStatus::DegenerateGram,
            Error::SingularGram => ShrStatus::SingularGram,
            Error::MomentNotFinite { .. } => ShrStatus::MomentNotFinite,
            Error::AspectRatio(_) => ShrStatus::AspectRatio,
            _ => ShrStatus::InvalidArgument,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

/// Runs `f`, translating errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), ShrStatus>>(f: F) -> ShrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ShrStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            ShrStatus::Panic
        }
    }
}

fn fail(e: Error) -> ShrStatus {
    set_error(e.to_string());
    ShrStatus::from(&e)
}

fn null(what: &str) -> ShrStatus {
    set_error(format!("{what} is null"));
    ShrStatus::NullPointer
}

fn check<T>(r: shrinkrisk::Result<T>) -> Result<T, ShrStatus> {
    r.map_err(fail)
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, ShrStatus> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Borrow of `len` doubles; `len = 0` accepts a null pointer.
unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], ShrStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// `p × p` covariance from a row-major buffer; null means the identity.
unsafe fn covariance(sigma: *const f64, p: usize) -> Result<DMatrix<f64>, ShrStatus> {
    if sigma.is_null() {
        return Ok(DMatrix::identity(p, p));
    }
    let s = slice(sigma, p * p, "sigma")?;
    Ok(DMatrix::from_row_slice(p, p, s))
}

/// Copies the message of the last failure on this thread into `buf`
/// (NUL-terminated, truncated to `len − 1` bytes). Returns the full message
/// length in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn shr_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// `E[(1/χ²_k(λ))^order]` for `order ∈ {1, 2}`, `k > 2·order`.
///
/// # Safety
/// `result` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn shr_inv_moment(k: u32, lambda: f64, order: u32, tol: f64, result: *mut f64) -> ShrStatus {
    guard(|| {
        let result = out(result, "result")?;
        let q = check(InvMomentQuery::with_tol(k, lambda, order, tol))?;
        *result = inv_moment(&q);
        Ok(())
    })
}

/// Limiting out-of-sample risk `r(δ², c, t)`; `delta2` may be `INFINITY`.
///
/// # Safety
/// `result` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn shr_r_limit(delta2: f64, c: f64, t: f64, result: *mut f64) -> ShrStatus {
    guard(|| {
        *out(result, "result")? = check(r_limit(delta2, c, t))?;
        Ok(())
    })
}

/// Worst-direction limit `R(δ², c, t)`.
///
/// # Safety
/// `result` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn shr_big_r_limit(delta2: f64, c: f64, t: f64, result: *mut f64) -> ShrStatus {
    guard(|| {
        *out(result, "result")? = check(big_r_limit(delta2, c, t))?;
        Ok(())
    })
}

/// `sup_δ² R(δ², c, t)` and its maximizer (`INFINITY` if approached at ∞).
///
/// # Safety
/// `value` and `argmax` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn shr_sup_big_r(c: f64, t: f64, value: *mut f64, argmax: *mut f64) -> ShrStatus {
    guard(|| {
        let value = out(value, "value")?;
        let argmax = out(argmax, "argmax")?;
        let s = check(sup_big_r(c, t))?;
        *value = s.value;
        *argmax = s.argmax;
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ShrPhaseVerdict {
    /// 1 when the worst-case risk exceeds the maximum-likelihood limit.
    pub fails: i32,
    pub sup_r: f64,
    pub argmax_delta2: f64,
    pub ml_limit: f64,
    pub gap: f64,
    /// `gap/2` in the failure region, otherwise NaN.
    pub epsilon: f64,
    /// 1 when the numerical gap agrees with the closed-form region.
    pub consistent: i32,
}

/// Worst-case phase classification at `(c, t)`.
///
/// # Safety
/// `verdict` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn shr_phase_classify(c: f64, t: f64, verdict: *mut ShrPhaseVerdict) -> ShrStatus {
    guard(|| {
        let verdict = out(verdict, "verdict")?;
        let v = check(phase_classify(c, t))?;
        *verdict = ShrPhaseVerdict {
            fails: i32::from(v.region == Region::WorstCaseFails),
            sup_r: v.sup_r,
            argmax_delta2: v.argmax_delta2,
            ml_limit: v.ml_limit,
            gap: v.gap,
            epsilon: v.epsilon.unwrap_or(f64::NAN),
            consistent: i32::from(v.consistent),
        };
        Ok(())
    })
}

/// Closed form and quadrature of the Marchenko–Pastur integral identity.
/// `quadrature` receives NaN at `t = 1`, where the closed form is infinite.
///
/// # Safety
/// `closed` and `quadrature` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn shr_edge_integral(t: f64, closed: *mut f64, quadrature: *mut f64) -> ShrStatus {
    guard(|| {
        let closed = out(closed, "closed")?;
        let quadrature = out(quadrature, "quadrature")?;
        let l = check(edge_integral(t))?;
        *closed = l.closed;
        *quadrature = l.quadrature.unwrap_or(f64::NAN);
        Ok(())
    })
}

/// Opaque design handle: a full-rank `X` together with its `Σ`.
pub struct ShrDesign {
    design: DesignMatrix,
    sigma: DMatrix<f64>,
}

unsafe fn store(d: ShrDesign, handle: *mut *mut ShrDesign) -> Result<(), ShrStatus> {
    *out(handle, "handle")? = Box::into_raw(Box::new(d));
    Ok(())
}

/// Samples `X = VΣ^{1/2}` with standard normal `V`. `sigma` is a row-major
/// `p × p` covariance, or null for the identity.
///
/// # Safety
/// `sigma` must be null or point to `p·p` doubles; `handle` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn shr_design_sample(
    n: usize,
    p: usize,
    sigma: *const f64,
    seed: u64,
    handle: *mut *mut ShrDesign,
) -> ShrStatus {
    guard(|| {
        let sigma = covariance(sigma, p)?;
        let design = check(sample_design(n, p, &sigma, EntryLaw::StandardNormal, seed))?;
        store(ShrDesign { design, sigma }, handle)
    })
}

/// Builds `X = VΣ^{1/2}` from a row-major `n × p` matrix `V`.
///
/// # Safety
/// `v` must point to `n·p` doubles, `sigma` be null or point to `p·p`
/// doubles, and `handle` be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn shr_design_from_v(
    v: *const f64,
    n: usize,
    p: usize,
    sigma: *const f64,
    handle: *mut *mut ShrDesign,
) -> ShrStatus {
    guard(|| {
        let v = DMatrix::from_row_slice(n, p, slice(v, n * p, "v")?);
        let sigma = covariance(sigma, p)?;
        let design = check(design_from_v(&v, &sigma))?;
        store(ShrDesign { design, sigma }, handle)
    })
}

/// Releases a handle; null is a no-op.
///
/// # Safety
/// `handle` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn shr_design_free(handle: *mut ShrDesign) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Writes the eigenvalues of `X′X/n` in ascending order into `values`, which
/// must hold `p` entries.
///
/// # Safety
/// `handle` must be a live handle and `values` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn shr_design_spectrum(handle: *const ShrDesign, values: *mut f64, len: usize) -> ShrStatus {
    guard(|| {
        let d = handle.as_ref().ok_or_else(|| null("handle"))?;
        let spec = d.design.spectrum();
        if len != spec.len() {
            return Err(fail(Error::Dimension(format!("buffer holds {len} values, need {}", spec.len()))));
        }
        if values.is_null() {
            return Err(null("values"));
        }
        std::slice::from_raw_parts_mut(values, len).copy_from_slice(spec.as_slice());
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ShrRiskReport {
    pub c: f64,
    pub rho1_ml: f64,
    pub rho1_c: f64,
    pub rho2_ml: f64,
    pub rho2_c: f64,
    pub rel_oos: f64,
    pub ncp: f64,
    pub snr: f64,
}

/// Exact in- and out-of-sample risks of the shrinkage estimator with tuning
/// `c` and of maximum likelihood, for the coefficient vector `beta` (`p`
/// entries).
///
/// # Safety
/// `handle` must be a live handle, `beta` point to `p` doubles and `report`
/// be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn shr_design_risk(
    handle: *const ShrDesign,
    c: f64,
    beta: *const f64,
    p: usize,
    report: *mut ShrRiskReport,
) -> ShrStatus {
    guard(|| {
        let d = handle.as_ref().ok_or_else(|| null("handle"))?;
        let report = out(report, "report")?;
        if p != d.design.p() {
            return Err(fail(Error::Dimension(format!("beta has {p} entries, design has p = {}", d.design.p()))));
        }
        let beta = DVector::from_column_slice(slice(beta, p, "beta")?);
        let r = check(risk_report(c, &d.design, &d.sigma, &beta))?;
        *report = ShrRiskReport {
            c: r.c,
            rho1_ml: r.rho1_ml,
            rho1_c: r.rho1_c,
            rho2_ml: r.rho2_ml,
            rho2_c: r.rho2_c,
            rel_oos: r.rel_oos,
            ncp: r.ncp,
            snr: r.snr,
        };
        Ok(())
    })
}
