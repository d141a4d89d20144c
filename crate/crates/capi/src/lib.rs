//! C ABI for the `l1dist` estimators.
//!
//! All functions are `extern "C"`, take raw buffers plus lengths, and
//! return an [`L1dStatus`] code; results come back through out-pointers.
//! Estimator tuning lives behind the opaque [`L1dConfig`] handle.
//!
//! Buffer contracts (callers must uphold them): count buffers are `len`
//! `uint64_t`s, probability buffers are `len` non-negative `double`s that
//! are normalized on entry, and out-pointers are valid for one `double`.

use l1dist::estimators::{
    estimate_known_q, estimate_unknown_q, mle_known_q, mle_unknown_q, EstimatorConfig, SplitMode,
};
use l1dist::prob::{l1_exact, CountVector, Distribution};
use l1dist::RngSeed;
use std::ffi::c_char;

/// Status codes returned by every `l1d_` function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum L1dStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    LengthMismatch = 3,
    RateTooSmall = 4,
    DegreeCap = 5,
    NumericFailure = 6,
}

/// How the optimal constructions split counts between classification and
/// estimation.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum L1dSplitMode {
    Thinning = 0,
    Reuse = 1,
}

/// Opaque estimator configuration; create with `l1d_config_new`, release
/// with `l1d_config_free`.
pub struct L1dConfig {
    inner: EstimatorConfig,
}

fn status_of(err: &l1dist::Error) -> L1dStatus {
    use l1dist::Error::*;
    match err {
        LengthMismatch(_, _) => L1dStatus::LengthMismatch,
        RateTooSmall(_, _) => L1dStatus::RateTooSmall,
        DegreeCap { .. } => L1dStatus::DegreeCap,
        NonConvergence { .. } | NonFiniteFunction(_) | TruncationCap { .. } => {
            L1dStatus::NumericFailure
        }
        _ => L1dStatus::InvalidArgument,
    }
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn l1d_status_message(status: L1dStatus) -> *const c_char {
    let text: &'static [u8] = match status {
        L1dStatus::Ok => b"ok\0",
        L1dStatus::NullPointer => b"null pointer argument\0",
        L1dStatus::InvalidArgument => b"invalid argument\0",
        L1dStatus::LengthMismatch => b"buffer lengths differ\0",
        L1dStatus::RateTooSmall => b"sampling rate too small\0",
        L1dStatus::DegreeCap => b"polynomial degree exceeds the cap\0",
        L1dStatus::NumericFailure => b"numeric failure in the approximation machinery\0",
    };
    text.as_ptr() as *const c_char
}

/// Library version as a static C string.
#[no_mangle]
pub extern "C" fn l1d_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Allocates a configuration with the default constants
/// (c1 = 2.0, c2 = 0.3, c3 = 0.6, thinning, seed 0).
#[no_mangle]
pub extern "C" fn l1d_config_new() -> *mut L1dConfig {
    Box::into_raw(Box::new(L1dConfig {
        inner: EstimatorConfig::default(),
    }))
}

/// Releases a configuration. Passing NULL is a no-op.
///
/// # Safety
/// `cfg` must be NULL or a pointer obtained from `l1d_config_new` that has
/// not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn l1d_config_free(cfg: *mut L1dConfig) {
    if !cfg.is_null() {
        drop(unsafe { Box::from_raw(cfg) });
    }
}

/// Sets the tuning constants; requires `c1 > c3 > c2 > 0`.
///
/// # Safety
/// `cfg` must be a live handle from `l1d_config_new`.
#[no_mangle]
pub unsafe extern "C" fn l1d_config_set_constants(
    cfg: *mut L1dConfig,
    c1: f64,
    c2: f64,
    c3: f64,
) -> L1dStatus {
    let Some(cfg) = (unsafe { cfg.as_mut() }) else {
        return L1dStatus::NullPointer;
    };
    let candidate = EstimatorConfig {
        c1,
        c2,
        c3,
        ..cfg.inner
    };
    match candidate.validate() {
        Ok(()) => {
            cfg.inner = candidate;
            L1dStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Selects the splitting mode.
///
/// # Safety
/// `cfg` must be a live handle from `l1d_config_new`.
#[no_mangle]
pub unsafe extern "C" fn l1d_config_set_split_mode(
    cfg: *mut L1dConfig,
    mode: L1dSplitMode,
) -> L1dStatus {
    let Some(cfg) = (unsafe { cfg.as_mut() }) else {
        return L1dStatus::NullPointer;
    };
    cfg.inner.split_mode = match mode {
        L1dSplitMode::Thinning => SplitMode::Thinning,
        L1dSplitMode::Reuse => SplitMode::Reuse,
    };
    L1dStatus::Ok
}

/// Sets the seed used for binomial thinning.
///
/// # Safety
/// `cfg` must be a live handle from `l1d_config_new`.
#[no_mangle]
pub unsafe extern "C" fn l1d_config_set_seed(cfg: *mut L1dConfig, seed: u64) -> L1dStatus {
    let Some(cfg) = (unsafe { cfg.as_mut() }) else {
        return L1dStatus::NullPointer;
    };
    cfg.inner.seed = seed;
    L1dStatus::Ok
}

unsafe fn dist_from<'a>(ptr: *const f64, len: usize) -> Option<&'a [f64]> {
    if ptr.is_null() {
        None
    } else {
        Some(unsafe { std::slice::from_raw_parts(ptr, len) })
    }
}

unsafe fn counts_from<'a>(ptr: *const u64, len: usize) -> Option<&'a [u64]> {
    if ptr.is_null() {
        None
    } else {
        Some(unsafe { std::slice::from_raw_parts(ptr, len) })
    }
}

fn write_out(out: *mut f64, value: f64) -> L1dStatus {
    if out.is_null() {
        return L1dStatus::NullPointer;
    }
    unsafe { *out = value };
    L1dStatus::Ok
}

/// Exact L1 distance between two weight vectors (normalized on entry).
///
/// # Safety
/// `p` and `q` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn l1d_l1_exact(
    p: *const f64,
    q: *const f64,
    len: usize,
    out: *mut f64,
) -> L1dStatus {
    let (Some(p), Some(q)) = (unsafe { dist_from(p, len) }, unsafe { dist_from(q, len) }) else {
        return L1dStatus::NullPointer;
    };
    let build = |w: &[f64]| Distribution::from_weights(w);
    match (build(p), build(q)) {
        (Ok(p), Ok(q)) => match l1_exact(&p, &q) {
            Ok(v) => write_out(out, v),
            Err(e) => status_of(&e),
        },
        (Err(e), _) | (_, Err(e)) => status_of(&e),
    }
}

/// Plug-in MLE with known `Q`.
///
/// # Safety
/// `counts` holds `len` uint64 counts, `q` holds `len` weights, `out` is
/// writable.
#[no_mangle]
pub unsafe extern "C" fn l1d_mle_known_q(
    counts: *const u64,
    len: usize,
    rate_n: f64,
    q: *const f64,
    out: *mut f64,
) -> L1dStatus {
    let (Some(counts), Some(q)) = (unsafe { counts_from(counts, len) }, unsafe {
        dist_from(q, len)
    }) else {
        return L1dStatus::NullPointer;
    };
    let run = || -> l1dist::Result<f64> {
        let x = CountVector::new(counts.to_vec(), rate_n)?;
        let q = Distribution::from_weights(q)?;
        mle_known_q(&x, &q)
    };
    match run() {
        Ok(v) => write_out(out, v),
        Err(e) => status_of(&e),
    }
}

/// Plug-in MLE from two count buffers sharing one rate.
///
/// # Safety
/// `x` and `y` hold `len` uint64 counts; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn l1d_mle_unknown_q(
    x: *const u64,
    y: *const u64,
    len: usize,
    rate_n: f64,
    out: *mut f64,
) -> L1dStatus {
    let (Some(x), Some(y)) = (unsafe { counts_from(x, len) }, unsafe {
        counts_from(y, len)
    }) else {
        return L1dStatus::NullPointer;
    };
    let run = || -> l1dist::Result<f64> {
        let x = CountVector::new(x.to_vec(), rate_n)?;
        let y = CountVector::new(y.to_vec(), rate_n)?;
        mle_unknown_q(&x, &y)
    };
    match run() {
        Ok(v) => write_out(out, v),
        Err(e) => status_of(&e),
    }
}

/// Minimax-rate-optimal estimator with known `Q`; clipped to `[0, 2]`.
///
/// # Safety
/// `cfg` is a live handle (or NULL for defaults); buffers as in
/// `l1d_mle_known_q`.
#[no_mangle]
pub unsafe extern "C" fn l1d_estimate_known_q(
    cfg: *const L1dConfig,
    counts: *const u64,
    len: usize,
    rate_n: f64,
    q: *const f64,
    out: *mut f64,
) -> L1dStatus {
    let config = unsafe { cfg.as_ref() }.map(|c| c.inner).unwrap_or_default();
    let (Some(counts), Some(q)) = (unsafe { counts_from(counts, len) }, unsafe {
        dist_from(q, len)
    }) else {
        return L1dStatus::NullPointer;
    };
    let run = || -> l1dist::Result<f64> {
        let x = CountVector::new(counts.to_vec(), rate_n)?;
        let q = Distribution::from_weights(q)?;
        Ok(estimate_known_q(&x, &q, &config, RngSeed::new(config.seed))?.estimate)
    };
    match run() {
        Ok(v) => write_out(out, v),
        Err(e) => status_of(&e),
    }
}

/// Minimax-rate-optimal estimator with both sides sampled; clipped to
/// `[0, 2]`.
///
/// # Safety
/// `cfg` is a live handle (or NULL for defaults); buffers as in
/// `l1d_mle_unknown_q`.
#[no_mangle]
pub unsafe extern "C" fn l1d_estimate_unknown_q(
    cfg: *const L1dConfig,
    x: *const u64,
    y: *const u64,
    len: usize,
    rate_n: f64,
    out: *mut f64,
) -> L1dStatus {
    let config = unsafe { cfg.as_ref() }.map(|c| c.inner).unwrap_or_default();
    let (Some(x), Some(y)) = (unsafe { counts_from(x, len) }, unsafe {
        counts_from(y, len)
    }) else {
        return L1dStatus::NullPointer;
    };
    let run = || -> l1dist::Result<f64> {
        let x = CountVector::new(x.to_vec(), rate_n)?;
        let y = CountVector::new(y.to_vec(), rate_n)?;
        Ok(estimate_unknown_q(&x, &y, &config, RngSeed::new(config.seed))?.estimate)
    };
    match run() {
        Ok(v) => write_out(out, v),
        Err(e) => status_of(&e),
    }
}
