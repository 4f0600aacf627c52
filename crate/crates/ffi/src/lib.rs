//! C ABI for `avtable`.
//!
//! Every fallible function returns an [`AvStatus`] and writes results through
//! out-pointers. On failure, [`av_last_error`] describes the most recent
//! error on the calling thread. Handles are opaque; free each with its
//! matching `*_free` function. Panics never cross the boundary: they are
//! reported as [`AvStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{self, AssertUnwindSafe};
use std::ptr;

use avtable::confseq::{ConfSeqConfig, ConfSeqState, EffectSize, GridSpec};
use avtable::eprocess::{Alpha, BetaPrior, Decision, EProcessState};
use avtable::error::Error;
use avtable::model::{Block, BlockDesign, ThetaPair};
use avtable::projection::{project, NullSpec};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidUtf8 = 3,
    BlockShape = 4,
    Numerical = 5,
    Snapshot = 6,
    Io = 7,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AvDecision {
    Continue = 0,
    Reject = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AvEffect {
    RiskDifference = 0,
    RelativeRisk = 1,
    LogOddsRatio = 2,
}

/// Result of [`av_project`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvProjection {
    pub theta_a: f64,
    pub theta_b: f64,
    pub kl_value: f64,
    /// The star already lies in the null; the projection is the star.
    pub member: bool,
}

/// Hull of the surviving grid values. `lower` and `upper` are NaN when
/// `empty` is set.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvInterval {
    pub lower: f64,
    pub upper: f64,
    pub empty: bool,
    pub n_alive: usize,
    pub blocks: u64,
}

/// Opaque plug-in e-process against one null.
pub struct AvEProcess(EProcessState);

/// Opaque confidence sequence over an effect-size grid.
pub struct AvConfSeq(ConfSeqState);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure {
    status: AvStatus,
    message: String,
}

impl Failure {
    fn new(status: AvStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::BlockShape { .. } => AvStatus::BlockShape,
            Error::Projection(_) => AvStatus::Numerical,
            Error::Snapshot(_) => AvStatus::Snapshot,
            Error::Io { .. } => AvStatus::Io,
            _ => AvStatus::InvalidArgument,
        };
        Failure::new(status, e.to_string())
    }
}

type FfiResult<T> = std::result::Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> AvStatus {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AvStatus::Ok,
        Ok(Err(failure)) => {
            set_last_error(failure.message);
            failure.status
        }
        Err(payload) => {
            let what = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {what}"));
            AvStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, name: &str) -> FfiResult<&'a T> {
    // SAFETY: callers pass pointers that are either NULL or valid for reads.
    unsafe { p.as_ref() }.ok_or_else(|| Failure::new(AvStatus::NullPointer, format!("{name} is NULL")))
}

fn non_null_mut<'a, T>(p: *mut T, name: &str) -> FfiResult<&'a mut T> {
    // SAFETY: callers pass pointers that are either NULL or valid for writes.
    unsafe { p.as_mut() }.ok_or_else(|| Failure::new(AvStatus::NullPointer, format!("{name} is NULL")))
}

fn c_str<'a>(p: *const c_char, name: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(Failure::new(AvStatus::NullPointer, format!("{name} is NULL")));
    }
    // SAFETY: non-NULL and, per the API contract, NUL-terminated.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|e| Failure::new(AvStatus::InvalidUtf8, format!("{name}: {e}")))
}

fn outcomes(p: *const u8, len: usize, name: &str) -> FfiResult<Vec<u8>> {
    if len == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(Failure::new(AvStatus::NullPointer, format!("{name} is NULL")));
    }
    // SAFETY: non-NULL and valid for `len` reads per the API contract.
    Ok(unsafe { std::slice::from_raw_parts(p, len) }.to_vec())
}

fn prior_from(p: *const f64) -> FfiResult<BetaPrior> {
    if p.is_null() {
        return Ok(BetaPrior::default());
    }
    // SAFETY: non-NULL prior arrays hold four doubles per the API contract.
    let v = unsafe { std::slice::from_raw_parts(p, 4) };
    Ok(BetaPrior::new(v[0], v[1], v[2], v[3])?)
}

fn block_from(ys_a: *const u8, len_a: usize, ys_b: *const u8, len_b: usize) -> FfiResult<Block> {
    Ok(Block::new(outcomes(ys_a, len_a, "ys_a")?, outcomes(ys_b, len_b, "ys_b")?)?)
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// owned by the library and valid until the next failing call on the same
/// thread.
#[no_mangle]
pub extern "C" fn av_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn av_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must be NULL or a pointer obtained from this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn av_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: the caller guarantees `s` came from `CString::into_raw`.
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Reverse information projection of `(star_a, star_b)` onto the null given
/// by `null_token` (`equality`, `line:s:c`, `le:s:c`, `ge:s:c`, `lor-le:d` or
/// `lor-ge:d`).
///
/// # Safety
/// `null_token` must be a NUL-terminated string; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn av_project(
    null_token: *const c_char,
    star_a: f64,
    star_b: f64,
    n_a: u32,
    n_b: u32,
    out: *mut AvProjection,
) -> AvStatus {
    guard(|| {
        let out = non_null_mut(out, "out")?;
        let null: NullSpec = c_str(null_token, "null_token")?.parse()?;
        let p = project(&null, ThetaPair::new(star_a, star_b)?, BlockDesign::new(n_a, n_b)?)?;
        *out = AvProjection {
            theta_a: p.theta_circ.a(),
            theta_b: p.theta_circ.b(),
            kl_value: p.kl_value,
            member: p.interior_hit,
        };
        Ok(())
    })
}

/// Creates an e-process. `prior` is NULL for the default Beta(0.18, 0.18)
/// prior on both groups, or four doubles `alpha_a, beta_a, alpha_b, beta_b`.
///
/// # Safety
/// `null_token` must be NUL-terminated; `prior` NULL or valid for four reads;
/// `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn av_eprocess_new(
    null_token: *const c_char,
    n_a: u32,
    n_b: u32,
    prior: *const f64,
    out: *mut *mut AvEProcess,
) -> AvStatus {
    guard(|| {
        let out = non_null_mut(out, "out")?;
        let null: NullSpec = c_str(null_token, "null_token")?.parse()?;
        let state = EProcessState::new(null, BlockDesign::new(n_a, n_b)?, prior_from(prior)?)?;
        *out = Box::into_raw(Box::new(AvEProcess(state)));
        Ok(())
    })
}

/// Feeds one block of `n_a` group-a and `n_b` group-b outcomes (each 0 or 1).
/// `increment` (nullable) receives the log e-value increment. On error the
/// process is unchanged.
///
/// # Safety
/// `ep` must be a live handle; `ys_a`/`ys_b` valid for `len_a`/`len_b` reads.
#[no_mangle]
pub unsafe extern "C" fn av_eprocess_update(
    ep: *mut AvEProcess,
    ys_a: *const u8,
    len_a: usize,
    ys_b: *const u8,
    len_b: usize,
    increment: *mut f64,
) -> AvStatus {
    guard(|| {
        let ep = non_null_mut(ep, "ep")?;
        let d = ep.0.update(&block_from(ys_a, len_a, ys_b, len_b)?)?;
        if let Some(out) = unsafe { increment.as_mut() } {
            *out = d;
        }
        Ok(())
    })
}

/// Current log e-value and number of blocks seen.
///
/// # Safety
/// `ep` must be a live handle; out-pointers valid for writes or NULL.
#[no_mangle]
pub unsafe extern "C" fn av_eprocess_state(ep: *const AvEProcess, log_e: *mut f64, blocks: *mut u64) -> AvStatus {
    guard(|| {
        let ep = non_null(ep, "ep")?;
        if let Some(out) = unsafe { log_e.as_mut() } {
            *out = ep.0.log_e();
        }
        if let Some(out) = unsafe { blocks.as_mut() } {
            *out = ep.0.m();
        }
        Ok(())
    })
}

/// Reject iff the current e-value is at least `1/alpha`.
///
/// # Safety
/// `ep` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn av_eprocess_decision(ep: *const AvEProcess, alpha: f64, out: *mut AvDecision) -> AvStatus {
    guard(|| {
        let ep = non_null(ep, "ep")?;
        let out = non_null_mut(out, "out")?;
        *out = match ep.0.decision(Alpha::new(alpha)?) {
            Decision::Reject => AvDecision::Reject,
            Decision::Continue => AvDecision::Continue,
        };
        Ok(())
    })
}

/// Serializes the process to text; free the result with [`av_string_free`].
///
/// # Safety
/// `ep` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn av_eprocess_snapshot(ep: *const AvEProcess, out: *mut *mut c_char) -> AvStatus {
    guard(|| {
        let ep = non_null(ep, "ep")?;
        let out = non_null_mut(out, "out")?;
        let text = CString::new(ep.0.to_snapshot())
            .map_err(|e| Failure::new(AvStatus::Snapshot, e.to_string()))?;
        *out = text.into_raw();
        Ok(())
    })
}

/// Rebuilds a process from [`av_eprocess_snapshot`] output.
///
/// # Safety
/// `text` must be NUL-terminated; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn av_eprocess_restore(text: *const c_char, out: *mut *mut AvEProcess) -> AvStatus {
    guard(|| {
        let out = non_null_mut(out, "out")?;
        let state = EProcessState::from_snapshot(c_str(text, "text")?)?;
        *out = Box::into_raw(Box::new(AvEProcess(state)));
        Ok(())
    })
}

/// Destroys a handle. NULL is ignored.
///
/// # Safety
/// `ep` must be NULL or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn av_eprocess_free(ep: *mut AvEProcess) {
    if !ep.is_null() {
        // SAFETY: the caller guarantees `ep` came from `Box::into_raw`.
        drop(unsafe { Box::from_raw(ep) });
    }
}

/// Creates a confidence sequence. `grid_token` is NULL for the effect's
/// default grid, or `linear:lo:hi:step`, `log:lo:hi:points`, `list:v1,v2,...`.
///
/// # Safety
/// `grid_token` NULL or NUL-terminated; `prior` NULL or valid for four reads;
/// `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn av_confseq_new(
    effect: AvEffect,
    alpha: f64,
    n_a: u32,
    n_b: u32,
    prior: *const f64,
    grid_token: *const c_char,
    out: *mut *mut AvConfSeq,
) -> AvStatus {
    guard(|| {
        let out = non_null_mut(out, "out")?;
        let effect = match effect {
            AvEffect::RiskDifference => EffectSize::RiskDifference,
            AvEffect::RelativeRisk => EffectSize::RelativeRisk,
            AvEffect::LogOddsRatio => EffectSize::LogOddsRatio,
        };
        let grid: GridSpec = if grid_token.is_null() {
            effect.default_grid()
        } else {
            c_str(grid_token, "grid_token")?.parse()?
        };
        let config = ConfSeqConfig::new(effect, Alpha::new(alpha)?, prior_from(prior)?, BlockDesign::new(n_a, n_b)?);
        *out = Box::into_raw(Box::new(AvConfSeq(ConfSeqState::from_spec(config, &grid)?)));
        Ok(())
    })
}

/// Feeds one block to every live grid point.
///
/// # Safety
/// `cs` must be a live handle; `ys_a`/`ys_b` valid for `len_a`/`len_b` reads.
#[no_mangle]
pub unsafe extern "C" fn av_confseq_update(
    cs: *mut AvConfSeq,
    ys_a: *const u8,
    len_a: usize,
    ys_b: *const u8,
    len_b: usize,
) -> AvStatus {
    guard(|| {
        let cs = non_null_mut(cs, "cs")?;
        cs.0.update(&block_from(ys_a, len_a, ys_b, len_b)?)?;
        Ok(())
    })
}

/// Current running-intersection interval.
///
/// # Safety
/// `cs` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn av_confseq_interval(cs: *const AvConfSeq, out: *mut AvInterval) -> AvStatus {
    guard(|| {
        let cs = non_null(cs, "cs")?;
        let out = non_null_mut(out, "out")?;
        let r = cs.0.record();
        *out = AvInterval {
            lower: r.lower,
            upper: r.upper,
            empty: r.n_alive == 0,
            n_alive: r.n_alive,
            blocks: r.m,
        };
        Ok(())
    })
}

/// Destroys a handle. NULL is ignored.
///
/// # Safety
/// `cs` must be NULL or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn av_confseq_free(cs: *mut AvConfSeq) {
    if !cs.is_null() {
        // SAFETY: the caller guarantees `cs` came from `Box::into_raw`.
        drop(unsafe { Box::from_raw(cs) });
    }
}
