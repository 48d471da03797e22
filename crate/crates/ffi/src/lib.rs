//! C ABI over the spin-orbit library.
//!
//! Objects are opaque handles created by `*_new` and released by `*_free`.
//! Every fallible call returns a [`SoStatus`]; on failure the message is
//! kept per thread and read with [`spinorbit_last_error`]. Panics are
//! caught at the boundary and reported as [`SoStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use spinorbit::integrators::{Method, TideEval};
use spinorbit::{
    default_layout, CaptureConfig, CaptureDecision, CaptureDetector, Dynamics, Error, FastTide,
    MapMode, Model, RunConfig, State,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SoStatus {
    Ok = 0,
    NullPointer = 1,
    /// Argument outside the domain of a function, or a derivative asked
    /// for at a kink.
    Domain = 2,
    /// Integration failure or a state outside the strip it was sent to.
    Integration = 3,
    /// Invalid parameters or configuration text.
    Config = 4,
    Panic = 5,
}

/// Model parameters with their Hansen table.
pub struct SoModel {
    inner: Model,
}

/// Everything the Poincaré map needs: model, fitted tide and strip maps.
pub struct SoDynamics {
    inner: Dynamics,
}

/// Streaming capture detector.
pub struct SoDetector {
    inner: CaptureDetector,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn status_of(err: &Error) -> SoStatus {
    match err {
        Error::Domain { .. } | Error::NonConvergence { .. } | Error::SingularPoint { .. } => {
            SoStatus::Domain
        }
        Error::IntegrationFailure { .. } | Error::OutsideStrip { .. } => SoStatus::Integration,
        _ => SoStatus::Config,
    }
}

// Run `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), SoStatus>) -> SoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SoStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("panic: {message}"));
            SoStatus::Panic
        }
    }
}

fn fail(err: Error) -> SoStatus {
    set_error(&err.to_string());
    status_of(&err)
}

fn null(what: &str) -> SoStatus {
    set_error(&format!("null pointer: {what}"));
    SoStatus::NullPointer
}

unsafe fn config_from(params: *const c_char) -> Result<RunConfig, SoStatus> {
    let mut cfg = RunConfig::default();
    if !params.is_null() {
        let text = CStr::from_ptr(params).to_str().map_err(|_| {
            set_error("parameter text is not UTF-8");
            SoStatus::Config
        })?;
        cfg.apply_text(text).map_err(fail)?;
    }
    Ok(cfg)
}

/// Message of the last failed call on this thread; empty if none. Valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn spinorbit_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Build a model from `key = value` lines (NULL for the defaults).
///
/// # Safety
/// `params` must be NULL or a NUL-terminated string; `out` must be valid
/// for writing.
#[no_mangle]
pub unsafe extern "C" fn spinorbit_model_new(
    params: *const c_char,
    out: *mut *mut SoModel,
) -> SoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let model = config_from(params)?.build_model().map_err(fail)?;
        *out = Box::into_raw(Box::new(SoModel { inner: model }));
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle from [`spinorbit_model_new`], not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn spinorbit_model_free(model: *mut SoModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Mean motion `n` in rad/yr.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn spinorbit_model_mean_motion(
    model: *const SoModel,
    out: *mut f64,
) -> SoStatus {
    guard(|| {
        let (Some(m), false) = (model.as_ref(), out.is_null()) else {
            return Err(null("model or out"));
        };
        *out = m.inner.n();
        Ok(())
    })
}

/// Hansen coefficient `G_20q(e)` of the model's table.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn spinorbit_g20(model: *const SoModel, q: i32, out: *mut f64) -> SoStatus {
    guard(|| {
        let (Some(m), false) = (model.as_ref(), out.is_null()) else {
            return Err(null("model or out"));
        };
        match m.inner.table().get(q) {
            Some(g) => {
                *out = g;
                Ok(())
            }
            None => Err(fail(Error::Config(format!(
                "q = {q} outside the Hansen table"
            )))),
        }
    })
}

/// Triaxial, tidal and total angular acceleration, yr^-2, with the exact
/// tidal sum. Any output pointer may be NULL.
///
/// # Safety
/// `model` must be a live handle; non-NULL outputs must be valid for
/// writing.
#[no_mangle]
pub unsafe extern "C" fn spinorbit_accel(
    model: *const SoModel,
    theta: f64,
    theta_dot: f64,
    t: f64,
    tri: *mut f64,
    tide: *mut f64,
    total: *mut f64,
) -> SoStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null("model"))?.inner;
        let a = m.accel_tri(theta, t);
        let b = m.accel_tide_exact(theta_dot);
        for (p, v) in [(tri, a), (tide, b), (total, a + b)] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Derivative of the tidal acceleration with respect to `theta_dot`;
/// `Domain` at a kink.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn spinorbit_accel_tide_deriv(
    model: *const SoModel,
    theta_dot: f64,
    out: *mut f64,
) -> SoStatus {
    guard(|| {
        let (Some(m), false) = (model.as_ref(), out.is_null()) else {
            return Err(null("model or out"));
        };
        *out = m.inner.accel_tide_deriv(theta_dot).map_err(fail)?;
        Ok(())
    })
}

/// Build the map machinery from `key = value` lines (NULL for defaults).
/// Takes a few seconds: it fits the tide and compiles the strip maps.
///
/// # Safety
/// As for [`spinorbit_model_new`].
#[no_mangle]
pub unsafe extern "C" fn spinorbit_dynamics_new(
    params: *const c_char,
    out: *mut *mut SoDynamics,
) -> SoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let cfg = config_from(params)?;
        let model = cfg.build_model().map_err(fail)?;
        let fast = FastTide::build(&model).map_err(fail)?;
        let layout = default_layout(model.n());
        let dynamics = Dynamics::new(model, fast, layout, cfg.stepper).map_err(fail)?;
        *out = Box::into_raw(Box::new(SoDynamics { inner: dynamics }));
        Ok(())
    })
}

/// # Safety
/// `dynamics` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spinorbit_dynamics_free(dynamics: *mut SoDynamics) {
    if !dynamics.is_null() {
        drop(Box::from_raw(dynamics));
    }
}

/// Apply the Poincaré map `count` times to `(*theta, *theta_dot)` in
/// place, starting at a section time. `rk_only` forces Runge-Kutta in
/// every strip and `exact_tide` makes it use the exact tidal sum. On
/// failure the state is left as it was.
///
/// # Safety
/// `dynamics` must be a live handle; `theta` and `theta_dot` valid for
/// reading and writing.
#[no_mangle]
pub unsafe extern "C" fn spinorbit_iterate(
    dynamics: *const SoDynamics,
    rk_only: bool,
    exact_tide: bool,
    count: u64,
    theta: *mut f64,
    theta_dot: *mut f64,
) -> SoStatus {
    guard(|| {
        let d = &dynamics.as_ref().ok_or_else(|| null("dynamics"))?.inner;
        if theta.is_null() || theta_dot.is_null() {
            return Err(null("state"));
        }
        let mode = MapMode {
            method: if rk_only {
                Method::RkOnly
            } else {
                Method::Hybrid
            },
            tide: if exact_tide {
                TideEval::Exact
            } else {
                TideEval::Fast
            },
        };
        let mut prop = d.propagator(mode);
        let end = prop
            .iterate(State::new(*theta, *theta_dot, 0.0), count)
            .map_err(fail)?;
        *theta = end.theta;
        *theta_dot = end.theta_dot;
        Ok(())
    })
}

/// New capture detector. `n` is the mean motion used to normalise rates.
///
/// # Safety
/// `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn spinorbit_detector_new(
    block_len: u64,
    blocks: u64,
    eps_mean: f64,
    eps_slope: f64,
    n: f64,
    out: *mut *mut SoDetector,
) -> SoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let cfg = CaptureConfig {
            block_len: block_len as usize,
            blocks: blocks as usize,
            eps_mean,
            eps_slope,
            ..CaptureConfig::default()
        };
        let inner = CaptureDetector::new(cfg, n).map_err(fail)?;
        *out = Box::into_raw(Box::new(SoDetector { inner }));
        Ok(())
    })
}

/// # Safety
/// `detector` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spinorbit_detector_free(detector: *mut SoDetector) {
    if !detector.is_null() {
        drop(Box::from_raw(detector));
    }
}

/// Feed one `theta_dot` sample. `*captured` becomes true once capture has
/// been declared, with twice the resonance ratio in `*attractor_2p`.
///
/// # Safety
/// `detector` must be a live handle; outputs valid for writing.
#[no_mangle]
pub unsafe extern "C" fn spinorbit_detector_update(
    detector: *mut SoDetector,
    theta_dot: f64,
    captured: *mut bool,
    attractor_2p: *mut i64,
) -> SoStatus {
    guard(|| {
        let det = &mut detector.as_mut().ok_or_else(|| null("detector"))?.inner;
        if captured.is_null() || attractor_2p.is_null() {
            return Err(null("outputs"));
        }
        match det.update(theta_dot) {
            CaptureDecision::Captured { attractor_2p: a } => {
                *captured = true;
                *attractor_2p = a;
            }
            CaptureDecision::Continue => {
                *captured = false;
                *attractor_2p = 0;
            }
        }
        Ok(())
    })
}

/// Samples consumed so far.
///
/// # Safety
/// `detector` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn spinorbit_detector_samples(
    detector: *const SoDetector,
    out: *mut u64,
) -> SoStatus {
    guard(|| {
        let (Some(d), false) = (detector.as_ref(), out.is_null()) else {
            return Err(null("detector or out"));
        };
        *out = d.inner.samples();
        Ok(())
    })
}
