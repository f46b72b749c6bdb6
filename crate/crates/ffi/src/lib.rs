//! C ABI over `algmech`.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free` function. Every entry point returns an [`AlgmechStatus`];
//! on failure a message is available from [`algmech_last_error`] on the same
//! thread. Panics are caught at the boundary and reported as
//! `ALGMECH_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use algmech::catalog::builtin_spec;
use algmech::cli::spec::{LoadedSystem, SystemSpec};
use algmech::cli::{simulate, verify_system, VerifyOptions, ENERGY_COLUMN};
use algmech::dynamics::{synthesize_semispray_ode, synthesize_spray_ode, OdeField, Trajectory};
use algmech::mechanics::Payload;
use algmech::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlgmechStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed specification, expression or parameters.
    Spec = 3,
    Dimension = 4,
    /// Singular Hessian, morphism or transition.
    Singular = 5,
    /// Integration stopped early. The trajectory up to that
    /// point is still returned.
    Aborted = 6,
    MissingPayload = 7,
    /// Index or buffer length out of range.
    OutOfRange = 8,
    Io = 9,
    Panic = 10,
}

/// A built mechanical system.
pub struct AlgmechSystem {
    loaded: LoadedSystem,
    ode: Option<OdeField>,
}

/// An integrated trajectory. Rows are laid out as in the CSV output:
/// `t, x1..xm, y1..yr, E_L, monitors...`.
pub struct AlgmechTrajectory {
    traj: Trajectory,
    monitors: Vec<String>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> AlgmechStatus {
    match e {
        Error::Dimension { .. } | Error::Arity { .. } => AlgmechStatus::Dimension,
        Error::SingularHessian { .. } | Error::Singular { .. } | Error::SingularTransition { .. } => {
            AlgmechStatus::Singular
        }
        Error::NonFiniteState { .. } => AlgmechStatus::Aborted,
        Error::MissingPayload(_) => AlgmechStatus::MissingPayload,
        Error::Io(_) => AlgmechStatus::Io,
        _ => AlgmechStatus::Spec,
    }
}

fn fail(e: &Error) -> AlgmechStatus {
    set_error(&e.to_string());
    status_of(e)
}

fn guard<F: FnOnce() -> AlgmechStatus>(f: F) -> AlgmechStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == AlgmechStatus::Ok {
                set_error("");
            }
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            AlgmechStatus::Panic
        }
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            set_error(concat!("null pointer: ", stringify!($p)));
            return AlgmechStatus::NullPointer;
        })+
    };
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, AlgmechStatus> {
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("string is not valid UTF-8");
        AlgmechStatus::InvalidUtf8
    })
}

fn into_handle(loaded: LoadedSystem) -> Result<*mut AlgmechSystem, Error> {
    let sys = &loaded.system;
    let ode = match &sys.payload {
        None => None,
        Some(Payload::Connection(c)) => Some(synthesize_spray_ode(sys, c)),
        Some(_) => Some(synthesize_semispray_ode(sys, &sys.semispray()?)),
    };
    Ok(Box::into_raw(Box::new(AlgmechSystem { loaded, ode })))
}

/// Message for the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn algmech_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a system from a JSON specification. With `strict` nonzero,
/// unknown fields are rejected.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn algmech_system_from_json(
    json: *const c_char,
    strict: c_int,
    out: *mut *mut AlgmechSystem,
) -> AlgmechStatus {
    guard(|| {
        non_null!(json, out);
        let text = match read_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let r = SystemSpec::parse(text, strict != 0).and_then(|(spec, _)| into_handle(spec.build()?));
        match r {
            Ok(h) => {
                *out = h;
                AlgmechStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Builds a catalog system such as `"rigid_body_so3"`. `params` may be null
/// when `n_params` is zero.
///
/// # Safety
/// `id` must be a NUL-terminated string, `params` must point to `n_params`
/// doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn algmech_system_builtin(
    id: *const c_char,
    params: *const f64,
    n_params: usize,
    out: *mut *mut AlgmechSystem,
) -> AlgmechStatus {
    guard(|| {
        non_null!(id, out);
        if n_params > 0 {
            non_null!(params);
        }
        let id = match read_str(id) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let params = if n_params == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(params, n_params)
        };
        match builtin_spec(id, params).and_then(|s| into_handle(s.build()?)) {
            Ok(h) => {
                *out = h;
                AlgmechStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// # Safety
/// `sys` must come from this library and not be used afterwards. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn algmech_system_free(sys: *mut AlgmechSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Base dimension `m` and fibre dimension `r`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn algmech_system_dims(sys: *const AlgmechSystem, m: *mut usize, r: *mut usize) -> AlgmechStatus {
    guard(|| {
        non_null!(sys, m, r);
        let s = &(*sys).loaded.system;
        *m = s.m();
        *r = s.r();
        AlgmechStatus::Ok
    })
}

/// Right-hand side `(ẋ, ẏ)` of the equations of motion at `state = (x, y)`.
/// Both buffers have length `m + r`.
///
/// # Safety
/// `state` and `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn algmech_semispray_rhs(
    sys: *const AlgmechSystem,
    state: *const f64,
    out: *mut f64,
    len: usize,
) -> AlgmechStatus {
    guard(|| {
        non_null!(sys, state, out);
        let Some(ode) = &(*sys).ode else {
            return fail(&Error::MissingPayload("system has no payload".into()));
        };
        if len != ode.dim() {
            set_error(&format!("state length {len}, expected {}", ode.dim()));
            return AlgmechStatus::OutOfRange;
        }
        match ode.eval(std::slice::from_raw_parts(state, len)) {
            Ok(v) => {
                std::slice::from_raw_parts_mut(out, len).copy_from_slice(&v);
                AlgmechStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Integrates from the specification's initial state. On
/// `ALGMECH_STATUS_ABORTED` the partial trajectory is still stored in `out`.
///
/// # Safety
/// `sys` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn algmech_simulate(sys: *const AlgmechSystem, out: *mut *mut AlgmechTrajectory) -> AlgmechStatus {
    guard(|| {
        non_null!(sys, out);
        let loaded = &(*sys).loaded;
        match simulate(loaded) {
            Ok(traj) => {
                let status = match &traj.abort {
                    Some(e) => {
                        set_error(&format!("aborted: {e}"));
                        AlgmechStatus::Aborted
                    }
                    None => AlgmechStatus::Ok,
                };
                let monitors = loaded.monitors.iter().map(|m| m.name.clone()).collect();
                *out = Box::into_raw(Box::new(AlgmechTrajectory { traj, monitors }));
                status
            }
            Err(e) => fail(&e),
        }
    })
}

/// Number of rows, or 0 for a null handle.
///
/// # Safety
/// `traj` must be null or come from [`algmech_simulate`].
#[no_mangle]
pub unsafe extern "C" fn algmech_trajectory_len(traj: *const AlgmechTrajectory) -> usize {
    if traj.is_null() {
        0
    } else {
        (*traj).traj.len()
    }
}

/// Values per row: `2 + m + r` plus one per monitor. 0 for a null handle.
///
/// # Safety
/// `traj` must be null or come from [`algmech_simulate`].
#[no_mangle]
pub unsafe extern "C" fn algmech_trajectory_width(traj: *const AlgmechTrajectory) -> usize {
    if traj.is_null() {
        0
    } else {
        let t = &*traj;
        2 + t.traj.m + t.traj.r + t.monitors.len()
    }
}

/// Copies row `k` into `out`, which holds `len` doubles. `E_L` is NaN when the
/// system has no Lagrangian.
///
/// # Safety
/// `traj` must come from [`algmech_simulate`] and `out` must point to `len`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn algmech_trajectory_row(
    traj: *const AlgmechTrajectory,
    k: usize,
    out: *mut f64,
    len: usize,
) -> AlgmechStatus {
    guard(|| {
        non_null!(traj, out);
        let t = &*traj;
        let width = algmech_trajectory_width(traj);
        if k >= t.traj.len() || len != width {
            set_error(&format!("row {k} of {}, buffer {len} of {width}", t.traj.len()));
            return AlgmechStatus::OutOfRange;
        }
        let monitor = |name: &str| t.traj.monitor(name).map_or(f64::NAN, |v| v[k]);
        let mut row = Vec::with_capacity(width);
        row.push(t.traj.times[k]);
        row.extend_from_slice(&t.traj.states[k]);
        row.push(monitor(ENERGY_COLUMN));
        row.extend(t.monitors.iter().map(|n| monitor(n)));
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(&row);
        AlgmechStatus::Ok
    })
}

/// # Safety
/// `traj` must come from [`algmech_simulate`] and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn algmech_trajectory_free(traj: *mut AlgmechTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Runs the verification suite and returns the JSON report in `out_json`,
/// to be released with [`algmech_string_free`]. `samples` of 0 keeps the
/// specification's count; `tol` of 0 or less keeps the default tolerances.
/// `transition` may be null. `all_pass` receives 1 if every check passed.
///
/// # Safety
/// `sys`, `out_json` and `all_pass` must be valid; `transition` must be null
/// or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn algmech_verify_json(
    sys: *const AlgmechSystem,
    samples: usize,
    tol: f64,
    transition: *const c_char,
    out_json: *mut *mut c_char,
    all_pass: *mut c_int,
) -> AlgmechStatus {
    guard(|| {
        non_null!(sys, out_json, all_pass);
        let transition = if transition.is_null() {
            None
        } else {
            match read_str(transition) {
                Ok(t) => Some(t.to_string()),
                Err(s) => return s,
            }
        };
        let opts = VerifyOptions {
            samples: (samples > 0).then_some(samples),
            tol: (tol > 0.0).then_some(tol),
            transition,
        };
        match verify_system(&(*sys).loaded, &opts) {
            Ok(report) => {
                *all_pass = c_int::from(report.all_pass());
                *out_json = CString::new(report.to_json()).expect("no NUL in JSON").into_raw();
                AlgmechStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn algmech_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    fn last_error() -> String {
        unsafe { CStr::from_ptr(algmech_last_error()) }.to_string_lossy().into_owned()
    }

    fn builtin(id: &str) -> *mut AlgmechSystem {
        let id = CString::new(id).unwrap();
        let mut h = ptr::null_mut();
        assert_eq!(unsafe { algmech_system_builtin(id.as_ptr(), ptr::null(), 0, &mut h) }, AlgmechStatus::Ok);
        h
    }

    #[test]
    fn oscillator_rhs() {
        let h = builtin("harmonic_oscillator");
        let (mut m, mut r) = (0, 0);
        unsafe {
            assert_eq!(algmech_system_dims(h, &mut m, &mut r), AlgmechStatus::Ok);
            assert_eq!((m, r), (1, 1));
            let mut out = [0.0; 2];
            assert_eq!(algmech_semispray_rhs(h, [0.5, 2.0].as_ptr(), out.as_mut_ptr(), 2), AlgmechStatus::Ok);
            assert_eq!(out, [2.0, -0.5]);
            assert_eq!(algmech_semispray_rhs(h, [0.5].as_ptr(), out.as_mut_ptr(), 1), AlgmechStatus::OutOfRange);
            algmech_system_free(h);
        }
    }

    #[test]
    fn json_errors_carry_messages() {
        let bad = CString::new(r#"{"m": 1, "r": 1, "rho": "identity", "structure": "abelian", "payload": {"lagrangian": "y1^"}, "initial": {"x": [0], "y": [1]}}"#).unwrap();
        let mut h = ptr::null_mut();
        let s = unsafe { algmech_system_from_json(bad.as_ptr(), 1, &mut h) };
        assert_eq!(s, AlgmechStatus::Spec);
        assert!(h.is_null());
        assert!(last_error().contains("payload.lagrangian"), "{}", last_error());
        let s = unsafe { algmech_system_from_json(ptr::null(), 0, &mut h) };
        assert_eq!(s, AlgmechStatus::NullPointer);
    }

    #[test]
    fn unknown_builtin_is_spec_error() {
        let id = CString::new("double_pendulum").unwrap();
        let mut h = ptr::null_mut();
        assert_eq!(unsafe { algmech_system_builtin(id.as_ptr(), ptr::null(), 0, &mut h) }, AlgmechStatus::Spec);
    }

    #[test]
    fn simulate_and_read_rows() {
        let json = CString::new(
            r#"{"m": 1, "r": 1, "rho": "identity", "structure": "abelian",
                "payload": {"lagrangian": "y1^2/2"}, "initial": {"x": [0], "y": [2]},
                "integrate": {"method": "rk4", "dt": 0.25, "t_end": 1.0},
                "monitors": [{"name": "p", "expr": "y1"}]}"#,
        )
        .unwrap();
        let mut h = ptr::null_mut();
        let mut t = ptr::null_mut();
        unsafe {
            assert_eq!(algmech_system_from_json(json.as_ptr(), 1, &mut h), AlgmechStatus::Ok);
            assert_eq!(algmech_simulate(h, &mut t), AlgmechStatus::Ok);
            assert_eq!(algmech_trajectory_len(t), 5);
            assert_eq!(algmech_trajectory_width(t), 5);
            let mut row = [0.0; 5];
            assert_eq!(algmech_trajectory_row(t, 4, row.as_mut_ptr(), 5), AlgmechStatus::Ok);
            assert_eq!(row, [1.0, 2.0, 2.0, 2.0, 2.0]);
            assert_eq!(algmech_trajectory_row(t, 5, row.as_mut_ptr(), 5), AlgmechStatus::OutOfRange);
            algmech_trajectory_free(t);
            algmech_system_free(h);
        }
    }

    #[test]
    fn aborted_simulation_keeps_rows() {
        let json = CString::new(
            r#"{"m": 1, "r": 1, "rho": "identity", "structure": "abelian",
                "payload": {"lagrangian": "y1^2/2 + x1^3/3"}, "initial": {"x": [3], "y": [0]},
                "integrate": {"method": "rk4", "dt": 0.01, "t_end": 5.0}}"#,
        )
        .unwrap();
        let mut h = ptr::null_mut();
        let mut t = ptr::null_mut();
        unsafe {
            assert_eq!(algmech_system_from_json(json.as_ptr(), 0, &mut h), AlgmechStatus::Ok);
            assert_eq!(algmech_simulate(h, &mut t), AlgmechStatus::Aborted);
            assert!(algmech_trajectory_len(t) > 2);
            assert!(!last_error().is_empty());
            algmech_trajectory_free(t);
            algmech_system_free(h);
        }
    }

    #[test]
    fn verify_report_round_trips() {
        let h = builtin("free_particle");
        let mut s = ptr::null_mut();
        let mut pass = 0;
        let trans = CString::new("linear_scale(2)").unwrap();
        unsafe {
            assert_eq!(algmech_verify_json(h, 8, 0.0, trans.as_ptr(), &mut s, &mut pass), AlgmechStatus::Ok);
            let text = CStr::from_ptr(s).to_str().unwrap().to_string();
            algmech_string_free(s);
            algmech_system_free(h);
            assert_eq!(pass, 1);
            let report = algmech::cli::report::Report::from_json(&text).unwrap();
            assert!(report.get("transform.rho_law").is_some());
        }
    }

    #[test]
    fn free_functions_accept_null() {
        unsafe {
            algmech_system_free(ptr::null_mut());
            algmech_trajectory_free(ptr::null_mut());
            algmech_string_free(ptr::null_mut());
            assert_eq!(algmech_trajectory_len(ptr::null()), 0);
        }
    }
}
