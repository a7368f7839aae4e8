//! C ABI over the melt-pool twin.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_load`
//! functions and released with the matching `*_free`. Every fallible call
//! returns an [`LpbfStatus`]; the message of the most recent failure on the
//! calling thread is available from [`lpbf_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use lpbf_twin::cli::config::SimulateConfig;
use lpbf_twin::cli::{simulation_from_config, CommandKind};
use lpbf_twin::hopgd::Surrogate;
use lpbf_twin::solver::{extract_meltpool_dims, Simulation};
use lpbf_twin::Error;

/// Result codes. Values 2 and 3 match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpbfStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Numeric = 3,
    InvalidUtf8 = 4,
    Panic = 5,
}

/// Fitted width/depth surrogate.
pub struct LpbfSurrogate(Surrogate);

/// Time-stepping thermal simulation of one scan.
pub struct LpbfSimulation(Simulation);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(e: Error) -> LpbfStatus {
    let status = if e.is_config_error() { LpbfStatus::Config } else { LpbfStatus::Numeric };
    set_error(e.to_string());
    status
}

/// Run `f`, turning panics into `LpbfStatus::Panic`.
fn guard(f: impl FnOnce() -> LpbfStatus) -> LpbfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            LpbfStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, LpbfStatus> {
    if p.is_null() {
        set_error("null string argument".into());
        return Err(LpbfStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("string argument is not UTF-8".into());
        LpbfStatus::InvalidUtf8
    })
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! non_null {
    ($($p:expr),+) => {
        if $($p.is_null())||+ {
            set_error("null pointer argument".into());
            return LpbfStatus::NullPointer;
        }
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lpbf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy the last error message of this thread into `buf` (truncated and
/// NUL-terminated). Returns the full message length excluding the NUL, or 0
/// when there is no error.
///
/// # Safety
/// `buf` must be NULL or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn lpbf_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Forget the last error of this thread.
#[no_mangle]
pub extern "C" fn lpbf_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Run a command-line command (`"simulate"`, `"calibrate"`, ...) on a config
/// file. Artifacts land in the config's output directory.
///
/// # Safety
/// `command` and `config_path` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn lpbf_run_command(command: *const c_char, config_path: *const c_char) -> LpbfStatus {
    guard(|| {
        let name = try_status!(str_arg(command));
        let path = try_status!(str_arg(config_path));
        let Ok(kind) = CommandKind::from_name(name).ok_or(()) else {
            set_error(format!("unknown command {name:?}"));
            return LpbfStatus::Config;
        };
        match lpbf_twin::cli::run_command(kind, Path::new(path)) {
            Ok(_) => LpbfStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// Load a surrogate from its JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lpbf_surrogate_load(json: *const c_char, out: *mut *mut LpbfSurrogate) -> LpbfStatus {
    guard(|| {
        non_null!(out);
        let text = try_status!(str_arg(json));
        match Surrogate::from_json(text) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(LpbfSurrogate(s)));
                LpbfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Width and depth (m) at `q = (e, P1, P2, P3)`. `clamped` is set to 1 when
/// the query was outside the fitted ranges.
///
/// # Safety
/// `h` must come from [`lpbf_surrogate_load`]; `q` must point to 4 doubles;
/// the outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn lpbf_surrogate_predict(
    h: *const LpbfSurrogate,
    q: *const f64,
    width: *mut f64,
    depth: *mut f64,
    clamped: *mut i32,
) -> LpbfStatus {
    guard(|| {
        non_null!(h, q, width, depth, clamped);
        let q = [*q, *q.add(1), *q.add(2), *q.add(3)];
        if q.iter().any(|v| !v.is_finite()) {
            set_error("query must be finite".into());
            return LpbfStatus::Config;
        }
        let (w, d, c) = (*h).0.predict(q);
        *width = w;
        *depth = d;
        *clamped = c as i32;
        LpbfStatus::Ok
    })
}

/// # Safety
/// `h` must be NULL or come from [`lpbf_surrogate_load`] and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn lpbf_surrogate_free(h: *mut LpbfSurrogate) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Create a simulation from the JSON of a `simulate` config. Relative
/// paths resolve against `base_dir` (NULL for the working directory).
///
/// # Safety
/// `json` must be a NUL-terminated string, `base_dir` NULL or one, and `out`
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lpbf_simulation_new(
    json: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut LpbfSimulation,
) -> LpbfStatus {
    guard(|| {
        non_null!(out);
        let text = try_status!(str_arg(json));
        let base = if base_dir.is_null() { "" } else { try_status!(str_arg(base_dir)) };
        let cfg: SimulateConfig = match lpbf_twin::cli::config::parse(text) {
            Ok(c) => c,
            Err(e) => return fail(e),
        };
        match simulation_from_config(&cfg, Path::new(base)) {
            Ok(sim) => {
                *out = Box::into_raw(Box::new(LpbfSimulation(sim)));
                LpbfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Advance by up to `n` steps, stopping at the end of the scan path.
/// `done` is set to 1 once the path is finished.
///
/// # Safety
/// `h` must come from [`lpbf_simulation_new`]; `done` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lpbf_simulation_step(h: *mut LpbfSimulation, n: u64, done: *mut i32) -> LpbfStatus {
    guard(|| {
        non_null!(h, done);
        let sim = &mut (*h).0;
        for _ in 0..n {
            if sim.finished() {
                break;
            }
            if let Err(e) = sim.step() {
                return fail(e);
            }
        }
        *done = sim.finished() as i32;
        LpbfStatus::Ok
    })
}

/// Simulated time (s) and number of steps taken.
///
/// # Safety
/// `h` must come from [`lpbf_simulation_new`]; outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn lpbf_simulation_time(h: *const LpbfSimulation, time: *mut f64, steps: *mut u64) -> LpbfStatus {
    guard(|| {
        non_null!(h, time, steps);
        *time = (*h).0.state.time;
        *steps = (*h).0.state.step;
        LpbfStatus::Ok
    })
}

/// Current melt-pool width and depth (m) in the cross-section at `x` (m).
///
/// # Safety
/// `h` must come from [`lpbf_simulation_new`]; outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn lpbf_simulation_meltpool(
    h: *const LpbfSimulation,
    x: f64,
    width: *mut f64,
    depth: *mut f64,
) -> LpbfStatus {
    guard(|| {
        non_null!(h, width, depth);
        let sim = &(*h).0;
        let dims = extract_meltpool_dims(&sim.state, &sim.domain, &sim.material, x);
        *width = dims.width;
        *depth = dims.depth;
        LpbfStatus::Ok
    })
}

/// Number of grid cells; the size `lpbf_simulation_temperature` expects.
///
/// # Safety
/// `h` must come from [`lpbf_simulation_new`].
#[no_mangle]
pub unsafe extern "C" fn lpbf_simulation_cells(h: *const LpbfSimulation) -> usize {
    if h.is_null() {
        return 0;
    }
    (*h).0.domain.len()
}

/// Copy the temperature field (K, x fastest, then y, then z) into `buf`.
///
/// # Safety
/// `h` must come from [`lpbf_simulation_new`]; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lpbf_simulation_temperature(h: *const LpbfSimulation, buf: *mut f64, len: usize) -> LpbfStatus {
    guard(|| {
        non_null!(h, buf);
        let t = &(*h).0.state.temperature;
        if len < t.len() {
            set_error(format!("buffer holds {len} values, need {}", t.len()));
            return LpbfStatus::Config;
        }
        std::ptr::copy_nonoverlapping(t.as_ptr(), buf, t.len());
        LpbfStatus::Ok
    })
}

/// # Safety
/// `h` must be NULL or come from [`lpbf_simulation_new`] and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn lpbf_simulation_free(h: *mut LpbfSimulation) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}
