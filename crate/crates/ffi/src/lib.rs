//! C interface. Every call returns a [`TgStatus`]; on failure the message is
//! kept per thread and read back with [`tg_last_error`]. Objects cross the
//! boundary as opaque pointers owned by the caller and released with the
//! matching `_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use toric_gauge::cli::{run, RunOutput};
use toric_gauge::config::{Experiment, RunConfig};
use toric_gauge::decode::{failure_rate_experiment, Decoder};
use toric_gauge::lattice::{Spacetime3D, TimeBoundary, Torus2D};
use toric_gauge::noise::NoiseParams;
use toric_gauge::realmeas::coherent_error_magnitude;
use toric_gauge::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Budget = 4,
    Io = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Parsed run configuration.
pub struct TgConfig(RunConfig);

/// Tables produced by one experiment.
pub struct TgResult(RunOutput);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: TgStatus, msg: impl Into<String>) -> TgStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
    status
}

fn from_error(e: Error) -> TgStatus {
    let status = match e {
        Error::Config { .. } => TgStatus::Config,
        Error::Budget { .. } | Error::Resource(_) => TgStatus::Budget,
        Error::Io(_) => TgStatus::Io,
        _ => TgStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> TgStatus) -> TgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(TgStatus::Panic, "internal panic"),
    }
}

unsafe fn c_str<'a>(p: *const c_char) -> Result<&'a str, TgStatus> {
    if p.is_null() {
        return Err(fail(TgStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(TgStatus::InvalidArgument, "string is not UTF-8"))
}

/// Copies `s` plus a NUL into `buf`. `needed` (if non-null) receives the full size including the NUL.
unsafe fn copy_out(s: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> TgStatus {
    if !needed.is_null() {
        *needed = s.len() + 1;
    }
    if buf.is_null() || len < s.len() + 1 {
        return fail(TgStatus::BufferTooSmall, format!("need {} bytes", s.len() + 1));
    }
    ptr::copy_nonoverlapping(s.as_ptr(), buf as *mut u8, s.len());
    *buf.add(s.len()) = 0;
    TgStatus::Ok
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last failed call on this thread.
///
/// # Safety
/// `buf` must point to `len` writable bytes or be null; `needed` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn tg_last_error(buf: *mut c_char, len: usize, needed: *mut usize) -> TgStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    copy_out(&msg, buf, len, needed)
}

/// Parses configuration text. An empty string gives the defaults.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tg_config_parse(text: *const c_char, out: *mut *mut TgConfig) -> TgStatus {
    guard(|| {
        if out.is_null() {
            return fail(TgStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        let text = match c_str(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match RunConfig::parse(text) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(TgConfig(c)));
                TgStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Overrides the master seed.
///
/// # Safety
/// `cfg` must come from [`tg_config_parse`].
#[no_mangle]
pub unsafe extern "C" fn tg_config_set_seed(cfg: *mut TgConfig, seed: u64) -> TgStatus {
    match cfg.as_mut() {
        Some(c) => {
            c.0.seed = seed;
            TgStatus::Ok
        }
        None => fail(TgStatus::NullPointer, "null config"),
    }
}

/// Overrides the number of trials per point.
///
/// # Safety
/// `cfg` must come from [`tg_config_parse`].
#[no_mangle]
pub unsafe extern "C" fn tg_config_set_trials(cfg: *mut TgConfig, trials: usize) -> TgStatus {
    match cfg.as_mut() {
        Some(c) => {
            c.0.trials = trials;
            TgStatus::Ok
        }
        None => fail(TgStatus::NullPointer, "null config"),
    }
}

/// Canonical text of a configuration.
///
/// # Safety
/// `cfg` must come from [`tg_config_parse`]; see [`tg_last_error`] for the buffer contract.
#[no_mangle]
pub unsafe extern "C" fn tg_config_text(cfg: *const TgConfig, buf: *mut c_char, len: usize, needed: *mut usize) -> TgStatus {
    match cfg.as_ref() {
        Some(c) => copy_out(&c.0.to_text(), buf, len, needed),
        None => fail(TgStatus::NullPointer, "null config"),
    }
}

/// # Safety
/// `cfg` must come from [`tg_config_parse`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn tg_config_free(cfg: *mut TgConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs an experiment by name: `validate`, `sample`, `wilson`, `decode`,
/// `phase-scan`, `fidelity-scan` or `realmeas`.
///
/// # Safety
/// `cfg` must come from [`tg_config_parse`], `experiment` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tg_run(cfg: *const TgConfig, experiment: *const c_char, out: *mut *mut TgResult) -> TgStatus {
    guard(|| {
        if out.is_null() {
            return fail(TgStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        let Some(cfg) = cfg.as_ref() else {
            return fail(TgStatus::NullPointer, "null config");
        };
        let name = match c_str(experiment) {
            Ok(n) => n,
            Err(s) => return s,
        };
        let Some(kind) = Experiment::parse(name) else {
            return fail(TgStatus::InvalidArgument, format!("unknown experiment `{name}`"));
        };
        match run(kind, &cfg.0) {
            Ok(r) => {
                *out = Box::into_raw(Box::new(TgResult(r)));
                TgStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// 1 if every check of a `validate` run passed (always 1 for other experiments), else 0.
///
/// # Safety
/// `res` must come from [`tg_run`].
#[no_mangle]
pub unsafe extern "C" fn tg_result_ok(res: *const TgResult) -> i32 {
    res.as_ref().map_or(0, |r| r.0.ok as i32)
}

/// # Safety
/// `res` must come from [`tg_run`].
#[no_mangle]
pub unsafe extern "C" fn tg_result_table_count(res: *const TgResult) -> usize {
    res.as_ref().map_or(0, |r| r.0.tables.len())
}

/// File name of table `index`.
///
/// # Safety
/// `res` must come from [`tg_run`]; see [`tg_last_error`] for the buffer contract.
#[no_mangle]
pub unsafe extern "C" fn tg_result_table_name(
    res: *const TgResult,
    index: usize,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> TgStatus {
    match res.as_ref().map(|r| r.0.tables.get(index)) {
        None => fail(TgStatus::NullPointer, "null result"),
        Some(None) => fail(TgStatus::InvalidArgument, format!("no table {index}")),
        Some(Some(t)) => copy_out(&t.name, buf, len, needed),
    }
}

/// CSV text of table `index`, header included.
///
/// # Safety
/// `res` must come from [`tg_run`]; see [`tg_last_error`] for the buffer contract.
#[no_mangle]
pub unsafe extern "C" fn tg_result_table_csv(
    res: *const TgResult,
    index: usize,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> TgStatus {
    match res.as_ref().map(|r| r.0.tables.get(index)) {
        None => fail(TgStatus::NullPointer, "null result"),
        Some(None) => fail(TgStatus::InvalidArgument, format!("no table {index}")),
        Some(Some(t)) => copy_out(&t.to_csv(), buf, len, needed),
    }
}

/// # Safety
/// `res` must come from [`tg_run`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn tg_result_free(res: *mut TgResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Logical failure rate on a `d`×`d` torus over `t_steps` rounds with an open time boundary.
/// `decoder` is 0 for maximum likelihood, 1 for matching. Pass `INFINITY` for a perfect preparation.
///
/// # Safety
/// `rate` and `stderr` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn tg_failure_rate(
    d: usize,
    t_steps: usize,
    beta0: f64,
    beta: f64,
    k: f64,
    decoder: i32,
    trials: usize,
    seed: u64,
    rate: *mut f64,
    stderr: *mut f64,
) -> TgStatus {
    guard(|| {
        if rate.is_null() || stderr.is_null() {
            return fail(TgStatus::NullPointer, "null output pointer");
        }
        let decoder = match decoder {
            0 => Decoder::MaxLikelihood,
            1 => Decoder::Matching,
            _ => return fail(TgStatus::InvalidArgument, format!("unknown decoder {decoder}")),
        };
        let res = Torus2D::new(d)
            .and_then(|t| Spacetime3D::new(t, t_steps, TimeBoundary::Open))
            .and_then(|st| Ok((st, NoiseParams::new(beta0, beta, k)?)))
            .and_then(|(st, p)| failure_rate_experiment(&st, &p, decoder, trials, seed));
        match res {
            Ok(s) => {
                *rate = s.rate.mean;
                *stderr = s.rate.stderr;
                TgStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Distance of the realistic readout at angle `t` from the nearest ideal projector, maximised over outcomes.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tg_coherent_error_magnitude(t: f64, out: *mut f64) -> TgStatus {
    guard(|| {
        if out.is_null() {
            return fail(TgStatus::NullPointer, "null output pointer");
        }
        match coherent_error_magnitude(t) {
            Ok(v) => {
                *out = v;
                TgStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}
