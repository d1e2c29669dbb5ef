//! C ABI over the convsql environment.
//!
//! An environment handle answers protocol request lines exactly like the TCP
//! service does. Strings returned to the caller must be released with
//! [`convsql_string_free`]; handles with [`convsql_env_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use convsql::config::{ConfigError, RunConfig};
use convsql::service::{Environment, PROTOCOL_VERSION};
use convsql::sql::{clause_f1, decompose_str};

/// Opaque environment handle.
pub struct ConvsqlEnv {
    inner: Environment,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvsqlStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    LoadFailed = 4,
    InvalidSql = 5,
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn guard(f: impl FnOnce() -> ConvsqlStatus) -> ConvsqlStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| {
        set_error("internal panic");
        ConvsqlStatus::Panic
    })
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, ConvsqlStatus> {
    if p.is_null() {
        set_error("null argument");
        return Err(ConvsqlStatus::NullArgument);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8");
        ConvsqlStatus::InvalidUtf8
    })
}

fn into_c(s: String) -> *mut c_char {
    CString::new(s.replace('\0', "\\u0000")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Opens an environment from a TOML run config file.
///
/// # Safety
/// `config_path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn convsql_env_open(
    config_path: *const c_char,
    out: *mut *mut ConvsqlEnv,
) -> ConvsqlStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return ConvsqlStatus::NullArgument;
        }
        *out = ptr::null_mut();
        let path = match read_str(config_path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let cfg = match RunConfig::load(Path::new(path)) {
            Ok(c) => c,
            Err(e) => {
                set_error(e.to_string());
                return ConvsqlStatus::InvalidConfig;
            }
        };
        match Environment::from_config(&cfg) {
            Ok(env) => {
                *out = Box::into_raw(Box::new(ConvsqlEnv { inner: env }));
                ConvsqlStatus::Ok
            }
            Err(e @ ConfigError::Load(_)) => {
                set_error(e.to_string());
                ConvsqlStatus::LoadFailed
            }
            Err(e) => {
                set_error(e.to_string());
                ConvsqlStatus::InvalidConfig
            }
        }
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `env` must come from [`convsql_env_open`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn convsql_env_free(env: *mut ConvsqlEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Answers one protocol request. Protocol-level failures come back as a
/// JSON error reply with status `Ok`.
///
/// # Safety
/// `env` must be a live handle, `request` NUL-terminated, `out_reply` writable.
#[no_mangle]
pub unsafe extern "C" fn convsql_env_request(
    env: *const ConvsqlEnv,
    request: *const c_char,
    out_reply: *mut *mut c_char,
) -> ConvsqlStatus {
    guard(|| {
        if env.is_null() || out_reply.is_null() {
            set_error("null argument");
            return ConvsqlStatus::NullArgument;
        }
        *out_reply = ptr::null_mut();
        let line = match read_str(request) {
            Ok(l) => l,
            Err(s) => return s,
        };
        *out_reply = into_c((*env).inner.handle_line(line));
        ConvsqlStatus::Ok
    })
}

/// Clause-level F1 between two SQL strings, without schema resolution.
///
/// # Safety
/// `pred` and `gold` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn convsql_clause_f1(
    pred: *const c_char,
    gold: *const c_char,
    out: *mut f64,
) -> ConvsqlStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return ConvsqlStatus::NullArgument;
        }
        let (p, g) = match (read_str(pred), read_str(gold)) {
            (Ok(p), Ok(g)) => (p, g),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        match (decompose_str(p, None), decompose_str(g, None)) {
            (Ok(p), Ok(g)) => {
                *out = clause_f1(&p, &g);
                ConvsqlStatus::Ok
            }
            (Err(e), _) | (_, Err(e)) => {
                set_error(e.to_string());
                ConvsqlStatus::InvalidSql
            }
        }
    })
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn convsql_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the last failing call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn convsql_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn convsql_protocol_version() -> u32 {
    PROTOCOL_VERSION
}
