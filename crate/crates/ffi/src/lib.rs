//! C ABI over the pieces of the core crate that are useful standalone:
//! bundle loading, the code-quality critic, the LoC metric, ghost-annotation
//! degradation, and verifier-output parsing.
//!
//! Conventions:
//! - Every fallible function returns an [`SgStatus`] code; `SG_STATUS_OK`
//!   is zero.
//! - Output parameters are written only on success.
//! - Strings returned through `char **` are NUL-terminated, UTF-8, owned by
//!   the caller, and must be released with [`sg_string_free`].
//! - Handles (`SgBundle`) are opaque; release with the matching `_free`.
//! - On any non-OK status, [`sg_last_error_message`] returns a
//!   thread-local, human-readable description valid until the next FFI
//!   call on the same thread.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use specgen::bundle::{load_bundle, validate_bundle, CaseBundle};
use specgen::critics::{parse_wp_output, CompileReport};
use specgen::quality::{check_power_of_10, count_loc};
use specgen::InterfaceContext;

/// Status codes returned by every fallible function in this library.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// An input string was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The input could not be parsed or analyzed; see
    /// `sg_last_error_message`.
    ParseError = 3,
    /// A file or directory was missing or unreadable.
    IoError = 4,
    /// A panic was caught at the FFI boundary; see `sg_last_error_message`.
    Internal = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let message = message.into().replace('\0', "\\0");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(message).expect("NUL stripped above");
    });
}

/// Human-readable description of the most recent failure on this thread.
/// The pointer stays valid until the next call into this library from the
/// same thread. Never NULL; empty before the first failure.
#[no_mangle]
pub extern "C" fn sg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string; never freed.
#[no_mangle]
pub extern "C" fn sg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Release a string returned by this library. NULL is accepted and ignored.
///
/// # Safety
/// `s` must be NULL or a pointer returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `ptr` must be NULL or a NUL-terminated string.
unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, SgStatus> {
    if ptr.is_null() {
        set_error("argument is NULL");
        return Err(SgStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|e| {
        set_error(format!("invalid UTF-8: {e}"));
        SgStatus::InvalidUtf8
    })
}

fn give_string(s: String, out: *mut *mut c_char) -> SgStatus {
    let c = match CString::new(s) {
        Ok(c) => c,
        Err(e) => {
            set_error(format!("output contains NUL byte: {e}"));
            return SgStatus::Internal;
        }
    };
    // SAFETY: callers guarantee `out` is a valid writable location; the
    // NULL check happened before any work.
    unsafe { *out = c.into_raw() };
    SgStatus::Ok
}

fn guard(body: impl FnOnce() -> SgStatus) -> SgStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic at FFI boundary".to_string());
            set_error(msg);
            SgStatus::Internal
        }
    }
}

/// Opaque handle to a loaded case bundle.
pub struct SgBundle {
    inner: CaseBundle,
}

/// Load a bundle from a manifest directory into a new handle.
///
/// # Safety
/// `dir` must be a NUL-terminated path; `out` must point to writable
/// storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn sg_bundle_load(dir: *const c_char, out: *mut *mut SgBundle) -> SgStatus {
    guard(|| {
        if out.is_null() {
            set_error("out is NULL");
            return SgStatus::NullArgument;
        }
        let dir = match read_str(dir) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match load_bundle(dir) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(SgBundle { inner }));
                SgStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                SgStatus::IoError
            }
        }
    })
}

/// Release a bundle handle. NULL is accepted and ignored.
///
/// # Safety
/// `bundle` must be NULL or a pointer returned by [`sg_bundle_load`], not
/// yet freed.
#[no_mangle]
pub unsafe extern "C" fn sg_bundle_free(bundle: *mut SgBundle) {
    if !bundle.is_null() {
        drop(Box::from_raw(bundle));
    }
}

/// Bundle name as a new string owned by the caller.
///
/// # Safety
/// `bundle` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_bundle_name(
    bundle: *const SgBundle,
    out: *mut *mut c_char,
) -> SgStatus {
    guard(|| {
        if bundle.is_null() || out.is_null() {
            set_error("argument is NULL");
            return SgStatus::NullArgument;
        }
        give_string((*bundle).inner.name.clone(), out)
    })
}

/// Number of specification items in the bundle.
///
/// # Safety
/// `bundle` must be NULL (returns 0) or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sg_bundle_spec_count(bundle: *const SgBundle) -> usize {
    if bundle.is_null() {
        return 0;
    }
    (*bundle).inner.specs.len()
}

/// Validate a bundle; writes the findings as a JSON array (empty when the
/// bundle is well-formed).
///
/// # Safety
/// `bundle` must be a live handle; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_bundle_validate(
    bundle: *const SgBundle,
    out_json: *mut *mut c_char,
) -> SgStatus {
    guard(|| {
        if bundle.is_null() || out_json.is_null() {
            set_error("argument is NULL");
            return SgStatus::NullArgument;
        }
        let findings = validate_bundle(&(*bundle).inner);
        match serde_json::to_string(&findings) {
            Ok(json) => give_string(json, out_json),
            Err(e) => {
                set_error(e.to_string());
                SgStatus::Internal
            }
        }
    })
}

/// Run the code-quality critic on a standalone C source string. The source
/// is treated as already compiled with zero warnings; the result is the
/// quality report serialized as JSON.
///
/// # Safety
/// `source` must be NUL-terminated; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_check_quality(
    source: *const c_char,
    out_json: *mut *mut c_char,
) -> SgStatus {
    guard(|| {
        if out_json.is_null() {
            set_error("out_json is NULL");
            return SgStatus::NullArgument;
        }
        let source = match read_str(source) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let interface = InterfaceContext {
            header_source: String::new(),
            globals_source: String::new(),
            function_signature: String::new(),
            scheduler_note: String::new(),
        };
        let compile = CompileReport {
            success: true,
            warnings: vec![],
            errors: vec![],
            tool_version: "external".to_string(),
        };
        match check_power_of_10(source, &interface, &compile) {
            Ok(report) => match serde_json::to_string(&report) {
                Ok(json) => give_string(json, out_json),
                Err(e) => {
                    set_error(e.to_string());
                    SgStatus::Internal
                }
            },
            Err(e) => {
                set_error(e.to_string());
                SgStatus::ParseError
            }
        }
    })
}

/// Effective lines of code of the named function inside `source`.
///
/// # Safety
/// `source` and `function_name` must be NUL-terminated; `out_loc` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn sg_count_loc(
    source: *const c_char,
    function_name: *const c_char,
    out_loc: *mut usize,
) -> SgStatus {
    guard(|| {
        if out_loc.is_null() {
            set_error("out_loc is NULL");
            return SgStatus::NullArgument;
        }
        let source = match read_str(source) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let name = match read_str(function_name) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match count_loc(source, name) {
            Ok(loc) => {
                *out_loc = loc;
                SgStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                SgStatus::ParseError
            }
        }
    })
}

/// Rewrite ghost declaration annotations into concrete declarations,
/// returning the transformed source.
///
/// # Safety
/// `source` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_degrade_ghosts(
    source: *const c_char,
    out: *mut *mut c_char,
) -> SgStatus {
    guard(|| {
        if out.is_null() {
            set_error("out is NULL");
            return SgStatus::NullArgument;
        }
        let source = match read_str(source) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match specgen::bundle::degrade_ghosts(source) {
            Ok(rewritten) => give_string(rewritten, out),
            Err(e) => {
                set_error(e.to_string());
                SgStatus::ParseError
            }
        }
    })
}

/// Parse verifier output into its proved/total goal counts.
///
/// # Safety
/// `log_text` must be NUL-terminated; `out_proved` and `out_total` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn sg_parse_goal_summary(
    log_text: *const c_char,
    out_proved: *mut u32,
    out_total: *mut u32,
) -> SgStatus {
    guard(|| {
        if out_proved.is_null() || out_total.is_null() {
            set_error("output pointer is NULL");
            return SgStatus::NullArgument;
        }
        let text = match read_str(log_text) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match parse_wp_output(text) {
            Ok((proved, total, _goals)) => {
                *out_proved = proved;
                *out_total = total;
                SgStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                SgStatus::ParseError
            }
        }
    })
}
