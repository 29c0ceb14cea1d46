//! C ABI over the engine.
//!
//! Objects cross the boundary as opaque handles owned by the caller and
//! released with the matching `*_free`. Every entry point returns an
//! [`EisStatus`]; on failure the message is kept per thread and read with
//! [`eis_last_error`]. Strings returned through out-parameters are JSON
//! documents carrying `"format": 1` and must be released with
//! [`eis_string_free`]. Panics never unwind into C; they become
//! `EIS_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use eisdist::config::EngineConfig;
use eisdist::eisenstein::{parametrize, FormalEisensteinClass, ParamPath};
use eisdist::json::{
    class_document, envelope, parse_class, parse_class_document, parse_schwartz, parse_schwartz_document,
    parse_subgroup, schwartz_document, to_text,
};
use eisdist::schwartz::SchwartzFunction;
use eisdist::selftest::{self, SelftestOptions};
use eisdist::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EisStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Malformed = 3,
    Dimension = 4,
    ZeroInput = 5,
    NonCoprimeModuli = 6,
    Singular = 7,
    NotSimilitude = 8,
    NonUnit = 9,
    Inadmissible = 10,
    ModulusMismatch = 11,
    NotContained = 12,
    NotInvariant = 13,
    LevelBound = 14,
    Precondition = 15,
    /// The selftest ran and some criterion failed.
    Failed = 16,
    Internal = 17,
}

impl From<&Error> for EisStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Malformed(_) => EisStatus::Malformed,
            Error::Dimension(_) => EisStatus::Dimension,
            Error::ZeroInput => EisStatus::ZeroInput,
            Error::NonCoprimeModuli(..) => EisStatus::NonCoprimeModuli,
            Error::Singular => EisStatus::Singular,
            Error::NotSimilitude(_) => EisStatus::NotSimilitude,
            Error::NonUnit(_) => EisStatus::NonUnit,
            Error::Inadmissible(_) => EisStatus::Inadmissible,
            Error::ModulusMismatch(_) => EisStatus::ModulusMismatch,
            Error::NotContained(_) => EisStatus::NotContained,
            Error::NotInvariant(_) => EisStatus::NotInvariant,
            Error::LevelBound { .. } => EisStatus::LevelBound,
            Error::Precondition(_) => EisStatus::Precondition,
        }
    }
}

/// Engine configuration handle.
pub struct EisConfig(EngineConfig);

/// Formal Eisenstein class handle.
pub struct EisClass(FormalEisensteinClass);

/// Schwartz function handle.
pub struct EisSchwartz(SchwartzFunction);

/// Route selector for [`eis_parametrize`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EisPath {
    Canonical = 0,
    Orbit = 1,
    Stabilizer = 2,
}

impl From<EisPath> for ParamPath {
    fn from(p: EisPath) -> Self {
        match p {
            EisPath::Canonical => ParamPath::Canonical,
            EisPath::Orbit => ParamPath::Orbit,
            EisPath::Stabilizer => ParamPath::Stabilizer,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(EisStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(EisStatus::from(&e), e.to_string())
    }
}

type FfiResult<T> = std::result::Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> EisStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EisStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            EisStatus::Internal
        }
    }
}

unsafe fn text<'a>(s: *const c_char, what: &str) -> FfiResult<&'a str> {
    if s.is_null() {
        return Err(Failure(EisStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(s).to_str().map_err(|_| Failure(EisStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(h: *const T, what: &str) -> FfiResult<&'a T> {
    h.as_ref().ok_or_else(|| Failure(EisStatus::NullArgument, format!("{what} is null")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> FfiResult<()> {
    if out.is_null() {
        return Err(Failure(EisStatus::NullArgument, "output pointer is null".into()));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> FfiResult<()> {
    if out.is_null() {
        return Err(Failure(EisStatus::NullArgument, "output pointer is null".into()));
    }
    *out = CString::new(s).map_err(|_| Failure(EisStatus::Internal, "nul byte in output".into()))?.into_raw();
    Ok(())
}

/// Message of the last failure on this thread, or null. Valid until the next
/// call into the library from the same thread.
#[no_mangle]
pub extern "C" fn eis_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` is null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn eis_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn eis_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default configuration (genus 1, c = 2, p = 5).
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn eis_config_default(out: *mut *mut EisConfig) -> EisStatus {
    guard(|| put(out, EisConfig(EngineConfig::default())))
}

/// Defaults overlaid with a JSON object; keys as in `ENGINE_CONFIG`.
///
/// # Safety
/// `json` is a nul-terminated string; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn eis_config_from_json(json: *const c_char, out: *mut *mut EisConfig) -> EisStatus {
    guard(|| {
        let cfg = EngineConfig::from_json(text(json, "json")?)?;
        put(out, EisConfig(cfg))
    })
}

/// # Safety
/// `cfg` is null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn eis_config_free(cfg: *mut EisConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Parses a Schwartz function: a JSON document or the command-line shorthand
/// (`basis:1,0@3`, `annulus:1,3`, `ch:...`).
///
/// # Safety
/// Pointers must be valid; `input` nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn eis_schwartz_parse(
    cfg: *const EisConfig,
    input: *const c_char,
    out: *mut *mut EisSchwartz,
) -> EisStatus {
    guard(|| {
        let cfg = &handle(cfg, "config")?.0;
        let s = text(input, "input")?;
        let f = if s.trim_start().starts_with('{') { parse_schwartz_document(s)? } else { parse_schwartz(s, cfg.genus)? };
        put(out, EisSchwartz(f))
    })
}

/// # Safety
/// `f` is a live handle; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn eis_schwartz_to_json(f: *const EisSchwartz, out: *mut *mut c_char) -> EisStatus {
    guard(|| {
        let doc = schwartz_document(&handle(f, "function")?.0)?;
        put_string(out, to_text(&doc))
    })
}

/// # Safety
/// `f` is null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn eis_schwartz_free(f: *mut EisSchwartz) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Parses a class: a JSON document or shorthand such as `3*eps:1,0@9 + eps:0,1@9`.
/// `weight` is used only by the shorthand.
///
/// # Safety
/// Pointers must be valid; `input` nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn eis_class_parse(input: *const c_char, weight: u32, out: *mut *mut EisClass) -> EisStatus {
    guard(|| {
        let s = text(input, "input")?;
        let x = if s.trim_start().starts_with('{') { parse_class_document(s)? } else { parse_class(s, weight)? };
        put(out, EisClass(x))
    })
}

/// # Safety
/// `x` is a live handle; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn eis_class_to_json(x: *const EisClass, out: *mut *mut c_char) -> EisStatus {
    guard(|| {
        let doc = class_document(&handle(x, "class")?.0)?;
        put_string(out, to_text(&doc))
    })
}

/// # Safety
/// Handles must be live; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn eis_class_normal_form(
    cfg: *const EisConfig,
    x: *const EisClass,
    out: *mut *mut EisClass,
) -> EisStatus {
    guard(|| {
        let nf = handle(x, "class")?.0.normal_form(&handle(cfg, "config")?.0)?;
        put(out, EisClass(nf))
    })
}

/// Writes 1 to `out` when the classes agree in the colimit, else 0.
///
/// # Safety
/// Handles must be live; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn eis_class_same(
    cfg: *const EisConfig,
    a: *const EisClass,
    b: *const EisClass,
    out: *mut i32,
) -> EisStatus {
    guard(|| {
        let same = handle(a, "class")?.0.same_class(&handle(b, "class")?.0, &handle(cfg, "config")?.0)?;
        if out.is_null() {
            return Err(Failure(EisStatus::NullArgument, "output pointer is null".into()));
        }
        *out = same as i32;
        Ok(())
    })
}

/// # Safety
/// `x` is null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn eis_class_free(x: *mut EisClass) {
    if !x.is_null() {
        drop(Box::from_raw(x));
    }
}

/// The class attached to a `K`-invariant function, normalized. `group` uses
/// the subgroup shorthand (`K3@9`, `full@9`, `stab:1,0@3 in K3@9`) or JSON.
///
/// # Safety
/// Handles must be live; `group` nul-terminated; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn eis_parametrize(
    cfg: *const EisConfig,
    phi: *const EisSchwartz,
    weight: u32,
    group: *const c_char,
    path: EisPath,
    out: *mut *mut EisClass,
) -> EisStatus {
    guard(|| {
        let cfg = &handle(cfg, "config")?.0;
        let phi = &handle(phi, "function")?.0;
        let k = parse_subgroup(text(group, "group")?, cfg.genus)?;
        let x = parametrize(phi, weight, &k, path.into(), cfg)?.normal_form(cfg)?;
        put(out, EisClass(x))
    })
}

/// Runs the acceptance criteria and writes the report as JSON. `levels` may
/// be null to use the default level sets. Returns `EIS_STATUS_FAILED` (with
/// the report still written) when a criterion fails.
///
/// # Safety
/// `cfg` is live; `levels` is null or points to `n_levels` values; `out`
/// must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn eis_selftest(
    cfg: *const EisConfig,
    levels: *const u64,
    n_levels: usize,
    out: *mut *mut c_char,
) -> EisStatus {
    let mut passed = true;
    let status = guard(|| {
        let mut opts = SelftestOptions::new(handle(cfg, "config")?.0.clone());
        if !levels.is_null() {
            opts.levels = Some(std::slice::from_raw_parts(levels, n_levels).to_vec());
        }
        let report = selftest::run(&opts)?;
        passed = report.passed();
        let doc = envelope("selftest", &serde_json::json!({ "report": report, "passed": passed }))?;
        put_string(out, to_text(&doc))
    });
    if status == EisStatus::Ok && !passed {
        set_error("selftest: a criterion failed".into());
        return EisStatus::Failed;
    }
    status
}
