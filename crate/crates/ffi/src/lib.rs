//! C ABI over `collatz_sieve`.
//!
//! Every fallible function returns a [`CsStatus`]; on failure the message is
//! available from [`cs_last_error_message`] on the same thread. Searches are
//! exposed through the opaque [`CsSearch`] handle, which the caller releases
//! with [`cs_search_free`]. Strings returned by the library are released with
//! [`cs_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use collatz_sieve::coverage::{format_fraction, format_percent};
use collatz_sieve::oracle::{DEFAULT_STEP_CAP, DEFAULT_VISITED_LIMIT};
use collatz_sieve::search::{check_class, registry_below, CheckOptions};
use collatz_sieve::{
    modified_stopping_time, verify_success_record, Certificate, Checkpoint, Error, PatternClass,
    Search, SearchConfig, SuccessRecord,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// A certificate was found but a concrete member contradicts it.
    VerificationFailed = 3,
    /// No certificate exists for the class at its own modulus.
    NotFound = 4,
    /// A step cap, memory guard or overflow limit was hit.
    LimitExceeded = 5,
    Io = 6,
    Internal = 7,
}

/// Search settings; `step_cap = 0` selects the default per-class cap.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct CsSearchConfig {
    pub max_modulus: u64,
    pub filter_3smooth: bool,
    pub skip_covered: bool,
    pub join_smooth_only: bool,
    pub step_cap: u32,
    pub k_verify: u64,
    pub threads: u32,
}

/// One certified class. The `join_*` fields are zero for drop certificates.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CsRecord {
    pub modulus: u64,
    pub remainder: u64,
    pub stop_index: u32,
    pub joined: bool,
    pub join_modulus: u64,
    pub join_remainder: u64,
    pub join_index: u32,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CsStopTime {
    pub n: u64,
    pub index: u64,
    pub join_value: u64,
    pub joined_start: u64,
    pub halvings: u64,
}

/// Opaque search state.
pub struct CsSearch {
    inner: Search,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(message));
}

fn status_of(error: &Error) -> CsStatus {
    match error {
        Error::InvalidCoefficient(_)
        | Error::InvalidClass { .. }
        | Error::InvalidResidue(_)
        | Error::Config(_) => CsStatus::InvalidArgument,
        Error::VerificationFailed { .. } => CsStatus::VerificationFailed,
        Error::StepCapExceeded { .. }
        | Error::CapBreach { .. }
        | Error::Overflow(_)
        | Error::MemoryGuard(_)
        | Error::OracleCap(_) => CsStatus::LimitExceeded,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::Checkpoint(_) => CsStatus::Io,
        _ => CsStatus::Internal,
    }
}

/// Runs `body`, turning errors and panics into a status plus a message.
fn guard(body: impl FnOnce() -> Result<(), (CsStatus, String)>) -> CsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => CsStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            CsStatus::Internal
        }
    }
}

fn lib<T>(r: collatz_sieve::Result<T>) -> Result<T, (CsStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (CsStatus, String) {
    (CsStatus::NullPointer, format!("{what} is null"))
}

fn to_record(r: &SuccessRecord) -> CsRecord {
    let mut out = CsRecord {
        modulus: r.class.modulus(),
        remainder: r.class.remainder(),
        stop_index: r.stop_index,
        ..CsRecord::default()
    };
    if let Certificate::Join { class, index } = r.certificate {
        out.joined = true;
        out.join_modulus = class.modulus();
        out.join_remainder = class.remainder();
        out.join_index = index;
    }
    out
}

fn to_config(c: &CsSearchConfig) -> SearchConfig {
    SearchConfig {
        max_modulus: c.max_modulus,
        filter_3smooth: c.filter_3smooth,
        skip_covered: c.skip_covered,
        join_smooth_only: c.join_smooth_only,
        step_cap: (c.step_cap > 0).then_some(c.step_cap as usize),
        k_verify: c.k_verify,
        threads: c.threads as usize,
    }
}

unsafe fn path_arg<'a>(path: *const c_char) -> Result<&'a Path, (CsStatus, String)> {
    if path.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map(Path::new)
        .map_err(|_| (CsStatus::InvalidArgument, "path is not UTF-8".into()))
}

fn give_string(s: String, out: *mut *mut c_char) -> Result<(), (CsStatus, String)> {
    let c = CString::new(s).map_err(|e| (CsStatus::Internal, e.to_string()))?;
    unsafe { *out = c.into_raw() };
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn cs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates a fresh search, seeded with the even numbers.
///
/// # Safety
/// `config` must point to a valid config and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn cs_search_new(
    config: *const CsSearchConfig,
    out: *mut *mut CsSearch,
) -> CsStatus {
    guard(|| {
        let config = config.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = lib(Search::new(to_config(config)))?;
        *out = Box::into_raw(Box::new(CsSearch { inner }));
        Ok(())
    })
}

/// Restores a search from a checkpoint file and sets its target to
/// `config.max_modulus`. The other settings must match the checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string; `config` and `out` as for
/// [`cs_search_new`].
#[no_mangle]
pub unsafe extern "C" fn cs_search_resume(
    path: *const c_char,
    config: *const CsSearchConfig,
    out: *mut *mut CsSearch,
) -> CsStatus {
    guard(|| {
        let path = path_arg(path)?;
        let config = config.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let config = to_config(config);
        let saved = lib(Checkpoint::load(path))?;
        if !saved.config.compatible_with(&config) {
            return Err((
                CsStatus::InvalidArgument,
                "checkpoint was written with different search settings".into(),
            ));
        }
        let inner = lib(saved
            .resume_state()
            .and_then(|state| Search::resume(config, state)))?;
        *out = Box::into_raw(Box::new(CsSearch { inner }));
        Ok(())
    })
}

/// Processes every modulus up to the configured maximum.
///
/// # Safety
/// `search` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn cs_search_run(search: *mut CsSearch) -> CsStatus {
    guard(|| {
        let search = search.as_mut().ok_or_else(|| null("search"))?;
        lib(search.inner.run(&mut ()))?;
        Ok(())
    })
}

/// Writes the current state as a checkpoint file (atomically).
///
/// # Safety
/// `search` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cs_search_save(search: *const CsSearch, path: *const c_char) -> CsStatus {
    guard(|| {
        let search = search.as_ref().ok_or_else(|| null("search"))?;
        let path = path_arg(path)?;
        lib(Checkpoint::capture(&search.inner).save(path))
    })
}

/// Number of emitted records; 0 for a null handle.
///
/// # Safety
/// `search` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cs_search_record_count(search: *const CsSearch) -> usize {
    search.as_ref().map_or(0, |s| s.inner.records().len())
}

/// Copies record `index` (in emission order) to `out`.
///
/// # Safety
/// `search` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_search_record(
    search: *const CsSearch,
    index: usize,
    out: *mut CsRecord,
) -> CsStatus {
    guard(|| {
        let search = search.as_ref().ok_or_else(|| null("search"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let record = search.inner.records().get(index).ok_or_else(|| {
            (
                CsStatus::InvalidArgument,
                format!("record index {index} out of range"),
            )
        })?;
        *out = to_record(record);
        Ok(())
    })
}

/// Covered density as an exact fraction `"p/q"`; free with [`cs_string_free`].
///
/// # Safety
/// `search` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_search_density(
    search: *const CsSearch,
    out: *mut *mut c_char,
) -> CsStatus {
    guard(|| {
        let search = search.as_ref().ok_or_else(|| null("search"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        give_string(format_fraction(search.inner.ledger().density()), out)
    })
}

/// Covered density as a percentage with `places` decimals, rounded half up.
///
/// # Safety
/// As for [`cs_search_density`].
#[no_mangle]
pub unsafe extern "C" fn cs_search_density_percent(
    search: *const CsSearch,
    places: u32,
    out: *mut *mut c_char,
) -> CsStatus {
    guard(|| {
        let search = search.as_ref().ok_or_else(|| null("search"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        give_string(format_percent(search.inner.ledger().density(), places), out)
    })
}

/// Releases a search handle. Null is ignored.
///
/// # Safety
/// `search` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn cs_search_free(search: *mut CsSearch) {
    if !search.is_null() {
        drop(Box::from_raw(search));
    }
}

/// Certifies `b·k − c` against every class of smaller modulus and checks the
/// certificate on the members `k = 1..=k_max`.
///
/// Returns `NotFound` when no certificate exists and `VerificationFailed`
/// when a member contradicts it; `out` (optional) receives the certificate.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn cs_verify_class(
    b: u64,
    c: u64,
    k_max: u64,
    out: *mut CsRecord,
) -> CsStatus {
    guard(|| {
        let class = lib(PatternClass::new(b, c))?;
        let options = CheckOptions::default();
        let registry = lib(registry_below(b, &options))?;
        let record = lib(check_class(class, &registry, &options))?
            .record
            .ok_or_else(|| {
                (
                    CsStatus::NotFound,
                    format!("{class}: no certificate at modulus {b}"),
                )
            })?;
        if let Some(out) = out.as_mut() {
            *out = to_record(&record);
        }
        let report = lib(verify_success_record(&record, k_max))?;
        match report.first_violation {
            None => Ok(()),
            Some(k) => Err((
                CsStatus::VerificationFailed,
                format!("{record}: fails at k = {k}"),
            )),
        }
    })
}

/// Modified stopping time of `n` against the trajectories of `2..n`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_modified_stopping_time(n: u64, out: *mut CsStopTime) -> CsStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = lib(modified_stopping_time(
            n,
            DEFAULT_VISITED_LIMIT,
            DEFAULT_STEP_CAP,
        ))?;
        *out = CsStopTime {
            n: r.n,
            index: r.modified_stop_index,
            join_value: r.join_value,
            joined_start: r.joined_start,
            halvings: r.divisions_by_2,
        };
        Ok(())
    })
}
