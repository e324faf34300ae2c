//! C ABI over the nuggetindex engine.
//!
//! Handles are opaque. Every call returns an [`NiStatus`]; on failure the
//! message is available from [`ni_last_error`] on the same thread. Strings
//! returned through out-parameters are UTF-8 JSON owned by the caller and
//! must be released with [`ni_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use nuggetindex::canonicalize::{AliasTable, Schema};
use nuggetindex::config::Config;
use nuggetindex::dates::Day;
use nuggetindex::engine::{Engine, EngineOptions};
use nuggetindex::extraction::Document;
use nuggetindex::governance::ReviewDecision;
use nuggetindex::model::{NuggetId, View};
use nuggetindex::retrieval::Query;
use nuggetindex::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NiStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidInput = 2,
    SchemaMissing = 3,
    NotFound = 4,
    Conflict = 5,
    Io = 6,
    Internal = 7,
}

/// Opaque engine handle.
pub struct NiEngine {
    engine: Engine,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> NiStatus {
    match e {
        Error::InvalidInput(_) | Error::Json(_) | Error::Config(_) | Error::DegenerateInterval(_) | Error::KeyUnavailable(_) | Error::UnsupportedMode => {
            NiStatus::InvalidInput
        }
        Error::SchemaMissing(_) => NiStatus::SchemaMissing,
        Error::NotFound(_) => NiStatus::NotFound,
        Error::NoOpenReview(_) => NiStatus::Conflict,
        Error::Io(_) | Error::Storage(_) => NiStatus::Io,
        Error::Transport { .. } => NiStatus::Internal,
    }
}

enum Failure {
    Null(&'static str),
    Engine(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Engine(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Engine(Error::Json(e))
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NiStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(&format!("{what} must not be null"));
            NiStatus::NullArgument
        }
        Ok(Err(Failure::Engine(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            NiStatus::Internal
        }
    }
}

/// # Safety
/// `p` is null or a valid NUL-terminated string.
unsafe fn opt_str<'a>(p: *const c_char) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| Failure::Engine(Error::InvalidInput("argument is not valid UTF-8".into())))
}

/// # Safety
/// `p` is null or a valid NUL-terminated string.
unsafe fn req_str<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    opt_str(p)?.ok_or(Failure::Null(what))
}

/// # Safety
/// `h` is null or a handle from `ni_engine_open*` that was not freed.
unsafe fn engine<'a>(h: *const NiEngine) -> Result<&'a Engine, Failure> {
    h.as_ref().map(|h| &h.engine).ok_or(Failure::Null("engine"))
}

/// # Safety
/// `out` is null or valid for writes.
unsafe fn put_json(out: *mut *mut c_char, value: &impl serde::Serialize) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    let s = CString::new(serde_json::to_string(value)?).map_err(|_| Failure::Engine(Error::InvalidInput("output contains NUL".into())))?;
    *out = s.into_raw();
    Ok(())
}

/// Opens an engine from a TOML config file. A null path gives an empty
/// in-memory engine with no schema.
///
/// # Safety
/// `config_path` is null or a valid string; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ni_engine_open(config_path: *const c_char, out: *mut *mut NiEngine) -> NiStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let config = match opt_str(config_path)? {
            Some(p) => Config::load(Path::new(p))?,
            None => Config::default(),
        };
        let engine = Engine::open(&config)?;
        *out = Box::into_raw(Box::new(NiEngine { engine }));
        Ok(())
    })
}

/// Opens an in-memory engine with a schema (JSON array) and optional
/// alias table (JSON object).
///
/// # Safety
/// `schema_json` is a valid string; `aliases_json` is null or a valid
/// string; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ni_engine_open_in_memory(schema_json: *const c_char, aliases_json: *const c_char, out: *mut *mut NiEngine) -> NiStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let schema = Schema::from_json(req_str(schema_json, "schema_json")?)?;
        let aliases = match opt_str(aliases_json)? {
            Some(a) => AliasTable::from_json(a)?,
            None => AliasTable::default(),
        };
        let engine = Engine::in_memory(EngineOptions::default(), Some(schema), aliases);
        *out = Box::into_raw(Box::new(NiEngine { engine }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `h` is null or a live handle; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ni_engine_free(h: *mut NiEngine) {
    if !h.is_null() {
        let boxed = Box::from_raw(h);
        if let Err(e) = boxed.engine.flush() {
            set_error(&format!("flush on close failed: {e}"));
        }
    }
}

/// Ingests a JSON array of documents; writes the summary JSON to
/// `out_json`.
///
/// # Safety
/// `h` is a live handle; `docs_json` is a valid string; `out_json` is
/// null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ni_ingest(h: *const NiEngine, docs_json: *const c_char, out_json: *mut *mut c_char) -> NiStatus {
    guard(|| {
        let engine = engine(h)?;
        let docs: Vec<Document> = serde_json::from_str(req_str(docs_json, "docs_json")?)?;
        let summary = engine.ingest(docs)?;
        if out_json.is_null() {
            return Ok(());
        }
        put_json(out_json, &summary)
    })
}

#[derive(serde::Serialize)]
struct QueryOutput {
    #[serde(flatten)]
    result: nuggetindex::retrieval::RetrievalResult,
    context: String,
}

/// Retrieves up to `k` nuggets valid at `at` (YYYY-MM-DD). `view` is
/// "active", "active_plus_contested" or null for active. Writes the
/// result and its context block as JSON to `out_json`.
///
/// # Safety
/// `h` is a live handle; `text` and `at` are valid strings; `view` is
/// null or a valid string; `out_json` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ni_query(h: *const NiEngine, text: *const c_char, at: *const c_char, view: *const c_char, k: usize, out_json: *mut *mut c_char) -> NiStatus {
    guard(|| {
        let engine = engine(h)?;
        let at: Day = req_str(at, "at")?.parse()?;
        let view: View = opt_str(view)?.map(str::parse).transpose()?.unwrap_or_default();
        let query = Query::new(req_str(text, "text")?, at).view(view).k(k);
        let result = engine.retrieve(&query)?;
        let context = engine.format_context(&result);
        put_json(out_json, &QueryOutput { result, context })
    })
}

/// Writes the full record of a nugget (32 hex digit id) as JSON.
///
/// # Safety
/// `h` is a live handle; `id` is a valid string; `out_json` is valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn ni_get_nugget(h: *const NiEngine, id: *const c_char, out_json: *mut *mut c_char) -> NiStatus {
    guard(|| {
        let engine = engine(h)?;
        let id: NuggetId = req_str(id, "id")?.parse()?;
        let record = engine.with_index(|ix| ix.get(id).cloned()).ok_or(Error::NotFound(id))?;
        put_json(out_json, &record)
    })
}

/// Open review items, oldest first, as JSON.
///
/// # Safety
/// `h` is a live handle; `out_json` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ni_open_reviews(h: *const NiEngine, limit: usize, out_json: *mut *mut c_char) -> NiStatus {
    guard(|| {
        let engine = engine(h)?;
        put_json(out_json, &engine.open_reviews(limit))
    })
}

/// Applies a reviewer decision, `{"action": ..., "winner_id"?: ...}`.
/// Returns `Conflict` when the nugget has no open review item.
///
/// # Safety
/// `h` is a live handle; `id` and `decision_json` are valid strings;
/// `note` is null or a valid string; `out_json` is null or valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn ni_decide(h: *const NiEngine, id: *const c_char, decision_json: *const c_char, note: *const c_char, out_json: *mut *mut c_char) -> NiStatus {
    guard(|| {
        let engine = engine(h)?;
        let id: NuggetId = req_str(id, "id")?.parse()?;
        let decision: ReviewDecision = serde_json::from_str(req_str(decision_json, "decision_json")?)?;
        let report = engine.apply_review_decision(id, &decision, opt_str(note)?, "ffi")?;
        if out_json.is_null() {
            return Ok(());
        }
        put_json(out_json, &report)
    })
}

/// Record counts by status, open reviews and store size as JSON.
///
/// # Safety
/// `h` is a live handle; `out_json` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ni_stats(h: *const NiEngine, out_json: *mut *mut c_char) -> NiStatus {
    guard(|| put_json(out_json, &engine(h)?.stats()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` is null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ni_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failure on this thread, or null. Valid until the
/// next call on this thread.
#[no_mangle]
pub extern "C" fn ni_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}
