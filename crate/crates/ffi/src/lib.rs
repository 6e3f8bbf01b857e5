//! C ABI for the flowstack engine.
//!
//! Handles are opaque pointers owned by the caller and released with the
//! matching `*_free` function. Every fallible call returns an [`FsStatus`];
//! on failure a message is available from [`fs_last_error`] on the same
//! thread. Strings returned through `out` parameters are NUL-terminated
//! UTF-8 JSON and must be released with [`fs_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use flowstack::assistant::{load_flowbook, EngineOptions};
use flowstack::{validate_flowbook, Assistant, Engine, Tracker};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The assistant directory could not be read or parsed.
    LoadFailed = 3,
    /// The domain loaded but failed validation.
    InvalidDomain = 4,
    /// A result could not be serialized.
    Serialization = 5,
    /// The engine panicked; the handle involved should be freed.
    Panic = 6,
}

/// A loaded assistant and its engine. Shareable across threads for
/// read-only calls; sessions created from it stay valid after it is freed.
pub struct FsAssistant {
    assistant: Assistant,
    engine: Engine,
}

/// One conversation. Not thread-safe: use a session from one thread at a
/// time.
pub struct FsSession {
    engine: Engine,
    tracker: Tracker,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let message = message.into().replace('\0', " ");
    let message = CString::new(message).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(message));
}

struct Failure(FsStatus, String);

impl Failure {
    fn new(status: FsStatus, message: impl Into<String>) -> Self {
        Self(status, message.into())
    }
}

/// Runs `f`, converting failures and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            FsStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {message}"));
            FsStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(Failure::new(FsStatus::NullPointer, format!("`{name}` is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Failure::new(FsStatus::InvalidUtf8, format!("`{name}` is not valid UTF-8")))
}

unsafe fn write_out<T>(out: *mut *mut T, value: *mut T) {
    *out = value;
}

fn check_out<T>(out: *mut *mut T) -> Result<(), Failure> {
    if out.is_null() {
        Err(Failure::new(FsStatus::NullPointer, "`out` is null"))
    } else {
        Ok(())
    }
}

fn to_c_json(value: &impl serde::Serialize) -> Result<*mut c_char, Failure> {
    let json = serde_json::to_string(value).map_err(|e| Failure::new(FsStatus::Serialization, e.to_string()))?;
    CString::new(json)
        .map(CString::into_raw)
        .map_err(|e| Failure::new(FsStatus::Serialization, e.to_string()))
}

/// Loads the assistant in directory `dir`. With `deterministic`, the first
/// response variant is always used, rephrasing is off and timestamps are
/// logical, so transcripts are reproducible.
///
/// # Safety
/// `dir` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fs_assistant_load(dir: *const c_char, deterministic: bool, out: *mut *mut FsAssistant) -> FsStatus {
    guard(|| {
        check_out(out)?;
        let dir = read_str(dir, "dir")?;
        let assistant = Assistant::load(dir).map_err(|e| {
            let status = match e {
                flowstack::Error::Domain(_) => FsStatus::InvalidDomain,
                _ => FsStatus::LoadFailed,
            };
            Failure::new(status, e.to_string())
        })?;
        let engine = assistant.engine(&EngineOptions {
            provider: None,
            deterministic,
        });
        write_out(out, Box::into_raw(Box::new(FsAssistant { assistant, engine })));
        Ok(())
    })
}

/// Releases an assistant. Null is ignored.
///
/// # Safety
/// `assistant` must come from [`fs_assistant_load`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn fs_assistant_free(assistant: *mut FsAssistant) {
    if !assistant.is_null() {
        drop(Box::from_raw(assistant));
    }
}

/// Validates the domain files in `dir` without building an engine and
/// writes `{"errors": [...], "warnings": [...]}` to `out`. Returns
/// `InvalidDomain` when the report contains errors; the report is written
/// either way.
///
/// # Safety
/// `dir` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fs_validate(dir: *const c_char, out: *mut *mut c_char) -> FsStatus {
    guard(|| {
        check_out(out)?;
        let dir = read_str(dir, "dir")?;
        let book = load_flowbook(Path::new(dir)).map_err(|e| Failure::new(FsStatus::LoadFailed, e.to_string()))?;
        let report = validate_flowbook(&book);
        write_out(out, to_c_json(&report)?);
        if report.is_valid() {
            Ok(())
        } else {
            Err(Failure::new(
                FsStatus::InvalidDomain,
                format!("{} validation error(s)", report.errors.len()),
            ))
        }
    })
}

/// Starts a conversation. `conversation_id` may be null for an empty id.
///
/// # Safety
/// `assistant` must be a live handle, `conversation_id` null or a
/// NUL-terminated string, and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fs_session_new(
    assistant: *const FsAssistant,
    conversation_id: *const c_char,
    out: *mut *mut FsSession,
) -> FsStatus {
    guard(|| {
        check_out(out)?;
        let assistant = assistant
            .as_ref()
            .ok_or_else(|| Failure::new(FsStatus::NullPointer, "`assistant` is null"))?;
        let id = if conversation_id.is_null() {
            ""
        } else {
            read_str(conversation_id, "conversation_id")?
        };
        let engine = assistant.engine.clone();
        let tracker = engine.new_tracker(id);
        write_out(out, Box::into_raw(Box::new(FsSession { engine, tracker })));
        Ok(())
    })
}

/// Releases a session. Null is ignored.
///
/// # Safety
/// `session` must come from [`fs_session_new`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn fs_session_free(session: *mut FsSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Runs one turn and writes the turn report as JSON:
/// `{"messages": [{"text", "template"}], "state": {...}, "debug": {...}}`.
///
/// # Safety
/// `session` must be a live handle, `text` a NUL-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fs_session_send(session: *mut FsSession, text: *const c_char, out: *mut *mut c_char) -> FsStatus {
    guard(|| {
        check_out(out)?;
        let session = session
            .as_mut()
            .ok_or_else(|| Failure::new(FsStatus::NullPointer, "`session` is null"))?;
        let text = read_str(text, "text")?;
        let report = session.engine.run_turn(&mut session.tracker, text);
        write_out(out, to_c_json(&report)?);
        Ok(())
    })
}

/// Writes the conversation's slots, stack and its last `recent_events`
/// events as JSON.
///
/// # Safety
/// `session` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fs_session_snapshot(session: *const FsSession, recent_events: u32, out: *mut *mut c_char) -> FsStatus {
    guard(|| {
        check_out(out)?;
        let session = session
            .as_ref()
            .ok_or_else(|| Failure::new(FsStatus::NullPointer, "`session` is null"))?;
        write_out(out, to_c_json(&session.tracker.snapshot(recent_events as usize))?);
        Ok(())
    })
}

/// Runs the assistant's bundled conversation tests with their scripted
/// commands and writes the report as JSON. Failing tests are reported in
/// the JSON, not through the status.
///
/// # Safety
/// `assistant` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fs_run_tests(assistant: *const FsAssistant, out: *mut *mut c_char) -> FsStatus {
    guard(|| {
        check_out(out)?;
        let assistant = assistant
            .as_ref()
            .ok_or_else(|| Failure::new(FsStatus::NullPointer, "`assistant` is null"))?;
        let report = assistant
            .assistant
            .run_tests(None)
            .map_err(|e| Failure::new(FsStatus::LoadFailed, e.to_string()))?;
        write_out(out, to_c_json(&report)?);
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn fs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn fs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version, e.g. `"0.1.0"`. Static; never free it.
#[no_mangle]
pub extern "C" fn fs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
