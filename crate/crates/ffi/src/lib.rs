//! C ABI over the session engine.
//!
//! Sessions are opaque handles. Every call returns a status code (`GK_OK` or
//! a negative `GK_ERR_*`); on failure `gk_last_error` describes it. Strings
//! handed out by this library are owned by the caller and released with
//! `gk_string_free`.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use gadgetkit::agent::{Gateway, MockGateway, Transcript};
use gadgetkit::geometry::Pose;
use gadgetkit::protocol::{parse_lenient, parse_strict, serialize};
use gadgetkit::session::{Scenario, Session, SessionError, SessionOptions};
use gadgetkit::world::validate_sequence;

pub const GK_OK: i32 = 0;
/// A required pointer argument was null.
pub const GK_ERR_NULL: i32 = -1;
/// A string argument was not valid UTF-8.
pub const GK_ERR_UTF8: i32 = -2;
/// JSON or action text could not be parsed.
pub const GK_ERR_PARSE: i32 = -3;
/// The scenario failed validation.
pub const GK_ERR_SCENARIO: i32 = -4;
/// The request does not fit the session phase (for example after game over).
pub const GK_ERR_PHASE: i32 = -5;
/// Bad ids, off-table poses and similar request errors.
pub const GK_ERR_BAD_REQUEST: i32 = -6;
/// The action sequence has violations; the report is still returned.
pub const GK_ERR_INVALID_SEQUENCE: i32 = -7;
/// Agent, gateway, simulation or I/O failure.
pub const GK_ERR_SESSION: i32 = -8;
/// A Rust panic was caught at the boundary.
pub const GK_ERR_PANIC: i32 = -99;

/// Opaque session handle.
pub struct GkSession {
    inner: Session,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Fail(i32, String);

impl From<SessionError> for Fail {
    fn from(e: SessionError) -> Self {
        let code = match &e {
            SessionError::Scenario(_) => GK_ERR_SCENARIO,
            SessionError::Phase(_) => GK_ERR_PHASE,
            SessionError::BadRequest(_) | SessionError::NotFound(_) => GK_ERR_BAD_REQUEST,
            _ => GK_ERR_SESSION,
        };
        Fail(code, e.to_string())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GK_OK,
        Ok(Err(Fail(code, msg))) => {
            set_error(&msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            GK_ERR_PANIC
        }
    }
}

/// # Safety
/// `p` is null or a NUL-terminated string valid for the duration of the call.
unsafe fn arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(GK_ERR_NULL, format!("`{name}` is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(GK_ERR_UTF8, format!("`{name}` is not UTF-8")))
}

/// # Safety
/// `out` is null or valid for a pointer write.
unsafe fn put(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(GK_ERR_NULL, "output pointer is null".into()));
    }
    let c = CString::new(s).map_err(|_| Fail(GK_ERR_SESSION, "output contains NUL".into()))?;
    *out = c.into_raw();
    Ok(())
}

fn session_mut<'a>(h: *mut GkSession) -> Result<&'a mut Session, Fail> {
    if h.is_null() {
        return Err(Fail(GK_ERR_NULL, "session handle is null".into()));
    }
    // SAFETY: non-null handles come from gk_session_create/gk_session_load
    // and callers must not share one handle across threads concurrently.
    Ok(unsafe { &mut (*h).inner })
}

fn scenario_issues(issues: Vec<gadgetkit::session::ScenarioIssue>) -> Fail {
    Fail(GK_ERR_SCENARIO, issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))
}

fn open(scenario: Scenario, gateway: Box<dyn Gateway>, out: *mut *mut GkSession) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(GK_ERR_NULL, "output pointer is null".into()));
    }
    let inner = Session::create(scenario, gateway, SessionOptions::default())?;
    // SAFETY: checked non-null above.
    unsafe { *out = Box::into_raw(Box::new(GkSession { inner })) };
    Ok(())
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn gk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread. Valid until the next
/// failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn gk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Create a session from scenario JSON. `mock_script_json` is the scripted
/// agent reply list; when null, the scenario's `mock_script` path is used
/// (relative to the working directory).
///
/// # Safety
/// String arguments are null or NUL-terminated; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gk_session_create(
    scenario_json: *const c_char,
    mock_script_json: *const c_char,
    out: *mut *mut GkSession,
) -> i32 {
    guard(|| {
        let scenario = Scenario::from_json(arg(scenario_json, "scenario_json")?).map_err(|e| Fail(GK_ERR_PARSE, e.to_string()))?;
        let gateway = if mock_script_json.is_null() {
            let path = scenario.mock_script.clone().ok_or_else(|| Fail(GK_ERR_BAD_REQUEST, "no mock script given".into()))?;
            MockGateway::load(&path).map_err(|e| Fail(GK_ERR_BAD_REQUEST, e.to_string()))?
        } else {
            MockGateway::from_json(arg(mock_script_json, "mock_script_json")?).map_err(|e| Fail(GK_ERR_PARSE, e.to_string()))?
        };
        open(scenario, Box::new(gateway), out)
    })
}

/// Create a session from a scenario file; its `mock_script` is resolved
/// relative to the file.
///
/// # Safety
/// `path` is null or NUL-terminated; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gk_session_load(path: *const c_char, out: *mut *mut GkSession) -> i32 {
    guard(|| {
        let scenario = Scenario::load(Path::new(arg(path, "path")?)).map_err(|e| Fail(GK_ERR_PARSE, e.to_string()))?;
        let script = scenario.mock_script.clone().ok_or_else(|| Fail(GK_ERR_BAD_REQUEST, "scenario has no mock_script".into()))?;
        let gateway = MockGateway::load(&script).map_err(|e| Fail(GK_ERR_BAD_REQUEST, e.to_string()))?;
        open(scenario, Box::new(gateway), out)
    })
}

/// Release a session. Null is ignored.
///
/// # Safety
/// `h` is null or a live handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gk_session_free(h: *mut GkSession) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Run one player command to completion. `out_result_json` receives the
/// turn result; a turn that the agents could not plan still returns `GK_OK`
/// with `"ok": false`.
///
/// # Safety
/// `h` is a live handle; `text` is NUL-terminated; `out_result_json` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gk_session_submit(h: *mut GkSession, text: *const c_char, out_result_json: *mut *mut c_char) -> i32 {
    guard(|| {
        let s = session_mut(h)?;
        let r = s.submit_command(arg(text, "text")?)?;
        put(out_result_json, serde_json::to_string(&r).expect("turn result serializes"))
    })
}

/// Overwrite robot poses, as from an external tracker:
/// `{"id": {"x": mm, "y": mm, "heading": deg}}`.
///
/// # Safety
/// `h` is a live handle; `poses_json` is NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gk_session_push_poses(h: *mut GkSession, poses_json: *const c_char) -> i32 {
    guard(|| {
        let s = session_mut(h)?;
        let poses: BTreeMap<String, Pose> =
            serde_json::from_str(arg(poses_json, "poses_json")?).map_err(|e| Fail(GK_ERR_PARSE, e.to_string()))?;
        Ok(s.push_poses(&poses)?)
    })
}

/// Current world as pretty JSON.
///
/// # Safety
/// `h` is a live handle; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gk_session_world_json(h: *const GkSession, out: *mut *mut c_char) -> i32 {
    guard(|| {
        let s = session_mut(h.cast_mut())?;
        put(out, s.world_json())
    })
}

/// Transcript so far as JSON lines.
///
/// # Safety
/// `h` is a live handle; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gk_session_transcript(h: *const GkSession, out: *mut *mut c_char) -> i32 {
    guard(|| {
        let s = session_mut(h.cast_mut())?;
        put(out, s.transcript.to_jsonl())
    })
}

/// Pull the action block out of a free-form agent reply and write its
/// canonical JSON.
///
/// # Safety
/// `reply` is NUL-terminated; `out_canonical` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gk_parse_action(reply: *const c_char, out_canonical: *mut *mut c_char) -> i32 {
    guard(|| {
        let parsed = parse_lenient(arg(reply, "reply")?).map_err(|e| Fail(GK_ERR_PARSE, e.to_string()))?;
        put(out_canonical, serialize(&parsed.sequence))
    })
}

/// Check a canonical action sequence against a scenario's start position.
/// The violation report (JSON) is written whether or not it is empty;
/// the return is `GK_ERR_INVALID_SEQUENCE` when it is not.
///
/// # Safety
/// String arguments are NUL-terminated; `out_report_json` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gk_validate_sequence(
    scenario_json: *const c_char,
    sequence_json: *const c_char,
    out_report_json: *mut *mut c_char,
) -> i32 {
    guard(|| {
        let scenario = Scenario::from_json(arg(scenario_json, "scenario_json")?).map_err(|e| Fail(GK_ERR_PARSE, e.to_string()))?;
        let world = scenario.validate().map_err(scenario_issues)?;
        let seq = parse_strict(arg(sequence_json, "sequence_json")?).map_err(|e| Fail(GK_ERR_PARSE, e.to_string()))?;
        let report = validate_sequence(&seq, &world);
        put(out_report_json, serde_json::to_string(&report).expect("report serializes"))?;
        if report.is_ok() {
            Ok(())
        } else {
            Err(Fail(GK_ERR_INVALID_SEQUENCE, report.to_string()))
        }
    })
}

/// Replay a JSON-lines transcript against a scenario and write the final world.
///
/// # Safety
/// String arguments are NUL-terminated; `out_world_json` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gk_replay(scenario_json: *const c_char, transcript_jsonl: *const c_char, out_world_json: *mut *mut c_char) -> i32 {
    guard(|| {
        let scenario = Scenario::from_json(arg(scenario_json, "scenario_json")?).map_err(|e| Fail(GK_ERR_PARSE, e.to_string()))?;
        let entries = Transcript::parse_jsonl(arg(transcript_jsonl, "transcript_jsonl")?).map_err(|e| Fail(GK_ERR_PARSE, e.to_string()))?;
        let world = gadgetkit::session::replay(&scenario, &entries, gadgetkit::world::DEFAULT_TICK_MS)?;
        put(out_world_json, serde_json::to_string_pretty(&world).expect("world serializes"))
    })
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` is null or a string from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn gk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
