use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use gadgetkit_ffi::*;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/scenarios")
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(p: *mut c_char) -> String {
    assert!(!p.is_null());
    let s = CStr::from_ptr(p).to_str().unwrap().to_string();
    gk_string_free(p);
    s
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(gk_last_error()) }.to_str().unwrap().to_string()
}

#[test]
fn chess_session_through_handles() {
    let path = c(fixtures().join("chess/scenario.json").to_str().unwrap());
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(gk_session_load(path.as_ptr(), &mut s), GK_OK, "{}", last_error());
        let mut out = ptr::null_mut();
        assert_eq!(gk_session_submit(s, c("Move the pawn from d2 to d4").as_ptr(), &mut out), GK_OK);
        let result: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(result["ok"], true);

        assert_eq!(gk_session_world_json(s, &mut out), GK_OK);
        let world: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        let pawn = &world["robots"]["wp_d"]["pose"];
        let cell = 1000.0 / 30.0;
        assert!((pawn["x"].as_f64().unwrap() - 14.5 * cell).abs() < 0.25 * cell);
        assert!((pawn["y"].as_f64().unwrap() - 14.5 * cell).abs() < 0.25 * cell);

        assert_eq!(gk_session_transcript(s, &mut out), GK_OK);
        assert!(take(out).lines().count() >= 4);
        gk_session_free(s);
    }
}

#[test]
fn create_from_json_with_inline_script() {
    let dir = fixtures().join("chess");
    let scenario = std::fs::read_to_string(dir.join("scenario.json")).unwrap();
    let script = std::fs::read_to_string(dir.join("mock.json")).unwrap();
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(gk_session_create(c(&scenario).as_ptr(), c(&script).as_ptr(), &mut s), GK_OK, "{}", last_error());
        let poses = c(r#"{"wp_d": {"x": 100.0, "y": 120.0, "heading": 45.0}}"#);
        assert_eq!(gk_session_push_poses(s, poses.as_ptr()), GK_OK);
        let bad = c(r#"{"nobody": {"x": 1.0, "y": 1.0, "heading": 0.0}}"#);
        assert_eq!(gk_session_push_poses(s, bad.as_ptr()), GK_ERR_BAD_REQUEST);
        assert!(last_error().contains("nobody"));
        gk_session_free(s);
    }
}

#[test]
fn error_codes() {
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(gk_session_create(ptr::null(), ptr::null(), &mut s), GK_ERR_NULL);
        assert_eq!(gk_session_create(c("{not json").as_ptr(), ptr::null(), &mut s), GK_ERR_PARSE);
        assert!(s.is_null());
        let invalid_utf8 = [0xffu8, 0xfe, 0];
        let mut out = ptr::null_mut();
        assert_eq!(gk_parse_action(invalid_utf8.as_ptr().cast(), &mut out), GK_ERR_UTF8);
        assert_eq!(gk_session_submit(ptr::null_mut(), c("x").as_ptr(), &mut out), GK_ERR_NULL);
        gk_session_free(ptr::null_mut());
        gk_string_free(ptr::null_mut());
    }
}

#[test]
fn parse_action_gives_canonical_text() {
    let reply = c("Sure.\n{'robots': [{'id': 'a', 'actions': [{'type': 'Translate', 'target': (3, 4), 'speed': '2',}]}]}");
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(gk_parse_action(reply.as_ptr(), &mut out), GK_OK);
        assert_eq!(take(out), r#"{"robots":[{"id":"a","actions":[{"type":"translate","target":[3,4],"speed":2}]}],"parallel":true}"#);
        assert_eq!(gk_parse_action(c("no plan here").as_ptr(), &mut out), GK_ERR_PARSE);
    }
}

#[test]
fn validate_reports_violations() {
    let scenario = std::fs::read_to_string(fixtures().join("chess/scenario.json")).unwrap();
    let good = c(r#"{"robots":[{"id":"wp_d","actions":[{"type":"translate","target":[14,14],"speed":2}]}],"parallel":true}"#);
    let bad = c(r#"{"robots":[{"id":"ghost","actions":[{"type":"translate","target":[14,14],"speed":2}]}],"parallel":true}"#);
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(gk_validate_sequence(c(&scenario).as_ptr(), good.as_ptr(), &mut out), GK_OK);
        assert_eq!(take(out), r#"{"violations":[]}"#);
        assert_eq!(gk_validate_sequence(c(&scenario).as_ptr(), bad.as_ptr(), &mut out), GK_ERR_INVALID_SEQUENCE);
        assert!(take(out).contains("unknown_robot"));
    }
}

#[test]
fn replay_matches_live_world() {
    let dir = fixtures().join("chess");
    let scenario = std::fs::read_to_string(dir.join("scenario.json")).unwrap();
    let script = std::fs::read_to_string(dir.join("mock.json")).unwrap();
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(gk_session_create(c(&scenario).as_ptr(), c(&script).as_ptr(), &mut s), GK_OK);
        let mut out = ptr::null_mut();
        gk_session_submit(s, c("Move the pawn from d2 to d4").as_ptr(), &mut out);
        gk_string_free(out);
        gk_session_transcript(s, &mut out);
        let transcript = c(&take(out));
        gk_session_world_json(s, &mut out);
        let live = take(out);
        assert_eq!(gk_replay(c(&scenario).as_ptr(), transcript.as_ptr(), &mut out), GK_OK, "{}", last_error());
        assert_eq!(take(out), live);
        gk_session_free(s);
    }
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(gk_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/gadgetkit.h")).unwrap();
    assert!(header.contains("typedef struct GkSession GkSession;"));
    for f in [
        "gk_version", "gk_last_error", "gk_session_create", "gk_session_load", "gk_session_free", "gk_session_submit",
        "gk_session_push_poses", "gk_session_world_json", "gk_session_transcript", "gk_parse_action",
        "gk_validate_sequence", "gk_replay", "gk_string_free",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
}

/// Compile the C smoke program against the header and static library.
#[test]
fn c_program_links_and_runs() {
    let Ok(exe) = std::env::current_exe() else { return };
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join("libgadgetkit_ffi.a");
    if !lib.is_file() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library");
        return;
    }
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let bin = Path::new(env!("CARGO_TARGET_TMPDIR")).join("gk_smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).arg(fixtures().join("chess/scenario.json")).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let world: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(world["robots"]["wp_d"].is_object());
}
