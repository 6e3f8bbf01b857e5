//! The exported functions, called the way a C host would.

use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::ptr;

use flowstack_ffi::*;
use serde_json::Value;

fn assistant_dir(name: &str) -> CString {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/assistants").join(name);
    CString::new(dir.to_str().unwrap()).unwrap()
}

/// Takes ownership of a returned JSON string.
unsafe fn take_json(s: *mut c_char) -> Value {
    assert!(!s.is_null());
    let value = serde_json::from_str(CStr::from_ptr(s).to_str().unwrap()).unwrap();
    fs_string_free(s);
    value
}

fn last_error() -> String {
    let p = fs_last_error();
    assert!(!p.is_null(), "no error recorded");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn load(name: &str) -> *mut FsAssistant {
    let mut assistant = ptr::null_mut();
    assert_eq!(fs_assistant_load(assistant_dir(name).as_ptr(), true, &mut assistant), FsStatus::Ok);
    assistant
}

unsafe fn send(session: *mut FsSession, text: &str) -> Value {
    let text = CString::new(text).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(fs_session_send(session, text.as_ptr(), &mut out), FsStatus::Ok);
    take_json(out)
}

fn texts(turn: &Value) -> Vec<String> {
    turn["messages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["text"].as_str().unwrap().to_string())
        .collect()
}

#[test]
fn conversation_through_handles() {
    unsafe {
        let assistant = load("bank");
        let id = CString::new("c-host").unwrap();
        let mut session = ptr::null_mut();
        assert_eq!(fs_session_new(assistant, id.as_ptr(), &mut session), FsStatus::Ok);
        // sessions outlive the assistant handle
        fs_assistant_free(assistant);

        let turn = send(session, "I want to transfer money");
        assert_eq!(texts(&turn), ["Who do you want to transfer money to?"]);
        let turn = send(session, "/SetSlot(transfer_money_recipient, Ann)");
        assert_eq!(texts(&turn), ["How much money do you want to transfer?"]);

        let mut out = ptr::null_mut();
        assert_eq!(fs_session_snapshot(session, 2, &mut out), FsStatus::Ok);
        let snapshot = take_json(out);
        assert_eq!(snapshot["conversation_id"], "c-host");
        assert_eq!(snapshot["slots"]["transfer_money_recipient"], "Ann");
        assert_eq!(snapshot["events"].as_array().unwrap().len(), 2);
        fs_session_free(session);
    }
}

#[test]
fn bundled_tests_run_through_the_abi() {
    unsafe {
        let assistant = load("transfer");
        let mut out = ptr::null_mut();
        assert_eq!(fs_run_tests(assistant, &mut out), FsStatus::Ok);
        let report = take_json(out);
        assert_eq!(report["total"], 2);
        assert_eq!(report["pass_rate"], 1.0);
        fs_assistant_free(assistant);
    }
}

#[test]
fn validation_reports_findings() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(fs_validate(assistant_dir("bank").as_ptr(), &mut out), FsStatus::Ok);
        let report = take_json(out);
        assert_eq!(report["errors"], Value::Array(vec![]));

        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("domain")).unwrap();
        std::fs::write(
            dir.path().join("domain/flows.yml"),
            "flows:\n  f:\n    description: d\n    steps:\n      - collect: missing\n",
        )
        .unwrap();
        let path = CString::new(dir.path().to_str().unwrap()).unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(fs_validate(path.as_ptr(), &mut out), FsStatus::InvalidDomain);
        let report = take_json(out);
        assert!(report["errors"][0]["message"].as_str().unwrap().contains("missing"), "{report}");
        let message = last_error();
        assert!(message.contains("validation error"), "{message}");

        let mut assistant = ptr::null_mut();
        assert_eq!(fs_assistant_load(path.as_ptr(), true, &mut assistant), FsStatus::InvalidDomain);
        assert!(assistant.is_null());
    }
}

#[test]
fn bad_arguments_return_error_codes() {
    unsafe {
        let mut assistant = ptr::null_mut();
        assert_eq!(fs_assistant_load(ptr::null(), true, &mut assistant), FsStatus::NullPointer);
        assert!(last_error().contains("dir"));

        let missing = CString::new("/definitely/not/here").unwrap();
        assert_eq!(fs_assistant_load(missing.as_ptr(), true, &mut assistant), FsStatus::LoadFailed);

        let invalid = [0xffu8, 0xfe, 0];
        assert_eq!(
            fs_assistant_load(invalid.as_ptr().cast(), true, &mut assistant),
            FsStatus::InvalidUtf8
        );
        assert_eq!(fs_assistant_load(assistant_dir("bank").as_ptr(), true, ptr::null_mut()), FsStatus::NullPointer);

        let mut out = ptr::null_mut();
        let text = CString::new("hi").unwrap();
        assert_eq!(fs_session_send(ptr::null_mut(), text.as_ptr(), &mut out), FsStatus::NullPointer);
        assert_eq!(fs_run_tests(ptr::null(), &mut out), FsStatus::NullPointer);

        // success clears the error
        let assistant = load("transfer");
        assert!(fs_last_error().is_null());
        fs_assistant_free(assistant);

        fs_string_free(ptr::null_mut());
        fs_session_free(ptr::null_mut());
        fs_assistant_free(ptr::null_mut());
    }
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(fs_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/flowstack.h")).unwrap();
    for name in [
        "fs_assistant_load",
        "fs_assistant_free",
        "fs_validate",
        "fs_session_new",
        "fs_session_free",
        "fs_session_send",
        "fs_session_snapshot",
        "fs_run_tests",
        "fs_string_free",
        "fs_last_error",
        "fs_version",
        "typedef struct FsAssistant FsAssistant;",
        "FS_STATUS_INVALID_DOMAIN = 4",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
