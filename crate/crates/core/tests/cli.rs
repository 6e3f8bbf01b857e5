//! The command-line binary, run as a subprocess.

mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn flowstack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowstack"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            fs::copy(entry.path(), target).unwrap();
        }
    }
}

fn path(name: &str) -> String {
    common::assistant_dir(name).display().to_string()
}

#[test]
fn validate_summarizes_the_bundled_assistant() {
    let output = flowstack(&["validate", &path("bank")]);
    assert!(output.status.success(), "{output:?}");
    let out = stdout(&output);
    let summary = out.lines().last().unwrap();
    assert!(summary.starts_with("ok: 35 flows,"), "{summary}");
    assert!(summary.ends_with("50 tests"), "{summary}");
}

#[test]
fn validate_reports_broken_references() {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&common::assistant_dir("transfer"), dir.path());
    let domain = dir.path().join("domain/transfer.yml");
    let text = fs::read_to_string(&domain).unwrap();
    fs::write(&domain, text.replacen("collect: transfer_money_recipient", "collect: nobody", 1)).unwrap();
    let output = flowstack(&["validate", &dir.path().display().to_string()]);
    assert!(!output.status.success());
    let all = format!("{}{}", stdout(&output), String::from_utf8_lossy(&output.stderr));
    assert!(all.contains("nobody"), "{all}");
}

#[test]
fn test_command_reports_text_and_json() {
    let output = flowstack(&["test", &path("transfer")]);
    assert!(output.status.success(), "{output:?}");
    let out = stdout(&output);
    assert!(out.contains("PASS  knowledge        fee_question_before_confirming"), "{out}");
    assert!(out.contains("total: 2/2 passed (100.0%)"), "{out}");

    let output = flowstack(&["test", &path("transfer"), "--format", "json"]);
    let report: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(report["passed"], 2);
    assert_eq!(report["pass_rate"], 1.0);
}

#[test]
fn failing_tests_set_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&common::assistant_dir("transfer"), dir.path());
    let tests = dir.path().join("tests/context_switch.yml");
    let text = fs::read_to_string(&tests).unwrap();
    fs::write(&tests, text.replace("Your transfer has been completed", "Done!")).unwrap();
    let output = flowstack(&["test", &dir.path().display().to_string()]);
    assert_eq!(output.status.code(), Some(1));
    let out = stdout(&output);
    assert!(out.contains("FAIL"), "{out}");
    assert!(out.contains("expected bot `Done!`"), "{out}");
}

#[test]
fn shell_runs_a_scripted_conversation() {
    use std::io::Write;
    let mut child = Command::new(env!("CARGO_BIN_EXE_flowstack"))
        .args(["shell", &path("bank")])
        .env("RUST_LOG", "off")
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"I want to transfer money\n/StartFlow(check_balance)\n:quit\n")
        .unwrap();
    let output = child.wait_with_output().unwrap();
    let out = stdout(&output);
    assert!(out.contains("bot> Who do you want to transfer money to?"), "{out}");
    assert!(out.contains("bot> Your current balance is $1000.00."), "{out}");
}

#[test]
fn validate_warns_about_actions_without_handlers() {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&common::assistant_dir("transfer"), dir.path());
    fs::write(dir.path().join("actions.yml"), "").unwrap();
    let output = flowstack(&["validate", &dir.path().display().to_string()]);
    assert!(output.status.success(), "{output:?}");
    let out = stdout(&output);
    assert!(
        out.contains("warning: flow `transfer_money`: action `execute_transfer` has no handler"),
        "{out}"
    );
    let bundled = stdout(&flowstack(&["validate", &path("bank")]));
    assert!(!bundled.contains("has no handler"), "{bundled}");
}
