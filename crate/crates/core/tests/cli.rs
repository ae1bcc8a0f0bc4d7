use std::path::Path;
use std::process::{Command, Output};

fn uitrim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uitrim")).args(args).output().unwrap()
}

fn fixture(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel).display().to_string()
}

#[test]
fn score_report_is_machine_readable() {
    let out = uitrim(&["score", "--library", &fixture("library.uitrim"), "--examples", &fixture("examples")]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0].split('\t').next(), Some("example"));
    assert_eq!(lines.len(), 1 + 5 + 1);
    assert!(lines[6].starts_with("total\t"));
    for l in &lines[1..6] {
        assert_eq!(l.split('\t').nth(1), Some("0"), "{l}");
    }
}

#[test]
fn convert_android_to_canonical() {
    let out = uitrim(&["convert", "--tree", &fixture("android/settings_dump.xml")]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("uitree v1 android_xml\n"));
    assert_eq!(text.lines().count(), 1 + 7);
}

#[test]
fn errors_exit_non_zero() {
    let tree = fixture("trees/bill_amount.tree");
    // Neither --program nor --library.
    assert!(!uitrim(&["apply", "--tree", &tree]).status.success());
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.uitrim");
    std::fs::write(&bad, "program x {").unwrap();
    let out = uitrim(&["apply", "--program", bad.to_str().unwrap(), "--tree", &tree]);
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
    let out = uitrim(&["render", "--tree", &tree, "--kind", "random"]);
    assert!(!out.status.success(), "random rendering needs a seed");
}
