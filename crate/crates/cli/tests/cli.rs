//! End-to-end checks of the `aigc` binary: exit codes, settings precedence,
//! JSON output and determinism.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

const DID: &str = "did:web:lab.example.org";

fn aigc(dir: &Path) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_aigc"));
    cmd.env_clear().current_dir(dir);
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

/// Key, DID fixture directory and one prompt main file.
fn setup(dir: &Path) {
    let out = run(aigc(dir).args(["keygen", "--did", DID, "--seed-hex", &"11".repeat(32)]));
    assert_eq!(code(&out), 0, "{out:?}");
    let out = run(aigc(dir).args(["--did-dir", "dids", "did-doc", "init", "--into-did-dir"]));
    assert_eq!(code(&out), 0, "{out:?}");
    fs::write(
        dir.join("main.poml"),
        "<poml>\n  <role>You are a careful writer.</role>\n  <requirements>1. Use at most 20 words.\n2. Mention rivers.</requirements>\n</poml>\n",
    )
    .unwrap();
    fs::write(dir.join("answer.txt"), "<think>plan first</think>\n\nRivers carve valleys slowly.").unwrap();
}

fn issue(dir: &Path, extra: &[&str]) -> Output {
    run(aigc(dir)
        .args(["issue", "main.poml", "--content-file", "answer.txt", "--model", "acme/writer"])
        .args(["--valid-from", "2025-01-02T03:04:05Z", "--seed", "5"])
        .args(extra))
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(aigc(dir.path()).args(["verify", "--offline"]))), 2);
    assert_eq!(code(&run(aigc(dir.path()).args(["verify", "--no-such-flag"]))), 2);
    assert_eq!(code(&run(aigc(dir.path()).args(["--concurrency", "0", "verify"]))), 2);
    assert_eq!(code(&run(aigc(dir.path()).args(["issue", "x.poml"]))), 2, "no model given");
    let out = run(aigc(dir.path()).args(["--json", "verify", "--offline"]));
    let json: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["error"]["kind"], "usage");
    assert_eq!(json["schema_version"], "aigc-cli/1");
}

#[test]
fn keygen_refuses_to_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let before = fs::read(dir.path().join("aigc-key.json")).unwrap();
    let out = run(aigc(dir.path()).args(["keygen", "--did", DID]));
    assert_eq!(code(&out), 1);
    assert_eq!(fs::read(dir.path().join("aigc-key.json")).unwrap(), before);
}

#[test]
fn issue_verify_and_tamper() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let out = issue(dir.path(), &[]);
    assert_eq!(code(&out), 0, "{out:?}");
    let out = run(aigc(dir.path()).args(["--did-dir", "dids", "--offline", "verify"]));
    assert_eq!(code(&out), 0, "{out:?}");
    assert!(stdout(&out).contains(": Verified"));

    let path = fs::read_dir(dir.path().join("store"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "jsonld"))
        .unwrap();
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, text.replace("carve valleys", "carve canyons")).unwrap();
    let out = run(aigc(dir.path()).args(["--did-dir", "dids", "--offline", "--json", "verify"]));
    assert_eq!(code(&out), 1);
    let json: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["command"], "verify");
    assert_eq!(json["entries"][0]["status"], "SignatureInvalid");
    assert_eq!(json["failed"], 1);

    fs::write(&path, "{ not json").unwrap();
    let out = run(aigc(dir.path()).args(["--did-dir", "dids", "--offline", "verify"]));
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains(": ParseFailure"));
}

#[test]
fn seeded_issue_is_deterministic() {
    let ids: Vec<String> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            setup(dir.path());
            let out = issue(dir.path(), &["--json"]);
            assert_eq!(code(&out), 0, "{out:?}");
            let json: Value = serde_json::from_slice(&out.stdout).unwrap();
            json["envelopes"][0]["envelope_id"].as_str().unwrap().to_string()
        })
        .collect();
    assert_eq!(ids[0], ids[1]);
}

#[test]
fn settings_precedence_flag_env_config() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    fs::write(dir.path().join("aigc.toml"), "store_dir = \"from-config\"\n").unwrap();
    assert_eq!(code(&issue(dir.path(), &[])), 0);
    assert!(dir.path().join("from-config").is_dir());

    let out = run(aigc(dir.path()).env("AIGC_STORE_DIR", "from-env").args([
        "issue",
        "main.poml",
        "--content-file",
        "answer.txt",
        "--model",
        "acme/writer",
    ]));
    assert_eq!(code(&out), 0, "{out:?}");
    assert!(dir.path().join("from-env").is_dir());

    let out = run(aigc(dir.path())
        .env("AIGC_STORE_DIR", "from-env")
        .args(["--store", "from-flag", "issue", "main.poml", "--content-file", "answer.txt"])
        .args(["--model", "acme/writer"]));
    assert_eq!(code(&out), 0, "{out:?}");
    assert!(dir.path().join("from-flag").is_dir());

    fs::write(dir.path().join("aigc.toml"), "no_such_key = 1\n").unwrap();
    assert_eq!(code(&run(aigc(dir.path()).arg("verify"))), 2);
}

#[test]
fn curate_and_export_strip_thought() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    assert_eq!(code(&issue(dir.path(), &[])), 0);
    fs::write(dir.path().join("judge.jsonl"), "{\"text\": \"Yes, it does.\"}\n").unwrap();
    let base = ["--did-dir", "dids", "--offline", "--judge-mock", "judge.jsonl"];
    let out = run(aigc(dir.path()).args(base).args(["curate", "--report", "r.json"]));
    assert_eq!(code(&out), 0, "{out:?}");
    assert!(stdout(&out).contains("| RFR    |    100.00 |"), "{}", stdout(&out));
    let out = run(aigc(dir.path()).args(base).args(["export-ft", "--report", "r.json"]));
    assert_eq!(code(&out), 0, "{out:?}");
    let line: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(line["completion"], "Rivers carve valleys slowly.");
    assert!(line["prompt"].as_str().unwrap().starts_with("# Role\n\nYou are a careful writer."));
    assert!(line["meta"]["envelope_id"].as_str().unwrap().starts_with("urn:uuid:"));
}

#[test]
fn random_selection_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    for n in 0..4 {
        fs::write(dir.path().join("answer.txt"), format!("Rivers, take {n}.")).unwrap();
        let out = run(aigc(dir.path()).args([
            "issue",
            "main.poml",
            "--content-file",
            "answer.txt",
            "--model",
            "acme/writer",
        ]));
        assert_eq!(code(&out), 0, "{out:?}");
    }
    fs::write(dir.path().join("judge.jsonl"), "{\"text\": \"No\"}\n").unwrap();
    let selected = |seed: &str| {
        let out = run(aigc(dir.path())
            .args(["--did-dir", "dids", "--offline", "--judge-mock", "judge.jsonl", "--seed", seed, "--json"])
            .args(["curate", "--select", "random"]));
        assert_eq!(code(&out), 0, "{out:?}");
        let json: Value = serde_json::from_slice(&out.stdout).unwrap();
        json["report"]["selected"].clone()
    };
    assert_eq!(selected("3"), selected("3"));
    let distinct: std::collections::BTreeSet<String> = (0..12).map(|s| selected(&s.to_string()).to_string()).collect();
    assert!(distinct.len() > 1);
}

#[test]
fn decompose_from_stdin() {
    let dir = tempfile::tempdir().unwrap();
    let mut child = aigc(dir.path())
        .args(["decompose", "-", "--mode", "sentences"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"You are a poet. Write four lines about rain. Output plain text.").unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(code(&out), 0);
    assert_eq!(
        stdout(&out),
        "<poml>\n  <role>You are a poet.</role>\n  <requirements>Write four lines about rain.</requirements>\n  <output-format>Output plain text.</output-format>\n</poml>\n"
    );
}
