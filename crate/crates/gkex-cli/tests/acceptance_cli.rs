//! Acceptance, CLI leg: the worked three-epoch fixture runs and verifies
//! with exit code 0 through the shipped binary.

use std::path::Path;
use std::process::Command;

#[test]
fn acceptance_10_fixture_f1_cli_round_trip() {
    let scenario = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/f1.json");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f1.jsonl");

    let run = Command::new(env!("CARGO_BIN_EXE_gkex"))
        .env_remove("GKEX_CONFIG")
        .args(["run", "--group", "tiny", "--scenario"])
        .arg(&scenario)
        .args(["--seed", "7", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(
        run.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let text = String::from_utf8_lossy(&run.stdout);
    for line in [
        "epoch 1 [P1] roster=3 key 03",
        "epoch 2 [P3] roster=3 key 0c",
        "epoch 3 [P4] roster=4 key 10",
    ] {
        assert!(text.contains(line), "missing {line:?} in:\n{text}");
    }

    let verify = Command::new(env!("CARGO_BIN_EXE_gkex"))
        .env_remove("GKEX_CONFIG")
        .arg("verify")
        .arg(&out)
        .args(["--group", "tiny"])
        .output()
        .unwrap();
    assert_eq!(verify.status.code(), Some(0));

    println!("acceptance 10 fixture F1 CLI round trip: PASS");
}
