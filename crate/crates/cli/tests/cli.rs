use std::path::Path;
use std::process::{Command, Output};

use longseq_cli::RunConfig;
use serde_json::Value;

fn longseq(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_longseq"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn write_docs(dir: &Path, lines: &[String]) {
    std::fs::write(dir.join("docs.jsonl"), lines.join("\n") + "\n").unwrap();
}

fn doc(id: &str, words: usize, source: &str) -> String {
    let text: Vec<String> = (0..words)
        .map(|i| format!("w{}{}", i % 7, if i % 9 == 8 { "." } else { "" }))
        .collect();
    serde_json::json!({"id": id, "text": text.join(" "), "source": source}).to_string()
}

#[test]
fn stats_reports_exact_mean_and_median() {
    let dir = tempfile::tempdir().unwrap();
    write_docs(
        dir.path(),
        &[doc("a", 3, "web"), doc("b", 10, "web"), doc("c", 5, "web")],
    );
    let out = longseq(dir.path(), &["stats", "--input", "docs.jsonl"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let web = &v["per_tag"]["web"];
    assert_eq!(web["count"], 3);
    assert_eq!(web["mean"], 6.0);
    assert_eq!(web["median"], 5.0);
    assert_eq!(web["total_tokens"], 18);
}

#[test]
fn unknown_flag_prints_usage() {
    let dir = tempfile::tempdir().unwrap();
    let out = longseq(dir.path(), &["stats", "--no-such-flag"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Usage"), "{err}");
}

#[test]
fn malformed_line_is_reported_by_number() {
    let dir = tempfile::tempdir().unwrap();
    write_docs(
        dir.path(),
        &[doc("a", 3, "web"), doc("b", 4, "web"), "{not json".to_string()],
    );
    let out = longseq(dir.path(), &["stats", "--input", "docs.jsonl"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn config_file_round_trips_and_drives_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig {
        seed: 11,
        seq_len: 64,
        ..Default::default()
    };
    cfg.corrupt.mask_ratio = 0.25;
    let text = cfg.to_toml();
    assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    std::fs::write(dir.path().join("run.toml"), &text).unwrap();

    let docs: Vec<String> = (0..20).map(|i| doc(&format!("d{i}"), 30 + i, "web")).collect();
    write_docs(dir.path(), &docs);
    let flags = ["assemble", "--input", "docs.jsonl", "--output", "a.jsonl"];
    let with_file = longseq(dir.path(), &[&["--config", "run.toml"], &flags[..]].concat());
    assert!(
        with_file.status.success(),
        "{}",
        String::from_utf8_lossy(&with_file.stderr)
    );
    let explicit = [
        "--seed",
        "11",
        "assemble",
        "--input",
        "docs.jsonl",
        "--output",
        "b.jsonl",
        "--seq-len",
        "64",
    ];
    assert!(longseq(dir.path(), &explicit).status.success());
    let a = std::fs::read_to_string(dir.path().join("a.jsonl")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("b.jsonl")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn invalid_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "seq_len = 8\nbogus = 1\n").unwrap();
    let out = longseq(dir.path(), &["--config", "bad.toml", "attn-check"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.toml"));
}

#[test]
fn t5_at_one_sixteenth_masks_1024_tokens() {
    let dir = tempfile::tempdir().unwrap();
    let docs: Vec<String> = (0..12).map(|i| doc(&format!("d{i}"), 3000, "web")).collect();
    write_docs(dir.path(), &docs);
    let assemble = [
        "assemble",
        "--input",
        "docs.jsonl",
        "--output",
        "seq.jsonl",
        "--seq-len",
        "16384",
    ];
    assert!(longseq(dir.path(), &assemble).status.success());
    let corrupt = [
        "corrupt",
        "--input",
        "seq.jsonl",
        "--output",
        "t5.jsonl",
        "--seq-len",
        "16384",
        "--objective",
        "t5",
        "--mask-ratio",
        "0.0625",
    ];
    let out = longseq(dir.path(), &corrupt);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("t5.jsonl")).unwrap();
    let vocab = longseq_core::objectives::Vocab::default();
    let mut lines = 0;
    for line in text.lines() {
        let ex: longseq_core::objectives::CorruptionExample = serde_json::from_str(line).unwrap();
        assert_eq!(ex.target_corpus_tokens(&vocab), 1024);
        lines += 1;
    }
    assert!(lines >= 2);
}

#[test]
fn corrupt_rejects_short_sequences() {
    let dir = tempfile::tempdir().unwrap();
    let docs: Vec<String> = (0..4).map(|i| doc(&format!("d{i}"), 40, "web")).collect();
    write_docs(dir.path(), &docs);
    assert!(longseq(
        dir.path(),
        &[
            "assemble",
            "--input",
            "docs.jsonl",
            "--output",
            "s.jsonl",
            "--seq-len",
            "32"
        ]
    )
    .status
    .success());
    let out = longseq(
        dir.path(),
        &[
            "corrupt",
            "--input",
            "s.jsonl",
            "--output",
            "c.jsonl",
            "--seq-len",
            "64",
        ],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn attn_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = longseq(dir.path(), &["attn-check", "--max-len", "64", "--trials", "50"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["families"].as_array().unwrap().len(), 5);
}
