//! Process-level helpers for driving the `lipleak` and `lipleak-stub` binaries.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const LIPLEAK: &str = env!("CARGO_BIN_EXE_lipleak");
pub const STUB: &str = env!("CARGO_BIN_EXE_lipleak-stub");

pub fn run(args: &[&str]) -> Output {
    Command::new(LIPLEAK).args(args).env_remove("LIPLEAK_TMPDIR").output().expect("lipleak runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn expect_ok(out: &Output, what: &str) {
    assert_eq!(code(out), 0, "{what} failed:\n{}\n{}", stdout(out), stderr(out));
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

/// Writes the synthetic corpus and returns its manifest path.
pub fn synth_corpus(root: &Path, clips: usize) -> PathBuf {
    let dir = root.join("corpus");
    let out = Command::new(STUB)
        .args(["synth-corpus", "--out", p(&dir), "--clips", &clips.to_string()])
        .output()
        .expect("stub runs");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("manifest.jsonl")
}

pub fn generator(mode: &str, extra: &str) -> String {
    format!(
        "'{STUB}' generate --mode {mode} --frames {{input_frames}} --audio {{input_audio}} --reference {{reference_spec}} --job {{job_file}} --out {{output_dir}} {extra}"
    )
}

pub fn extractor() -> String {
    format!("'{STUB}' extract --frames {{input_frames}} --audio {{input_audio}} --out {{output_dir}}")
}

pub fn grid(manifest: &Path, out: &Path, adapters: &[(&str, String)]) -> Output {
    let specs: Vec<String> = adapters.iter().map(|(n, t)| format!("{n}={t}")).collect();
    let mut args = vec!["grid", "--manifest", p(manifest), "--output-dir", p(out), "--seed", "3"];
    for s in &specs {
        args.extend(["--adapter", s.as_str()]);
    }
    run(&args)
}

pub fn generate(out: &Path, extra: &[&str]) -> Output {
    let ex = extractor();
    let mut args = vec!["generate", "--output-dir", p(out), "--extractor", ex.as_str()];
    args.extend_from_slice(extra);
    run(&args)
}

pub fn metrics(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["metrics", "--output-dir", p(out)];
    args.extend_from_slice(extra);
    run(&args)
}

pub fn report(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["report", "--output-dir", p(out)];
    args.extend_from_slice(extra);
    run(&args)
}

/// grid → generate → metrics → report, asserting each stage exits 0.
pub fn pipeline(manifest: &Path, out: &Path, adapters: &[(&str, String)]) {
    expect_ok(&grid(manifest, out, adapters), "grid");
    expect_ok(&generate(out, &[]), "generate");
    expect_ok(&metrics(out, &[]), "metrics");
    expect_ok(&report(out, &["--format", "csv"]), "report");
}

pub fn log_entries(out: &Path) -> Vec<serde_json::Value> {
    fs::read_to_string(out.join("run_log.jsonl"))
        .unwrap_or_default()
        .lines()
        .map(|l| serde_json::from_str(l).expect("log line parses"))
        .collect()
}

pub fn jobs_with_status(entries: &[serde_json::Value], status: &str) -> BTreeSet<String> {
    entries
        .iter()
        .filter(|e| e["status"] == status)
        .map(|e| e["job"].as_str().unwrap().to_string())
        .collect()
}

/// Relative path → bytes for every file under `dir`.
pub fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// Reads a delimited report into (kind, method, setup, reference, metric) → value.
pub fn csv_values(path: &Path) -> std::collections::BTreeMap<(String, String, String, String, String), String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("kind,"))
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            ((f[0].into(), f[1].into(), f[2].into(), f[3].into(), f[4].into()), f[5].into())
        })
        .collect()
}
