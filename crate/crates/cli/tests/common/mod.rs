#![allow(dead_code)]

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

pub fn desireme(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_desireme"))
        .current_dir(dir)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

/// Runs and asserts success, returning stdout.
pub fn ok(dir: &Path, args: &[&str]) -> String {
    let out = desireme(dir, args);
    assert!(
        out.status.success(),
        "desireme {args:?} failed ({:?}):\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

/// A small synthetic benchmark in `dir/name`.
pub fn small_bench(dir: &Path, name: &str) {
    ok(
        dir,
        &[
            "synth", "-o", name, "--docs-per-domain", "30", "--queries-per-domain", "5",
            "--train-queries-per-domain", "40", "--dim", "8",
        ],
    );
}

pub fn train_args(bench: &str, extra: &[&str]) -> Vec<String> {
    let mut v: Vec<String> = [
        "train",
        "--queries",
        &format!("{bench}/train_queries.demb"),
        "--docs",
        &format!("{bench}/docs.demb"),
        "--qrels",
        &format!("{bench}/train_qrels.txt"),
        "--labels",
        &format!("{bench}/train_labels.txt"),
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    v.extend(extra.iter().map(|s| s.to_string()));
    v
}

pub fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

/// Toy category graph where every query gets exactly two top categories.
pub fn label_fixture(dir: &Path) {
    write(dir, "tops.txt", "# tops\nArts\nHistory\nScience\n");
    write(
        dir,
        "graph.tsv",
        "Painting\tVisual arts\nVisual arts\tArts\nPainting\tHistory of art\nHistory of art\tHistory\n\
         Astronomy history\tHistory\nAstronomy history\tAstronomy\nAstronomy\tScience\n",
    );
    write(dir, "docs.tsv", "d1\tPainting\nd2\tAstronomy history\nd3\tVisual arts|Astronomy\n");
    write(dir, "qrels.txt", "q1 0 d1 1\nq2 0 d2 1\nq3 0 d3 1\nq3 0 d9 0\n");
}
