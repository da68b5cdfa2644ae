//! End-to-end tests of the `sgm` binary: each test drives the executable the
//! way a user would and checks output formats, numeric results, determinism,
//! and error reporting.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sgm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgm"))
        .args(args)
        .output()
        .expect("failed to spawn sgm")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr),
    );
    String::from_utf8(out.stdout.clone()).expect("stdout is not UTF-8")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_file(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, content).expect("write fixture");
    path
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// Two-label toy corpus: label 1 emits term 0, label 2 emits term 1.
fn toy_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let train = write_file(dir, "train.txt", "1 0:2\n2 1:2\n");
    let index = dir.join("toy.idx");
    let out = sgm(&[
        "train",
        "--input",
        path_str(&train),
        "--output",
        path_str(&index),
    ]);
    stdout(&out);
    (train, index)
}

#[test]
fn train_reports_stats_and_dump_lists_terms() {
    let dir = tempfile::tempdir().unwrap();
    let train = write_file(dir.path(), "train.txt", "1 0:2\n2 1:2\n");
    let index = dir.path().join("m.idx");
    let out = sgm(&[
        "train",
        "--input",
        path_str(&train),
        "--output",
        path_str(&index),
    ]);
    let text = stdout(&out);
    assert!(text.contains("kind=mnb"), "got: {text}");
    assert!(text.contains("labels=2"), "got: {text}");
    assert!(text.contains("postings=2"), "got: {text}");

    let dump = stdout(&sgm(&["index", "dump", "--index", path_str(&index)]));
    assert!(dump.contains("term 0"), "got: {dump}");
    assert!(dump.contains("label 1"), "got: {dump}");
    assert!(dump.contains("kind=root"), "got: {dump}");
}

#[test]
fn missing_input_fails_with_the_path_in_the_message() {
    let dir = tempfile::tempdir().unwrap();
    let out = sgm(&[
        "train",
        "--input",
        path_str(&dir.path().join("nope.txt")),
        "--output",
        path_str(&dir.path().join("o.idx")),
    ]);
    assert!(!out.status.success());
    assert!(
        stderr(&out).contains("nope.txt"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn tdm_rejects_documents_without_terms() {
    let dir = tempfile::tempdir().unwrap();
    let train = write_file(dir.path(), "bad.txt", "1\n2 0:2\n");
    let out = sgm(&[
        "train",
        "--input",
        path_str(&train),
        "--output",
        path_str(&dir.path().join("o.idx")),
        "--set",
        "model.kind=tdm",
    ]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("empty"), "stderr: {}", stderr(&out));
}

#[test]
fn predict_matches_the_hand_computed_joint() {
    let dir = tempfile::tempdir().unwrap();
    let (_, index) = toy_fixture(dir.path());
    let query = write_file(dir.path(), "q.txt", "0:1\n");
    let text = stdout(&sgm(&[
        "predict",
        "--index",
        path_str(&index),
        "--input",
        path_str(&query),
    ]));
    // Defaults give each label p(term | label) = 0.75 on its own term, prior
    // one half, so the winning joint is ln(0.5 * 0.75) = ln 0.375.
    let line = text.lines().next().expect("one prediction line");
    let fields: Vec<&str> = line.split_whitespace().collect();
    assert_eq!(fields[0], "0");
    assert_eq!(fields[1], "1");
    let joint: f64 = fields[2].parse().unwrap();
    assert!((joint - 0.375f64.ln()).abs() < 1e-12, "joint {joint}");
    assert_eq!(text.lines().count(), 1);
}

#[test]
fn rank_truncates_to_the_label_count_and_to_k() {
    let dir = tempfile::tempdir().unwrap();
    let (_, index) = toy_fixture(dir.path());
    let query = write_file(dir.path(), "q.txt", "0:1\n");
    let all = stdout(&sgm(&[
        "rank",
        "--scorer",
        "sgm",
        "--index",
        path_str(&index),
        "--input",
        path_str(&query),
        "-k",
        "100",
    ]));
    assert_eq!(all.lines().count(), 2, "got: {all}");
    let first: Vec<&str> = all.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(&first[..3], &["0", "1", "1"], "query, rank, label");

    let top1 = stdout(&sgm(&[
        "rank",
        "--scorer",
        "sgm",
        "--index",
        path_str(&index),
        "--input",
        path_str(&query),
        "-k",
        "1",
    ]));
    assert_eq!(top1.lines().count(), 1, "got: {top1}");
}

#[test]
fn vsm_ranks_by_cosine_similarity() {
    let dir = tempfile::tempdir().unwrap();
    let (train, _) = toy_fixture(dir.path());
    let query = write_file(dir.path(), "q.txt", "0:1\n");
    let text = stdout(&sgm(&[
        "rank",
        "--scorer",
        "vsm",
        "--train",
        path_str(&train),
        "--input",
        path_str(&query),
        "-k",
        "5",
    ]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    let first: Vec<&str> = lines[0].split_whitespace().collect();
    assert_eq!(&first[..3], &["0", "1", "1"]);
    let score: f64 = first[3].parse().unwrap();
    assert!(
        (score - 1.0).abs() < 1e-12,
        "parallel vectors have cosine 1"
    );
}

#[test]
fn unknown_scorer_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let query = write_file(dir.path(), "q.txt", "0:1\n");
    let out = sgm(&["rank", "--scorer", "tfidf", "--input", path_str(&query)]);
    assert_eq!(out.status.code(), Some(2), "clap rejects bad enum values");
    assert!(stderr(&out).contains("possible values"));
}

#[test]
fn eval_ranking_reports_map_and_ndcg() {
    let dir = tempfile::tempdir().unwrap();
    let ranking = write_file(dir.path(), "r.txt", "0 1 1 -0.5\n0 2 2 -1.5\n");
    let judgments = write_file(dir.path(), "j.txt", "0 2 1\n");
    let text = stdout(&sgm(&[
        "eval",
        "ranking",
        "--ranking",
        path_str(&ranking),
        "--judgments",
        path_str(&judgments),
    ]));
    let map: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("map "))
        .expect("map line")
        .parse()
        .unwrap();
    assert!((map - 0.5).abs() < 1e-12, "single relevant label at rank 2");
    let ndcg: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("ndcg@20 "))
        .expect("ndcg line")
        .parse()
        .unwrap();
    assert!((ndcg - 1.0 / 3f64.log2()).abs() < 1e-12, "got {ndcg}");
}

#[test]
fn eval_compare_reports_the_t_test_and_improvements() {
    let dir = tempfile::tempdir().unwrap();
    let baseline = write_file(dir.path(), "a.txt", "0\n0\n0\n");
    let improved = write_file(dir.path(), "b.txt", "1\n2\n3\n");
    let text = stdout(&sgm(&[
        "eval",
        "compare",
        "--baseline",
        path_str(&baseline),
        "--improved",
        path_str(&improved),
    ]));
    let grab = |prefix: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(prefix))
            .unwrap_or_else(|| panic!("missing `{prefix}` in: {text}"))
            .parse()
            .unwrap()
    };
    assert!((grab("t ") - 12f64.sqrt()).abs() < 1e-12);
    let p_expected = 0.5 * (1.0 - 12f64.sqrt() / 14f64.sqrt());
    assert!((grab("p ") - p_expected).abs() < 1e-12);
    assert!(text.contains("significance ‡"), "got: {text}");
    assert!(
        !text.contains("\nri "),
        "no improvement ratio for a zero baseline"
    );

    // With a positive baseline and a best score both ratios are reported.
    let baseline2 = write_file(dir.path(), "a2.txt", "0.5\n0.5\n0.5\n");
    let text2 = stdout(&sgm(&[
        "eval",
        "compare",
        "--baseline",
        path_str(&baseline2),
        "--improved",
        path_str(&improved),
        "--best",
        "3.0",
    ]));
    let grab2 = |prefix: &str| -> f64 {
        text2
            .lines()
            .find_map(|l| l.strip_prefix(prefix))
            .unwrap_or_else(|| panic!("missing `{prefix}` in: {text2}"))
            .parse()
            .unwrap()
    };
    assert!((grab2("ri ") - 3.0).abs() < 1e-12, "2.0 / 0.5 - 1");
    // 1 - (3 - 2) / (3 - 0.5) = 0.6
    assert!((grab2("rer ") - 0.6).abs() < 1e-12);
}

#[test]
fn eval_classification_agrees_with_itself() {
    let dir = tempfile::tempdir().unwrap();
    let (_, index) = toy_fixture(dir.path());
    let val = write_file(dir.path(), "val.txt", "1 0:3\n2 1:5\n1 0:1\n");
    let preds = dir.path().join("preds.txt");
    stdout(&sgm(&[
        "predict",
        "--index",
        path_str(&index),
        "--input",
        path_str(&val),
        "--output",
        path_str(&preds),
    ]));
    let text = stdout(&sgm(&[
        "eval",
        "classification",
        "--predictions",
        path_str(&preds),
        "--references",
        path_str(&val),
    ]));
    assert!(text.contains("micro_f1 1.0"), "got: {text}");
    assert!(text.contains("macro_f1 1.0"), "got: {text}");
}

#[test]
fn search_trace_is_complete_and_seed_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let train = write_file(dir.path(), "tr.txt", "1 0:3 1:1\n2 0:1 1:3\n1 0:2\n2 1:2\n");
    let val = write_file(dir.path(), "val.txt", "1 0:2 1:1\n2 1:2\n");
    let args = [
        "search",
        "--train",
        path_str(&train),
        "--validation",
        path_str(&val),
        "--param",
        "smooth.beta:0.05:0.95",
        "--iterations",
        "40",
        "--subiterations",
        "40",
        "--seed",
        "11",
    ];
    let first = stdout(&sgm(&args));
    let second = stdout(&sgm(&args));
    assert_eq!(
        first, second,
        "same seed must reproduce the search byte for byte"
    );
    // 1600 trace lines plus the best point and its value.
    assert_eq!(first.lines().count(), 1602);
    assert!(
        first.contains("\nsmooth.beta="),
        "got tail: {}",
        &first[first.len() - 80..]
    );
    assert!(first.lines().last().unwrap().starts_with("best_value="));

    let other_seed = stdout(&sgm(&[
        "search",
        "--train",
        path_str(&train),
        "--validation",
        path_str(&val),
        "--param",
        "smooth.beta:0.05:0.95",
        "--iterations",
        "40",
        "--subiterations",
        "40",
        "--seed",
        "12",
    ]));
    assert_ne!(first, other_seed, "different seeds explore differently");
}

#[test]
fn search_rejects_unknown_parameter_keys() {
    let dir = tempfile::tempdir().unwrap();
    let train = write_file(dir.path(), "tr.txt", "1 0:2\n2 1:2\n");
    let out = sgm(&[
        "search",
        "--train",
        path_str(&train),
        "--validation",
        path_str(&train),
        "--param",
        "bogus.key:0:1",
    ]);
    assert!(!out.status.success());
    assert!(
        stderr(&out).contains("bogus.key"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn set_overrides_beat_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let train = write_file(dir.path(), "train.txt", "1 0:2\n2 1:2\n");
    let query = write_file(dir.path(), "q.txt", "0:1 1:2\n");
    let cfg = write_file(dir.path(), "cfg.txt", "smooth.beta = 0.9\n");

    let predict_with = |name: &str, extra: &[&str]| -> String {
        let index = dir.path().join(name);
        let mut args = vec![
            "train",
            "--input",
            path_str(&train),
            "--output",
            path_str(&index),
        ];
        args.extend_from_slice(extra);
        stdout(&sgm(&args));
        stdout(&sgm(&[
            "predict",
            "--index",
            path_str(&index),
            "--input",
            path_str(&query),
        ]))
    };

    let file_only = predict_with("a.idx", &["--config", path_str(&cfg)]);
    let set_only = predict_with("b.idx", &["--set", "smooth.beta=0.1"]);
    let both = predict_with(
        "c.idx",
        &["--config", path_str(&cfg), "--set", "smooth.beta=0.1"],
    );
    assert_eq!(both, set_only, "--set wins over the file");
    assert_ne!(both, file_only, "the discount changes the scores");
}

#[test]
fn split_partitions_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    // Weights in the canonical `{:?}` float form so lines round-trip exactly.
    let lines: Vec<String> = (0..10).map(|t| format!("{t}:1.0")).collect();
    let corpus = write_file(dir.path(), "c.txt", &(lines.join("\n") + "\n"));
    let train_out = dir.path().join("tr.txt");
    let test_out = dir.path().join("te.txt");
    let args = [
        "split",
        "--input",
        path_str(&corpus),
        "--train-output",
        path_str(&train_out),
        "--test-output",
        path_str(&test_out),
        "--test-fraction",
        "0.3",
        "--seed",
        "5",
    ];
    let summary = stdout(&sgm(&args));
    assert!(summary.contains("train=7 test=3"), "got: {summary}");

    let read = |p: &Path| std::fs::read_to_string(p).unwrap();
    let (tr1, te1) = (read(&train_out), read(&test_out));
    assert_eq!(tr1.lines().count(), 7);
    assert_eq!(te1.lines().count(), 3);
    let mut recombined: Vec<&str> = tr1.lines().chain(te1.lines()).collect();
    recombined.sort_unstable();
    let mut original: Vec<&str> = lines.iter().map(String::as_str).collect();
    original.sort_unstable();
    assert_eq!(
        recombined, original,
        "split loses or duplicates no document"
    );

    stdout(&sgm(&args));
    assert_eq!(read(&train_out), tr1, "same seed reproduces the split");
    assert_eq!(read(&test_out), te1);
}

#[test]
fn threaded_prediction_matches_single_threaded() {
    let dir = tempfile::tempdir().unwrap();
    let (_, index) = toy_fixture(dir.path());
    let docs = write_file(dir.path(), "docs.txt", "0:1\n1:3\n0:2 1:1\n1:1\n0:5\n");
    let one = stdout(&sgm(&[
        "predict",
        "--index",
        path_str(&index),
        "--input",
        path_str(&docs),
        "--threads",
        "1",
    ]));
    let four = stdout(&sgm(&[
        "predict",
        "--index",
        path_str(&index),
        "--input",
        path_str(&docs),
        "--threads",
        "4",
    ]));
    assert_eq!(one, four, "thread count must not change output or order");
}

#[test]
fn powerset_training_predicts_label_sets() {
    let dir = tempfile::tempdir().unwrap();
    let train = write_file(dir.path(), "ml.txt", "1,2 0:1 1:1\n3 2:4\n");
    let index = dir.path().join("pw.idx");
    stdout(&sgm(&[
        "train",
        "--input",
        path_str(&train),
        "--output",
        path_str(&index),
        "--powerset",
    ]));
    let query = write_file(dir.path(), "q.txt", "0:1\n");
    let text = stdout(&sgm(&[
        "predict",
        "--index",
        path_str(&index),
        "--input",
        path_str(&query),
    ]));
    let fields: Vec<&str> = text.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(
        fields[1], "1,2",
        "the class decodes back to the original set"
    );
}
