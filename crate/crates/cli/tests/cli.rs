//! End-to-end tests of the binary: every subcommand, the exit-code
//! contract, and the byte-level determinism of training.

use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_marktrans"))
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn scratch(test: &str) -> PathBuf {
    let dir = std::env::temp_dir()
        .join("marktrans-cli-tests")
        .join(format!("{test}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str], stdin: &str) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    use std::io::Write;
    child.stdin.as_mut().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn train_fixture_model(dir: &Path) -> PathBuf {
    let model = dir.join("model.json");
    let out = run(
        &[
            "train",
            data("urdu_pairs.txt").to_str().unwrap(),
            model.to_str().unwrap(),
            "--lexicon",
            data("urdu_lexicon.txt").to_str().unwrap(),
            "--dict-init",
            "lexicon",
            "--lexicon-mode",
            "frozen",
            "--budget",
            "80000",
            "--restarts",
            "2",
            "--jobs",
            "2",
            "--seed",
            "0",
        ],
        "",
    );
    assert_eq!(code(&out), 0, "train failed: {}", stderr(&out));
    assert!(stdout(&out).contains("total_distance=0"), "training did not converge");
    model
}

/// Two invocations with identical inputs and seed produce byte-identical
/// model files.
#[test]
fn acceptance_cmd_train_determinism() {
    let dir = scratch("determinism");
    let mut bytes = Vec::new();
    let mut history_bytes = Vec::new();
    for round in 0..2 {
        let model = dir.join(format!("m{round}.json"));
        let history = dir.join(format!("h{round}.csv"));
        let out = run(
            &[
                "train",
                data("urdu_pairs.txt").to_str().unwrap(),
                model.to_str().unwrap(),
                "--lexicon",
                data("urdu_lexicon.txt").to_str().unwrap(),
                "--history",
                history.to_str().unwrap(),
                "--budget",
                "2000",
                "--seed",
                "7",
            ],
            "",
        );
        assert_eq!(code(&out), 0, "train failed: {}", stderr(&out));
        bytes.push(std::fs::read(&model).unwrap());
        history_bytes.push(std::fs::read(&history).unwrap());
    }
    assert_eq!(bytes[0], bytes[1], "model files differ between identical runs");
    assert_eq!(history_bytes[0], history_bytes[1], "history files differ");
    println!("PASS: identical seeded runs wrote byte-identical model files");
}

#[test]
fn train_translate_score_inspect_pipeline() {
    let dir = scratch("pipeline");
    let model = train_fixture_model(&dir);
    let model = model.to_str().unwrap();

    let out = run(&["translate", model], "the man is in the shop\n");
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "admi dukan men hai\n");

    // trace goes to stderr, final stage equals the stdout line
    let out = run(&["translate", model, "--explain"], "the man is in the shop\n");
    assert_eq!(code(&out), 0);
    let trace: Vec<String> = stderr(&out).lines().map(String::from).collect();
    assert_eq!(trace.len(), 4, "expected a four-stage trace, got {trace:?}");
    assert_eq!(format!("{}\n", trace[3]), stdout(&out));

    let out = run(&["score", model, data("urdu_pairs.txt").to_str().unwrap()], "");
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("total_distance=0"), "score was {text}");
    assert!(text.contains("exact_matches=9"), "score was {text}");

    let out = run(
        &["score", model, data("urdu_pairs.txt").to_str().unwrap(), "--json"],
        "",
    );
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(parsed["total_distance"], 0);

    let out = run(&["inspect", model], "");
    assert_eq!(code(&out), 0);
    let dump = stdout(&out);
    assert!(dump.contains("perm=["), "dump was {dump}");
    assert!(dump.contains("dict:"), "dump was {dump}");
    let again = run(&["inspect", model], "");
    assert_eq!(dump, stdout(&again));
}

#[test]
fn translate_empty_input_and_unknown_words() {
    let dir = scratch("translate-edges");
    let model = train_fixture_model(&dir);
    let model = model.to_str().unwrap();

    let out = run(&["translate", model], "");
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "");

    let out = run(&["translate", model], "zzz qqq\n");
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "zzz qqq\n");
    assert!(stderr(&out).contains("warning"), "expected a pass-through warning");
}

#[test]
fn data_errors_exit_2_and_usage_errors_exit_1() {
    let out = run(&["train", "/no/such/pairs.txt", "/tmp/never.json"], "");
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("/no/such/pairs.txt"));

    let dir = scratch("errors");
    let corrupt = dir.join("corrupt.json");
    std::fs::write(&corrupt, "{\"version\": 1").unwrap();
    let out = run(&["inspect", corrupt.to_str().unwrap()], "");
    assert_eq!(code(&out), 2);

    let empty_pairs = dir.join("empty.txt");
    std::fs::write(&empty_pairs, "# nothing here\n").unwrap();
    let model = train_fixture_model(&dir);
    let out = run(
        &["score", model.to_str().unwrap(), empty_pairs.to_str().unwrap()],
        "",
    );
    assert_eq!(code(&out), 2);

    let out = run(&["translate", "--no-such-flag"], "");
    assert_eq!(code(&out), 1);
    let out = run(&["--help"], "");
    assert_eq!(code(&out), 0);
    let out = run(&["--version"], "");
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("model format"));
}

#[test]
fn normalize_forms_and_empty_language() {
    use marktrans::grammar::{equivalent_up_to, parse_cfg};
    use marktrans::normal_forms::{is_gnf, is_mnf, is_mnf_bounded};

    let parens = parse_cfg(&std::fs::read_to_string(data("parens.cfg")).unwrap()).unwrap();
    for (form, check) in [
        ("gnf", is_gnf as fn(&marktrans::grammar::Cfg) -> bool),
        ("mnf", is_mnf),
        ("mnf2", is_mnf_bounded),
    ] {
        let out = run(
            &["normalize", data("parens.cfg").to_str().unwrap(), "--form", form],
            "",
        );
        assert_eq!(code(&out), 0, "normalize --form {form} failed: {}", stderr(&out));
        let converted = parse_cfg(&stdout(&out)).unwrap();
        assert!(check(&converted), "--form {form} output fails its predicate");
        assert!(equivalent_up_to(&parens, &converted, 8).unwrap());
    }

    // already in Greibach form: conversion keeps the shape
    let dir = scratch("normalize");
    let gnf_path = dir.join("tiny.cfg");
    std::fs::write(&gnf_path, "S -> a\n").unwrap();
    let out = run(&["normalize", gnf_path.to_str().unwrap(), "--form", "gnf"], "");
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).trim(), "S -> a");

    let out = run(
        &["normalize", data("empty_language.cfg").to_str().unwrap(), "--form", "mnf"],
        "",
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("empty language"));
}

#[test]
fn generate_sorted_and_deterministic() {
    let grammar = data("parens.cfg");
    let out = run(&["generate", grammar.to_str().unwrap(), "--max-len", "5"], "");
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "( + )\n( ( + ) )\n");

    let out = run(&["generate", grammar.to_str().unwrap(), "--max-len", "0"], "");
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "");

    let a = run(&["generate", grammar.to_str().unwrap(), "--max-len", "9"], "");
    let b = run(&["generate", grammar.to_str().unwrap(), "--max-len", "9"], "");
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn print_config_defaults_and_precedence() {
    let out = run(&["train", "--print-config"], "");
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let defaults = stdout(&out);
    assert!(defaults.contains("alpha=0.97"), "defaults were {defaults}");
    assert!(defaults.contains("budget=200000"));
    assert!(defaults.contains("t0=auto"));

    let dir = scratch("config");
    let cfg = dir.join("train.cfg");
    std::fs::write(&cfg, "alpha=0.5\nseed=99\n").unwrap();
    let out = run(
        &["train", "--print-config", "--config", cfg.to_str().unwrap()],
        "",
    );
    let merged = stdout(&out);
    assert!(merged.contains("alpha=0.5"));
    assert!(merged.contains("seed=99"));

    // flags beat the file
    let out = run(
        &[
            "train",
            "--print-config",
            "--config",
            cfg.to_str().unwrap(),
            "--alpha",
            "0.9",
        ],
        "",
    );
    let flagged = stdout(&out);
    assert!(flagged.contains("alpha=0.9"), "was {flagged}");
    assert!(flagged.contains("seed=99"));

    let bad = dir.join("bad.cfg");
    std::fs::write(&bad, "no_such_key=1\n").unwrap();
    let out = run(
        &["train", "--print-config", "--config", bad.to_str().unwrap()],
        "",
    );
    assert_eq!(code(&out), 2);
}
