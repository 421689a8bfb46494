use std::path::{Path, PathBuf};
use std::process::Command;

use paco::cli::{self, CHECKPOINT, EVAL_KV, MANIFEST, METRICS, MODEL, SUMMARY, TEST_CORPUS, TRAIN_CORPUS};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn paco(args: &[&str]) -> i32 {
    let mut v = vec!["paco"];
    v.extend_from_slice(args);
    cli::run(v)
}

fn toy_config() -> String {
    fixture("toy.toml").display().to_string()
}

fn prepared(dir: &Path) {
    let out = dir.display().to_string();
    assert_eq!(paco(&["prepare", "-c", &toy_config(), "-o", &out]), 0);
}

fn trained(dir: &Path, extra: &[&str]) -> i32 {
    let (cfg, out) = (toy_config(), dir.display().to_string());
    let mut args = vec!["train", "-c", &cfg, "-o", &out];
    args.extend_from_slice(extra);
    paco(&args)
}

fn read(p: PathBuf) -> Vec<u8> {
    std::fs::read(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

/// Metric rows without the wall-clock column.
fn metric_rows(dir: &Path) -> Vec<String> {
    String::from_utf8(read(dir.join(METRICS)))
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once('\t').unwrap().0.to_string())
        .collect()
}

#[test]
fn prepare_toy_manifest_counts() {
    let t = tempfile::tempdir().unwrap();
    prepared(t.path());
    let m: serde_json::Value = serde_json::from_slice(&read(t.path().join(MANIFEST))).unwrap();
    assert_eq!(m["users"], 12);
    assert_eq!(m["items"], 8);
    assert_eq!(m["vocabulary"], 16);
    assert_eq!(m["observations"], 60);
    assert_eq!(m["malformed_lines"], 1);
    assert_eq!(m["duplicates_dropped"], 1);
    assert_eq!(m["train_observations"], 48);
    assert_eq!(m["test_observations"], 12);
    let vocab = String::from_utf8(read(t.path().join("vocabulary.txt"))).unwrap();
    assert_eq!(vocab.lines().count(), 16);
    assert!(vocab.lines().all(|w| w.len() >= 3));
}

#[test]
fn prepare_is_byte_identical_on_rerun() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    prepared(a.path());
    prepared(b.path());
    for f in [MANIFEST, TRAIN_CORPUS, TEST_CORPUS, "vocabulary.txt"] {
        assert_eq!(read(a.path().join(f)), read(b.path().join(f)), "{f}");
    }
}

#[test]
fn prepare_seed_override_changes_split() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    prepared(a.path());
    let out = b.path().display().to_string();
    assert_eq!(paco(&["prepare", "-c", &toy_config(), "-o", &out, "--seed", "99"]), 0);
    assert_ne!(read(a.path().join(TEST_CORPUS)), read(b.path().join(TEST_CORPUS)));
}

#[test]
fn missing_input_is_data_error_without_outputs() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("out");
    let code = paco(&[
        "prepare",
        "-o",
        &out.display().to_string(),
        "--input",
        "/nonexistent/reviews.tsv",
    ]);
    assert_eq!(code, 2);
    assert!(!out.exists());
}

#[test]
fn invalid_config_is_config_error_without_outputs() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("out");
    let code = paco(&[
        "prepare",
        "-c",
        &toy_config(),
        "-o",
        &out.display().to_string(),
        "--test-fraction",
        "1.5",
    ]);
    assert_eq!(code, 1);
    assert!(!out.exists());

    let bad = t.path().join("bad.toml");
    std::fs::write(&bad, "output_dir = \"o\"\n[model]\nstencil = 2\n").unwrap();
    assert_eq!(paco(&["train", "-c", &bad.display().to_string()]), 1);
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(paco(&["frobnicate"]), 1);
    assert_eq!(paco(&["train", "--threads", "many", "-o", "x"]), 1);
    assert_eq!(paco(&["--help"]), 0);
}

#[test]
fn binary_reports_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_paco");
    let st = Command::new(bin).arg("prepare").output().unwrap();
    assert_eq!(st.status.code(), Some(1));
    let st = Command::new(bin).arg("--version").output().unwrap();
    assert_eq!(st.status.code(), Some(0));
}

#[test]
fn train_writes_one_row_per_iteration() {
    let t = tempfile::tempdir().unwrap();
    prepared(t.path());
    assert_eq!(trained(t.path(), &[]), 0);
    let rows = metric_rows(t.path());
    assert_eq!(rows.len(), 11, "header plus 10 iterations");
    assert!(rows[0].starts_with("iteration\ttrain_rmse\ttest_rmse\tlog_ppx\tjoint_nll"));
    for (i, r) in rows[1..].iter().enumerate() {
        assert!(r.starts_with(&format!("{}\t", i + 1)));
    }
    for f in [MODEL, SUMMARY, CHECKPOINT] {
        assert!(t.path().join(f).exists(), "{f}");
    }
    assert!(!t.path().join(".lock").exists());
}

#[test]
fn train_needs_prepared_corpus() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(trained(t.path(), &[]), 2);
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let whole = tempfile::tempdir().unwrap();
    prepared(whole.path());
    assert_eq!(trained(whole.path(), &[]), 0);

    let split = tempfile::tempdir().unwrap();
    prepared(split.path());
    assert_eq!(trained(split.path(), &["--stop-after", "5"]), 0);
    assert!(!split.path().join(MODEL).exists());
    assert_eq!(metric_rows(split.path()).len(), 6);
    assert_eq!(trained(split.path(), &[]), 0);

    assert_eq!(read(whole.path().join(MODEL)), read(split.path().join(MODEL)));
    assert_eq!(read(whole.path().join(SUMMARY)), read(split.path().join(SUMMARY)));
    assert_eq!(metric_rows(whole.path()), metric_rows(split.path()));
}

#[test]
fn resume_after_stop_between_checkpoints_truncates_the_log() {
    let whole = tempfile::tempdir().unwrap();
    prepared(whole.path());
    assert_eq!(trained(whole.path(), &[]), 0);

    let t = tempfile::tempdir().unwrap();
    prepared(t.path());
    assert_eq!(trained(t.path(), &["--stop-after", "7"]), 0);
    // Simulate a crash after iteration 7: roll the checkpoint back to 5.
    assert_eq!(trained(t.path(), &["--no-resume", "--stop-after", "5"]), 0);
    let ck = read(t.path().join(CHECKPOINT));
    assert_eq!(trained(t.path(), &["--no-resume", "--stop-after", "7"]), 0);
    std::fs::write(t.path().join(CHECKPOINT), ck).unwrap();
    assert_eq!(metric_rows(t.path()).len(), 8);
    assert_eq!(trained(t.path(), &[]), 0);
    assert_eq!(metric_rows(whole.path()), metric_rows(t.path()));
    assert_eq!(read(whole.path().join(MODEL)), read(t.path().join(MODEL)));
}

#[test]
fn resume_refuses_changed_configuration() {
    let t = tempfile::tempdir().unwrap();
    prepared(t.path());
    assert_eq!(trained(t.path(), &["--stop-after", "5"]), 0);
    assert_eq!(trained(t.path(), &["--seed", "77"]), 1);
    assert_eq!(trained(t.path(), &["--seed", "77", "--no-resume"]), 0);
}

#[test]
fn thread_count_does_not_change_results() {
    let one = tempfile::tempdir().unwrap();
    let four = tempfile::tempdir().unwrap();
    prepared(one.path());
    prepared(four.path());
    assert_eq!(trained(one.path(), &["--threads", "1"]), 0);
    assert_eq!(trained(four.path(), &["--threads", "4"]), 0);
    assert_eq!(metric_rows(one.path()), metric_rows(four.path()));
    assert_eq!(read(one.path().join(MODEL)), read(four.path().join(MODEL)));
}

#[test]
fn commands_leave_inputs_untouched() {
    let before = read(fixture("toy.tsv"));
    let t = tempfile::tempdir().unwrap();
    prepared(t.path());
    let train_cache = read(t.path().join(TRAIN_CORPUS));
    assert_eq!(trained(t.path(), &[]), 0);
    let out = t.path().display().to_string();
    assert_eq!(paco(&["evaluate", "-c", &toy_config(), "-o", &out]), 0);
    assert_eq!(read(fixture("toy.tsv")), before);
    assert_eq!(read(t.path().join(TRAIN_CORPUS)), train_cache);
}

#[test]
fn evaluate_writes_both_formats() {
    let t = tempfile::tempdir().unwrap();
    prepared(t.path());
    assert_eq!(trained(t.path(), &[]), 0);
    let out = t.path().display().to_string();
    assert_eq!(paco(&["evaluate", "-c", &toy_config(), "-o", &out]), 0);
    let kv = String::from_utf8(read(t.path().join(EVAL_KV))).unwrap();
    let get = |k: &str| -> f64 {
        kv.lines()
            .find_map(|l| l.strip_prefix(&format!("{k}=")))
            .unwrap_or_else(|| panic!("{k} missing"))
            .parse()
            .unwrap()
    };
    assert_eq!(get("n_test"), 12.0);
    let sum = get("log_ppx_nats_per_word") + get("rating_nll");
    assert!((get("joint_nll") - sum).abs() < 1e-12);
    assert!(t.path().join("eval.txt").exists());

    // Baseline equal to the global mean gives a cold-start table.
    let base = t.path().join("baseline.tsv");
    let test = paco::corpus::read_corpus(&t.path().join(TEST_CORPUS)).unwrap();
    let lines: String = test
        .observations()
        .iter()
        .map(|o| {
            format!(
                "{}\t{}\t{}\n",
                test.users.name(o.user as usize).unwrap(),
                test.items.name(o.item as usize).unwrap(),
                test.global_mean()
            )
        })
        .collect();
    std::fs::write(&base, lines).unwrap();
    let code = paco(&["evaluate", "-c", &toy_config(), "-o", &out, "--baseline", &base.display().to_string()]);
    assert_eq!(code, 0);
    let kv = String::from_utf8(read(t.path().join(EVAL_KV))).unwrap();
    assert!(kv.contains("cold_start.item.1-2.count="));
}

#[test]
fn evaluate_refuses_vocabulary_mismatch() {
    let t = tempfile::tempdir().unwrap();
    prepared(t.path());
    assert_eq!(trained(t.path(), &[]), 0);
    let other = tempfile::tempdir().unwrap();
    let out = other.path().display().to_string();
    assert_eq!(paco(&["prepare", "-c", &toy_config(), "-o", &out, "--min-word-len", "5"]), 0);
    for f in [TRAIN_CORPUS, TEST_CORPUS] {
        std::fs::copy(other.path().join(f), t.path().join(f)).unwrap();
    }
    let out = t.path().display().to_string();
    assert_eq!(paco(&["evaluate", "-c", &toy_config(), "-o", &out]), 2);
}

#[test]
fn inspect_writes_reports_and_rejects_unknown_ids() {
    let t = tempfile::tempdir().unwrap();
    prepared(t.path());
    assert_eq!(trained(t.path(), &[]), 0);
    let out = t.path().display().to_string();
    let c = toy_config();
    assert_eq!(paco(&["inspect", "-c", &c, "-o", &out, "--item", "beer3", "--pair", "user01,beer2"]), 0);
    let reports = t.path().join("reports");
    for f in ["blocks_stencil0.txt", "item_clusters_stencil0.txt", "items.txt", "pairs.txt"] {
        assert!(reports.join(f).exists(), "{f}");
    }
    let blocks = String::from_utf8(read(reports.join("blocks_stencil0.txt"))).unwrap();
    assert!(blocks.starts_with("# stencil 0"));

    assert_eq!(paco(&["inspect", "-c", &c, "-o", &out, "--item", "nope"]), 2);
    assert_eq!(paco(&["inspect", "-c", &c, "-o", &out, "--pair", "user01,nope"]), 2);
    assert_eq!(paco(&["inspect", "-c", &c, "-o", &out, "--stencil", "1"]), 2);
    assert_eq!(paco(&["inspect", "-c", &c, "-o", &out, "--pair", "user01"]), 1);
}

#[test]
fn locked_directory_is_refused() {
    let t = tempfile::tempdir().unwrap();
    prepared(t.path());
    let _lock = cli::DirLock::acquire(t.path()).unwrap();
    assert_eq!(trained(t.path(), &[]), 1);
}
