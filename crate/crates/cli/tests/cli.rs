//! End-to-end tests that drive the compiled `idiorec` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_idiorec"))
}

/// Runs the binary and returns (exit code, stdout, stderr).
fn run(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().expect("binary should spawn");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
        .to_str()
        .unwrap()
        .to_string()
}

/// Builds the 50-category fixture index into `dir` and returns its path.
fn build_fixture_index(dir: &Path) -> String {
    let idx = dir.join("ont.idx").to_str().unwrap().to_string();
    let (code, _, err) = run(&["build-index", &fixture("ontology_50.tsv"), "--out", &idx]);
    assert_eq!(code, 0, "build-index failed: {err}");
    idx
}

/// Generates a synthetic corpus and returns (corpus dir, index path, profiles dir).
fn synth_corpus(dir: &Path, seed: &str, users: &str) -> (PathBuf, String, String) {
    let out = dir.join("corpus");
    let (code, _, err) = run(&[
        "--seed",
        seed,
        "synth",
        "--out",
        out.to_str().unwrap(),
        "--clusters",
        "2",
        "--users",
        users,
    ]);
    assert_eq!(code, 0, "synth failed: {err}");
    let idx = out.join("index.idx").to_str().unwrap().to_string();
    let db = out.join("profiles").to_str().unwrap().to_string();
    (out, idx, db)
}

// ------------------------------------------------------------- exit codes

#[test]
fn help_and_version_exit_zero() {
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("idiorec"));
    assert!(out.contains("recommend"));
    let (code, out, _) = run(&["--version"]);
    assert_eq!(code, 0);
    assert!(out.contains("idiorec"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let (code, _, err) = run(&["--frobnicate"]);
    assert_eq!(code, 1);
    assert!(!err.is_empty());
}

#[test]
fn missing_input_is_a_data_error() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("x.idx");
    let (code, _, err) = run(&["build-index", "/no/such/file.tsv", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("error:"));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("x.idx");
    let (code, _, err) = run(&[
        "--set",
        "frobnication_level=9",
        "build-index",
        &fixture("ontology_50.tsv"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("frobnication_level"));
}

#[test]
fn bad_config_file_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("bad.conf");
    fs::write(&cfg, "k1 = not-a-number\n").unwrap();
    let out = tmp.path().join("x.idx");
    let (code, _, err) = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "build-index",
        &fixture("ontology_50.tsv"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("k1"));
}

#[test]
fn recommend_top_zero_is_a_usage_error() {
    // the flag is validated before any file access
    let (code, _, _) = run(&[
        "recommend",
        "/no/such.profile",
        "--db",
        "/no/such/db",
        "--index",
        "/no/such.idx",
        "--top",
        "0",
    ]);
    assert_eq!(code, 1);
}

#[test]
fn evaluate_holdout_out_of_range_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let (_, idx, db) = synth_corpus(tmp.path(), "1", "3");
    let (code, _, err) = run(&["evaluate", "--db", &db, "--index", &idx, "--holdout", "1.0"]);
    assert_eq!(code, 1);
    assert!(err.contains("holdout"));
}

#[test]
fn recommend_with_too_few_candidates_is_a_data_error() {
    let tmp = TempDir::new().unwrap();
    let (out, idx, db) = synth_corpus(tmp.path(), "1", "3");
    let target = out.join("profiles/c00u00.profile");
    // 6 users leave 5 candidates, below the default pool size of 10
    let (code, _, err) = run(&[
        "recommend",
        target.to_str().unwrap(),
        "--db",
        &db,
        "--index",
        &idx,
    ]);
    assert_eq!(code, 2);
    assert!(err.contains("pool"));
}

#[test]
fn stats_rejects_unrecognized_files() {
    let tmp = TempDir::new().unwrap();
    let junk = tmp.path().join("junk.txt");
    fs::write(&junk, "this is not a known file\n").unwrap();
    let (code, _, err) = run(&["stats", junk.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("neither an index nor a profile"));
}

// ------------------------------------------------------------ build-index

#[test]
fn build_index_reports_fixture_counts() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("ont.idx");
    let (code, stdout, _) = run(&[
        "--csv",
        "build-index",
        &fixture("ontology_50.tsv"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("categories=50 urls=200 topics=50 skipped=0"));
    // level histogram of the fixture tree
    for row in ["1,1", "2,13", "3,17", "4,12", "5,6", "6,1", "7,0"] {
        assert!(stdout.contains(&format!("\n{row}\n")), "missing row {row}");
    }
    assert!(out.exists());
}

#[test]
fn build_index_parses_the_rdf_fixture() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("sample.idx");
    let (code, stdout, _) = run(&[
        "--csv",
        "build-index",
        &fixture("sample.rdf"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "rdf fixture should parse");
    assert!(stdout.contains("categories=5 urls=4 topics=3"));

    // the saved index reads back with the same shape
    let (code, stdout, _) = run(&["stats", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.contains("5 categories, 4 urls"));
}

#[test]
fn stats_reads_back_a_saved_index() {
    let tmp = TempDir::new().unwrap();
    let idx = build_fixture_index(tmp.path());
    let (code, stdout, _) = run(&["stats", &idx]);
    assert_eq!(code, 0);
    assert!(stdout.contains("50 categories, 200 urls"));
    assert!(stdout.contains("level histogram: 1 13 17 12 6 1 0"));
}

// ----------------------------------------------------------------- ingest

#[test]
fn ingest_coverage_fixture_maps_seventy_percent() {
    let tmp = TempDir::new().unwrap();
    let idx = build_fixture_index(tmp.path());
    let out = tmp.path().join("cov.profile");
    let (code, stdout, _) = run(&[
        "--csv",
        "ingest",
        &fixture("bookmarks_coverage.txt"),
        "--index",
        &idx,
        "--user",
        "cov",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("total=20 mapped=14 unmapped=6 mapped_fraction=0.700000"));
    // 13 exact hits plus one resolved by truncating a single path segment
    assert!(stdout.contains("\n0,13\n"));
    assert!(stdout.contains("\n1,1\n"));
}

#[test]
fn ingest_small_fixture_coclassifies_football_urls() {
    let tmp = TempDir::new().unwrap();
    let idx = build_fixture_index(tmp.path());
    let out = tmp.path().join("small.profile");
    let (code, _, _) = run(&[
        "ingest",
        &fixture("bookmarks_small.txt"),
        "--index",
        &idx,
        "--user",
        "small",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(&out).unwrap();
    // the football landing page and the co-classified guardian football host
    // both land in 1.13.1.5, so that entry carries two votes
    assert!(text.contains("1.13.1.5:2;"), "profile was:\n{text}");
    assert!(text.contains("1.5.1:1;"));
    assert!(text.contains("1.5.2:1;"));
    assert!(text.contains("1.20.1:1;"));
    let (code, stdout, _) = run(&["--csv", "stats", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.contains("entries=4 votes=5"));
}

#[test]
fn ingest_netscape_fixture_resolves_three_of_four() {
    let tmp = TempDir::new().unwrap();
    let idx = build_fixture_index(tmp.path());
    let out = tmp.path().join("ns.profile");
    let (code, stdout, _) = run(&[
        "--csv",
        "ingest",
        &fixture("bookmarks_netscape.html"),
        "--index",
        &idx,
        "--user",
        "ns",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("total=4 mapped=3 unmapped=1"), "got:\n{stdout}");
}

#[test]
fn ingest_opera_fixture_with_no_hits_warns_but_succeeds() {
    let tmp = TempDir::new().unwrap();
    let idx = build_fixture_index(tmp.path());
    let out = tmp.path().join("opera.profile");
    let (code, stdout, _) = run(&[
        "ingest",
        &fixture("bookmarks_opera.adr"),
        "--index",
        &idx,
        "--user",
        "opera",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "an empty profile is not an error");
    assert!(stdout.contains("warning: no bookmarks mapped"));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("IDIOREC-PROFILE"));
}

#[test]
fn integer_profiles_need_an_index_to_read_back() {
    let tmp = TempDir::new().unwrap();
    let idx = build_fixture_index(tmp.path());
    let out = tmp.path().join("int.profile");
    let (code, _, _) = run(&[
        "ingest",
        &fixture("bookmarks_small.txt"),
        "--index",
        &idx,
        "--user",
        "small",
        "--out",
        out.to_str().unwrap(),
        "--encoding",
        "integer",
    ]);
    assert_eq!(code, 0);

    let (code, _, err) = run(&["stats", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("integer-encoded"));

    let (code, stdout, _) = run(&["--csv", "stats", out.to_str().unwrap(), "--index", &idx]);
    assert_eq!(code, 0);
    assert!(stdout.contains("entries=4 votes=5"));
}

// ------------------------------------------------------------- similarity

#[test]
fn similarity_is_symmetric_across_invocations() {
    let tmp = TempDir::new().unwrap();
    let idx = build_fixture_index(tmp.path());
    let small = tmp.path().join("small.profile");
    let cov = tmp.path().join("cov.profile");
    for (src, user, out) in [
        ("bookmarks_small.txt", "small", &small),
        ("bookmarks_coverage.txt", "cov", &cov),
    ] {
        let (code, _, _) = run(&[
            "ingest",
            &fixture(src),
            "--index",
            &idx,
            "--user",
            user,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
    }
    let (code, fwd, _) = run(&[
        "--csv",
        "similarity",
        small.to_str().unwrap(),
        cov.to_str().unwrap(),
        "--index",
        &idx,
    ]);
    assert_eq!(code, 0);
    let (_, rev, _) = run(&[
        "--csv",
        "similarity",
        cov.to_str().unwrap(),
        small.to_str().unwrap(),
        "--index",
        &idx,
    ]);
    let value = |s: &str| {
        s.lines()
            .next()
            .unwrap()
            .split_whitespace()
            .find_map(|f| f.strip_prefix("value="))
            .unwrap()
            .to_string()
    };
    assert_eq!(value(&fwd), value(&rev));
}

#[test]
fn tree_encoded_profiles_compare_without_an_index() {
    let tmp = TempDir::new().unwrap();
    let idx = build_fixture_index(tmp.path());
    let small = tmp.path().join("small.profile");
    let cov = tmp.path().join("cov.profile");
    for (src, user, out) in [
        ("bookmarks_small.txt", "small", &small),
        ("bookmarks_coverage.txt", "cov", &cov),
    ] {
        run(&[
            "ingest",
            &fixture(src),
            "--index",
            &idx,
            "--user",
            user,
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    let (code, with_index, _) = run(&[
        "similarity",
        small.to_str().unwrap(),
        cov.to_str().unwrap(),
        "--index",
        &idx,
    ]);
    assert_eq!(code, 0);
    let (code, standalone, _) = run(&[
        "similarity",
        small.to_str().unwrap(),
        cov.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    // the tree measure only uses addresses, so the headline must agree
    assert_eq!(
        with_index.lines().next().unwrap(),
        standalone.lines().next().unwrap()
    );
}

#[test]
fn pearson_measure_is_selected_through_settings() {
    let tmp = TempDir::new().unwrap();
    let (out, _, _) = synth_corpus(tmp.path(), "1", "4");
    let a = out.join("profiles/c00u00.profile");
    let b = out.join("profiles/c00u01.profile");
    let (code, stdout, _) = run(&[
        "--set",
        "measure=pearson",
        "similarity",
        a.to_str().unwrap(),
        b.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.starts_with("pearson "), "got: {stdout}");
}

// ------------------------------------------------------------------ synth

#[test]
fn synth_writes_a_complete_reproducible_corpus() {
    let tmp = TempDir::new().unwrap();
    let (out1, idx1, db1) = synth_corpus(tmp.path(), "42", "10");
    assert!(out1.join("index.idx").exists());
    let profiles: Vec<_> = fs::read_dir(&db1)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "profile"))
        .collect();
    assert_eq!(profiles.len(), 20, "2 clusters x 10 users");

    let tmp2 = TempDir::new().unwrap();
    let (out2, idx2, _) = synth_corpus(tmp2.path(), "42", "10");
    assert_eq!(
        fs::read(&idx1).unwrap(),
        fs::read(&idx2).unwrap(),
        "same seed, same index bytes"
    );
    assert_eq!(
        fs::read_to_string(out1.join("profiles/c01u07.profile")).unwrap(),
        fs::read_to_string(out2.join("profiles/c01u07.profile")).unwrap(),
        "same seed, same profile bytes"
    );

    let tmp3 = TempDir::new().unwrap();
    let (out3, _, _) = synth_corpus(tmp3.path(), "43", "10");
    assert_ne!(
        fs::read_to_string(out1.join("profiles/c01u07.profile")).unwrap(),
        fs::read_to_string(out3.join("profiles/c01u07.profile")).unwrap(),
        "different seed, different draws"
    );
}

// -------------------------------------------------------------- recommend

#[test]
fn recommend_reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let (out, idx, db) = synth_corpus(tmp.path(), "5", "12");
    let target = out.join("profiles/c00u03.profile");
    let args = [
        "--csv",
        "--seed",
        "9",
        "recommend",
        target.to_str().unwrap(),
        "--db",
        &db,
        "--index",
        &idx,
        "--top",
        "5",
    ];
    let (code, first, _) = run(&args);
    assert_eq!(code, 0);
    assert!(first.contains("# command=recommend user=c00u03"));
    assert!(first.contains("rank,catid,address,score,predicted_votes,support,title"));
    let (_, second, _) = run(&args);
    assert_eq!(first, second);
}

#[test]
fn recommend_never_suggests_seen_categories() {
    let tmp = TempDir::new().unwrap();
    let (out, idx, db) = synth_corpus(tmp.path(), "5", "12");
    let target = out.join("profiles/c00u03.profile");
    let seen: Vec<String> = fs::read_to_string(&target)
        .unwrap()
        .lines()
        .skip(1)
        .filter_map(|l| l.split(':').next().map(str::to_string))
        .collect();
    assert!(!seen.is_empty());
    let (code, stdout, _) = run(&[
        "--csv",
        "recommend",
        target.to_str().unwrap(),
        "--db",
        &db,
        "--index",
        &idx,
    ]);
    assert_eq!(code, 0);
    for line in stdout.lines().skip(2) {
        let address = line.split(',').nth(2).unwrap();
        assert!(
            !seen.iter().any(|s| s == address),
            "{address} is already in the target profile"
        );
    }
}

#[test]
fn recommend_writes_a_trace_when_asked() {
    let tmp = TempDir::new().unwrap();
    let (out, idx, db) = synth_corpus(tmp.path(), "5", "12");
    let target = out.join("profiles/c00u03.profile");
    let trace = tmp.path().join("trace.csv");
    let (code, _, _) = run(&[
        "recommend",
        target.to_str().unwrap(),
        "--db",
        &db,
        "--index",
        &idx,
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("iteration,antibody,concentration"));
    let first = lines.next().expect("at least one traced iteration");
    assert!(first.starts_with("1,"), "trace starts at iteration 1: {first}");
    // every row is iteration,user,float
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 3);
        cols[0].parse::<usize>().unwrap();
        cols[2].parse::<f64>().unwrap();
    }
}

// --------------------------------------------------------------- evaluate

#[test]
fn evaluate_csv_reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let (_, idx, db) = synth_corpus(tmp.path(), "5", "10");
    let args = [
        "--csv",
        "evaluate",
        "--db",
        &db,
        "--index",
        &idx,
        "--seeds",
        "2",
    ];
    let (code, first, _) = run(&args);
    assert_eq!(code, 0);
    assert!(first.contains("# command=evaluate users=20"));
    assert!(first.contains("mean_precision="));
    // one row per user per seed
    let rows = first.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert_eq!(rows, 40);
    let (_, second, _) = run(&args);
    assert_eq!(first, second);
}
