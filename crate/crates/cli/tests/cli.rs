use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL_MODEL: &[&str] = &["--least-apps", "4", "--dim", "16", "--epochs", "2", "--min-count", "3"];

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_authorscope"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Three authors with four apps each.
fn corpus(dir: &TempDir) -> PathBuf {
    let out = dir.path().join("corpus");
    let o = run(&[
        "gen-corpus", "--authors", "3", "--apps-per-author", "4", "--min-modules", "2", "--max-modules", "4",
        "--seed", "1", "--out", p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out
}

fn sorted_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    names
}

#[test]
fn gen_corpus_writes_bundles_and_sidecar_deterministically() {
    let dir = TempDir::new().unwrap();
    let a = corpus(&dir);
    let files = sorted_files(&a);
    assert_eq!(files.len(), 13);
    assert!(files.contains(&"ground_truth.json".to_owned()));
    let truth: serde_json::Value = serde_json::from_slice(&fs::read(a.join("ground_truth.json")).unwrap()).unwrap();
    assert_eq!(truth["apps"].as_object().unwrap().len(), 12);

    let b = dir.path().join("again");
    run(&["gen-corpus", "--authors", "3", "--apps-per-author", "4", "--min-modules", "2", "--max-modules", "4", "--seed", "1", "--out", p(&b)]);
    for f in files {
        assert_eq!(fs::read(a.join(&f)).unwrap(), fs::read(b.join(&f)).unwrap(), "{f}");
    }
}

#[test]
fn decouple_single_bundle_gives_one_report() {
    let dir = TempDir::new().unwrap();
    let c = corpus(&dir);
    let out = run(&["decouple", p(&c.join("author00-app00.json"))]);
    assert_eq!(code(&out), 0);
    let lines: Vec<String> = stdout(&out).lines().map(str::to_owned).collect();
    assert_eq!(lines.len(), 1);
    let report: serde_json::Value = serde_json::from_str(&lines[0]).unwrap();
    assert_eq!(report["app_id"], "author00-app00");
    assert!(report["modules"].as_array().unwrap().len() >= 2);
}

#[test]
fn corrupt_bundle_in_batch_is_reported_and_exit_is_partial() {
    let dir = TempDir::new().unwrap();
    let c = corpus(&dir);
    let batch = dir.path().join("batch");
    fs::create_dir(&batch).unwrap();
    for name in ["author00-app00.json", "author01-app00.json"] {
        fs::copy(c.join(name), batch.join(name)).unwrap();
    }
    fs::write(batch.join("broken.json"), "{\"schema_version\": 1").unwrap();
    let reports = dir.path().join("reports");
    let out = run(&["decouple", p(&batch), "--out", p(&reports)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("broken.json"));
    assert_eq!(sorted_files(&reports), vec!["author00-app00.partition.json", "author01-app00.partition.json"]);

    let first = fs::read(reports.join("author00-app00.partition.json")).unwrap();
    run(&["decouple", p(&batch), "--out", p(&reports)]);
    assert_eq!(fs::read(reports.join("author00-app00.partition.json")).unwrap(), first);
}

#[test]
fn decouple_output_is_ordered_by_app_id_for_any_job_count() {
    let dir = TempDir::new().unwrap();
    let c = corpus(&dir);
    let one = stdout(&run(&["--jobs", "1", "decouple", p(&c)]));
    let four = stdout(&run(&["--jobs", "4", "decouple", p(&c)]));
    assert_eq!(one, four);
    let ids: Vec<String> = one
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["app_id"].as_str().unwrap().to_owned())
        .collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
    assert_eq!(ids.len(), 12);
}

#[test]
fn train_is_deterministic_and_predict_recovers_training_authors() {
    let dir = TempDir::new().unwrap();
    let c = corpus(&dir);
    let m1 = dir.path().join("m1.ascm");
    let m2 = dir.path().join("m2.ascm");
    for m in [&m1, &m2] {
        let mut args = vec!["train", p(&c), "--classifier", "logreg", "--seed", "3", "--out", p(m)];
        args.extend_from_slice(SMALL_MODEL);
        let out = run(&args);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    assert_eq!(fs::read(&m1).unwrap(), fs::read(&m2).unwrap());

    let out = run(&["predict", "--model", p(&m1), p(&c.join("author01-app02.json"))]);
    assert_eq!(code(&out), 0);
    let fields: Vec<String> = stdout(&out).trim_end().split('\t').map(str::to_owned).collect();
    assert_eq!(fields[0], "author01-app02");
    assert_eq!(fields[1], "author01");
    assert!(fields[2].parse::<f64>().unwrap() > 0.0);

    // Unlabeled input is fine for prediction.
    let mut bundle: serde_json::Value = serde_json::from_slice(&fs::read(c.join("author02-app01.json")).unwrap()).unwrap();
    bundle.as_object_mut().unwrap().remove("author_label");
    let unlabeled = dir.path().join("unlabeled.json");
    fs::write(&unlabeled, serde_json::to_vec(&bundle).unwrap()).unwrap();
    let out = run(&["predict", "--model", p(&m1), p(&unlabeled)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).starts_with("author02-app01\t"));
}

#[test]
fn random_forest_predictions_have_no_probability() {
    let dir = TempDir::new().unwrap();
    let c = corpus(&dir);
    let m = dir.path().join("rf.ascm");
    let mut args = vec!["train", p(&c), "--classifier", "rf", "--trees", "20", "--out", p(&m)];
    args.extend_from_slice(SMALL_MODEL);
    assert_eq!(code(&run(&args)), 0);
    let out = run(&["predict", "--model", p(&m), p(&c.join("author00-app01.json"))]);
    assert!(stdout(&out).trim_end().ends_with("\t-"));
}

#[test]
fn training_without_labels_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let c = corpus(&dir);
    let path = c.join("author00-app00.json");
    let mut bundle: serde_json::Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
    bundle.as_object_mut().unwrap().remove("author_label");
    fs::write(&path, serde_json::to_vec(&bundle).unwrap()).unwrap();
    let model = dir.path().join("m.ascm");
    let mut args = vec!["train", p(&c), "--out", p(&model)];
    args.extend_from_slice(SMALL_MODEL);
    let out = run(&args);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
}

#[test]
fn corrupt_model_is_fatal() {
    let dir = TempDir::new().unwrap();
    let c = corpus(&dir);
    let model = dir.path().join("bad.ascm");
    fs::write(&model, b"ASCM\x01\x00\x00\x00{not json").unwrap();
    let out = run(&["predict", "--model", p(&model), p(&c.join("author00-app00.json"))]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("corrupt"), "{}", stderr(&out));
}

#[test]
fn evaluate_reports_are_deterministic_and_k_is_checked() {
    let dir = TempDir::new().unwrap();
    let c = corpus(&dir);
    let r1 = dir.path().join("r1.json");
    let r2 = dir.path().join("r2.json");
    for r in [&r1, &r2] {
        let mut args = vec!["evaluate", p(&c), "--k", "2", "--classifier", "all", "--seed", "4", "--out", p(r)];
        args.extend_from_slice(SMALL_MODEL);
        let out = run(&args);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        assert!(stdout(&out).contains("accuracy"));
    }
    assert_eq!(fs::read(&r1).unwrap(), fs::read(&r2).unwrap());
    let reports: serde_json::Value = serde_json::from_slice(&fs::read(&r1).unwrap()).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 3);

    let mut args = vec!["evaluate", p(&c), "--k", "5"];
    args.extend_from_slice(SMALL_MODEL);
    let out = run(&args);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("larger than"), "{}", stderr(&out));
}

#[test]
fn obfuscate_writes_one_bundle_per_input() {
    let dir = TempDir::new().unwrap();
    let c = corpus(&dir);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(code(&run(&["obfuscate", p(&c), "--seed", "9", "--out", p(&a)])), 0);
    assert_eq!(code(&run(&["obfuscate", p(&c), "--seed", "9", "--out", p(&b)])), 0);
    let files = sorted_files(&a);
    assert_eq!(files.len(), 12);
    for f in &files {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
        assert_ne!(fs::read(a.join(f)).unwrap(), fs::read(c.join(f)).unwrap());
    }
    // Obfuscated bundles are still valid input.
    assert_eq!(code(&run(&["decouple", p(&a)])), 0);
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(code(&run(&["decouple"])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["evaluate", "x", "--classifier", "knn"])), 1);
    let dir = TempDir::new().unwrap();
    let c = corpus(&dir);
    assert_eq!(code(&run(&["decouple", p(&c), "--mode", "alpha", "--alpha", "1.5"])), 1);
    assert_eq!(code(&run(&["decouple", p(&dir.path().join("missing"))])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn alpha_mode_and_library_file_are_accepted() {
    let dir = TempDir::new().unwrap();
    let c = corpus(&dir);
    let libs = dir.path().join("libs.txt");
    fs::write(&libs, "# known libraries\ncom.example.ads\n").unwrap();
    let out = run(&["decouple", p(&c), "--mode", "alpha", "--alpha", "0.3", "--libs-file", p(&libs)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(stdout(&out).lines().count(), 12);
}
