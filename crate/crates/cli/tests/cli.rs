use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hatemix_core::dataset::TASK_A_LABELS;
use hatemix_core::synthetic::{separable_rows, tweet_dump};
use hatemix_core::LanguageCondition;

fn hatemix(run_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hatemix"))
        .args(args)
        .env("HATEMIX_RUN_DIR", run_dir)
        .env_remove("HATEMIX_BACKEND")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_dump(path: &Path, languages: &[LanguageCondition], per_language: usize) {
    fs::write(path, tweet_dump(languages, per_language, 7).join("\n") + "\n").unwrap();
}

/// `<lang>_taska_{train,dev,test}.csv` from the separable fixture, with the
/// labels written in their raw published form.
fn write_task_a(dir: &Path, language: &str, n: usize) {
    fs::create_dir_all(dir).unwrap();
    let raw = |l: &str| if l == "non-anti-LGBT+" { "Non-anti-LGBT+ content".to_string() } else { l.to_string() };
    let rows = separable_rows(&TASK_A_LABELS, n, 11);
    let (train, rest) = rows.split_at(n * 3 / 5);
    let (dev, test) = rest.split_at(rest.len() / 2);
    for (split, part) in [("train", train), ("dev", dev), ("test", test)] {
        let mut body = String::from("id,text,category\n");
        for (id, text, label) in part {
            body.push_str(&format!("{id},{text},{}\n", raw(label)));
        }
        fs::write(dir.join(format!("{language}_taska_{split}.csv")), body).unwrap();
    }
}

#[test]
fn build_corpus_for_five_languages() {
    let tmp = tempfile::tempdir().unwrap();
    let dump = tmp.path().join("dump.jsonl");
    write_dump(&dump, &LanguageCondition::ALL, 120);
    let run = tmp.path().join("run");
    let out = ok(&hatemix(&run, &["build-corpus", "--input", dump.to_str().unwrap(), "--sample-size", "100"]));
    for l in LanguageCondition::ALL {
        let text = fs::read_to_string(run.join(format!("corpus/{}.txt", l.name()))).unwrap();
        assert_eq!(text.lines().count(), 100, "{l}");
        assert!(out.contains(&format!("{}: 100 texts", l.name())));
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("corpus/cleaning_report.json")).unwrap()).unwrap();
    assert_eq!(report["input_count"], 610);
    assert_eq!(report["removed_short"], 5);
    assert_eq!(report["removed_out_of_window"], 5);
}

#[test]
fn build_corpus_with_mixing() {
    let tmp = tempfile::tempdir().unwrap();
    let dump = tmp.path().join("dump.jsonl");
    write_dump(&dump, &[LanguageCondition::Hindi], 120);
    let run = tmp.path().join("run");
    let out = ok(&hatemix(
        &run,
        &["build-corpus", "--input", dump.to_str().unwrap(), "-l", "hindi", "--sample-size", "100", "--mix", "0.2"],
    ));
    assert!(out.contains("20 romanized / 80 native"), "{out}");
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("corpus/hindi.mixed.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["mixing"]["transliterated_indices"].as_array().unwrap().len(), 20);

    // the standalone mix command agrees with the built-in one
    let again = tmp.path().join("again.txt");
    ok(&hatemix(
        &run,
        &["mix", "--corpus", run.join("corpus/hindi.txt").to_str().unwrap(), "--out", again.to_str().unwrap(), "--seed", "17"],
    ));
    assert_eq!(fs::read_to_string(&again).unwrap(), fs::read_to_string(run.join("corpus/hindi.mixed.txt")).unwrap());
}

#[test]
fn missing_input_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let out = hatemix(tmp.path(), &["build-corpus", "--input", "/no/such/dump.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/dump.jsonl"));
}

#[test]
fn script_mixed_english_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = hatemix(tmp.path(), &["train", "-l", "english", "-c", "script-mixed", "--data-dir", "x"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Indic"));
    assert!(!tmp.path().join("jobs").exists());
}

#[test]
fn nothing_to_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let out = hatemix(tmp.path(), &["evaluate", "--data-dir", "x"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nothing to evaluate"));
}

#[test]
fn backend_failure_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_task_a(&data, "english", 60);
    let out = Command::new(env!("CARGO_BIN_EXE_hatemix"))
        .args(["train", "-l", "english", "--data-dir", data.to_str().unwrap()])
        .env("HATEMIX_RUN_DIR", tmp.path().join("run"))
        .env("HATEMIX_BACKEND", "external:/no/such/backend")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let events = fs::read_to_string(tmp.path().join("run/jobs/english-taska-baseline/events.jsonl")).unwrap();
    assert!(events.lines().last().unwrap().contains("\"failed\""));
}

#[test]
fn one_language_three_conditions() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let dump = tmp.path().join("dump.jsonl");
    write_dump(&dump, &[LanguageCondition::Hindi], 120);
    ok(&hatemix(&run, &["build-corpus", "--input", dump.to_str().unwrap(), "-l", "hi", "--sample-size", "100", "--mix"]));
    let data = tmp.path().join("data");
    write_task_a(&data, "hindi", 100);
    let d = data.to_str().unwrap();
    ok(&hatemix(&run, &["train", "-l", "hindi", "-c", "baseline,retrained,script-mixed", "--data-dir", d, "-j", "3"]));

    let baseline_events = fs::read_to_string(run.join("jobs/hindi-taska-baseline/events.jsonl")).unwrap();
    assert!(!baseline_events.contains("retrain"));
    assert!(fs::read_to_string(run.join("jobs/hindi-taska-retrained/events.jsonl")).unwrap().contains("\"retrain\""));
    let snapshot = fs::read_to_string(run.join("jobs/hindi-taska-script-mixed/config.json")).unwrap();
    assert!(snapshot.contains("\"script-mixed\""));

    let out = ok(&hatemix(&run, &["evaluate", "-l", "hindi", "--data-dir", d, "--submitted", "hindi=retrained"]));
    assert!(out.contains("Baseline") && out.contains("Retrained") && out.contains("Script-Mixed"), "{out}");
    let table: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("reports/taska-f1.json")).unwrap()).unwrap();
    assert_eq!(table["rows"].as_array().unwrap().len(), 1);
    assert_eq!(table["rows"][0]["cells"].as_array().unwrap().len(), 3);
    assert!(fs::read_to_string(run.join("reports/taska-f1.tex")).unwrap().contains("\\textbf{"));

    // report rebuilds the same table from the stored reports
    let before = fs::read_to_string(run.join("reports/taska-f1.csv")).unwrap();
    ok(&hatemix(&run, &["report", "-l", "hindi", "--submitted", "hindi=retrained"]));
    assert_eq!(before, fs::read_to_string(run.join("reports/taska-f1.csv")).unwrap());
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let dump = tmp.path().join("dump.jsonl");
    write_dump(&dump, &[LanguageCondition::Tamil], 50);
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, format!(r#"{{"languages": ["tamil"], "sample_size": 40, "raw_corpus": "{}"}}"#, dump.display()))
        .unwrap();
    let run = tmp.path().join("run");
    ok(&hatemix(&run, &["build-corpus", "--config", cfg.to_str().unwrap()]));
    assert_eq!(fs::read_to_string(run.join("corpus/tamil.txt")).unwrap().lines().count(), 40);
    ok(&hatemix(&run, &["build-corpus", "--config", cfg.to_str().unwrap(), "--sample-size", "30"]));
    assert_eq!(fs::read_to_string(run.join("corpus/tamil.txt")).unwrap().lines().count(), 30);
    // too few texts for the sample
    let out = hatemix(&run, &["build-corpus", "--config", cfg.to_str().unwrap(), "--sample-size", "500"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn validate_submission_command() {
    let tmp = tempfile::tempdir().unwrap();
    let good = tmp.path().join("good.csv");
    fs::write(&good, "id,label\n1,homophobia\n2,transphobia\n").unwrap();
    let out = ok(&hatemix(tmp.path(), &["validate-submission", good.to_str().unwrap(), "--expected-rows", "2"]));
    assert!(out.contains("valid (2 rows)"));

    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "id,label\n1,homophobia\n2,Homofobia\n").unwrap();
    let out = hatemix(tmp.path(), &["validate-submission", bad.to_str().unwrap(), "--expected-rows", "3"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("expected 3 prediction rows, found 2"), "{err}");
    assert!(err.contains("line 3: label 'Homofobia'"), "{err}");

    let labels = tmp.path().join("labels.txt");
    fs::write(&labels, "hope-speech\ncounter-speech\n").unwrap();
    ok(&hatemix(
        tmp.path(),
        &["validate-submission", labels.to_str().unwrap(), "--task", "B", "--expected-rows", "2", "--labels-only", "--no-header"],
    ));
}
