use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "seed = 11\n[synth]\nn_users = 5\n[model]\nepochs = 2\n[harness.logreg]\niterations = 40\n";

fn sagaze(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sagaze")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    fs::write(&path, SMALL).unwrap();
    path.to_str().unwrap().to_string()
}

fn synth_into(cfg: &str, dir: &Path) {
    let out = sagaze(&["synth", "--config", cfg, "--out", p(dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

fn listing(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn help_documents_the_schema_and_exit_codes() {
    let out = sagaze(&["--help"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("Data schema version 1"));
    assert!(text.contains("Exit codes"));
    for cmd in ["synth", "preprocess", "metrics", "graphs", "train", "eval"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn usage_and_config_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&sagaze(&["train", "--seed", "many"])), 1);
    assert_eq!(code(&sagaze(&["metrics", "--window", "9"])), 1);
    assert_eq!(code(&sagaze(&["frobnicate"])), 1);

    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "[model]\nlearning_rate = 0.1\n").unwrap();
    let out = sagaze(&["synth", "--config", p(&bad), "--out", p(tmp.path())]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("learning_rate"), "{}", stderr(&out));

    fs::write(&bad, "[model]\nepochs = 0\n").unwrap();
    assert_eq!(code(&sagaze(&["synth", "--config", p(&bad), "--out", p(tmp.path())])), 1);
    let out = sagaze(&["train", "--out", p(tmp.path())]);
    assert_eq!(code(&out), 1, "missing --data");
}

#[test]
fn data_errors_exit_with_two_and_name_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("nothing_here");
    fs::create_dir(&empty).unwrap();
    let out = sagaze(&["train", "--data", p(&empty), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("nothing_here"), "{}", stderr(&out));
    let missing = tmp.path().join("missing");
    let out = sagaze(&["metrics", "--data", p(&missing), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("missing"));
}

#[test]
fn synth_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    synth_into(&cfg, &a);
    synth_into(&cfg, &b);
    let files = listing(&a);
    assert_eq!(files.len(), 21, "10 trials of two files plus the manifest");
    assert_eq!(files, listing(&b));
    let c = tmp.path().join("c");
    assert_eq!(code(&sagaze(&["synth", "--config", &cfg, "--seed", "12", "--out", p(&c)])), 0);
    assert_ne!(files, listing(&c));
}

#[test]
fn preprocess_metrics_and_graphs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let data = tmp.path().join("data");
    synth_into(&cfg, &data);

    let out = tmp.path().join("events");
    let r = sagaze(&["preprocess", "--data", p(&data), "--out", p(&out), "--jobs", "2"]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let summary = fs::read_to_string(out.join("preprocess_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 11);
    assert!(summary.lines().skip(1).all(|l| l.contains(",ok,")), "{summary}");
    let events = fs::read_to_string(out.join("P01_bleeding.events.csv")).unwrap();
    assert!(events.starts_with("kind,t_start,t_end"));
    assert!(events.contains("fixation") && events.contains("saccade"));

    let m = tmp.path().join("metrics");
    let r = sagaze(&["metrics", "--data", p(&data), "--out", p(&m), "--window", "21"]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let table = fs::read_to_string(m.join("metrics_w21.csv")).unwrap();
    let header: Vec<&str> = table.lines().next().unwrap().split(',').collect();
    assert_eq!(&header[5..], ["FR", "MFD", "PFT", "MSA", "MSV", "MPSV", "VPFT", "VMFD", "VFR", "BR", "MPD"]);
    assert_eq!(table.lines().count(), 11);
    let means = fs::read_to_string(m.join("metrics_w21_by_label.csv")).unwrap();
    let labels: Vec<&str> = means.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(labels, ["good", "poor"]);

    let g = tmp.path().join("graphs");
    let r = sagaze(&["graphs", "--data", p(&data), "--out", p(&g)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let index = fs::read_to_string(g.join("graphs_index.csv")).unwrap();
    assert_eq!(index.lines().count(), 1 + 10 * 15);
    let first = index.lines().nth(1).unwrap().split(',').next().unwrap().to_string();
    let graph = sagaze_core::FixationGraph::from_json(&fs::read_to_string(g.join(first)).unwrap()).unwrap();
    graph.validate().unwrap();
}

#[test]
fn preprocess_continues_past_a_broken_trial() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let data = tmp.path().join("data");
    synth_into(&cfg, &data);
    fs::write(data.join("P03_vomiting.samples.csv"), "t,gaze\n1,2\n").unwrap();
    let out = tmp.path().join("events");
    let r = sagaze(&["preprocess", "--data", p(&data), "--out", p(&out)]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("1 of 10"), "{}", stderr(&r));
    let summary = fs::read_to_string(out.join("preprocess_summary.csv")).unwrap();
    assert_eq!(summary.lines().filter(|l| l.contains(",ok,")).count(), 9);
    assert!(summary.contains("P03_vomiting,failed"));
    assert!(out.join("P04_bleeding.events.csv").is_file());
}

#[test]
fn train_then_eval_reproduces_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let data = tmp.path().join("data");
    synth_into(&cfg, &data);

    let run = |dir: &Path| {
        let r = sagaze(&["train", "--config", &cfg, "--data", p(&data), "--out", p(dir), "--folds", "5"]);
        assert_eq!(code(&r), 0, "{}", stderr(&r));
        fs::read_to_string(dir.join("report.json")).unwrap()
    };
    let (a, b) = (tmp.path().join("run_a"), tmp.path().join("run_b"));
    let report = run(&a);
    assert_eq!(report, run(&b), "same inputs and seed give the same report");
    let parsed: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(parsed["seed"], 11);
    assert_eq!(parsed["folds"].as_array().unwrap().len(), 5);
    for k in ["acc", "f1", "prec", "rec"] {
        assert!(parsed["aggregate"][k]["mean"].is_number());
        assert!(parsed["aggregate"][k]["std"].is_number());
    }
    assert_eq!(parsed["config_hash"].as_str().unwrap().len(), 64);
    for k in 0..5 {
        assert!(a.join(format!("fold{k}.model.json")).is_file());
        assert!(a.join(format!("fold{k}.baseline.json")).is_file());
    }
    assert!(fs::read_to_string(a.join("report.txt")).unwrap().contains("FixGraphPool"));

    let e = tmp.path().join("eval");
    let r = sagaze(&["eval", "--data", p(&data), "--model", p(&a), "--out", p(&e)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert_eq!(fs::read_to_string(e.join("eval.json")).unwrap(), report);
}
