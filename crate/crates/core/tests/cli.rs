//! End-to-end runs of the `salbench` command line.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use serde_json::Value;

fn run(args: &[&str]) -> i32 {
    let argv: Vec<String> = std::iter::once("salbench").chain(args.iter().copied()).map(String::from).collect();
    salbench::cli::run(argv)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo")
}

fn write_rgb(path: &Path, w: u32, h: u32) {
    image::RgbImage::from_fn(w, h, |x, y| image::Rgb([(x % 256) as u8, (y % 256) as u8, ((x ^ y) % 256) as u8]))
        .save(path)
        .unwrap();
}

fn synth(dir: &Path, observers: &str) {
    let code = run(&[
        "synth", "--stimuli", "3", "--observers", observers, "--width", "96", "--height", "54", "--lg-height", "32",
        "--seed", "9", "--output-dir", p(dir),
    ]);
    assert_eq!(code, 0);
}

#[test]
fn preprocess_full_hd_batch() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("hc");
    fs::create_dir(&input).unwrap();
    for i in 0..20 {
        write_rgb(&input.join(format!("img{i:02}.png")), 1920, 1080);
    }
    let out = tmp.path().join("out");
    let code = run(&["preprocess", "--input", p(&input), "--width", "120", "--height", "64", "--output-dir", p(&out)]);
    assert_eq!(code, 0);
    assert_eq!(fs::read_dir(out.join("lg")).unwrap().count(), 20);
    let manifest = read_json(&out.join("manifest.json"));
    let files = manifest["files"].as_array().unwrap();
    assert_eq!(files.len(), 20);
    for f in files {
        assert_eq!((f["original_width"].as_u64(), f["original_height"].as_u64()), (Some(1920), Some(1080)));
        assert_eq!((f["width"].as_u64(), f["height"].as_u64()), (Some(120), Some(64)));
    }
    let ratio = manifest["ratio"].as_f64().unwrap() * 100.0;
    assert!((ratio - 0.12).abs() <= 0.01, "ratio {ratio}%");
    assert!(!out.join("errors.json").exists());
}

#[test]
fn preprocess_keeps_going_past_a_corrupt_file() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("hc");
    fs::create_dir(&input).unwrap();
    write_rgb(&input.join("a.png"), 160, 90);
    write_rgb(&input.join("c.png"), 160, 90);
    fs::write(input.join("b.png"), b"not a png").unwrap();
    let out = tmp.path().join("out");
    let code = run(&["preprocess", "--input", p(&input), "--height", "32", "--output-dir", p(&out)]);
    assert_eq!(code, 1);
    assert!(out.join("lg/a.png").is_file() && out.join("lg/c.png").is_file());
    assert_eq!(read_json(&out.join("manifest.json"))["files"].as_array().unwrap().len(), 2);
    let errors = read_json(&out.join("errors.json"));
    assert_eq!(errors["kind"], "item");
    let items = errors["errors"].as_array().unwrap();
    assert_eq!(items.len(), 1);
    assert_eq!(items[0]["item"], "b.png");
}

#[test]
fn preprocess_empty_dir_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("hc");
    fs::create_dir(&input).unwrap();
    let out = tmp.path().join("out");
    assert_eq!(run(&["preprocess", "--input", p(&input), "--output-dir", p(&out)]), 0);
    let manifest = read_json(&out.join("manifest.json"));
    assert!(manifest["files"].as_array().unwrap().is_empty());
    assert!(manifest["ratio"].is_null());
    assert!(!out.join("errors.json").exists());
}

#[test]
fn unknown_config_key_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "seed = 3\n\n[sweep]\ndataset = \"d\"\nsigma_stepp = 2\n").unwrap();
    let out = tmp.path().join("out");
    let code = run(&["--config", p(&cfg), "--output-dir", p(&out), "sweep"]);
    assert_eq!(code, 2);
    let errors = read_json(&out.join("errors.json"));
    assert_eq!(errors["kind"], "config");
    let msg = errors["errors"][0]["message"].as_str().unwrap();
    assert!(msg.contains("sweep.sigma_stepp"), "{msg}");
    // nothing else was written
    assert_eq!(fs::read_dir(&out).unwrap().count(), 1);
}

#[test]
fn invalid_config_values_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = tmp.path().join("run.json");
    fs::write(&cfg, r#"{"congruency": {"dataset": "d", "sigma": -1}}"#).unwrap();
    assert_eq!(run(&["--config", p(&cfg), "--output-dir", p(&out), "congruency"]), 2);
    let msg = read_json(&out.join("errors.json"))["errors"][0]["message"].as_str().unwrap().to_string();
    assert!(msg.contains("congruency.sigma"), "{msg}");

    assert_eq!(run(&["--jobs", "0", "--output-dir", p(&out), "synth"]), 2);
    let msg = read_json(&out.join("errors.json"))["errors"][0]["message"].as_str().unwrap().to_string();
    assert!(msg.contains("jobs"), "{msg}");

    assert_eq!(run(&["--output-dir", p(&out), "sweep", "--dataset", "d", "--sigmas", "5:1"]), 2);
}

#[test]
fn congruency_needs_three_observers() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    synth(&ds, "2");
    let out = tmp.path().join("out");
    assert_eq!(run(&["congruency", "--dataset", p(&ds), "--output-dir", p(&out)]), 1);
    let errors = read_json(&out.join("errors.json"));
    assert_eq!(errors["kind"], "validation");
    assert!(!out.join("congruency.csv").exists());
}

#[test]
fn congruency_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    synth(&ds, "4");
    let out = tmp.path().join("out");
    assert_eq!(run(&["congruency", "--dataset", p(&ds), "--sigma", "5", "--output-dir", p(&out)]), 0);
    let csv = fs::read_to_string(out.join("congruency.csv")).unwrap();
    assert!(csv.starts_with("schema_version,"));
    for m in ["nss", "kl", "auc_judd", "auc_shuffled", "cc", "sim"] {
        assert!(csv.contains(m), "{m} missing");
    }
    assert!(out.join("congruency_scores.csv").is_file());
    assert_eq!(read_json(&out.join("summary.json"))["command"], "congruency");
}

#[test]
fn eval_compares_two_prediction_dirs() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    synth(&ds, "4");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(run(&["density", "--dataset", p(&ds), "--sigma", "4", "--output-dir", p(&a)]), 0);
    assert_eq!(
        run(&["density", "--dataset", p(&ds), "--condition", "lg", "--sigma", "8", "--output-dir", p(&b)]),
        0
    );
    let out = tmp.path().join("out");
    let code = run(&[
        "eval",
        "--predictions",
        p(&a.join("maps")),
        "--compare",
        p(&b.join("maps")),
        "--dataset",
        p(&ds),
        "--output-dir",
        p(&out),
    ]);
    assert_eq!(code, 0);
    let summary = fs::read_to_string(out.join("model_eval_summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next().unwrap(), "schema_version,quantity,mean,std,compare_mean,compare_std,t,dof,p_value");
    for q in ["nss", "auc_judd", "sim", "cc"] {
        let row: Vec<&str> = lines.clone().find(|l| l.split(',').nth(1) == Some(q)).unwrap().split(',').collect();
        assert_eq!(row.len(), 9);
        assert_eq!(row[7], "2", "{q}: three images give 2 dof");
        let pv: f64 = row[8].parse().unwrap();
        assert!((0.0..=1.0).contains(&pv));
    }
    let per_image = fs::read_to_string(out.join("model_eval.csv")).unwrap();
    assert_eq!(per_image.lines().count(), 1 + 2 * 3);
}

#[test]
fn score_reports_all_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    synth(&ds, "4");
    let maps = tmp.path().join("maps");
    assert_eq!(run(&["density", "--dataset", p(&ds), "--condition", "lg", "--output-dir", p(&maps)]), 0);
    let out = tmp.path().join("out");
    let output = Command::new(env!("CARGO_BIN_EXE_salbench"))
        .args([
            "score",
            "--pred",
            p(&maps.join("maps/stim002.npy")),
            "--fixations",
            p(&ds.join("fixations_hc.csv")),
            "--stimulus",
            "stim002",
            "--negatives",
            p(&ds.join("fixations_hc.csv")),
            "--output-dir",
            p(&out),
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8(output.stdout).unwrap();
    let csv = fs::read_to_string(out.join("score.csv")).unwrap();
    assert_eq!(stdout, csv);
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    for m in ["nss", "kl", "auc_judd", "auc_shuffled", "cc", "sim"] {
        assert!(header.contains(&m), "{m} missing from {header:?}");
    }
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_salbench");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code();
    assert_eq!(status(&[]), Some(2));
    assert_eq!(status(&["sweep", "--bogus"]), Some(2));
    assert_eq!(status(&["--help"]), Some(0));
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let missing = tmp.path().join("nope");
    assert_eq!(status(&["sweep", "--dataset", p(&missing), "--output-dir", p(&out)]), Some(1));
    assert_eq!(read_json(&out.join("errors.json"))["kind"], "io");
}

#[test]
fn demo_sweep_within_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let start = Instant::now();
    let code = run(&["sweep", "--dataset", p(&demo_dir()), "--svg", "--output-dir", p(&out)]);
    let elapsed = start.elapsed();
    assert_eq!(code, 0);
    assert!(elapsed < Duration::from_secs(60), "{elapsed:?}");

    let mut rdr = csv::Reader::from_path(out.join("sweep.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(&headers, vec!["schema_version", "sigma", "metric", "median", "p25", "p75"]);
    let mut cells = std::collections::BTreeMap::<String, Vec<f64>>::new();
    for row in rdr.records() {
        let row = row.unwrap();
        cells.entry(row[2].to_string()).or_default().push(row[1].parse().unwrap());
    }
    assert_eq!(cells.len(), 6);
    for (metric, sigmas) in &cells {
        let want: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(sigmas, &want, "{metric}");
    }
    assert!(fs::read_to_string(out.join("sweep.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn json_format_replaces_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    synth(&ds, "3");
    let out = tmp.path().join("out");
    let code = run(&["--format", "json", "sweep", "--dataset", p(&ds), "--sigmas", "2:6:2", "--output-dir", p(&out)]);
    assert_eq!(code, 0);
    let doc = read_json(&out.join("sweep.json"));
    assert_eq!(doc["schema_version"], 1);
}
