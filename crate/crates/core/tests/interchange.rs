//! Files exchanged with external model code: prediction maps, timing.csv
//! and training_log.csv.

use std::fs;
use std::path::Path;

use salbench::experiments::model_eval::{
    evaluate_model_outputs, load_prediction, read_timing, read_training_log, summarize_training, EvalConfig,
};
use salbench::experiments::{generate_synthetic_dataset, pooled_fixations, Condition, Dataset, SynthSpec};
use salbench::fixmap::{blur_density, rasterize, BlurSpec, DensityMap};
use salbench::imaging::io::{save_gray_png, GrayExport};
use salbench::metrics::Metric;
use salbench::{npy, Error};

fn small_dataset(dir: &Path) -> Dataset {
    let spec = SynthSpec {
        stimuli: 4,
        observers: 5,
        width: 64,
        height: 36,
        ..SynthSpec::default()
    };
    let ds = generate_synthetic_dataset(&spec, 3).unwrap();
    ds.save(dir).unwrap();
    ds
}

fn ground_truth(ds: &Dataset, id: &str) -> DensityMap {
    let fix = pooled_fixations(ds, Condition::Hc, id).unwrap().unwrap();
    blur_density(&rasterize(&fix).unwrap(), &BlurSpec::new(30.0, Default::default()).unwrap()).unwrap()
}

fn write_maps(ds: &Dataset, dir: &Path, f: impl Fn(&DensityMap) -> Vec<f64>) {
    fs::create_dir_all(dir).unwrap();
    for s in &ds.stimuli {
        let gt = ground_truth(ds, &s.id);
        npy::write(&dir.join(format!("{}.npy", s.id)), s.height, s.width, &f(&gt)).unwrap();
    }
}

#[test]
fn ground_truth_as_prediction_scores_perfectly() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = small_dataset(&tmp.path().join("ds"));
    let pred = tmp.path().join("pred");
    write_maps(&ds, &pred, |m| m.values().to_vec());
    let res = evaluate_model_outputs(&EvalConfig::new(&pred, tmp.path().join("ds"))).unwrap();
    assert_eq!(res.primary.images.len(), 4);
    for img in &res.primary.images {
        assert!((img.report.get(Metric::Cc).unwrap() - 1.0).abs() < 1e-12);
        assert!((img.report.get(Metric::Sim).unwrap() - 1.0).abs() < 1e-12);
        assert!(img.report.get(Metric::Nss).unwrap() > 0.0);
        assert!(img.report.get(Metric::Kl).is_none());
        assert!(img.detection_ms.is_none());
    }
    assert!(res.compare.is_none() && res.tests.is_empty());
}

#[test]
fn constant_prediction_is_chance() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = small_dataset(&tmp.path().join("ds"));
    let pred = tmp.path().join("pred");
    write_maps(&ds, &pred, |m| vec![0.25; m.values().len()]);
    let res = evaluate_model_outputs(&EvalConfig::new(&pred, tmp.path().join("ds"))).unwrap();
    let auc = res.primary.accuracy[&Metric::AucJudd].unwrap();
    assert_eq!(auc.mean, 0.5);
    assert_eq!(auc.std, 0.0);
    // NSS and CC are undefined on a constant map
    assert!(res.primary.accuracy[&Metric::Nss].is_none());
    assert!(res.primary.accuracy[&Metric::Cc].is_none());
}

#[test]
fn npy_out_of_range_is_min_max_normalized() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("a.npy");
    npy::write(&p, 1, 4, &[-2.0, 0.0, 2.0, 6.0]).unwrap();
    let img = load_prediction(&p).unwrap();
    assert_eq!(img.data(), &[0.0, 0.25, 0.5, 1.0]);

    npy::write(&p, 1, 3, &[0.1, 0.5, 0.9]).unwrap();
    assert_eq!(load_prediction(&p).unwrap().data(), &[0.1, 0.5, 0.9]);

    npy::write(&p, 1, 2, &[f64::NAN, 0.5]).unwrap();
    assert!(matches!(load_prediction(&p), Err(Error::Validation(_))));
}

#[test]
fn png_predictions_are_resized_to_the_stimulus() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = small_dataset(&tmp.path().join("ds"));
    let pred = tmp.path().join("pred");
    fs::create_dir_all(&pred).unwrap();
    for s in &ds.stimuli {
        let gt = ground_truth(&ds, &s.id).to_max1().unwrap();
        let half = salbench::imaging::resize_bicubic(&gt.to_image().unwrap(), s.width / 2, s.height / 2).unwrap();
        save_gray_png(&pred.join(format!("{}.png", s.id)), &half, GrayExport::Linear).unwrap();
    }
    let res = evaluate_model_outputs(&EvalConfig::new(&pred, tmp.path().join("ds"))).unwrap();
    let cc = res.primary.accuracy[&Metric::Cc].unwrap();
    assert_eq!(cc.n, 4);
    assert!(cc.mean > 0.95, "cc {}", cc.mean);
}

#[test]
fn missing_prediction_is_reported_by_id() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = small_dataset(&tmp.path().join("ds"));
    let pred = tmp.path().join("pred");
    write_maps(&ds, &pred, |m| m.values().to_vec());
    let gone = &ds.stimuli[2].id;
    fs::remove_file(pred.join(format!("{gone}.npy"))).unwrap();
    match evaluate_model_outputs(&EvalConfig::new(&pred, tmp.path().join("ds"))) {
        Err(Error::Validation(msg)) => assert!(msg.contains(gone.as_str()), "{msg}"),
        other => panic!("expected validation error, got {other:?}"),
    }
}

#[test]
fn timing_is_attached_and_compared() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = small_dataset(&tmp.path().join("ds"));
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    write_maps(&ds, &a, |m| m.values().to_vec());
    write_maps(&ds, &b, |m| m.values().iter().enumerate().map(|(i, v)| v + (i % 7) as f64 * 1e-5).collect());
    let mut ta = String::from("image_id,millis\n");
    let mut tb = String::from("image_id,millis\n");
    for (i, s) in ds.stimuli.iter().enumerate() {
        ta.push_str(&format!("{},{}\n", s.id, 10.0 + i as f64));
        tb.push_str(&format!("{},{}\n", s.id, 30.0 + 2.0 * i as f64));
    }
    fs::write(a.join("timing.csv"), ta).unwrap();
    fs::write(b.join("timing.csv"), tb).unwrap();
    fs::write(a.join("training_log.csv"), "iteration,lr,loss,elapsed_s\n1,0.01,2.0,1.5\n2,0.005,1.0,3.0\n").unwrap();

    let mut cfg = EvalConfig::new(&a, tmp.path().join("ds"));
    cfg.compare = Some(b.clone());
    let res = evaluate_model_outputs(&cfg).unwrap();
    let det = res.primary.detection_ms.unwrap();
    assert_eq!(det.mean, 11.5);
    assert!((det.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
    assert_eq!(res.compare.as_ref().unwrap().detection_ms.unwrap().mean, 33.0);
    assert_eq!(res.primary.training.as_ref().unwrap().training_time_s, 3.0);
    assert!(res.compare.as_ref().unwrap().training.is_none());

    let t = res.tests["detection_ms"].as_ref().unwrap();
    assert!(t.statistic < 0.0 && t.p_value < 0.01);
    assert!(res.tests.contains_key("cc"));

    let mut csv = Vec::new();
    res.write_summary_csv(&mut csv).unwrap();
    let csv = String::from_utf8(csv).unwrap();
    assert!(csv.starts_with("schema_version,quantity,mean,std,compare_mean,compare_std,t,dof,p_value\n"));
    assert!(csv.lines().any(|l| l.starts_with("1,detection_ms,11.5,")));
    assert!(csv.lines().any(|l| l.starts_with("1,training_s,3,0,,")));
    assert!(res.table().contains("detection ms"));
}

#[test]
fn timing_must_cover_every_image() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = small_dataset(&tmp.path().join("ds"));
    let pred = tmp.path().join("pred");
    write_maps(&ds, &pred, |m| m.values().to_vec());
    fs::write(pred.join("timing.csv"), format!("image_id,millis\n{},5\n", ds.stimuli[0].id)).unwrap();
    match evaluate_model_outputs(&EvalConfig::new(&pred, tmp.path().join("ds"))) {
        Err(Error::Validation(msg)) => assert!(msg.contains(&ds.stimuli[1].id)),
        other => panic!("expected validation error, got {other:?}"),
    }
}

#[test]
fn timing_file_validation() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("timing.csv");
    let parse_line = |body: &str| {
        fs::write(&p, body).unwrap();
        match read_timing(&p) {
            Err(Error::Parse { line, .. }) => Some(line),
            Err(e) => panic!("unexpected {e}"),
            Ok(_) => None,
        }
    };
    assert_eq!(parse_line("image_id,millis\na,1.5\nb,2\n"), None);
    assert_eq!(parse_line("image,ms\na,1\n"), Some(1));
    assert_eq!(parse_line("image_id,millis\na,1\nb,0\n"), Some(3));
    assert_eq!(parse_line("image_id,millis\na,1\na,2\n"), Some(3));
    assert_eq!(parse_line("image_id,millis\na,fast\n"), Some(2));
    fs::write(&p, "image_id,millis\nx,4.25\n").unwrap();
    assert_eq!(read_timing(&p).unwrap()["x"], 4.25);
}

#[test]
fn training_log_validation() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("training_log.csv");
    let check = |body: &str| {
        fs::write(&p, body).unwrap();
        read_training_log(&p)
    };
    let rows = check("iteration,lr,loss,elapsed_s\n0,0.1,3,0\n10,0.05,2.5,4\n20,0.05,2.0,9.5\n").unwrap();
    let s = summarize_training(&rows).unwrap();
    assert_eq!((s.iterations, s.final_lr, s.final_loss, s.training_time_s), (3, 0.05, 2.0, 9.5));
    assert!(summarize_training(&[]).is_none());

    for bad in [
        "iteration,loss,lr,elapsed_s\n1,1,0.1,1\n",
        "iteration,lr,loss,elapsed_s\n1,0.1,1,1\n1,0.1,1,2\n",
        "iteration,lr,loss,elapsed_s\n1,0.1,1,5\n2,0.1,1,4\n",
        "iteration,lr,loss,elapsed_s\n1,0,1,1\n",
        "iteration,lr,loss,elapsed_s\n1,0.1,inf,1\n",
        "iteration,lr,loss,elapsed_s\n-1,0.1,1,1\n",
    ] {
        assert!(matches!(check(bad), Err(Error::Parse { .. })), "{bad:?}");
    }
}
