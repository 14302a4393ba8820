//! Accuracy and timing of saliency model outputs.
//!
//! A prediction directory holds one map per test image, named
//! `<image_id>.npy` (float array) or `<image_id>.png`, and optionally
//! `timing.csv` (`image_id,millis`) and `training_log.csv`
//! (`iteration,lr,loss,elapsed_s`).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::dataset::{Condition, Dataset};
use super::{pooled_fixations, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::fixmap::{rasterize, BlurDomain, BlurSpec, DensityMap, GaussianBlur};
use crate::imaging::io::load_gray;
use crate::imaging::{resize_bicubic, Encoding, RasterImage};
use crate::metrics::{score_accuracy, Metric, MetricReport};
use crate::npy;
use crate::stats::{mean, paired_t_test, sample_std, TestResult};

pub const TIMING_FILE: &str = "timing.csv";
pub const TIMING_HEADER: [&str; 2] = ["image_id", "millis"];
pub const TRAINING_LOG_FILE: &str = "training_log.csv";
pub const TRAINING_LOG_HEADER: [&str; 4] = ["iteration", "lr", "loss", "elapsed_s"];

/// Label used for per-image detection time in test tables.
pub const DETECTION_MS: &str = "detection_ms";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// Directory of predictions to score.
    pub predictions: PathBuf,
    /// Second prediction directory to compare against with paired t-tests.
    #[serde(default)]
    pub compare: Option<PathBuf>,
    /// Dataset supplying the test images and their ground-truth fixations.
    pub dataset: PathBuf,
    /// Which condition's fixations are the ground truth.
    #[serde(default = "default_condition")]
    pub ground_truth: Condition,
    /// Blur of the ground-truth density maps.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub domain: BlurDomain,
    #[serde(default = "default_label")]
    pub label: String,
    #[serde(default = "default_compare_label")]
    pub compare_label: String,
}

fn default_condition() -> Condition {
    Condition::Hc
}

fn default_sigma() -> f64 {
    30.0
}

fn default_label() -> String {
    "primary".into()
}

fn default_compare_label() -> String {
    "compare".into()
}

impl EvalConfig {
    pub fn new(predictions: impl Into<PathBuf>, dataset: impl Into<PathBuf>) -> Self {
        Self {
            predictions: predictions.into(),
            compare: None,
            dataset: dataset.into(),
            ground_truth: default_condition(),
            sigma: default_sigma(),
            domain: BlurDomain::default(),
            label: default_label(),
            compare_label: default_compare_label(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let std = if values.len() < 2 { 0.0 } else { sample_std(values) };
        Some(Self {
            mean: mean(values),
            std,
            n: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageScore {
    pub image_id: String,
    pub report: MetricReport,
    pub detection_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub iterations: usize,
    pub final_lr: f64,
    pub final_loss: f64,
    pub training_time_s: f64,
}

/// Scores of one prediction directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub images: Vec<ImageScore>,
    pub accuracy: BTreeMap<Metric, Option<MeanStd>>,
    pub detection_ms: Option<MeanStd>,
    pub training: Option<TrainingSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEvalResult {
    pub primary: RunSummary,
    pub compare: Option<RunSummary>,
    /// Paired t-tests (primary − compare) keyed by metric name or `detection_ms`.
    pub tests: BTreeMap<String, Option<TestResult>>,
}

#[derive(Debug, Deserialize)]
pub struct TimingRow {
    pub image_id: String,
    pub millis: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct TrainingLogRow {
    pub iteration: u64,
    pub lr: f64,
    pub loss: f64,
    pub elapsed_s: f64,
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.position() {
        Some(pos) => Error::Parse {
            line: pos.line(),
            message: format!("{}: {e}", path.display()),
        },
        None => Error::Validation(format!("{}: {e}", path.display())),
    }
}

fn read_rows<T: DeserializeOwned>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(std::io::BufReader::new(file));
    let found: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if found != header {
        return Err(Error::Parse {
            line: 1,
            message: format!("{}: expected header '{}', found '{}'", path.display(), header.join(","), found.join(",")),
        });
    }
    rdr.deserialize().map(|row| row.map_err(|e| csv_error(path, e))).collect()
}

/// Per-image detection times; every time must be finite and positive.
pub fn read_timing(path: &Path) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (i, row) in read_rows::<TimingRow>(path, &TIMING_HEADER)?.into_iter().enumerate() {
        let line = i as u64 + 2;
        if !(row.millis.is_finite() && row.millis > 0.0) {
            return Err(Error::Parse {
                line,
                message: format!("{}: millis must be positive, got {}", path.display(), row.millis),
            });
        }
        if out.insert(row.image_id.clone(), row.millis).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("{}: duplicate image_id '{}'", path.display(), row.image_id),
            });
        }
    }
    Ok(out)
}

/// Training log rows; iterations strictly increase and elapsed time never decreases.
pub fn read_training_log(path: &Path) -> Result<Vec<TrainingLogRow>> {
    let rows: Vec<TrainingLogRow> = read_rows(path, &TRAINING_LOG_HEADER)?;
    for (i, r) in rows.iter().enumerate() {
        let line = i as u64 + 2;
        let bad = |msg: String| Err(Error::Parse { line, message: format!("{}: {msg}", path.display()) });
        if !(r.lr.is_finite() && r.lr > 0.0) {
            return bad(format!("lr must be positive, got {}", r.lr));
        }
        if !r.loss.is_finite() {
            return bad(format!("loss is not finite at iteration {}", r.iteration));
        }
        if !(r.elapsed_s.is_finite() && r.elapsed_s >= 0.0) {
            return bad(format!("elapsed_s must be ≥ 0, got {}", r.elapsed_s));
        }
        if i > 0 {
            let prev = &rows[i - 1];
            if r.iteration <= prev.iteration {
                return bad(format!("iteration {} does not follow {}", r.iteration, prev.iteration));
            }
            if r.elapsed_s < prev.elapsed_s {
                return bad(format!("elapsed_s decreases from {} to {}", prev.elapsed_s, r.elapsed_s));
            }
        }
    }
    Ok(rows)
}

pub fn summarize_training(rows: &[TrainingLogRow]) -> Option<TrainingSummary> {
    let last = rows.last()?;
    Some(TrainingSummary {
        iterations: rows.len(),
        final_lr: last.lr,
        final_loss: last.loss,
        training_time_s: last.elapsed_s,
    })
}

fn prediction_path(dir: &Path, id: &str) -> Option<PathBuf> {
    ["npy", "png"]
        .iter()
        .map(|ext| dir.join(format!("{id}.{ext}")))
        .find(|p| p.is_file())
}

/// Load a prediction as a 1-channel image in `[0, 1]`; values outside the
/// unit range are min-max normalized.
pub fn load_prediction(path: &Path) -> Result<RasterImage> {
    let is_npy = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("npy"));
    if !is_npy {
        return load_gray(path);
    }
    let arr = npy::read(path)?;
    if arr.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation(format!("{}: prediction contains non-finite values", path.display())));
    }
    let (lo, hi) = arr
        .data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let data = if lo >= 0.0 && hi <= 1.0 {
        arr.data
    } else if hi > lo {
        arr.data.iter().map(|v| (v - lo) / (hi - lo)).collect()
    } else {
        vec![0.0; arr.data.len()]
    };
    RasterImage::new(arr.width, arr.height, 1, Encoding::Linear, data)
}

fn score_dir(
    ds: &Dataset,
    dir: &Path,
    label: &str,
    gt: &BTreeMap<String, (crate::fixmap::FixationSet, DensityMap)>,
) -> Result<RunSummary> {
    let mut missing = Vec::new();
    let mut paths = Vec::new();
    for stim in &ds.stimuli {
        match prediction_path(dir, &stim.id) {
            Some(p) => paths.push((stim, p)),
            None => missing.push(stim.id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Validation(format!(
            "{}: missing predictions for image ids: {}",
            dir.display(),
            missing.join(", ")
        )));
    }

    let timing_path = dir.join(TIMING_FILE);
    let timing = if timing_path.is_file() {
        let t = read_timing(&timing_path)?;
        let absent: Vec<&str> = ds.stimuli.iter().map(|s| s.id.as_str()).filter(|id| !t.contains_key(*id)).collect();
        if !absent.is_empty() {
            return Err(Error::Validation(format!(
                "{}: no detection time for image ids: {}",
                timing_path.display(),
                absent.join(", ")
            )));
        }
        Some(t)
    } else {
        None
    };
    let log_path = dir.join(TRAINING_LOG_FILE);
    let training = if log_path.is_file() {
        summarize_training(&read_training_log(&log_path)?)
    } else {
        None
    };

    let images: Vec<ImageScore> = paths
        .par_iter()
        .map(|(stim, path)| {
            let img = load_prediction(path)?;
            let img = resize_bicubic(&img, stim.width, stim.height)?;
            let pred = DensityMap::from_image(&img)?;
            let (fix, gt_map) = &gt[&stim.id];
            Ok(ImageScore {
                image_id: stim.id.clone(),
                report: score_accuracy(&pred, fix, gt_map)?,
                detection_ms: timing.as_ref().map(|t| t[&stim.id]),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut accuracy = BTreeMap::new();
    for m in Metric::ACCURACY {
        let v: Vec<f64> = images.iter().filter_map(|i| i.report.get(m)).collect();
        accuracy.insert(m, MeanStd::of(&v));
    }
    let det: Vec<f64> = images.iter().filter_map(|i| i.detection_ms).collect();
    Ok(RunSummary {
        label: label.to_string(),
        images,
        accuracy,
        detection_ms: MeanStd::of(&det),
        training,
    })
}

fn paired(a: &RunSummary, b: &RunSummary, get: impl Fn(&ImageScore) -> Option<f64>) -> Result<Option<TestResult>> {
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (x, y) in a.images.iter().zip(&b.images) {
        debug_assert_eq!(x.image_id, y.image_id);
        if let (Some(u), Some(v)) = (get(x), get(y)) {
            xs.push(u);
            ys.push(v);
        }
    }
    if xs.len() < 2 {
        return Ok(None);
    }
    paired_t_test(&xs, &ys).map(Some)
}

/// Score prediction directories against a dataset's pooled fixations.
///
/// Predictions are bicubically resampled to each stimulus's size (a no-op
/// when they already match) and scored with NSS, AUC-Judd, SIM and CC.
pub fn evaluate_model_outputs(cfg: &EvalConfig) -> Result<ModelEvalResult> {
    let ds = Dataset::load(&cfg.dataset)?;
    let spec = BlurSpec::new(cfg.sigma, cfg.domain)?;
    let mut gt = BTreeMap::new();
    let mut blurs: BTreeMap<(usize, usize), GaussianBlur> = BTreeMap::new();
    for stim in &ds.stimuli {
        let fix = pooled_fixations(&ds, cfg.ground_truth, &stim.id)?.ok_or_else(|| {
            Error::Validation(format!(
                "stimulus '{}' has no {} fixations to use as ground truth",
                stim.id,
                cfg.ground_truth.label()
            ))
        })?;
        let dims = (stim.width, stim.height);
        if !blurs.contains_key(&dims) {
            blurs.insert(dims, GaussianBlur::new(spec, dims.0, dims.1)?);
        }
        let map = blurs[&dims].apply(&rasterize(&fix)?)?;
        gt.insert(stim.id.clone(), (fix, map));
    }

    let primary = score_dir(&ds, &cfg.predictions, &cfg.label, &gt)?;
    let compare = match &cfg.compare {
        Some(dir) => Some(score_dir(&ds, dir, &cfg.compare_label, &gt)?),
        None => None,
    };
    let mut tests = BTreeMap::new();
    if let Some(b) = &compare {
        for m in Metric::ACCURACY {
            tests.insert(m.name().to_string(), paired(&primary, b, |i| i.report.get(m))?);
        }
        tests.insert(DETECTION_MS.to_string(), paired(&primary, b, |i| i.detection_ms)?);
    }
    Ok(ModelEvalResult { primary, compare, tests })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl ModelEvalResult {
    fn runs(&self) -> impl Iterator<Item = &RunSummary> {
        std::iter::once(&self.primary).chain(self.compare.as_ref())
    }

    /// Per-image scores of every run.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["schema_version", "run", "image_id", "nss", "auc_judd", "sim", "cc", "detection_ms"])?;
        for run in self.runs() {
            for img in &run.images {
                let mut row = vec![SCHEMA_VERSION.to_string(), run.label.clone(), img.image_id.clone()];
                row.extend(Metric::ACCURACY.iter().map(|&m| fmt_opt(img.report.get(m))));
                row.push(fmt_opt(img.detection_ms));
                wtr.write_record(&row)?;
            }
        }
        wtr.flush().map_err(|e| Error::io("<model eval csv>", e))?;
        Ok(())
    }

    /// Mean ± std per quantity for each run, with the paired test when comparing.
    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "schema_version", "quantity", "mean", "std", "compare_mean", "compare_std", "t", "dof", "p_value",
        ])?;
        let mut quantities: Vec<(String, Box<dyn Fn(&RunSummary) -> Option<MeanStd>>)> = Vec::new();
        for m in Metric::ACCURACY {
            quantities.push((m.name().to_string(), Box::new(move |r: &RunSummary| r.accuracy[&m])));
        }
        quantities.push((DETECTION_MS.to_string(), Box::new(|r: &RunSummary| r.detection_ms)));
        quantities.push((
            "training_s".to_string(),
            Box::new(|r: &RunSummary| {
                r.training.as_ref().map(|t| MeanStd {
                    mean: t.training_time_s,
                    std: 0.0,
                    n: 1,
                })
            }),
        ));
        for (name, get) in &quantities {
            let a = get(&self.primary);
            let b = self.compare.as_ref().and_then(|c| get(c));
            let test = self.tests.get(name).cloned().flatten();
            let dof = test.as_ref().map(|t| match t.dof {
                crate::stats::Dof::T(d) => d,
                crate::stats::Dof::F(d, _) => d,
            });
            wtr.write_record([
                SCHEMA_VERSION.to_string(),
                name.clone(),
                fmt_opt(a.map(|s| s.mean)),
                fmt_opt(a.map(|s| s.std)),
                fmt_opt(b.map(|s| s.mean)),
                fmt_opt(b.map(|s| s.std)),
                fmt_opt(test.as_ref().map(|t| t.statistic)),
                fmt_opt(dof),
                fmt_opt(test.as_ref().map(|t| t.p_value)),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<model eval summary csv>", e))?;
        Ok(())
    }

    /// Human-readable table: mean ± std per run, then p of the paired test.
    pub fn table(&self) -> String {
        let mut out = format!("{:<14}", "");
        for run in self.runs() {
            out.push_str(&format!("{:>22}", run.label));
        }
        if self.compare.is_some() {
            out.push_str(&format!("{:>10}", "p"));
        }
        out.push('\n');
        let mut line = |name: &str, vals: Vec<Option<MeanStd>>, key: Option<&str>| {
            out.push_str(&format!("{name:<14}"));
            for v in vals {
                match v {
                    Some(s) => out.push_str(&format!("{:>22}", format!("{:.3} ± {:.3}", s.mean, s.std))),
                    None => out.push_str(&format!("{:>22}", "-")),
                }
            }
            if self.compare.is_some() {
                match key.and_then(|k| self.tests.get(k)).cloned().flatten() {
                    Some(t) => out.push_str(&format!("{:>10.4}", t.p_value)),
                    None => out.push_str(&format!("{:>10}", "-")),
                }
            }
            out.push('\n');
        };
        for m in Metric::ACCURACY {
            line(m.label(), self.runs().map(|r| r.accuracy[&m]).collect(), Some(m.name()));
        }
        line("detection ms", self.runs().map(|r| r.detection_ms).collect(), Some(DETECTION_MS));
        line(
            "training s",
            self.runs()
                .map(|r| r.training.as_ref().map(|t| MeanStd { mean: t.training_time_s, std: 0.0, n: 1 }))
                .collect(),
            None,
        );
        out
    }
}
