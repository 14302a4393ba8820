//! The six saliency similarity metrics.
//!
//! Location-based metrics (NSS, AUC-Judd, shuffled AUC) compare a saliency
//! map against discrete fixations; distribution-based ones (KL, CC, SIM)
//! compare two maps. Conventions follow the MIT saliency benchmark: natural
//! log and ε = machine epsilon in KL, population standard deviation in NSS,
//! trapezoidal ROC area with ties resolved by `≥` thresholds. Each fixation
//! counts once per occurrence.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixmap::{DensityMap, FixationSet};

/// Regularizer in the KL divergence.
pub const KL_EPSILON: f64 = f64::EPSILON;

/// Shuffled AUC draws at most this many negatives per positive fixation.
pub const SAUC_NEGATIVES_PER_FIXATION: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Nss,
    Kl,
    AucJudd,
    AucShuffled,
    Cc,
    Sim,
}

impl Metric {
    /// Report field order.
    pub const ALL: [Metric; 6] = [
        Metric::Nss,
        Metric::Kl,
        Metric::AucJudd,
        Metric::AucShuffled,
        Metric::Cc,
        Metric::Sim,
    ];

    /// Column order of the published congruency table.
    pub const TABLE_ORDER: [Metric; 6] = [
        Metric::AucJudd,
        Metric::AucShuffled,
        Metric::Cc,
        Metric::Nss,
        Metric::Sim,
        Metric::Kl,
    ];

    /// The metrics that define model accuracy.
    pub const ACCURACY: [Metric; 4] = [Metric::Nss, Metric::AucJudd, Metric::Sim, Metric::Cc];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Nss => "nss",
            Metric::Kl => "kl",
            Metric::AucJudd => "auc_judd",
            Metric::AucShuffled => "auc_shuffled",
            Metric::Cc => "cc",
            Metric::Sim => "sim",
        }
    }

    /// Short label as used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            Metric::Nss => "NSS",
            Metric::Kl => "KL",
            Metric::AucJudd => "jAUC",
            Metric::AucShuffled => "sAUC",
            Metric::Cc => "CC",
            Metric::Sim => "SIM",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn same_size(a: (usize, usize), b: (usize, usize), metric: Metric) -> Result<()> {
    if a != b {
        return Err(Error::Validation(format!(
            "{metric}: size mismatch {}×{} vs {}×{}",
            a.0, a.1, b.0, b.1
        )));
    }
    Ok(())
}

fn need_fixations(fix: &FixationSet, metric: Metric) -> Result<()> {
    if fix.is_empty() {
        return Err(Error::EmptyInput(format!(
            "{metric}: stimulus '{}', observer '{}' has no fixations",
            fix.stimulus_id, fix.observer_id
        )));
    }
    Ok(())
}

fn is_constant(values: &[f64]) -> bool {
    values.iter().all(|&v| v == values[0])
}

fn mean_and_pop_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Normalized Scanpath Saliency: mean z-scored saliency at the fixations.
pub fn nss(sal: &DensityMap, fix: &FixationSet) -> Result<f64> {
    same_size(sal.size(), fix.size(), Metric::Nss)?;
    need_fixations(fix, Metric::Nss)?;
    let (mean, std) = mean_and_pop_std(sal.values());
    if is_constant(sal.values()) || std == 0.0 {
        return Err(Error::DegenerateMap("nss: saliency map is constant".into()));
    }
    let idx = fix.pixel_indices();
    let total: f64 = idx.iter().map(|&i| (sal.values()[i] - mean) / std).sum();
    Ok(total / idx.len() as f64)
}

/// KL divergence of the ground-truth distribution from the prediction,
/// `Σ gt·ln(ε + gt/(pred + ε))`, both maps normalized to unit mass first.
pub fn kl(pred: &DensityMap, gt: &DensityMap) -> Result<f64> {
    same_size(pred.size(), gt.size(), Metric::Kl)?;
    let (sp, sq) = (pred.sum(), gt.sum());
    if sp <= 0.0 || sq <= 0.0 {
        return Err(Error::EmptyInput("kl: map with zero mass".into()));
    }
    let (ip, iq) = (1.0 / sp, 1.0 / sq);
    let total: f64 = pred
        .values()
        .iter()
        .zip(gt.values())
        .filter(|(_, &q)| q != 0.0)
        .map(|(&p, &q)| {
            let (p, q) = (p * ip, q * iq);
            q * (KL_EPSILON + q / (p + KL_EPSILON)).ln()
        })
        .sum();
    Ok(total.max(0.0))
}

/// Area under the ROC curve traced by `positives` against `negatives`,
/// with one threshold per distinct positive value.
///
/// `negatives` must be sorted ascending; ties count as above threshold.
fn roc_area(positives: &[f64], sorted_negatives: &[f64]) -> f64 {
    let mut thresholds = positives.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let (n_pos, n_neg) = (positives.len() as f64, sorted_negatives.len() as f64);

    let mut area = 0.0;
    let (mut prev_fp, mut prev_tp) = (0.0, 0.0);
    for &t in &thresholds {
        let tp = positives.iter().filter(|&&v| v >= t).count() as f64 / n_pos;
        let below = sorted_negatives.partition_point(|&v| v < t);
        let fp = (sorted_negatives.len() - below) as f64 / n_neg;
        area += (fp - prev_fp) * (tp + prev_tp) / 2.0;
        (prev_fp, prev_tp) = (fp, tp);
    }
    area + (1.0 - prev_fp) * (1.0 + prev_tp) / 2.0
}

/// Like [`roc_area`] but for large unsorted negative sets: negatives are
/// bucketed by how many thresholds they reach instead of being sorted.
fn roc_area_bucketed(positives: &[f64], negatives: impl Iterator<Item = f64>) -> f64 {
    let mut thresholds = positives.to_vec();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let k = thresholds.len();
    // reach[j] = number of negatives whose value is ≥ thresholds[j] but < thresholds[j+1]
    let mut reach = vec![0usize; k + 1];
    let mut n_neg = 0usize;
    for v in negatives {
        reach[thresholds.partition_point(|&t| t <= v)] += 1;
        n_neg += 1;
    }
    let mut pos_sorted = positives.to_vec();
    pos_sorted.sort_by(f64::total_cmp);
    let (n_pos, n_negf) = (positives.len() as f64, n_neg as f64);

    let mut area = 0.0;
    let (mut prev_fp, mut prev_tp) = (0.0, 0.0);
    let mut neg_above = 0usize;
    for j in (0..k).rev() {
        let t = thresholds[j];
        neg_above += reach[j + 1];
        let tp = (pos_sorted.len() - pos_sorted.partition_point(|&v| v < t)) as f64 / n_pos;
        let fp = neg_above as f64 / n_negf;
        area += (fp - prev_fp) * (tp + prev_tp) / 2.0;
        (prev_fp, prev_tp) = (fp, tp);
    }
    area + (1.0 - prev_fp) * (1.0 + prev_tp) / 2.0
}

/// AUC-Judd: fixations are positives, every non-fixated pixel a negative.
pub fn auc_judd(sal: &DensityMap, fix: &FixationSet) -> Result<f64> {
    same_size(sal.size(), fix.size(), Metric::AucJudd)?;
    need_fixations(fix, Metric::AucJudd)?;
    let idx = fix.pixel_indices();
    let mut fixated = vec![false; sal.values().len()];
    for &i in &idx {
        fixated[i] = true;
    }
    if fixated.iter().all(|&f| f) {
        return Err(Error::DegenerateMap(
            "auc_judd: every pixel is fixated, no negatives remain".into(),
        ));
    }
    let positives: Vec<f64> = idx.iter().map(|&i| sal.values()[i]).collect();
    let negatives = sal
        .values()
        .iter()
        .zip(&fixated)
        .filter(|(_, &f)| !f)
        .map(|(&v, _)| v);
    Ok(roc_area_bucketed(&positives, negatives))
}

/// Flat pixel indices of the negatives used by [`auc_shuffled`]: all of
/// them when there are at most `100·n_fixations`, otherwise a seeded sample
/// without replacement.
pub fn shuffled_negative_indices(
    negatives: &FixationSet,
    n_fixations: usize,
    seed: u64,
) -> Vec<usize> {
    let all = negatives.pixel_indices();
    let cap = SAUC_NEGATIVES_PER_FIXATION * n_fixations;
    if all.len() <= cap {
        return all;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rand::seq::index::sample(&mut rng, all.len(), cap)
        .into_iter()
        .map(|i| all[i])
        .collect()
}

/// Shuffled AUC: negatives are fixations from other stimuli (already mapped
/// onto this map's raster), which cancels shared center bias.
pub fn auc_shuffled(
    sal: &DensityMap,
    fix: &FixationSet,
    negatives: &FixationSet,
    seed: u64,
) -> Result<f64> {
    same_size(sal.size(), fix.size(), Metric::AucShuffled)?;
    same_size(sal.size(), negatives.size(), Metric::AucShuffled)?;
    need_fixations(fix, Metric::AucShuffled)?;
    if negatives.is_empty() {
        return Err(Error::Validation(
            "auc_shuffled: negative fixation pool is empty".into(),
        ));
    }
    let positives: Vec<f64> = fix.pixel_indices().iter().map(|&i| sal.values()[i]).collect();
    let mut neg: Vec<f64> = shuffled_negative_indices(negatives, fix.len(), seed)
        .into_iter()
        .map(|i| sal.values()[i])
        .collect();
    neg.sort_by(f64::total_cmp);
    Ok(roc_area(&positives, &neg))
}

/// Pearson correlation between two maps over all pixels.
pub fn cc(a: &DensityMap, b: &DensityMap) -> Result<f64> {
    same_size(a.size(), b.size(), Metric::Cc)?;
    let n = a.values().len() as f64;
    let ma = a.values().iter().sum::<f64>() / n;
    let mb = b.values().iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.values().iter().zip(b.values()) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if is_constant(a.values()) || is_constant(b.values()) || saa == 0.0 || sbb == 0.0 {
        return Err(Error::DegenerateMap("cc: map is constant".into()));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Histogram intersection of the two maps after normalizing each to unit mass.
///
/// Computed as `Σ min(p, q) / max(Σp, Σq)` over the normalized maps, which
/// equals `Σ min(p, q)` exactly in real arithmetic and makes `sim(P, P) = 1`
/// hold in floating point too.
pub fn sim(a: &DensityMap, b: &DensityMap) -> Result<f64> {
    same_size(a.size(), b.size(), Metric::Sim)?;
    let (sa, sb) = (a.sum(), b.sum());
    if sa <= 0.0 || sb <= 0.0 {
        return Err(Error::EmptyInput("sim: map with zero mass".into()));
    }
    let (ia, ib) = (1.0 / sa, 1.0 / sb);
    let (mut inter, mut ta, mut tb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.values().iter().zip(b.values()) {
        let (p, q) = (x * ia, y * ib);
        inter += p.min(q);
        ta += p;
        tb += q;
    }
    Ok((inter / ta.max(tb)).clamp(0.0, 1.0))
}

/// Why a metric is missing from a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricFlag {
    pub metric: Metric,
    pub reason: String,
}

/// Scores of one prediction against one ground truth. A metric is `None`
/// when it is undefined for the inputs (see `flags`) or was not requested.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub nss: Option<f64>,
    pub kl: Option<f64>,
    pub auc_judd: Option<f64>,
    pub auc_shuffled: Option<f64>,
    pub cc: Option<f64>,
    pub sim: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<MetricFlag>,
}

impl MetricReport {
    pub const CSV_HEADER: [&'static str; 6] = ["nss", "kl", "auc_judd", "auc_shuffled", "cc", "sim"];

    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Nss => self.nss,
            Metric::Kl => self.kl,
            Metric::AucJudd => self.auc_judd,
            Metric::AucShuffled => self.auc_shuffled,
            Metric::Cc => self.cc,
            Metric::Sim => self.sim,
        }
    }

    pub fn set(&mut self, metric: Metric, value: Option<f64>) {
        let slot = match metric {
            Metric::Nss => &mut self.nss,
            Metric::Kl => &mut self.kl,
            Metric::AucJudd => &mut self.auc_judd,
            Metric::AucShuffled => &mut self.auc_shuffled,
            Metric::Cc => &mut self.cc,
            Metric::Sim => &mut self.sim,
        };
        *slot = value;
    }

    /// Store a metric result, turning degenerate/empty inputs into flags.
    fn record(&mut self, metric: Metric, result: Result<f64>) -> Result<()> {
        match result {
            Ok(v) => self.set(metric, Some(v)),
            Err(e @ (Error::DegenerateMap(_) | Error::EmptyInput(_))) => {
                self.set(metric, None);
                self.flags.push(MetricFlag {
                    metric,
                    reason: e.to_string(),
                });
            }
            Err(e) => return Err(e),
        }
        Ok(())
    }

    /// The six values in report order, empty where missing.
    pub fn csv_fields(&self) -> Vec<String> {
        Metric::ALL
            .iter()
            .map(|&m| self.get(m).map(|v| v.to_string()).unwrap_or_default())
            .collect()
    }

    /// Flags joined into one CSV cell.
    pub fn flags_field(&self) -> String {
        self.flags
            .iter()
            .map(|f| f.metric.name())
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Full six-metric comparison of a prediction.
///
/// NSS and both AUCs score `pred` against `gt_fix`; KL, CC and SIM score it
/// against `gt_map`. Size mismatches are errors; metrics that are undefined
/// for the inputs (constant map, no fixations) come back as flags.
pub fn score_pair(
    pred: &DensityMap,
    gt_fix: &FixationSet,
    gt_map: &DensityMap,
    negatives: &FixationSet,
    seed: u64,
) -> Result<MetricReport> {
    same_size(pred.size(), gt_fix.size(), Metric::Nss)?;
    same_size(pred.size(), gt_map.size(), Metric::Kl)?;
    same_size(pred.size(), negatives.size(), Metric::AucShuffled)?;
    let mut report = MetricReport::default();
    report.record(Metric::Nss, nss(pred, gt_fix))?;
    report.record(Metric::Kl, kl(pred, gt_map))?;
    report.record(Metric::AucJudd, auc_judd(pred, gt_fix))?;
    report.record(Metric::AucShuffled, auc_shuffled(pred, gt_fix, negatives, seed))?;
    report.record(Metric::Cc, cc(pred, gt_map))?;
    report.record(Metric::Sim, sim(pred, gt_map))?;
    Ok(report)
}

/// Accuracy subset (NSS, AUC-Judd, SIM, CC); KL and shuffled AUC stay `None`.
pub fn score_accuracy(
    pred: &DensityMap,
    gt_fix: &FixationSet,
    gt_map: &DensityMap,
) -> Result<MetricReport> {
    same_size(pred.size(), gt_fix.size(), Metric::Nss)?;
    same_size(pred.size(), gt_map.size(), Metric::Cc)?;
    let mut report = MetricReport::default();
    report.record(Metric::Nss, nss(pred, gt_fix))?;
    report.record(Metric::AucJudd, auc_judd(pred, gt_fix))?;
    report.record(Metric::Sim, sim(pred, gt_map))?;
    report.record(Metric::Cc, cc(pred, gt_map))?;
    Ok(report)
}
