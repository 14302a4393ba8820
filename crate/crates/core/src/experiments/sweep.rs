use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{Condition, Dataset};
use super::{negative_pool, pair_seed, raster_size, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::fixmap::{rasterize, rescale_fixations, BlurDomain, BlurSpec, FixationSet, GaussianBlur};
use crate::metrics::{score_pair, Metric, MetricReport};
use crate::stats::{median, quantile};

/// `start, start + step, …` up to and including `stop`.
pub fn sigma_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || stop < start {
        return Err(Error::Validation(format!(
            "bad σ grid {start}..{stop} step {step}"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| start + i as f64 * step).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Blur widths in map pixels, strictly increasing.
    pub sigmas: Vec<f64>,
    pub domain: BlurDomain,
    /// Compute maps on a raster of this height (aspect preserved) instead of
    /// each stimulus's own frame.
    pub map_height: Option<usize>,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            sigmas: sigma_grid(1.0, 100.0, 1.0).expect("static grid"),
            domain: BlurDomain::Fourier,
            map_height: None,
            seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigmas.is_empty() {
            return Err(Error::Validation("sweep: σ grid is empty".into()));
        }
        if self.sigmas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation("sweep: σ grid must be strictly increasing".into()));
        }
        for &s in &self.sigmas {
            BlurSpec::new(s, self.domain)?;
        }
        if self.map_height == Some(0) {
            return Err(Error::Validation("sweep: map_height must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Median and quartiles of one metric at one σ over all (stimulus, observer) pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub median: f64,
    pub p25: f64,
    pub p75: f64,
    /// Pairs for which the metric was defined.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScores {
    pub stimulus_id: String,
    pub observer_id: String,
    /// One report per σ, aligned with [`SweepResult::sigmas`].
    pub reports: Vec<MetricReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub sigmas: Vec<f64>,
    /// Per metric, one point per σ; `None` where no pair had a value.
    pub curves: BTreeMap<Metric, Vec<Option<CurvePoint>>>,
    pub pairs: Vec<PairScores>,
}

fn summarize(values: &[f64]) -> Result<Option<CurvePoint>> {
    if values.is_empty() {
        return Ok(None);
    }
    Ok(Some(CurvePoint {
        median: median(values)?,
        p25: quantile(values, 0.25)?,
        p75: quantile(values, 0.75)?,
        n: values.len(),
    }))
}

/// Match HC and LG sets by (stimulus, observer); either side missing is an error.
pub(crate) fn pair_sets(ds: &Dataset) -> Result<Vec<(&FixationSet, &FixationSet)>> {
    let mut lg: BTreeMap<(&str, &str), &FixationSet> = ds
        .lg
        .iter()
        .map(|s| ((s.stimulus_id.as_str(), s.observer_id.as_str()), s))
        .collect();
    let mut pairs = Vec::with_capacity(ds.hc.len());
    for hc in &ds.hc {
        let key = (hc.stimulus_id.as_str(), hc.observer_id.as_str());
        match lg.remove(&key) {
            Some(l) => pairs.push((hc, l)),
            None => {
                return Err(Error::Validation(format!(
                    "stimulus '{}', observer '{}' has HC fixations but no LG fixations",
                    key.0, key.1
                )))
            }
        }
    }
    if let Some(((s, o), _)) = lg.into_iter().next() {
        return Err(Error::Validation(format!(
            "stimulus '{s}', observer '{o}' has LG fixations but no HC fixations"
        )));
    }
    pairs.sort_by(|a, b| {
        (a.0.stimulus_id.as_str(), a.0.observer_id.as_str())
            .cmp(&(b.0.stimulus_id.as_str(), b.0.observer_id.as_str()))
    });
    Ok(pairs)
}

/// Similarity of LG and HC fixation maps as a function of blur width.
///
/// For every (stimulus, observer) and σ, the observer's LG density map is
/// scored as a prediction of their HC fixations and HC density map. Curves
/// are medians over all pairs.
pub fn run_sigma_sweep(ds: &Dataset, cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let pairs = pair_sets(ds)?;

    let mut dims_of = BTreeMap::new();
    for s in &ds.stimuli {
        dims_of.insert(s.id.as_str(), raster_size(s, cfg.map_height));
    }
    let mut blurs: HashMap<(usize, (usize, usize)), GaussianBlur> = HashMap::new();
    for &dims in dims_of.values() {
        for (i, &sigma) in cfg.sigmas.iter().enumerate() {
            if let std::collections::hash_map::Entry::Vacant(e) = blurs.entry((i, dims)) {
                e.insert(GaussianBlur::new(BlurSpec::new(sigma, cfg.domain)?, dims.0, dims.1)?);
            }
        }
    }
    let mut pools = BTreeMap::new();
    for s in &ds.stimuli {
        pools.insert(s.id.as_str(), negative_pool(ds, &[Condition::Hc], &s.id, dims_of[s.id.as_str()])?);
    }

    let scored: Result<Vec<PairScores>> = pairs
        .par_iter()
        .map(|(hc, lg)| {
            let dims = dims_of[hc.stimulus_id.as_str()];
            let hc = rescale_fixations(hc, dims)?;
            let lg = rescale_fixations(lg, dims)?;
            let (hc_raw, lg_raw) = (rasterize(&hc)?, rasterize(&lg)?);
            let negatives = &pools[hc.stimulus_id.as_str()];
            let seed = pair_seed(cfg.seed, &hc.stimulus_id, &hc.observer_id);
            let reports = (0..cfg.sigmas.len())
                .map(|i| {
                    let blur = &blurs[&(i, dims)];
                    let pred = blur.apply(&lg_raw)?;
                    let gt_map = blur.apply(&hc_raw)?;
                    score_pair(&pred, &hc, &gt_map, negatives, seed)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(PairScores {
                stimulus_id: hc.stimulus_id.clone(),
                observer_id: hc.observer_id.clone(),
                reports,
            })
        })
        .collect();
    let pairs = scored?;

    let mut curves = BTreeMap::new();
    for metric in Metric::ALL {
        let curve = (0..cfg.sigmas.len())
            .map(|i| {
                let values: Vec<f64> = pairs.iter().filter_map(|p| p.reports[i].get(metric)).collect();
                summarize(&values)
            })
            .collect::<Result<Vec<_>>>()?;
        curves.insert(metric, curve);
    }
    Ok(SweepResult {
        sigmas: cfg.sigmas.clone(),
        curves,
        pairs,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl SweepResult {
    /// Median curve of one metric, `NaN` where undefined.
    pub fn medians(&self, metric: Metric) -> Vec<f64> {
        self.curves[&metric]
            .iter()
            .map(|p| p.map_or(f64::NAN, |p| p.median))
            .collect()
    }

    /// `schema_version,sigma,metric,median,p25,p75`, σ-major, metrics in report order.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["schema_version", "sigma", "metric", "median", "p25", "p75"])?;
        for (i, sigma) in self.sigmas.iter().enumerate() {
            for metric in Metric::ALL {
                let p = self.curves[&metric][i];
                wtr.write_record([
                    SCHEMA_VERSION.to_string(),
                    sigma.to_string(),
                    metric.name().to_string(),
                    fmt_opt(p.map(|p| p.median)),
                    fmt_opt(p.map(|p| p.p25)),
                    fmt_opt(p.map(|p| p.p75)),
                ])?;
            }
        }
        wtr.flush().map_err(|e| Error::io("<sweep csv>", e))?;
        Ok(())
    }

    /// Every pair's scores at every σ.
    pub fn write_scores_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["schema_version", "sigma", "stimulus_id", "observer_id"];
        header.extend(MetricReport::CSV_HEADER);
        header.push("flags");
        wtr.write_record(&header)?;
        for (i, sigma) in self.sigmas.iter().enumerate() {
            for p in &self.pairs {
                let r = &p.reports[i];
                let mut row = vec![
                    SCHEMA_VERSION.to_string(),
                    sigma.to_string(),
                    p.stimulus_id.clone(),
                    p.observer_id.clone(),
                ];
                row.extend(r.csv_fields());
                row.push(r.flags_field());
                wtr.write_record(&row)?;
            }
        }
        wtr.flush().map_err(|e| Error::io("<sweep scores csv>", e))?;
        Ok(())
    }
}
