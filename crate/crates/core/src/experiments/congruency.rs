use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{Condition, Dataset};
use super::{negative_pool, pair_seed, raster_size, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::fixmap::{aggregate, rasterize, rescale_fixations, BlurDomain, BlurSpec, FixationSet, GaussianBlur};
use crate::metrics::{score_pair, Metric, MetricReport};
use crate::stats::{mean, median, one_way_anova, TestResult};

/// Fewest observers per stimulus for a leave-one-out predictor of ≥ 2 others.
pub const MIN_OBSERVERS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CongruencyConfig {
    pub sigma: f64,
    pub domain: BlurDomain,
    pub map_height: Option<usize>,
    pub seed: u64,
}

impl Default for CongruencyConfig {
    fn default() -> Self {
        Self {
            sigma: 30.0,
            domain: BlurDomain::Fourier,
            map_height: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CongruencyRow {
    pub condition: Condition,
    pub stimulus_id: String,
    pub observer_id: String,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CongruencyResult {
    pub sigma: f64,
    pub rows: Vec<CongruencyRow>,
    /// Per condition, per metric median over all observers and stimuli.
    pub medians: BTreeMap<Condition, BTreeMap<Metric, Option<f64>>>,
    /// Per condition, per metric: each stimulus's mean observer score, in
    /// stimulus order. Stimuli where the metric is undefined for every
    /// observer are left out.
    pub stimulus_means: BTreeMap<Condition, BTreeMap<Metric, Vec<f64>>>,
    /// One-way ANOVA of the HC vs LG per-stimulus means, per metric; `None`
    /// if a group has < 2 values.
    pub anova: BTreeMap<Metric, Option<TestResult>>,
}

/// Prediction for observer `i`: the other observers' pooled fixations.
pub fn loo_predictor(sets: &[&FixationSet], i: usize) -> Result<FixationSet> {
    let others: Vec<FixationSet> = sets
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, s)| (*s).clone())
        .collect();
    aggregate(&others)
}

/// Leave-one-out inter-observer congruency under both conditions, plus a
/// per-metric one-way ANOVA between the HC and LG score groups.
///
/// The ANOVA runs on per-stimulus means rather than on observer rows: the
/// leave-one-out predictors of one stimulus share all but one observer, so
/// its rows are far from independent.
pub fn run_congruency(ds: &Dataset, cfg: &CongruencyConfig) -> Result<CongruencyResult> {
    let spec = BlurSpec::new(cfg.sigma, cfg.domain)?;
    if cfg.map_height == Some(0) {
        return Err(Error::Validation("congruency: map_height must be ≥ 1".into()));
    }

    struct Job<'a> {
        condition: Condition,
        stimulus: &'a str,
        dims: (usize, usize),
        observers: Vec<FixationSet>,
    }
    let mut jobs = Vec::new();
    for cond in Condition::BOTH {
        for stim in &ds.stimuli {
            let observers = ds.observers(cond, &stim.id);
            if observers.len() < MIN_OBSERVERS {
                return Err(Error::Validation(format!(
                    "congruency: stimulus '{}' has {} {} observer(s), needs at least {MIN_OBSERVERS}",
                    stim.id,
                    observers.len(),
                    cond.label()
                )));
            }
            let dims = raster_size(stim, cfg.map_height);
            let observers = observers
                .into_iter()
                .map(|s| rescale_fixations(s, dims))
                .collect::<Result<Vec<_>>>()?;
            jobs.push(Job {
                condition: cond,
                stimulus: &stim.id,
                dims,
                observers,
            });
        }
    }

    let mut blurs: BTreeMap<(usize, usize), GaussianBlur> = BTreeMap::new();
    for job in &jobs {
        if !blurs.contains_key(&job.dims) {
            blurs.insert(job.dims, GaussianBlur::new(spec, job.dims.0, job.dims.1)?);
        }
    }
    // One pool per stimulus, drawn from both conditions, so HC and LG are
    // scored against the same center-bias sample.
    let mut pools = BTreeMap::new();
    for job in &jobs {
        if !pools.contains_key(job.stimulus) {
            pools.insert(job.stimulus, negative_pool(ds, &Condition::BOTH, job.stimulus, job.dims)?);
        }
    }

    let per_job: Result<Vec<Vec<CongruencyRow>>> = jobs
        .par_iter()
        .map(|job| {
            let blur = &blurs[&job.dims];
            let negatives = &pools[job.stimulus];
            let refs: Vec<&FixationSet> = job.observers.iter().collect();
            (0..refs.len())
                .map(|i| {
                    let own = refs[i];
                    let pred = blur.apply(&rasterize(&loo_predictor(&refs, i)?)?)?;
                    let gt_map = blur.apply(&rasterize(own)?)?;
                    let seed = pair_seed(cfg.seed, own.stimulus_id.as_str(), own.observer_id.as_str());
                    let report = score_pair(&pred, own, &gt_map, negatives, seed)?;
                    Ok(CongruencyRow {
                        condition: job.condition,
                        stimulus_id: own.stimulus_id.clone(),
                        observer_id: own.observer_id.clone(),
                        report,
                    })
                })
                .collect()
        })
        .collect();
    let rows: Vec<CongruencyRow> = per_job?.into_iter().flatten().collect();

    let values = |cond: Condition, metric: Metric| -> Vec<f64> {
        rows.iter()
            .filter(|r| r.condition == cond)
            .filter_map(|r| r.report.get(metric))
            .collect()
    };
    let mut medians = BTreeMap::new();
    for cond in Condition::BOTH {
        let mut per_metric = BTreeMap::new();
        for metric in Metric::ALL {
            let v = values(cond, metric);
            per_metric.insert(metric, if v.is_empty() { None } else { Some(median(&v)?) });
        }
        medians.insert(cond, per_metric);
    }
    let mut stimulus_means = BTreeMap::new();
    for cond in Condition::BOTH {
        let mut per_metric = BTreeMap::new();
        for metric in Metric::ALL {
            let means: Vec<f64> = ds
                .stimuli
                .iter()
                .filter_map(|stim| {
                    let v: Vec<f64> = rows
                        .iter()
                        .filter(|r| r.condition == cond && r.stimulus_id == stim.id)
                        .filter_map(|r| r.report.get(metric))
                        .collect();
                    (!v.is_empty()).then(|| mean(&v))
                })
                .collect();
            per_metric.insert(metric, means);
        }
        stimulus_means.insert(cond, per_metric);
    }
    let mut anova = BTreeMap::new();
    for metric in Metric::ALL {
        let groups: Vec<Vec<f64>> = Condition::BOTH
            .iter()
            .map(|c| stimulus_means[c][&metric].clone())
            .collect();
        let test = if groups.iter().all(|g| g.len() >= 2) {
            Some(one_way_anova(&groups)?)
        } else {
            None
        };
        anova.insert(metric, test);
    }
    Ok(CongruencyResult {
        sigma: cfg.sigma,
        rows,
        medians,
        stimulus_means,
        anova,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl CongruencyResult {
    /// Condition rows in the published column order, two decimals.
    pub fn table(&self) -> String {
        let mut out = String::from("   ");
        for m in Metric::TABLE_ORDER {
            out.push_str(&format!("{:>8}", m.label()));
        }
        out.push('\n');
        for cond in Condition::BOTH {
            out.push_str(cond.label());
            out.push(' ');
            for m in Metric::TABLE_ORDER {
                match self.medians[&cond][&m] {
                    Some(v) => out.push_str(&format!("{v:>8.2}")),
                    None => out.push_str(&format!("{:>8}", "-")),
                }
            }
            out.push('\n');
        }
        out.push_str(" p ");
        for m in Metric::TABLE_ORDER {
            match &self.anova[&m] {
                Some(t) => out.push_str(&format!("{:>8.3}", t.p_value)),
                None => out.push_str(&format!("{:>8}", "-")),
            }
        }
        out.push('\n');
        out
    }

    /// Summary rows: one per (condition, metric) median, then one per metric
    /// for the ANOVA (`condition = anova`, F in `value`).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["schema_version", "sigma", "condition", "metric", "value", "dof1", "dof2", "p_value"])?;
        for cond in Condition::BOTH {
            for m in Metric::TABLE_ORDER {
                wtr.write_record([
                    SCHEMA_VERSION.to_string(),
                    self.sigma.to_string(),
                    cond.label().to_string(),
                    m.name().to_string(),
                    fmt_opt(self.medians[&cond][&m]),
                    String::new(),
                    String::new(),
                    String::new(),
                ])?;
            }
        }
        for m in Metric::TABLE_ORDER {
            let (stat, d1, d2, p) = match &self.anova[&m] {
                Some(t) => match t.dof {
                    crate::stats::Dof::F(a, b) => (Some(t.statistic), Some(a), Some(b), Some(t.p_value)),
                    crate::stats::Dof::T(a) => (Some(t.statistic), Some(a), None, Some(t.p_value)),
                },
                None => (None, None, None, None),
            };
            wtr.write_record([
                SCHEMA_VERSION.to_string(),
                self.sigma.to_string(),
                "anova".to_string(),
                m.name().to_string(),
                fmt_opt(stat),
                fmt_opt(d1),
                fmt_opt(d2),
                fmt_opt(p),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<congruency csv>", e))?;
        Ok(())
    }

    /// Per-observer scores.
    pub fn write_scores_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["schema_version", "condition", "stimulus_id", "observer_id"];
        header.extend(MetricReport::CSV_HEADER);
        header.push("flags");
        wtr.write_record(&header)?;
        for r in &self.rows {
            let mut row = vec![
                SCHEMA_VERSION.to_string(),
                r.condition.label().to_string(),
                r.stimulus_id.clone(),
                r.observer_id.clone(),
            ];
            row.extend(r.report.csv_fields());
            row.push(r.report.flags_field());
            wtr.write_record(&row)?;
        }
        wtr.flush().map_err(|e| Error::io("<congruency scores csv>", e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::dataset::Stimulus;
    use crate::experiments::synth::{generate_synthetic_dataset, SynthSpec};
    use crate::fixmap::Point;

    fn spec() -> SynthSpec {
        SynthSpec {
            stimuli: 3,
            observers: 5,
            width: 80,
            height: 48,
            spread: 4.0,
            ..SynthSpec::default()
        }
    }

    fn cfg() -> CongruencyConfig {
        CongruencyConfig {
            sigma: 6.0,
            ..CongruencyConfig::default()
        }
    }

    #[test]
    fn predictor_leaves_the_observer_out() {
        let ds = generate_synthetic_dataset(&spec(), 1).unwrap();
        let sets = ds.observers(Condition::Hc, "stim001");
        let pred = loo_predictor(&sets, 2).unwrap();
        let expected: usize = sets.iter().enumerate().filter(|(j, _)| *j != 2).map(|(_, s)| s.len()).sum();
        assert_eq!(pred.len(), expected);
    }

    #[test]
    fn marker_observer_changes_only_its_own_row_and_predictors() {
        let ds = generate_synthetic_dataset(&spec(), 2).unwrap();
        let base = run_congruency(&ds, &cfg()).unwrap();

        // move one observer's fixations far away; their own predictor is
        // built from the others and must not change
        let mut moved = ds.clone();
        let idx = moved.hc.iter().position(|s| s.stimulus_id == "stim002" && s.observer_id == "obs03").unwrap();
        let target = &moved.hc[idx];
        let pts = vec![Point::new(1.0, 1.0); target.len()];
        moved.hc[idx] = FixationSet::new(target.stimulus_id.clone(), target.observer_id.clone(), target.size(), pts).unwrap();
        let after = run_congruency(&moved, &cfg()).unwrap();

        for (a, b) in base.rows.iter().zip(&after.rows) {
            let same_stim = a.condition == Condition::Hc && a.stimulus_id == "stim002";
            if a.condition == Condition::Lg || !same_stim {
                // other conditions untouched except through shuffled-AUC negatives
                assert_eq!(a.report.cc, b.report.cc, "{a:?}");
                assert_eq!(a.report.nss, b.report.nss);
            } else if a.observer_id != "obs03" {
                assert_ne!(a.report.cc, b.report.cc);
            }
        }
        let own_before = base.rows.iter().find(|r| r.condition == Condition::Hc && r.stimulus_id == "stim002" && r.observer_id == "obs03").unwrap();
        let own_after = after.rows.iter().find(|r| r.condition == Condition::Hc && r.stimulus_id == "stim002" && r.observer_id == "obs03").unwrap();
        assert_ne!(own_before.report.nss, own_after.report.nss);
    }

    #[test]
    fn identical_observers_agree_perfectly() {
        let pts: Vec<Point> = vec![Point::new(10.0, 10.0), Point::new(30.0, 20.0)];
        let mk = |o: &str| FixationSet::new("s", o, (40, 30), pts.clone()).unwrap();
        let sets: Vec<FixationSet> = ["a", "b", "c", "d"].iter().map(|o| mk(o)).collect();
        let stim = Stimulus { id: "s".into(), width: 40, height: 30, hc_image: None, lg_image: None };
        let other = Stimulus { id: "t".into(), width: 40, height: 30, hc_image: None, lg_image: None };
        let others: Vec<FixationSet> = ["a", "b", "c"]
            .iter()
            .map(|o| FixationSet::new("t", *o, (40, 30), vec![Point::new(5.0, 25.0)]).unwrap())
            .collect();
        let all: Vec<FixationSet> = sets.iter().cloned().chain(others).collect();
        let ds = Dataset::new(vec![stim, other], all.clone(), all).unwrap();
        let res = run_congruency(&ds, &CongruencyConfig { sigma: 3.0, ..cfg() }).unwrap();
        for r in res.rows.iter().filter(|r| r.stimulus_id == "s") {
            assert!(r.report.auc_judd.unwrap() > 0.95);
            assert_eq!(r.report.cc, Some(1.0));
        }
        for m in Metric::ALL {
            if let Some(t) = &res.anova[&m] {
                assert_eq!(t.p_value, 1.0, "{m}");
            }
        }
    }

    #[test]
    fn scattered_condition_is_detected() {
        // LG observers fixate uniformly at random, so they agree far less
        let s = SynthSpec { stimuli: 8, observers: 8, ..spec() };
        let ds = generate_synthetic_dataset(&s, 4).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(9);
        let lg: Vec<FixationSet> = ds
            .lg
            .iter()
            .map(|set| {
                let pts = (0..set.len())
                    .map(|_| {
                        use rand::Rng;
                        Point::new(rng.random_range(0.0..80.0), rng.random_range(0.0..48.0))
                    })
                    .collect();
                FixationSet::new(set.stimulus_id.clone(), set.observer_id.clone(), set.size(), pts).unwrap()
            })
            .collect();
        let ds = Dataset::new(ds.stimuli.clone(), ds.hc.clone(), lg).unwrap();
        let res = run_congruency(&ds, &cfg()).unwrap();
        for m in [Metric::Cc, Metric::Nss, Metric::AucJudd] {
            assert!(res.anova[&m].as_ref().unwrap().p_value < 0.01, "{m}");
        }
        assert_eq!(res.stimulus_means[&Condition::Hc][&Metric::Cc].len(), 8);
    }

    #[test]
    fn too_few_observers() {
        let s = SynthSpec { observers: 2, ..spec() };
        let ds = generate_synthetic_dataset(&s, 1).unwrap();
        let err = run_congruency(&ds, &cfg()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(err.to_string().contains("at least 3"));
    }

    #[test]
    fn table_layout() {
        let ds = generate_synthetic_dataset(&spec(), 3).unwrap();
        let res = run_congruency(&ds, &cfg()).unwrap();
        let table = res.table();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].split_whitespace().eq(["jAUC", "sAUC", "CC", "NSS", "SIM", "KL"]));
        assert!(lines[1].starts_with("HC"));
        assert_eq!(lines[1].split_whitespace().count(), 7);
        let mut buf = Vec::new();
        res.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 12 + 6);
    }
}
