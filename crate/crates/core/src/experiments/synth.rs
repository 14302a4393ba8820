//! Seeded synthetic eye-tracking datasets.
//!
//! Each stimulus gets a few salient loci drawn with a center bias and its
//! own fixation spread. Every observer settles on one locus, picked by
//! salience weight, and fixates near it 4–6 times (configurable). The LG
//! condition either repeats the HC fixations with Gaussian jitter or is an
//! independent draw from the same stimulus model.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Stimulus};
use super::derive_seed;
use crate::error::{Error, Result};
use crate::fixmap::{FixationSet, Point};
use crate::imaging::io::save_rgb_png;
use crate::imaging::{hc_to_lg, Encoding, RasterImage, ResizePolicy};

/// How LG fixations relate to HC fixations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LgMode {
    /// LG = HC + N(0, jitter²) per coordinate.
    Jittered,
    /// LG drawn afresh from the same stimulus model.
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub stimuli: usize,
    pub observers: usize,
    pub min_fixations: usize,
    pub max_fixations: usize,
    /// Standard deviation of the HC→LG displacement, px.
    pub jitter: f64,
    /// Salient loci per stimulus.
    pub loci: usize,
    pub width: usize,
    pub height: usize,
    /// Mean fixation scatter around a locus, px; each stimulus scales it by U(0.5, 1.5).
    pub spread: f64,
    /// Std of locus positions around the frame center, as a fraction of each dimension.
    pub center_bias: f64,
    pub lg_mode: LgMode,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            stimuli: 20,
            observers: 18,
            min_fixations: 4,
            max_fixations: 6,
            jitter: 2.0,
            loci: 3,
            width: 480,
            height: 270,
            spread: 0.0,
            center_bias: 0.15,
            lg_mode: LgMode::Jittered,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Validation(msg));
        if self.stimuli == 0 || self.observers == 0 || self.loci == 0 {
            return fail("synth: stimuli, observers and loci must be positive".into());
        }
        if self.min_fixations == 0 || self.min_fixations > self.max_fixations {
            return fail(format!(
                "synth: need 1 ≤ min_fixations ≤ max_fixations, got {}..{}",
                self.min_fixations, self.max_fixations
            ));
        }
        if self.width < 2 || self.height < 2 {
            return fail(format!("synth: frame {}×{} is too small", self.width, self.height));
        }
        for (name, v) in [("jitter", self.jitter), ("spread", self.spread), ("center_bias", self.center_bias)] {
            if !v.is_finite() || v < 0.0 {
                return fail(format!("synth: {name} must be finite and ≥ 0, got {v}"));
            }
        }
        Ok(())
    }
}

struct Locus {
    x: f64,
    y: f64,
    weight: f64,
}

struct StimulusModel {
    loci: Vec<Locus>,
    spread: f64,
}

fn stimulus_id(i: usize) -> String {
    format!("stim{:03}", i + 1)
}

fn observer_id(i: usize) -> String {
    format!("obs{:02}", i + 1)
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn clamp_point(x: f64, y: f64, spec: &SynthSpec) -> Point {
    let xmax = spec.width as f64 - 0.01;
    let ymax = spec.height as f64 - 0.01;
    Point::new(round2(x.clamp(0.0, xmax)), round2(y.clamp(0.0, ymax)))
}

fn gauss(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    if sd == 0.0 {
        0.0
    } else {
        Normal::new(0.0, sd).expect("finite sd").sample(rng)
    }
}

impl StimulusModel {
    fn draw(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Self {
        let (w, h) = (spec.width as f64, spec.height as f64);
        let loci = (0..spec.loci)
            .map(|_| Locus {
                x: (w / 2.0 + gauss(rng, spec.center_bias * w)).clamp(0.1 * w, 0.9 * w),
                y: (h / 2.0 + gauss(rng, spec.center_bias * h)).clamp(0.1 * h, 0.9 * h),
                weight: rng.random_range(0.5..1.5),
            })
            .collect();
        let spread = spec.spread * rng.random_range(0.5..1.5);
        Self { loci, spread }
    }

    fn pick(&self, rng: &mut ChaCha8Rng) -> &Locus {
        let total: f64 = self.loci.iter().map(|l| l.weight).sum();
        let mut u = rng.random_range(0.0..total);
        for l in &self.loci {
            if u < l.weight {
                return l;
            }
            u -= l.weight;
        }
        self.loci.last().expect("at least one locus")
    }

    fn observer(&self, spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Vec<Point> {
        let n = rng.random_range(spec.min_fixations..=spec.max_fixations);
        let l = self.pick(rng);
        (0..n)
            .map(|_| {
                let (x, y) = (l.x + gauss(rng, self.spread), l.y + gauss(rng, self.spread));
                clamp_point(x, y, spec)
            })
            .collect()
    }
}

/// Generate a dataset. Equal `(spec, seed)` give identical datasets.
pub fn generate_synthetic_dataset(spec: &SynthSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let size = (spec.width, spec.height);
    let mut stimuli = Vec::with_capacity(spec.stimuli);
    let mut hc = Vec::new();
    let mut lg = Vec::new();
    for s in 0..spec.stimuli {
        let sid = stimulus_id(s);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[s as u64]));
        let model = StimulusModel::draw(spec, &mut rng);
        for o in 0..spec.observers {
            let oid = observer_id(o);
            let mut orng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[s as u64, o as u64, 0]));
            let hc_points = model.observer(spec, &mut orng);
            let mut lrng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[s as u64, o as u64, 1]));
            let lg_points = match spec.lg_mode {
                LgMode::Jittered => hc_points
                    .iter()
                    .map(|p| clamp_point(p.x + gauss(&mut lrng, spec.jitter), p.y + gauss(&mut lrng, spec.jitter), spec))
                    .collect(),
                LgMode::Independent => model.observer(spec, &mut lrng),
            };
            hc.push(FixationSet::new(sid.clone(), oid.clone(), size, hc_points)?);
            lg.push(FixationSet::new(sid.clone(), oid, size, lg_points)?);
        }
        stimuli.push(Stimulus {
            id: sid,
            width: spec.width,
            height: spec.height,
            hc_image: None,
            lg_image: None,
        });
    }
    Dataset::new(stimuli, hc, lg)
}

/// Render a colour stimulus with a bright blob at each locus of its model.
fn render_stimulus(spec: &SynthSpec, seed: u64, index: usize) -> Result<RasterImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[index as u64]));
    let model = StimulusModel::draw(spec, &mut rng);
    let mut colour_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[index as u64, u64::MAX]));
    let colours: Vec<[f64; 3]> = model
        .loci
        .iter()
        .map(|_| [colour_rng.random(), colour_rng.random(), colour_rng.random()])
        .collect();
    let (w, h) = (spec.width, spec.height);
    let radius = (spec.spread.max(1.0) * 3.0).max(h as f64 / 20.0);
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        let base = 0.2 + 0.3 * y as f64 / h as f64;
        for x in 0..w {
            let mut px = [base, base * 0.9, base * 0.8];
            for (l, c) in model.loci.iter().zip(&colours) {
                let d2 = (x as f64 - l.x).powi(2) + (y as f64 - l.y).powi(2);
                let a = (-d2 / (2.0 * radius * radius)).exp() * l.weight.min(1.0);
                for k in 0..3 {
                    px[k] = px[k] * (1.0 - a) + c[k] * a;
                }
            }
            data.extend(px.iter().map(|v| v.clamp(0.0, 1.0)));
        }
    }
    RasterImage::new(w, h, 3, Encoding::SrgbGamma, data)
}

/// Write a generated dataset plus rendered HC stimuli and their LG versions.
pub fn write_synthetic_dataset(dir: &Path, spec: &SynthSpec, seed: u64, policy: &ResizePolicy) -> Result<Dataset> {
    let mut ds = generate_synthetic_dataset(spec, seed)?;
    let images = dir.join("images");
    std::fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    let lg_policy = ResizePolicy {
        target_height: policy.target_height.min(spec.height),
        ..*policy
    };
    for (i, stim) in ds.stimuli.iter_mut().enumerate() {
        let hc_img = render_stimulus(spec, seed, i)?;
        let lg_img = hc_to_lg(&hc_img, &lg_policy)?;
        let hc_name = format!("images/{}_hc.png", stim.id);
        let lg_name = format!("images/{}_lg.png", stim.id);
        save_rgb_png(&dir.join(&hc_name), &hc_img)?;
        crate::imaging::io::save_gray_png(&dir.join(&lg_name), &lg_img, Default::default())?;
        stim.hc_image = Some(hc_name);
        stim.lg_image = Some(lg_name);
    }
    ds.save(dir)?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthSpec {
        SynthSpec {
            stimuli: 3,
            observers: 4,
            width: 60,
            height: 40,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn zero_jitter_copies_hc() {
        let spec = SynthSpec { jitter: 0.0, ..small() };
        let ds = generate_synthetic_dataset(&spec, 3).unwrap();
        for (h, l) in ds.hc.iter().zip(&ds.lg) {
            assert_eq!(h.points(), l.points());
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = generate_synthetic_dataset(&small(), 5).unwrap();
        assert_eq!(a, generate_synthetic_dataset(&small(), 5).unwrap());
        assert_ne!(a, generate_synthetic_dataset(&small(), 6).unwrap());
    }

    #[test]
    fn shape_and_bounds() {
        let spec = small();
        let ds = generate_synthetic_dataset(&spec, 1).unwrap();
        assert_eq!(ds.stimuli.len(), 3);
        assert_eq!(ds.hc.len(), 12);
        assert_eq!(ds.lg.len(), 12);
        for set in ds.hc.iter().chain(&ds.lg) {
            assert!((4..=6).contains(&set.len()));
        }
    }

    #[test]
    fn independent_mode_differs() {
        let spec = SynthSpec { lg_mode: LgMode::Independent, ..small() };
        let ds = generate_synthetic_dataset(&spec, 1).unwrap();
        assert!(ds.hc.iter().zip(&ds.lg).any(|(h, l)| h.points() != l.points()));
    }

    #[test]
    fn invalid_specs() {
        assert!(generate_synthetic_dataset(&SynthSpec { observers: 0, ..small() }, 0).is_err());
        assert!(generate_synthetic_dataset(&SynthSpec { min_fixations: 7, ..small() }, 0).is_err());
        assert!(generate_synthetic_dataset(&SynthSpec { jitter: -1.0, ..small() }, 0).is_err());
    }

    #[test]
    fn written_dataset_reloads_byte_identically() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let policy = ResizePolicy::preserve(16);
        let ds = write_synthetic_dataset(a.path(), &small(), 9, &policy).unwrap();
        write_synthetic_dataset(b.path(), &small(), 9, &policy).unwrap();
        assert_eq!(Dataset::load(a.path()).unwrap(), ds);
        for name in ["dataset.json", "fixations_hc.csv", "fixations_lg.csv", "images/stim001_lg.png"] {
            assert_eq!(
                std::fs::read(a.path().join(name)).unwrap(),
                std::fs::read(b.path().join(name)).unwrap(),
                "{name}"
            );
        }
        let lg = crate::imaging::io::load_gray(&a.path().join("images/stim002_lg.png")).unwrap();
        assert_eq!(lg.height(), 16);
    }
}
