//! Run configuration files and their merge with command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Cli, Command, Failure, Format};
use crate::experiments::{sigma_grid, CongruencyConfig, EvalConfig, SweepConfig, SynthSpec};
use crate::fixmap::{BlurDomain, BlurSpec};
use crate::experiments::Condition;
use crate::imaging::io::GrayExport;
use crate::imaging::{AspectMode, ResizePolicy};

pub const DEFAULT_OUTPUT_DIR: &str = "out";

fn default_sigma() -> f64 {
    30.0
}

fn default_height() -> usize {
    64
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub format: Option<Format>,
    pub preprocess: PreprocessOptions,
    pub density: DensityOptions,
    pub score: ScoreOptions,
    pub sweep: SweepOptions,
    pub congruency: CongruencyOptions,
    pub eval: EvalOptions,
    pub synth: SynthOptions,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessOptions {
    pub input: Option<PathBuf>,
    pub height: usize,
    /// Fixed output width; the aspect ratio is preserved when absent.
    pub width: Option<usize>,
    pub gray_export: GrayExport,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        Self {
            input: None,
            height: default_height(),
            width: None,
            gray_export: GrayExport::default(),
        }
    }
}

impl PreprocessOptions {
    pub fn policy(&self) -> ResizePolicy {
        ResizePolicy {
            target_height: self.height,
            aspect: match self.width {
                Some(w) => AspectMode::FixedWidth(w),
                None => AspectMode::Preserve,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensityOptions {
    pub dataset: Option<PathBuf>,
    pub condition: Condition,
    pub fixations: Option<PathBuf>,
    /// `[width, height]` of the stimuli in `fixations`.
    pub size: Option<(usize, usize)>,
    pub sigma: f64,
    pub domain: BlurDomain,
}

impl Default for DensityOptions {
    fn default() -> Self {
        Self {
            dataset: None,
            condition: Condition::Hc,
            fixations: None,
            size: None,
            sigma: default_sigma(),
            domain: BlurDomain::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoreOptions {
    pub pred: Option<PathBuf>,
    pub fixations: Option<PathBuf>,
    pub stimulus: Option<String>,
    pub gt_map: Option<PathBuf>,
    pub negatives: Option<PathBuf>,
    pub sigma: f64,
    pub domain: BlurDomain,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        Self {
            pred: None,
            fixations: None,
            stimulus: None,
            gt_map: None,
            negatives: None,
            sigma: default_sigma(),
            domain: BlurDomain::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepOptions {
    pub dataset: Option<PathBuf>,
    /// Explicit σ list; overrides `start`/`stop`/`step`.
    pub sigmas: Option<Vec<f64>>,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
    pub domain: BlurDomain,
    pub map_height: Option<usize>,
    pub svg: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            dataset: None,
            sigmas: None,
            start: 1.0,
            stop: 100.0,
            step: 1.0,
            domain: BlurDomain::default(),
            map_height: None,
            svg: false,
        }
    }
}

impl SweepOptions {
    pub(super) fn to_config(&self, seed: u64) -> Result<SweepConfig, Failure> {
        let sigmas = match &self.sigmas {
            Some(s) => s.clone(),
            None => sigma_grid(self.start, self.stop, self.step)
                .map_err(|e| Failure::Config(format!("sweep.start/stop/step: {e}")))?,
        };
        let cfg = SweepConfig {
            sigmas,
            domain: self.domain,
            map_height: self.map_height,
            seed,
        };
        cfg.validate().map_err(|e| Failure::Config(format!("sweep: {e}")))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CongruencyOptions {
    pub dataset: Option<PathBuf>,
    pub sigma: f64,
    pub domain: BlurDomain,
    pub map_height: Option<usize>,
}

impl Default for CongruencyOptions {
    fn default() -> Self {
        Self {
            dataset: None,
            sigma: default_sigma(),
            domain: BlurDomain::default(),
            map_height: None,
        }
    }
}

impl CongruencyOptions {
    pub(super) fn to_config(&self, seed: u64) -> Result<CongruencyConfig, Failure> {
        BlurSpec::new(self.sigma, self.domain).map_err(|e| Failure::Config(format!("congruency.sigma: {e}")))?;
        if self.map_height == Some(0) {
            return Err(Failure::Config("congruency.map_height: must be ≥ 1".into()));
        }
        Ok(CongruencyConfig {
            sigma: self.sigma,
            domain: self.domain,
            map_height: self.map_height,
            seed,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalOptions {
    pub predictions: Option<PathBuf>,
    pub compare: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub ground_truth: Condition,
    pub sigma: f64,
    pub domain: BlurDomain,
    pub label: String,
    pub compare_label: String,
}

impl Default for EvalOptions {
    fn default() -> Self {
        let base = EvalConfig::new("", "");
        Self {
            predictions: None,
            compare: None,
            dataset: None,
            ground_truth: base.ground_truth,
            sigma: base.sigma,
            domain: base.domain,
            label: base.label,
            compare_label: base.compare_label,
        }
    }
}

impl EvalOptions {
    pub(super) fn to_config(&self) -> Result<EvalConfig, Failure> {
        let predictions = super::required(&self.predictions, "eval.predictions", "--predictions")?;
        let dataset = super::required(&self.dataset, "eval.dataset", "--dataset")?;
        BlurSpec::new(self.sigma, self.domain).map_err(|e| Failure::Config(format!("eval.sigma: {e}")))?;
        Ok(EvalConfig {
            predictions: predictions.clone(),
            compare: self.compare.clone(),
            dataset: dataset.clone(),
            ground_truth: self.ground_truth,
            sigma: self.sigma,
            domain: self.domain,
            label: self.label.clone(),
            compare_label: self.compare_label.clone(),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthOptions {
    pub spec: SynthSpec,
    /// Height of the LG stimulus images.
    pub lg_height: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            spec: SynthSpec::default(),
            lg_height: default_height(),
        }
    }
}

impl RunConfig {
    /// The resolved section a command ran with.
    pub fn section_json(&self, command: &str) -> serde_json::Value {
        let v = match command {
            "preprocess" => serde_json::to_value(&self.preprocess),
            "density" => serde_json::to_value(&self.density),
            "score" => serde_json::to_value(&self.score),
            "sweep" => serde_json::to_value(&self.sweep),
            "congruency" => serde_json::to_value(&self.congruency),
            "eval" => serde_json::to_value(&self.eval),
            "synth" => serde_json::to_value(&self.synth),
            _ => Ok(serde_json::Value::Null),
        };
        v.unwrap_or(serde_json::Value::Null)
    }
}

/// Parse a TOML (`.toml`) or JSON (any other extension) config file. Errors
/// name the offending key path.
pub fn load(path: &Path) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let is_toml = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    if is_toml {
        let de = toml::Deserializer::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_path_to_error::deserialize(de)
            .map_err(|e| format!("{}: at '{}': {}", path.display(), e.path(), e.inner().message()))
    } else {
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de)
            .map_err(|e| format!("{}: at '{}': {}", path.display(), e.path(), e.inner()))
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

/// Config file values overridden by flags, checked for obvious range errors.
pub(super) fn resolve(cli: &Cli) -> Result<RunConfig, String> {
    let mut cfg = match &cli.config {
        Some(p) => load(p)?,
        None => RunConfig::default(),
    };
    set_opt(&mut cfg.seed, cli.seed);
    set_opt(&mut cfg.jobs, cli.jobs);
    set_opt(&mut cfg.output_dir, cli.output_dir.clone());
    set_opt(&mut cfg.format, cli.format);
    if cfg.jobs == Some(0) {
        return Err("jobs: must be ≥ 1".into());
    }

    let check_sigma = |key: &str, sigma: f64, domain: BlurDomain| {
        BlurSpec::new(sigma, domain).map(|_| ()).map_err(|e| format!("{key}: {e}"))
    };
    match &cli.command {
        Command::Preprocess(a) => {
            let o = &mut cfg.preprocess;
            set_opt(&mut o.input, a.input.clone());
            set(&mut o.height, a.height);
            set_opt(&mut o.width, a.width);
            set(&mut o.gray_export, a.gray_export.map(Into::into));
            o.policy().validate().map_err(|e| format!("preprocess.height/width: {e}"))?;
        }
        Command::Density(a) => {
            let o = &mut cfg.density;
            set_opt(&mut o.dataset, a.dataset.clone());
            set(&mut o.condition, a.condition.map(Into::into));
            set_opt(&mut o.fixations, a.fixations.clone());
            set_opt(&mut o.size, a.size);
            set(&mut o.sigma, a.sigma);
            set(&mut o.domain, a.domain.map(Into::into));
            check_sigma("density.sigma", o.sigma, o.domain)?;
            if let Some((w, h)) = o.size {
                if w == 0 || h == 0 {
                    return Err(format!("density.size: {w}×{h} is empty"));
                }
            }
        }
        Command::Score(a) => {
            let o = &mut cfg.score;
            set_opt(&mut o.pred, a.pred.clone());
            set_opt(&mut o.fixations, a.fixations.clone());
            set_opt(&mut o.stimulus, a.stimulus.clone());
            set_opt(&mut o.gt_map, a.gt_map.clone());
            set_opt(&mut o.negatives, a.negatives.clone());
            set(&mut o.sigma, a.sigma);
            set(&mut o.domain, a.domain.map(Into::into));
            check_sigma("score.sigma", o.sigma, o.domain)?;
        }
        Command::Sweep(a) => {
            let o = &mut cfg.sweep;
            set_opt(&mut o.dataset, a.dataset.clone());
            if let Some((start, stop, step)) = a.sigmas {
                o.sigmas = None;
                (o.start, o.stop, o.step) = (start, stop, step);
            }
            set(&mut o.domain, a.domain.map(Into::into));
            set_opt(&mut o.map_height, a.map_height);
            o.svg |= a.svg;
            o.to_config(0).map_err(|f| match f {
                Failure::Config(m) => m,
                Failure::Fatal(e) => e.to_string(),
            })?;
        }
        Command::Congruency(a) => {
            let o = &mut cfg.congruency;
            set_opt(&mut o.dataset, a.dataset.clone());
            set(&mut o.sigma, a.sigma);
            set(&mut o.domain, a.domain.map(Into::into));
            set_opt(&mut o.map_height, a.map_height);
            o.to_config(0).map_err(|f| match f {
                Failure::Config(m) => m,
                Failure::Fatal(e) => e.to_string(),
            })?;
        }
        Command::Eval(a) => {
            let o = &mut cfg.eval;
            set_opt(&mut o.predictions, a.predictions.clone());
            set_opt(&mut o.compare, a.compare.clone());
            set_opt(&mut o.dataset, a.dataset.clone());
            set(&mut o.sigma, a.sigma);
            set(&mut o.ground_truth, a.ground_truth.map(Into::into));
            set(&mut o.label, a.label.clone());
            set(&mut o.compare_label, a.compare_label.clone());
            check_sigma("eval.sigma", o.sigma, o.domain)?;
        }
        Command::Synth(a) => {
            let o = &mut cfg.synth;
            set(&mut o.spec.stimuli, a.stimuli);
            set(&mut o.spec.observers, a.observers);
            set(&mut o.spec.jitter, a.jitter);
            set(&mut o.spec.loci, a.loci);
            set(&mut o.spec.width, a.width);
            set(&mut o.spec.height, a.height);
            if a.independent {
                o.spec.lg_mode = crate::experiments::LgMode::Independent;
            }
            set(&mut o.lg_height, a.lg_height);
            o.spec.validate().map_err(|e| format!("synth.spec: {e}"))?;
            if o.lg_height == 0 {
                return Err("synth.lg_height: must be ≥ 1".into());
            }
        }
    }
    Ok(cfg)
}
