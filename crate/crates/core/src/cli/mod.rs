//! The `salbench` command line.
//!
//! Every subcommand reads its parameters from an optional config file
//! (`--config`, TOML or JSON) and then from flags, which win. The merged
//! configuration is validated before anything is written. Results go to
//! `--output-dir` together with `summary.json`; failures leave an
//! `errors.json` there instead.

mod config;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

pub use config::{
    CongruencyOptions, DensityOptions, EvalOptions, PreprocessOptions, RunConfig, ScoreOptions, SweepOptions,
    SynthOptions,
};

use crate::error::Error;
use crate::experiments::{
    self, evaluate_model_outputs, plot, pooled_fixations, run_congruency, run_sigma_sweep, write_synthetic_dataset,
    Condition, Dataset, SCHEMA_VERSION,
};
use crate::fixmap::{
    aggregate, blur_density, rasterize, read_fixations, BlurDomain, BlurSpec, DensityMap, FixationSet, StimulusSizes,
};
use crate::imaging::io::{gray8_bytes, load_rgb, rgb24_bytes, save_gray_png, GrayExport};
use crate::imaging::{hc_to_lg, AspectMode, ResizePolicy};
use crate::metrics::{score_pair, MetricReport};

pub const SUMMARY_FILE: &str = "summary.json";
pub const ERRORS_FILE: &str = "errors.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Exit status for runs with per-item or fatal errors.
pub const EXIT_FAILURE: i32 = 1;
/// Exit status for rejected configurations and usage errors.
pub const EXIT_USAGE: i32 = 2;

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "bmp"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "salbench", version, about = "Saliency-preservation benchmarking for low-resolution grayscale imagery")]
pub struct Cli {
    /// TOML or JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Format of the main result file.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert HC color images into LG grayscale thumbnails.
    Preprocess(PreprocessArgs),
    /// Build blurred fixation density maps.
    Density(DensityArgs),
    /// Score one predicted map against fixations with all six metrics.
    Score(ScoreArgs),
    /// LG-vs-HC map similarity across a range of blur widths.
    Sweep(SweepArgs),
    /// Leave-one-out inter-observer congruency for HC and LG.
    Congruency(CongruencyArgs),
    /// Evaluate saliency model outputs, optionally against a second run.
    Eval(EvalArgs),
    /// Write a seeded synthetic dataset.
    Synth(SynthArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Preprocess(_) => "preprocess",
            Command::Density(_) => "density",
            Command::Score(_) => "score",
            Command::Sweep(_) => "sweep",
            Command::Congruency(_) => "congruency",
            Command::Eval(_) => "eval",
            Command::Synth(_) => "synth",
        }
    }
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Directory of HC images, or a single image.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub height: Option<usize>,
    /// Force this output width instead of preserving the aspect ratio.
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long, value_enum)]
    pub gray_export: Option<GrayExportArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GrayExportArg {
    Gamma,
    Linear,
}

impl From<GrayExportArg> for GrayExport {
    fn from(v: GrayExportArg) -> Self {
        match v {
            GrayExportArg::Gamma => GrayExport::Gamma,
            GrayExportArg::Linear => GrayExport::Linear,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DomainArg {
    Fourier,
    Spatial,
}

impl From<DomainArg> for BlurDomain {
    fn from(v: DomainArg) -> Self {
        match v {
            DomainArg::Fourier => BlurDomain::Fourier,
            DomainArg::Spatial => BlurDomain::Spatial,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ConditionArg {
    Hc,
    Lg,
}

impl From<ConditionArg> for Condition {
    fn from(v: ConditionArg) -> Self {
        match v {
            ConditionArg::Hc => Condition::Hc,
            ConditionArg::Lg => Condition::Lg,
        }
    }
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    /// Dataset directory; maps are built from one condition's fixations.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub condition: Option<ConditionArg>,
    /// Fixation CSV (stimulus_id,observer_id,x,y), used with --size.
    #[arg(long)]
    pub fixations: Option<PathBuf>,
    /// Stimulus size for --fixations, as WIDTHxHEIGHT.
    #[arg(long, value_parser = parse_size)]
    pub size: Option<(usize, usize)>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, value_enum)]
    pub domain: Option<DomainArg>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Predicted map (.npy or .png).
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// Ground-truth fixation CSV; all observers of the stimulus are pooled.
    #[arg(long)]
    pub fixations: Option<PathBuf>,
    /// Stimulus to score when the fixation file holds several.
    #[arg(long)]
    pub stimulus: Option<String>,
    /// Ground-truth density map; built from the fixations with --sigma when absent.
    #[arg(long)]
    pub gt_map: Option<PathBuf>,
    /// Fixation CSV whose points are the shuffled-AUC negatives.
    #[arg(long)]
    pub negatives: Option<PathBuf>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, value_enum)]
    pub domain: Option<DomainArg>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// σ grid as START:STOP:STEP, e.g. 1:100:1.
    #[arg(long, value_parser = parse_grid)]
    pub sigmas: Option<(f64, f64, f64)>,
    #[arg(long, value_enum)]
    pub domain: Option<DomainArg>,
    /// Compute maps at this height instead of each stimulus's own size.
    #[arg(long)]
    pub map_height: Option<usize>,
    /// Also write sweep.svg.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct CongruencyArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, value_enum)]
    pub domain: Option<DomainArg>,
    #[arg(long)]
    pub map_height: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of predictions, one `<image_id>.npy` or `.png` per test image.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Second prediction directory for paired t-tests.
    #[arg(long)]
    pub compare: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Blur of the ground-truth maps.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, value_enum)]
    pub ground_truth: Option<ConditionArg>,
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long)]
    pub compare_label: Option<String>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub stimuli: Option<usize>,
    #[arg(long)]
    pub observers: Option<usize>,
    #[arg(long)]
    pub jitter: Option<f64>,
    #[arg(long)]
    pub loci: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    /// Draw LG fixations independently instead of jittering HC ones.
    #[arg(long)]
    pub independent: bool,
    /// Height of the LG stimulus images.
    #[arg(long)]
    pub lg_height: Option<usize>,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got '{s}'"))?;
    let w: usize = w.trim().parse().map_err(|e| format!("width: {e}"))?;
    let h: usize = h.trim().parse().map_err(|e| format!("height: {e}"))?;
    Ok((w, h))
}

fn parse_grid(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}"));
    match parts.as_slice() {
        [a, b] => Ok((num(a)?, num(b)?, 1.0)),
        [a, b, c] => Ok((num(a)?, num(b)?, num(c)?)),
        _ => Err(format!("expected START:STOP[:STEP], got '{s}'")),
    }
}

/// Something that went wrong with one input item.
#[derive(Debug, Clone, Serialize)]
pub struct ItemError {
    pub item: String,
    pub message: String,
}

#[derive(Debug)]
enum Failure {
    /// Configuration rejected before any work started.
    Config(String),
    /// The command could not run at all.
    Fatal(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Fatal(e)
    }
}

/// What a finished command reports back.
struct Outcome {
    outputs: Vec<String>,
    result: serde_json::Value,
    errors: Vec<ItemError>,
}

struct Ctx {
    seed: u64,
    out: PathBuf,
    format: Format,
}

impl Ctx {
    fn ensure_out(&self) -> Result<(), Error> {
        fs::create_dir_all(&self.out).map_err(|e| Error::io(&self.out, e))
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<String, Error> {
        let path = self.out.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        Ok(name.to_string())
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<String, Error> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn write_with(&self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<(), Error>) -> Result<String, Error> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }
}

/// Run the CLI on `args` (including the program name) and return the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    let command = cli.command.name();
    let cfg = match config::resolve(&cli) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: {msg}");
            let out = cli.output_dir.clone().unwrap_or_else(|| PathBuf::from(config::DEFAULT_OUTPUT_DIR));
            write_errors(&out, command, "config", &[ItemError { item: "config".into(), message: msg }]);
            return EXIT_USAGE;
        }
    };
    let ctx = Ctx {
        seed: cfg.seed.unwrap_or(0),
        out: cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from(config::DEFAULT_OUTPUT_DIR)),
        format: cfg.format.unwrap_or_default(),
    };

    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_FAILURE;
        }
    };
    let result = pool.install(|| match &cli.command {
        Command::Preprocess(_) => cmd_preprocess(&ctx, &cfg.preprocess),
        Command::Density(_) => cmd_density(&ctx, &cfg.density),
        Command::Score(_) => cmd_score(&ctx, &cfg.score),
        Command::Sweep(_) => cmd_sweep(&ctx, &cfg.sweep),
        Command::Congruency(_) => cmd_congruency(&ctx, &cfg.congruency),
        Command::Eval(_) => cmd_eval(&ctx, &cfg.eval),
        Command::Synth(_) => cmd_synth(&ctx, &cfg.synth),
    });

    match result {
        Ok(outcome) => {
            let summary = json!({
                "schema_version": SCHEMA_VERSION,
                "command": command,
                "seed": ctx.seed,
                "config": cfg.section_json(command),
                "outputs": outcome.outputs,
                "result": outcome.result,
                "errors": outcome.errors.len(),
            });
            if let Err(e) = ctx.ensure_out().and_then(|_| ctx.write_json(SUMMARY_FILE, &summary)) {
                eprintln!("error: {e}");
                return EXIT_FAILURE;
            }
            if outcome.errors.is_empty() {
                0
            } else {
                for e in &outcome.errors {
                    eprintln!("error: {}: {}", e.item, e.message);
                }
                write_errors(&ctx.out, command, "item", &outcome.errors);
                EXIT_FAILURE
            }
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            write_errors(&ctx.out, command, "config", &[ItemError { item: "config".into(), message: msg }]);
            EXIT_USAGE
        }
        Err(Failure::Fatal(e)) => {
            eprintln!("error: {e}");
            let item = ItemError {
                item: command.into(),
                message: e.to_string(),
            };
            write_errors(&ctx.out, command, error_kind(&e), &[item]);
            EXIT_FAILURE
        }
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Domain(_) => "domain",
        Error::Type(_) => "type",
        Error::Validation(_) => "validation",
        Error::Parse { .. } => "parse",
        Error::EmptyInput(_) => "empty-input",
        Error::DegenerateMap(_) => "degenerate-map",
        Error::Io { .. } => "io",
        Error::Image { .. } => "image",
        Error::Csv(_) => "csv",
        Error::Json(_) => "json",
    }
}

fn write_errors(out: &Path, command: &str, kind: &str, errors: &[ItemError]) {
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "kind": kind,
        "errors": errors,
    });
    let path = out.join(ERRORS_FILE);
    let written = fs::create_dir_all(out).and_then(|_| {
        let mut text = serde_json::to_string_pretty(&doc).expect("json value");
        text.push('\n');
        fs::write(&path, text)
    });
    if let Err(e) = written {
        eprintln!("error: cannot write {}: {e}", path.display());
    }
}

fn required<'a, T>(v: &'a Option<T>, field: &str, flag: &str) -> Result<&'a T, Failure> {
    v.as_ref()
        .ok_or_else(|| Failure::Config(format!("{field} is required (config key or {flag})")))
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

#[derive(Debug, Serialize)]
struct ManifestEntry {
    input: String,
    output: String,
    original_width: usize,
    original_height: usize,
    width: usize,
    height: usize,
    original_bytes: usize,
    bytes: usize,
    ratio: f64,
}

fn cmd_preprocess(ctx: &Ctx, opts: &PreprocessOptions) -> Result<Outcome, Failure> {
    let input = required(&opts.input, "preprocess.input", "--input")?;
    let policy = opts.policy();
    policy.validate()?;
    let mut files: Vec<PathBuf> = if input.is_dir() {
        fs::read_dir(input)
            .map_err(|e| Error::io(input, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && is_image(p))
            .collect()
    } else if input.is_file() {
        vec![input.clone()]
    } else {
        return Err(Failure::Fatal(Error::io(
            input,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
        )));
    };
    files.sort();
    if files.is_empty() {
        eprintln!("warning: no images found in {}", input.display());
    }
    ctx.ensure_out()?;
    let lg_dir = ctx.out.join("lg");
    fs::create_dir_all(&lg_dir).map_err(|e| Error::io(&lg_dir, e))?;

    let results: Vec<Result<ManifestEntry, ItemError>> = files
        .par_iter()
        .map(|path| {
            let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let stem = path.file_stem().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let run = || -> Result<ManifestEntry, Error> {
                let img = load_rgb(path)?;
                let lg = hc_to_lg(&img, &policy)?;
                let rel = format!("lg/{stem}.png");
                save_gray_png(&ctx.out.join(&rel), &lg, opts.gray_export)?;
                let original_bytes = rgb24_bytes(img.width(), img.height());
                let bytes = gray8_bytes(lg.width(), lg.height());
                Ok(ManifestEntry {
                    input: name.clone(),
                    output: rel,
                    original_width: img.width(),
                    original_height: img.height(),
                    width: lg.width(),
                    height: lg.height(),
                    original_bytes,
                    bytes,
                    ratio: bytes as f64 / original_bytes as f64,
                })
            };
            run().map_err(|e| ItemError {
                item: name.clone(),
                message: e.to_string(),
            })
        })
        .collect();
    let (mut entries, mut errors) = (Vec::new(), Vec::new());
    for r in results {
        match r {
            Ok(e) => entries.push(e),
            Err(e) => errors.push(e),
        }
    }
    let (orig, new): (usize, usize) = entries
        .iter()
        .fold((0, 0), |(a, b), e| (a + e.original_bytes, b + e.bytes));
    let total_ratio = if orig > 0 { Some(new as f64 / orig as f64) } else { None };
    let manifest = json!({
        "schema_version": SCHEMA_VERSION,
        "policy": policy,
        "gray_export": opts.gray_export,
        "files": entries,
        "total_original_bytes": orig,
        "total_bytes": new,
        "ratio": total_ratio,
    });
    let outputs = vec![ctx.write_json(MANIFEST_FILE, &manifest)?];
    Ok(Outcome {
        outputs,
        result: json!({ "processed": entries.len(), "failed": errors.len(), "ratio": total_ratio }),
        errors,
    })
}

fn cmd_density(ctx: &Ctx, opts: &DensityOptions) -> Result<Outcome, Failure> {
    let spec = BlurSpec::new(opts.sigma, opts.domain)?;
    let groups: Vec<(String, Vec<FixationSet>)> = match (&opts.dataset, &opts.fixations) {
        (Some(dir), None) => {
            let ds = Dataset::load(dir)?;
            ds.stimuli
                .iter()
                .map(|s| (s.id.clone(), ds.observers(opts.condition, &s.id).into_iter().cloned().collect()))
                .collect()
        }
        (None, Some(path)) => {
            let (w, h) = *required(&opts.size, "density.size", "--size")?;
            let sets = read_fixations(path, &StimulusSizes::Uniform(w, h))?;
            let mut groups: Vec<(String, Vec<FixationSet>)> = Vec::new();
            for set in sets {
                match groups.last_mut() {
                    Some((id, v)) if *id == set.stimulus_id => v.push(set),
                    _ => groups.push((set.stimulus_id.clone(), vec![set])),
                }
            }
            groups
        }
        _ => {
            return Err(Failure::Config(
                "density needs exactly one of dataset (--dataset) or fixations (--fixations)".into(),
            ))
        }
    };
    ctx.ensure_out()?;
    let results: Vec<Result<Vec<String>, ItemError>> = groups
        .par_iter()
        .map(|(id, sets)| {
            let run = || -> Result<Vec<String>, Error> {
                if sets.is_empty() {
                    return Err(Error::EmptyInput(format!("no fixations for stimulus '{id}'")));
                }
                let map = blur_density(&rasterize(&aggregate(sets)?)?, &spec)?;
                let npy_name = format!("maps/{id}.npy");
                let png_name = format!("maps/{id}.png");
                let dir = ctx.out.join("maps");
                fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                map.save_npy(&ctx.out.join(&npy_name))?;
                map.save_png(&ctx.out.join(&png_name))?;
                Ok(vec![npy_name, png_name])
            };
            run().map_err(|e| ItemError {
                item: id.clone(),
                message: e.to_string(),
            })
        })
        .collect();
    let (mut outputs, mut errors) = (Vec::new(), Vec::new());
    for r in results {
        match r {
            Ok(o) => outputs.extend(o),
            Err(e) => errors.push(e),
        }
    }
    Ok(Outcome {
        result: json!({ "maps": outputs.len() / 2, "sigma": opts.sigma }),
        outputs,
        errors,
    })
}

fn pooled_from_file(path: &Path, dims: (usize, usize), stimulus: Option<&str>) -> Result<FixationSet, Failure> {
    let sets = read_fixations(path, &StimulusSizes::Uniform(dims.0, dims.1))?;
    let mut ids: Vec<&str> = sets.iter().map(|s| s.stimulus_id.as_str()).collect();
    ids.dedup();
    let chosen: Vec<FixationSet> = match stimulus {
        Some(id) => sets.iter().filter(|s| s.stimulus_id == id).cloned().collect(),
        None if ids.len() <= 1 => sets.clone(),
        None => {
            return Err(Failure::Config(format!(
                "{} holds fixations for {} stimuli; choose one with score.stimulus (--stimulus)",
                path.display(),
                ids.len()
            )))
        }
    };
    if chosen.is_empty() {
        return Err(Failure::Fatal(Error::EmptyInput(format!("{}: no fixations to score", path.display()))));
    }
    Ok(aggregate(&chosen)?)
}

fn cmd_score(ctx: &Ctx, opts: &ScoreOptions) -> Result<Outcome, Failure> {
    let pred_path = required(&opts.pred, "score.pred", "--pred")?;
    let fix_path = required(&opts.fixations, "score.fixations", "--fixations")?;
    let neg_path = required(&opts.negatives, "score.negatives", "--negatives")?;
    let spec = BlurSpec::new(opts.sigma, opts.domain)?;

    let pred = DensityMap::load(pred_path)?;
    let dims = pred.size();
    let gt_fix = pooled_from_file(fix_path, dims, opts.stimulus.as_deref())?;
    let gt_map = match &opts.gt_map {
        Some(p) => DensityMap::load(p)?,
        None => blur_density(&rasterize(&gt_fix)?, &spec)?,
    };
    let neg_sets = read_fixations(neg_path, &StimulusSizes::Uniform(dims.0, dims.1))?;
    let negatives = FixationSet::new(
        gt_fix.stimulus_id.clone(),
        crate::fixmap::AGGREGATE_OBSERVER,
        dims,
        neg_sets.iter().flat_map(|s| s.points().iter().copied()).collect(),
    )?;
    let report = score_pair(&pred, &gt_fix, &gt_map, &negatives, ctx.seed)?;

    ctx.ensure_out()?;
    let name = match ctx.format {
        Format::Csv => {
            let text = report_csv(&report)?;
            print!("{text}");
            ctx.write("score.csv", text.as_bytes())?
        }
        Format::Json => {
            let doc = json!({ "schema_version": SCHEMA_VERSION, "report": report });
            println!("{}", serde_json::to_string_pretty(&doc).map_err(Error::from)?);
            ctx.write_json("score.json", &doc)?
        }
    };
    Ok(Outcome {
        outputs: vec![name],
        result: serde_json::to_value(&report).map_err(Error::from)?,
        errors: Vec::new(),
    })
}

fn report_csv(report: &MetricReport) -> Result<String, Error> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["schema_version"];
    header.extend(MetricReport::CSV_HEADER);
    header.push("flags");
    wtr.write_record(&header)?;
    let mut row = vec![SCHEMA_VERSION.to_string()];
    row.extend(report.csv_fields());
    row.push(report.flags_field());
    wtr.write_record(&row)?;
    let bytes = wtr.into_inner().map_err(|e| Error::io("<score csv>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn cmd_sweep(ctx: &Ctx, opts: &SweepOptions) -> Result<Outcome, Failure> {
    let dir = required(&opts.dataset, "sweep.dataset", "--dataset")?;
    let cfg = opts.to_config(ctx.seed)?;
    let ds = Dataset::load(dir)?;
    let result = run_sigma_sweep(&ds, &cfg)?;
    print!("{}", sweep_table(&result));

    ctx.ensure_out()?;
    let mut outputs = vec![match ctx.format {
        Format::Csv => ctx.write_with("sweep.csv", |b| result.write_csv(b))?,
        Format::Json => ctx.write_json(
            "sweep.json",
            &json!({ "schema_version": SCHEMA_VERSION, "sigmas": result.sigmas, "curves": result.curves }),
        )?,
    }];
    outputs.push(ctx.write_with("sweep_scores.csv", |b| result.write_scores_csv(b))?);
    if opts.svg {
        outputs.push(ctx.write("sweep.svg", plot::sweep_svg(&result).as_bytes())?);
    }
    let last = result.sigmas.len() - 1;
    let ends: serde_json::Map<String, serde_json::Value> = crate::metrics::Metric::ALL
        .iter()
        .map(|&m| {
            let c = &result.curves[&m];
            (
                m.name().to_string(),
                json!({ "first": c[0].map(|p| p.median), "last": c[last].map(|p| p.median) }),
            )
        })
        .collect();
    Ok(Outcome {
        outputs,
        result: json!({ "pairs": result.pairs.len(), "sigmas": result.sigmas.len(), "medians": ends }),
        errors: Vec::new(),
    })
}

fn sweep_table(result: &experiments::SweepResult) -> String {
    use crate::metrics::Metric;
    let mut out = format!("{:>8}", "sigma");
    for m in Metric::TABLE_ORDER {
        out.push_str(&format!("{:>9}", m.label()));
    }
    out.push('\n');
    let n = result.sigmas.len();
    let step = n.div_ceil(10).max(1);
    for i in (0..n).filter(|i| i % step == 0 || *i == n - 1) {
        out.push_str(&format!("{:>8}", result.sigmas[i]));
        for m in Metric::TABLE_ORDER {
            match result.curves[&m][i] {
                Some(p) => out.push_str(&format!("{:>9.3}", p.median)),
                None => out.push_str(&format!("{:>9}", "-")),
            }
        }
        out.push('\n');
    }
    out
}

fn cmd_congruency(ctx: &Ctx, opts: &CongruencyOptions) -> Result<Outcome, Failure> {
    let dir = required(&opts.dataset, "congruency.dataset", "--dataset")?;
    let cfg = opts.to_config(ctx.seed)?;
    let ds = Dataset::load(dir)?;
    let result = run_congruency(&ds, &cfg)?;
    print!("{}", result.table());

    ctx.ensure_out()?;
    let mut outputs = vec![match ctx.format {
        Format::Csv => ctx.write_with("congruency.csv", |b| result.write_csv(b))?,
        Format::Json => ctx.write_json(
            "congruency.json",
            &json!({
                "schema_version": SCHEMA_VERSION,
                "sigma": result.sigma,
                "medians": result.medians,
                "anova": result.anova,
            }),
        )?,
    }];
    outputs.push(ctx.write_with("congruency_scores.csv", |b| result.write_scores_csv(b))?);
    Ok(Outcome {
        outputs,
        result: json!({ "rows": result.rows.len(), "medians": result.medians, "anova": result.anova }),
        errors: Vec::new(),
    })
}

fn cmd_eval(ctx: &Ctx, opts: &EvalOptions) -> Result<Outcome, Failure> {
    let cfg = opts.to_config()?;
    let result = evaluate_model_outputs(&cfg)?;
    print!("{}", result.table());

    ctx.ensure_out()?;
    let mut outputs = vec![match ctx.format {
        Format::Csv => ctx.write_with("model_eval.csv", |b| result.write_csv(b))?,
        Format::Json => ctx.write_json("model_eval.json", &json!({ "schema_version": SCHEMA_VERSION, "result": result }))?,
    }];
    outputs.push(ctx.write_with("model_eval_summary.csv", |b| result.write_summary_csv(b))?);
    let brief = |r: &experiments::model_eval::RunSummary| {
        json!({
            "label": r.label,
            "images": r.images.len(),
            "accuracy": r.accuracy,
            "detection_ms": r.detection_ms,
            "training": r.training,
        })
    };
    Ok(Outcome {
        outputs,
        result: json!({
            "primary": brief(&result.primary),
            "compare": result.compare.as_ref().map(brief),
            "tests": result.tests,
        }),
        errors: Vec::new(),
    })
}

fn cmd_synth(ctx: &Ctx, opts: &SynthOptions) -> Result<Outcome, Failure> {
    let spec = opts.spec.clone();
    spec.validate()?;
    let policy = ResizePolicy {
        target_height: opts.lg_height,
        aspect: AspectMode::Preserve,
    };
    policy.validate()?;
    ctx.ensure_out()?;
    let ds = write_synthetic_dataset(&ctx.out, &spec, ctx.seed, &policy)?;
    let mut outputs = vec![
        experiments::dataset::DATASET_FILE.to_string(),
        experiments::dataset::HC_FIXATIONS_FILE.to_string(),
        experiments::dataset::LG_FIXATIONS_FILE.to_string(),
    ];
    for s in &ds.stimuli {
        outputs.extend(s.hc_image.iter().cloned());
        outputs.extend(s.lg_image.iter().cloned());
    }
    let pooled = ds
        .stimuli
        .iter()
        .filter_map(|s| pooled_fixations(&ds, Condition::Hc, &s.id).ok().flatten())
        .map(|s| s.len())
        .sum::<usize>();
    Ok(Outcome {
        outputs,
        result: json!({
            "stimuli": ds.stimuli.len(),
            "observers": spec.observers,
            "hc_fixations": pooled,
        }),
        errors: Vec::new(),
    })
}
