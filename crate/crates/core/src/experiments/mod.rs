//! Desk-scale versions of the three experiments: the σ sweep of LG-vs-HC
//! fixation-map similarity, leave-one-out inter-observer congruency, and
//! evaluation of saliency model outputs. Plus the synthetic datasets they
//! run on and the SVG curve plots.
//!
//! Work is spread over rayon's pool; results are always assembled in a
//! fixed sort order, so output does not depend on the thread count.

pub mod congruency;
pub mod dataset;
pub mod model_eval;
pub mod plot;
pub mod sweep;
pub mod synth;

pub use congruency::{loo_predictor, run_congruency, CongruencyConfig, CongruencyResult, CongruencyRow};
pub use dataset::{Condition, Dataset, Stimulus};
pub use model_eval::{evaluate_model_outputs, EvalConfig, ModelEvalResult};
pub use sweep::{run_sigma_sweep, sigma_grid, CurvePoint, PairScores, SweepConfig, SweepResult};
pub use synth::{generate_synthetic_dataset, write_synthetic_dataset, LgMode, SynthSpec};

use crate::error::Result;
use crate::fixmap::{aggregate, rescale_fixations, FixationSet, AGGREGATE_OBSERVER};
use crate::imaging::ResizePolicy;

/// Version stamped into every CSV and JSON output.
pub const SCHEMA_VERSION: u32 = 1;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a base seed with a path of indices into an independent stream seed.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// Seed for one (stimulus, observer) pair, independent of processing order.
pub fn pair_seed(base: u64, stimulus: &str, observer: &str) -> u64 {
    derive_seed(base, &[fnv1a(stimulus), fnv1a(observer)])
}

/// Raster on which a stimulus's maps are computed.
pub(crate) fn raster_size(stim: &Stimulus, map_height: Option<usize>) -> (usize, usize) {
    match map_height {
        None => (stim.width, stim.height),
        Some(h) => ResizePolicy::preserve(h).output_dims(stim.width, stim.height),
    }
}

/// Shuffled-AUC negatives for `stimulus`: every fixation recorded under
/// `conditions` on all other stimuli, mapped onto `dims`.
pub(crate) fn negative_pool(
    ds: &Dataset,
    conditions: &[Condition],
    stimulus: &str,
    dims: (usize, usize),
) -> Result<FixationSet> {
    let mut points = Vec::new();
    for &condition in conditions {
        let mut others = ds
            .sets(condition)
            .iter()
            .filter(|s| s.stimulus_id != stimulus)
            .map(|s| rescale_fixations(s, dims))
            .collect::<Result<Vec<_>>>()?;
        others.sort_by(|a, b| {
            (a.stimulus_id.as_str(), a.observer_id.as_str()).cmp(&(b.stimulus_id.as_str(), b.observer_id.as_str()))
        });
        points.extend(others.iter().flat_map(|s| s.points().iter().copied()));
    }
    FixationSet::new(stimulus, AGGREGATE_OBSERVER, dims, points)
}

/// All observers of `condition` on one stimulus pooled together.
pub fn pooled_fixations(ds: &Dataset, condition: Condition, stimulus: &str) -> Result<Option<FixationSet>> {
    let sets: Vec<FixationSet> = ds.observers(condition, stimulus).into_iter().cloned().collect();
    if sets.is_empty() {
        return Ok(None);
    }
    aggregate(&sets).map(Some)
}
