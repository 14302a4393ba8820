//! Fixation ingestion and Gaussian-regularized density maps.

mod blur;
mod density;
mod fixation;

pub use blur::{blur_density, BlurDomain, BlurSpec, GaussianBlur, MIN_SIGMA};
pub use density::{DensityMap, Normalization};
pub use fixation::{
    aggregate, parse_fixations, read_fixations, rasterize, rescale_fixations, write_fixations,
    FixationSet, Point, StimulusSizes, AGGREGATE_OBSERVER, FIXATION_CSV_HEADER,
};
