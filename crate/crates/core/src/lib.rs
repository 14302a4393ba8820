//! Saliency-preservation benchmarking toolkit.
//!
//! Converts high-resolution color stimuli into low-resolution grayscale
//! ones with a colorimetrically correct pipeline, turns eye-tracking
//! fixations into density maps, and scores how well one set of fixations
//! predicts another with the usual six saliency metrics (NSS, KL, AUC-Judd,
//! shuffled AUC, CC, SIM). The [`experiments`] module drives σ sweeps,
//! leave-one-out inter-observer congruency and model-output evaluation on
//! top of those pieces; [`cli`] exposes all of it as the `salbench` binary.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod fixmap;
pub mod imaging;
pub mod metrics;
pub mod npy;
pub mod stats;

pub use error::{Error, Result};
