//! Shared fixtures for the criterion benches.

use scacsp_core::preprocess::{self, TrialSet};
use scacsp_core::synth::{self, SynthSpec};
use scacsp_core::{CovarianceSet, RankTolerance};

/// Seeded synthetic trials with well separated class covariances.
pub fn trials(n_channels: usize, classes: usize, per_class: usize, n_samples: usize, seed: u64) -> TrialSet {
    let covs = synth::well_separated_covariances(n_channels, classes, 2.0, seed);
    synth::generate(&SynthSpec::new(covs, per_class, n_samples, seed)).expect("valid synthetic spec")
}

pub fn covariances(set: &TrialSet) -> CovarianceSet {
    preprocess::covariances(set, RankTolerance::default()).expect("full-rank synthetic covariances")
}
