//! Small hand-built inputs shared by unit tests, integration tests and docs.

use rand::Rng;

use crate::histogram::PEHistogram;
use crate::predictor::{PixelSite, PredictionSet};

/// Pixel range of the worked two-peak example: bins lie in `(-6, 6)`.
pub const WORKED_LEVELS: i32 = 6;

/// Bin counts of the worked two-peak example.
pub const WORKED_COUNTS: [(i32, u64); 8] = [
    (-3, 2),
    (-2, 5),
    (-1, 12),
    (0, 30),
    (1, 25),
    (2, 10),
    (3, 4),
    (4, 1),
];

pub fn worked_example() -> PEHistogram {
    PEHistogram::from_counts(WORKED_COUNTS, WORKED_LEVELS).expect("static fixture")
}

/// Prediction set with the given errors and carrier-minus-original residuals.
///
/// Every prediction is 128, so cover values are `128 + e`.
pub fn prediction_set(errors: &[i32], residuals: &[i32]) -> PredictionSet {
    assert_eq!(errors.len(), residuals.len());
    let sites = (0..errors.len())
        .map(|index| PixelSite { index, pass: 0 })
        .collect();
    let predictions = vec![128; errors.len()];
    let cover: Vec<i32> = errors.iter().map(|e| 128 + e).collect();
    let originals = cover.iter().zip(residuals).map(|(c, r)| c - r).collect();
    PredictionSet::from_parts(sites, cover, predictions, originals).expect("equal lengths")
}

/// Errors realising `counts` bin by bin, in ascending bin order.
pub fn errors_from_counts(counts: &[(i32, u64)]) -> Vec<i32> {
    counts
        .iter()
        .flat_map(|&(v, c)| std::iter::repeat_n(v, c as usize))
        .collect()
}

/// Layer-0 prediction set of the worked example: every residual is zero.
pub fn worked_example_set() -> PredictionSet {
    let errors = errors_from_counts(&WORKED_COUNTS);
    let residuals = vec![0; errors.len()];
    prediction_set(&errors, &residuals)
}

/// Random small histogram with residuals in `[-spread, spread]`.
///
/// Bins are drawn from `[-span, span]`; at least `min_bins` distinct bins
/// are occupied and at most `max_bins`.
pub fn random_set<R: Rng>(
    rng: &mut R,
    span: i32,
    min_bins: usize,
    max_bins: usize,
    spread: i32,
) -> PredictionSet {
    let all: Vec<i32> = (-span..=span).collect();
    let n_bins = rng.random_range(min_bins..=max_bins.min(all.len()));
    let mut bins = rand::seq::index::sample(rng, all.len(), n_bins)
        .into_iter()
        .map(|i| all[i])
        .collect::<Vec<_>>();
    bins.sort_unstable();
    let mut errors = Vec::new();
    let mut residuals = Vec::new();
    for &b in &bins {
        for _ in 0..rng.random_range(1..=12) {
            errors.push(b);
            residuals.push(rng.random_range(-spread..=spread));
        }
    }
    prediction_set(&errors, &residuals)
}
