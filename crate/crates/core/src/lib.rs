//! Reversible data hiding for 8-bit grayscale images with histogram shifting
//! chosen by minimum-weight bipartite matching.
//!
//! For every embedding stage the prediction-error histogram is built, the
//! cost of shifting each bin by every amount in `[-T, T]` is tabulated
//! against the layer-0 original, and the shifting function with the least
//! total squared error is found as a minimum-weight left-saturating matching
//! between occupied bins and free target bins. Peak bins, their bit-0 and
//! bit-1 targets and the shifting function travel in a CRC-protected
//! auxiliary record stored in border-pixel LSBs, so extraction restores the
//! original image bit for bit.
//!
//! The matching solver is generic over [`Scalar`]; the aliases below fix the
//! weight types used by the embedding pipeline and by tests.

#[cfg(test)]
extern crate self as rdh_core;

pub mod codec;
pub mod cost;
pub mod fixtures;
pub mod histogram;
pub mod image;
pub mod matching;
pub mod plan;
pub mod predictor;
pub mod scalar;
pub mod sweep;
pub mod synthetic;

pub use num_rational::Ratio;

pub use codec::{
    extract_all, extract_layer, multi_layer_embed, CodecConfig, CodecError, Embedded,
    MarkedImage, StageReport,
};
pub use cost::{compute_peak_costs, compute_shift_costs, CostTable, PeakCosts};
pub use histogram::{build_histogram, PEHistogram};
pub use image::{load_pgm, mse, psnr, save_pgm, GrayImage};
pub use matching::{build_bigraph, saturates_left, solve_mwmm, Matching, WeightedBigraph};
pub use plan::{enumerate_plans, traditional_plan, PlanPolicy, ShiftPlan};
pub use predictor::{partition_passes, predict, PixelSite, PredictionSet};
pub use scalar::Scalar;

/// Exact rational used for predicted distortion (half-integers appear with
/// the random-bit peak estimate).
pub type Rational = Ratio<i64>;

/// Integer-weighted bigraph, the form built by the plan search.
pub type IntBigraph = WeightedBigraph<i64>;
pub type IntMatching = Matching<i64>;

/// Rational-weighted bigraph for exact half-unit costs.
pub type RationalBigraph = WeightedBigraph<Rational>;
pub type RationalMatching = Matching<Rational>;

/// Float-weighted bigraphs for callers with non-integral cost models.
pub type F64Bigraph = WeightedBigraph<f64>;
pub type F32Bigraph = WeightedBigraph<f32>;
