//! Rhombus predictor over a two-pass checkerboard partition.
//!
//! Interior pixels with `(x + y)` even form pass 0, odd form pass 1. Every
//! neighbour of a pass-0 site is either a pass-1 site or a border pixel, so
//! the predictions for one pass never depend on pixels of the same pass.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::image::GrayImage;

pub const PASSES: usize = 2;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PredictError {
    #[error("image {width}x{height} is too small, need at least {min}x{min}")]
    TooSmall {
        width: usize,
        height: usize,
        min: usize,
    },
    #[error("sequences have mismatched lengths")]
    LengthMismatch,
    #[error("original image dimensions differ from the carrier")]
    OriginalMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PixelSite {
    pub index: usize,
    pub pass: u8,
}

/// Pass of an interior pixel, `None` on the border.
#[inline]
pub fn pass_of(width: usize, height: usize, x: usize, y: usize) -> Option<u8> {
    if x == 0 || y == 0 || x + 1 >= width || y + 1 >= height {
        None
    } else {
        Some(((x + y) % 2) as u8)
    }
}

/// All interior sites with their pass, in raster order.
pub fn partition_passes(img: &GrayImage) -> Result<Vec<PixelSite>, PredictError> {
    sites_with_margin(img, None, 1)
}

/// Raster-ordered sites at least `margin` pixels away from the border.
///
/// `pass` filters to one pass; `None` keeps both.
pub fn sites_with_margin(
    img: &GrayImage,
    pass: Option<u8>,
    margin: usize,
) -> Result<Vec<PixelSite>, PredictError> {
    let (w, h) = img.dimensions();
    let min = 2 * margin + 1;
    if w < min || h < min {
        return Err(PredictError::TooSmall {
            width: w,
            height: h,
            min,
        });
    }
    let mut sites = Vec::with_capacity((w - 2 * margin) * (h - 2 * margin) / 2 + 1);
    for y in margin..h - margin {
        for x in margin..w - margin {
            let p = ((x + y) % 2) as u8;
            if pass.is_none_or(|want| want == p) {
                sites.push(PixelSite {
                    index: y * w + x,
                    pass: p,
                });
            }
        }
    }
    Ok(sites)
}

/// Half-up rounded mean of the four rhombus neighbours of an interior pixel.
#[inline]
pub fn rhombus_prediction(img: &GrayImage, index: usize) -> i32 {
    let w = img.width();
    let px = img.pixels();
    let sum = i32::from(px[index - w])
        + i32::from(px[index + w])
        + i32::from(px[index - 1])
        + i32::from(px[index + 1]);
    (sum + 2) / 4
}

/// Deterministic keyed shuffle of a site list.
pub fn keyed_permutation(sites: &mut [PixelSite], key: u64, stream: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(stream);
    sites.shuffle(&mut rng);
}

/// Cover values, predictions, errors and layer-0 originals for a site list.
///
/// Entry `i` of every vector refers to `sites[i]`; site order is the
/// embedding order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionSet {
    sites: Vec<PixelSite>,
    cover: Vec<i32>,
    predictions: Vec<i32>,
    errors: Vec<i32>,
    originals: Vec<i32>,
}

impl PredictionSet {
    /// Builds a set from raw parts; errors are derived as `cover - prediction`.
    pub fn from_parts(
        sites: Vec<PixelSite>,
        cover: Vec<i32>,
        predictions: Vec<i32>,
        originals: Vec<i32>,
    ) -> Result<Self, PredictError> {
        let n = sites.len();
        if cover.len() != n || predictions.len() != n || originals.len() != n {
            return Err(PredictError::LengthMismatch);
        }
        let errors = cover.iter().zip(&predictions).map(|(c, z)| c - z).collect();
        Ok(Self {
            sites,
            cover,
            predictions,
            errors,
            originals,
        })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[PixelSite] {
        &self.sites
    }

    pub fn cover(&self) -> &[i32] {
        &self.cover
    }

    pub fn predictions(&self) -> &[i32] {
        &self.predictions
    }

    pub fn errors(&self) -> &[i32] {
        &self.errors
    }

    pub fn originals(&self) -> &[i32] {
        &self.originals
    }

    /// `c - o` for site `i`: how far the carrier already sits from the original.
    #[inline]
    pub fn residual(&self, i: usize) -> i32 {
        self.cover[i] - self.originals[i]
    }
}

/// Predicts the given sites of `img`, reading originals from `original`.
pub fn predict_sites(
    img: &GrayImage,
    original: &GrayImage,
    sites: Vec<PixelSite>,
) -> Result<PredictionSet, PredictError> {
    if img.dimensions() != original.dimensions() {
        return Err(PredictError::OriginalMismatch);
    }
    let n = sites.len();
    let (mut cover, mut predictions, mut originals) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for site in &sites {
        cover.push(i32::from(img.pixels()[site.index]));
        predictions.push(rhombus_prediction(img, site.index));
        originals.push(i32::from(original.pixels()[site.index]));
    }
    PredictionSet::from_parts(sites, cover, predictions, originals)
}

/// Predicts every site of one pass in raster order.
pub fn predict(
    img: &GrayImage,
    original: &GrayImage,
    pass: u8,
) -> Result<PredictionSet, PredictError> {
    let sites = sites_with_margin(img, Some(pass), 1)?;
    predict_sites(img, original, sites)
}
