//! Prediction-error histogram.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::image::PIXEL_LEVELS;
use crate::predictor::PredictionSet;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HistogramError {
    #[error("peak bin {0} is empty")]
    EmptyPeak(i32),
    #[error("error value {value} outside the bin universe (-{levels}, {levels})")]
    OutOfRange { value: i32, levels: i32 },
}

/// Occurrence counts over the bin universe `(-levels, levels)`.
///
/// Only non-empty bins are stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PEHistogram {
    levels: i32,
    counts: BTreeMap<i32, u64>,
    total: u64,
}

impl PEHistogram {
    /// Histogram of arbitrary error values for a pixel range of `levels` values.
    pub fn from_errors(
        errors: impl IntoIterator<Item = i32>,
        levels: i32,
    ) -> Result<Self, HistogramError> {
        let mut counts = BTreeMap::new();
        let mut total = 0;
        for e in errors {
            if e <= -levels || e >= levels {
                return Err(HistogramError::OutOfRange { value: e, levels });
            }
            *counts.entry(e).or_insert(0) += 1;
            total += 1;
        }
        Ok(Self {
            levels,
            counts,
            total,
        })
    }

    /// Builds from explicit `(bin, count)` pairs; zero counts are dropped.
    pub fn from_counts(
        counts: impl IntoIterator<Item = (i32, u64)>,
        levels: i32,
    ) -> Result<Self, HistogramError> {
        let mut map = BTreeMap::new();
        let mut total = 0;
        for (v, c) in counts {
            if v <= -levels || v >= levels {
                return Err(HistogramError::OutOfRange { value: v, levels });
            }
            if c > 0 {
                *map.entry(v).or_insert(0) += c;
                total += c;
            }
        }
        Ok(Self {
            levels,
            counts: map,
            total,
        })
    }

    pub fn levels(&self) -> i32 {
        self.levels
    }

    pub fn count(&self, v: i32) -> u64 {
        self.counts.get(&v).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Smallest bin of the universe.
    pub fn min_bin(&self) -> i32 {
        -(self.levels - 1)
    }

    /// Largest bin of the universe.
    pub fn max_bin(&self) -> i32 {
        self.levels - 1
    }

    pub fn in_universe(&self, v: i32) -> bool {
        v > -self.levels && v < self.levels
    }

    /// Non-empty bins in increasing order.
    pub fn support(&self) -> Vec<i32> {
        self.counts.keys().copied().collect()
    }

    pub fn support_len(&self) -> usize {
        self.counts.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, u64)> + '_ {
        self.counts.iter().map(|(&v, &c)| (v, c))
    }

    /// Bits carried by a peak set: the summed occupancy of its bins.
    pub fn capacity(&self, peaks: &[i32]) -> Result<u64, HistogramError> {
        peaks.iter().try_fold(0u64, |acc, &p| match self.count(p) {
            0 => Err(HistogramError::EmptyPeak(p)),
            c => Ok(acc + c),
        })
    }

    /// Largest capacity reachable with `m` distinct peaks.
    pub fn top_capacity(&self, m: usize) -> u64 {
        let mut counts: Vec<u64> = self.counts.values().copied().collect();
        counts.sort_unstable_by(|a, b| b.cmp(a));
        counts.iter().take(m).sum()
    }

    /// Two-column `bin count` listing sorted by bin.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (v, c) in &self.counts {
            let _ = writeln!(out, "{v} {c}");
        }
        out
    }
}

pub fn build_histogram(pred: &PredictionSet) -> PEHistogram {
    PEHistogram::from_errors(pred.errors().iter().copied(), PIXEL_LEVELS)
        .expect("8-bit prediction errors lie in (-256, 256)")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::worked_example;

    #[test]
    fn counts_simple_errors() {
        let h = PEHistogram::from_errors([0, 0, 1, -1, 0], PIXEL_LEVELS).unwrap();
        assert_eq!(h.count(0), 3);
        assert_eq!(h.count(1), 1);
        assert_eq!(h.count(-1), 1);
        assert_eq!(h.support(), vec![-1, 0, 1]);
        assert_eq!(h.total(), 5);
    }

    #[test]
    fn empty_sites_give_empty_support() {
        let h = PEHistogram::from_errors([], PIXEL_LEVELS).unwrap();
        assert!(h.support().is_empty());
        assert_eq!(h.total(), 0);
        assert_eq!(h.capacity(&[]).unwrap(), 0);
    }

    #[test]
    fn worked_example_universes() {
        let h = worked_example();
        assert_eq!(h.support(), (-3..=4).collect::<Vec<_>>());
        let universe: Vec<i32> = (h.min_bin()..=h.max_bin()).collect();
        assert_eq!(universe, (-5..=5).collect::<Vec<_>>());
        assert!(h.support().iter().all(|&v| h.in_universe(v) && h.count(v) > 0));
    }

    #[test]
    fn capacity_sums_peaks() {
        let h = PEHistogram::from_counts([(0, 50), (1, 30), (2, 4)], PIXEL_LEVELS).unwrap();
        assert_eq!(h.capacity(&[0, 1]).unwrap(), 80);
        assert_eq!(h.capacity(&[]).unwrap(), 0);
        assert_eq!(h.capacity(&h.support()).unwrap(), h.total());
        assert_eq!(h.capacity(&[0, 5]), Err(HistogramError::EmptyPeak(5)));
        assert_eq!(h.top_capacity(2), 80);
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(PEHistogram::from_errors([6], 6).is_err());
        assert!(PEHistogram::from_errors([-256], PIXEL_LEVELS).is_err());
    }

    #[test]
    fn text_dump_sorted() {
        let h = PEHistogram::from_errors([2, -1, 2], PIXEL_LEVELS).unwrap();
        assert_eq!(h.to_text(), "-1 1\n2 2\n");
    }
}
