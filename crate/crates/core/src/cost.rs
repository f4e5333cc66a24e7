//! Shifting costs of histogram bins.
//!
//! Moving every site of bin `y` by `k` costs `sum over sites (k + c - o)^2`,
//! where `c - o` is how far the carrier already sits from the layer-0
//! original. Each bin keeps the count, sum and sum of squares of its
//! residuals so the cost of any shift is a closed-form integer.

use std::collections::BTreeMap;

use num_rational::Ratio;

use crate::histogram::PEHistogram;
use crate::predictor::PredictionSet;

/// Count, sum and sum of squares of a set of residuals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Moments {
    pub count: u64,
    pub sum: i64,
    pub sum_sq: i64,
}

impl Moments {
    #[inline]
    pub fn push(&mut self, residual: i32) {
        let r = i64::from(residual);
        self.count += 1;
        self.sum += r;
        self.sum_sq += r * r;
    }

    /// `sum (k + r)^2` over the collected residuals.
    #[inline]
    pub fn shifted_sse(&self, k: i32) -> u64 {
        let k = i64::from(k);
        let v = k * k * self.count as i64 + 2 * k * self.sum + self.sum_sq;
        debug_assert!(v >= 0);
        v as u64
    }
}

#[derive(Debug, Clone)]
struct BinCosts {
    moments: Moments,
    table: Vec<u64>,
    sites: Vec<usize>,
}

/// Shift costs for every non-empty bin and every shift in `[-T, T]`.
#[derive(Debug, Clone)]
pub struct CostTable {
    bound: u32,
    bins: BTreeMap<i32, BinCosts>,
}

impl CostTable {
    pub fn bound(&self) -> u32 {
        self.bound
    }

    /// Exact cost of moving bin `y` by `k`; zero for empty bins.
    pub fn shift_cost(&self, y: i32, k: i32) -> u64 {
        let Some(bin) = self.bins.get(&y) else {
            return 0;
        };
        let t = self.bound as i32;
        if (-t..=t).contains(&k) {
            bin.table[(k + t) as usize]
        } else {
            bin.moments.shifted_sse(k)
        }
    }

    /// Half of the shift cost: the expected peak cost when half the sites carry a 1.
    pub fn peak_cost_approx(&self, p: i32, k: i32) -> Ratio<i64> {
        Ratio::new(self.shift_cost(p, k) as i64, 2)
    }

    pub fn moments(&self, y: i32) -> Moments {
        self.bins.get(&y).map(|b| b.moments).unwrap_or_default()
    }

    /// Indices into the prediction set of the sites whose error equals `y`.
    pub fn sites_of(&self, y: i32) -> &[usize] {
        self.bins.get(&y).map(|b| b.sites.as_slice()).unwrap_or(&[])
    }
}

pub fn compute_shift_costs(pred: &PredictionSet, hist: &PEHistogram, bound: u32) -> CostTable {
    assert!(bound >= 1, "shift bound must be positive");
    let mut bins: BTreeMap<i32, BinCosts> = hist
        .iter()
        .map(|(v, c)| {
            (
                v,
                BinCosts {
                    moments: Moments::default(),
                    table: Vec::new(),
                    sites: Vec::with_capacity(c as usize),
                },
            )
        })
        .collect();
    for (i, &e) in pred.errors().iter().enumerate() {
        let bin = bins.get_mut(&e).expect("histogram built from the same prediction set");
        bin.moments.push(pred.residual(i));
        bin.sites.push(i);
    }
    let t = bound as i32;
    for bin in bins.values_mut() {
        bin.table = (-t..=t).map(|k| bin.moments.shifted_sse(k)).collect();
    }
    CostTable { bound, bins }
}

/// Peak-bin costs split by the bit each site carries.
///
/// Without a message the split is unknown and every `(bit, shift)` pair is
/// charged half of the full shift cost. With a message, bit `j` goes to the
/// `j`-th peak site in prediction-set order and missing bits are zeros.
#[derive(Debug, Clone)]
pub struct PeakCosts {
    peaks: Vec<i32>,
    split: Option<Vec<[Moments; 2]>>,
    full: Vec<Moments>,
}

impl PeakCosts {
    pub fn peaks(&self) -> &[i32] {
        &self.peaks
    }

    pub fn is_exact(&self) -> bool {
        self.split.is_some()
    }

    /// Cost of sending sites of `peaks[idx]` carrying `bit` through shift `k`.
    pub fn cost(&self, idx: usize, bit: bool, k: i32) -> Ratio<i64> {
        match &self.split {
            Some(split) => Ratio::from_integer(split[idx][bit as usize].shifted_sse(k) as i64),
            None => Ratio::new(self.full[idx].shifted_sse(k) as i64, 2),
        }
    }

    /// Cost of a peak with its bit-0 and bit-1 shifts.
    pub fn pair_cost(&self, idx: usize, k0: i32, k1: i32) -> Ratio<i64> {
        self.cost(idx, false, k0) + self.cost(idx, true, k1)
    }
}

pub fn compute_peak_costs(
    pred: &PredictionSet,
    costs: &CostTable,
    peaks: &[i32],
    message: Option<&[bool]>,
) -> PeakCosts {
    let full = peaks.iter().map(|&p| costs.moments(p)).collect();
    let split = message.map(|bits| {
        let mut split = vec![[Moments::default(); 2]; peaks.len()];
        for (j, (idx, site)) in merged_peak_sites(costs, peaks).enumerate() {
            let bit = bits.get(j).copied().unwrap_or(false);
            split[idx][bit as usize].push(pred.residual(site));
        }
        split
    });
    PeakCosts {
        peaks: peaks.to_vec(),
        split,
        full,
    }
}

/// `(peak index, site index)` for all sites of the peak bins, in site order.
pub fn merged_peak_sites<'a>(
    costs: &'a CostTable,
    peaks: &[i32],
) -> impl Iterator<Item = (usize, usize)> + 'a {
    let lists: Vec<&'a [usize]> = peaks.iter().map(|&p| costs.sites_of(p)).collect();
    let mut cursors = vec![0usize; lists.len()];
    std::iter::from_fn(move || {
        let mut best: Option<(usize, usize)> = None;
        for (idx, list) in lists.iter().enumerate() {
            if let Some(&site) = list.get(cursors[idx]) {
                if best.is_none_or(|(_, s)| site < s) {
                    best = Some((idx, site));
                }
            }
        }
        if let Some((idx, _)) = best {
            cursors[idx] += 1;
        }
        best
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histogram::build_histogram;
    use crate::predictor::PixelSite;

    fn set_from(errors: &[i32], residuals: &[i32]) -> PredictionSet {
        let n = errors.len();
        let sites = (0..n)
            .map(|index| PixelSite { index, pass: 0 })
            .collect();
        let predictions = vec![100; n];
        let cover: Vec<i32> = errors.iter().map(|e| 100 + e).collect();
        let originals = cover.iter().zip(residuals).map(|(c, r)| c - r).collect();
        PredictionSet::from_parts(sites, cover, predictions, originals).unwrap()
    }

    #[test]
    fn layer_zero_closed_form() {
        let set = set_from(&[3; 7], &[0; 7]);
        let costs = compute_shift_costs(&set, &build_histogram(&set), 2);
        assert_eq!(costs.shift_cost(3, 2), 28);
        assert_eq!(costs.shift_cost(3, 0), 0);
        assert_eq!(costs.shift_cost(3, -1), 7);
        assert_eq!(costs.shift_cost(9, 1), 0);
    }

    #[test]
    fn deeper_layer_matches_site_loop() {
        let errors = [1, 1, 1, 1, -2, -2, 0];
        let residuals = [-1, 0, 1, 1, -1, 0, 1];
        let set = set_from(&errors, &residuals);
        let costs = compute_shift_costs(&set, &build_histogram(&set), 3);
        for y in [-2, 0, 1] {
            for k in -3..=3 {
                let direct: i64 = errors
                    .iter()
                    .zip(&residuals)
                    .filter(|(e, _)| **e == y)
                    .map(|(_, r)| i64::from(k + r).pow(2))
                    .sum();
                assert_eq!(costs.shift_cost(y, k) as i64, direct, "y={y} k={k}");
            }
        }
        assert_eq!(costs.sites_of(-2), &[4, 5]);
    }

    #[test]
    fn peak_cost_approximation_and_exact_split() {
        let set = set_from(&[0; 10], &[0; 10]);
        let costs = compute_shift_costs(&set, &build_histogram(&set), 1);
        assert_eq!(costs.peak_cost_approx(0, 1), Ratio::from_integer(5));
        assert_eq!(costs.peak_cost_approx(0, 0), Ratio::from_integer(0));
        let approx = compute_peak_costs(&set, &costs, &[0], None);
        assert!(!approx.is_exact());
        assert_eq!(approx.cost(0, true, 1), Ratio::from_integer(5));
        let bits = [true, false, true, true, false, true, false, true, false, true];
        let exact = compute_peak_costs(&set, &costs, &[0], Some(&bits));
        assert_eq!(exact.cost(0, true, 1), Ratio::from_integer(6));
        assert_eq!(exact.cost(0, false, 1), Ratio::from_integer(4));
    }

    #[test]
    fn short_message_pads_with_zeros() {
        let set = set_from(&[0, 1, 0, 1], &[0; 4]);
        let costs = compute_shift_costs(&set, &build_histogram(&set), 1);
        let exact = compute_peak_costs(&set, &costs, &[0, 1], Some(&[true]));
        // site 0 (bin 0) takes the only 1; the rest carry 0
        assert_eq!(exact.cost(0, true, 1), Ratio::from_integer(1));
        assert_eq!(exact.cost(1, true, 1), Ratio::from_integer(0));
        assert_eq!(exact.cost(1, false, 1), Ratio::from_integer(2));
        let order: Vec<_> = merged_peak_sites(&costs, &[0, 1]).collect();
        assert_eq!(order, vec![(0, 0), (1, 1), (0, 2), (1, 3)]);
    }
}
