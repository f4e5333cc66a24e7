//! Plan search: bigraph construction per candidate and the outer enumeration.
//!
//! Internally peak-bin weights are kept in half units (doubled integers) so
//! the random-bit estimate `C / 2` stays exact inside the integer solver.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rayon::prelude::*;

use super::{PlanError, ShiftPlan};
use crate::cost::{compute_peak_costs, CostTable, PeakCosts};
use crate::histogram::PEHistogram;
use crate::matching::{solve_mwmm, Edge, WeightedBigraph};
use crate::predictor::PredictionSet;
use crate::Rational;

/// How bit-0 targets are chosen for each candidate peak set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PlanPolicy {
    /// `g0` is the identity; `g1` and `f` come from one joint matching.
    #[default]
    HeuristicG0,
    /// Every unordered `{g0(p), g1(p)}` pair within the bound, `f` by matching.
    Exhaustive,
    /// Fixed step-1 shifting around two peaks with no bins between them.
    Traditional,
}

impl PlanPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            PlanPolicy::HeuristicG0 => "heuristic-g0",
            PlanPolicy::Exhaustive => "exhaustive",
            PlanPolicy::Traditional => "traditional",
        }
    }
}

impl std::str::FromStr for PlanPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "heuristic-g0" | "heuristic" => Ok(PlanPolicy::HeuristicG0),
            "exhaustive" => Ok(PlanPolicy::Exhaustive),
            "traditional" => Ok(PlanPolicy::Traditional),
            other => Err(format!("unknown policy {other:?}")),
        }
    }
}

fn targets_window(bins: &[i32], bound: u32, hist: &PEHistogram) -> Vec<i32> {
    let (Some(&lo), Some(&hi)) = (bins.first(), bins.last()) else {
        return Vec::new();
    };
    let t = bound as i32;
    ((lo - t).max(hist.min_bin())..=(hi + t).min(hist.max_bin())).collect()
}

fn non_peak_support(hist: &PEHistogram, peaks: &[i32]) -> Vec<i32> {
    hist.support()
        .into_iter()
        .filter(|v| !peaks.contains(v))
        .collect()
}

/// Bigraph between the non-peak support and the free bins within reach.
///
/// Right vertices are the bins of the band around the support that no peak
/// target occupies; weights are exact shift costs.
pub fn shift_bigraph(
    hist: &PEHistogram,
    costs: &CostTable,
    peaks: &[i32],
    g0: &[i32],
    g1: &[i32],
    bound: u32,
) -> WeightedBigraph<i64> {
    let domain = non_peak_support(hist, peaks);
    let taken: BTreeSet<i32> = g0.iter().chain(g1).copied().collect();
    let targets: Vec<i32> = targets_window(&domain, bound, hist)
        .into_iter()
        .filter(|v| !taken.contains(v))
        .collect();
    banded_graph(&domain, &targets, bound, |y, q| {
        costs.shift_cost(y, q - y) as i64
    })
}

/// Least-cost shifting function for fixed peaks and targets.
///
/// Returns `(y, f(y))` pairs over the non-peak support and the exact cost.
pub fn optimize_f(
    hist: &PEHistogram,
    costs: &CostTable,
    peaks: &[i32],
    g0: &[i32],
    g1: &[i32],
    bound: u32,
) -> Result<(Vec<(i32, i32)>, u64), PlanError> {
    let graph = shift_bigraph(hist, costs, peaks, g0, g1, bound);
    if graph.left().is_empty() {
        return Ok((Vec::new(), 0));
    }
    let matching = solve_mwmm(&graph)?;
    let f = matching
        .pairs
        .iter()
        .map(|&(i, j)| (graph.left()[i], graph.right()[j]))
        .collect();
    Ok((f, matching.total_weight as u64))
}

/// Result of the joint `(g1, f)` matching for a fixed `g0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointSolution {
    pub g1: Vec<i32>,
    pub shifts: Vec<(i32, i32)>,
    /// Estimated peak bit-1 cost plus the exact shifting cost.
    pub weight: Rational,
}

/// Bigraph between every occupied bin and every bin in reach not reserved by
/// `g0`. Weights are in half units: peak edges carry the full shift cost
/// (half of it per bit value), all other edges twice the shift cost.
pub fn joint_bigraph(
    hist: &PEHistogram,
    costs: &CostTable,
    peaks: &[i32],
    g0: &[i32],
    bound: u32,
) -> WeightedBigraph<i64> {
    let left = hist.support();
    let targets: Vec<i32> = targets_window(&left, bound, hist)
        .into_iter()
        .filter(|v| !g0.contains(v))
        .collect();
    banded_graph(&left, &targets, bound, |u, v| {
        let c = costs.shift_cost(u, v - u) as i64;
        if peaks.contains(&u) {
            c
        } else {
            2 * c
        }
    })
}

/// Finds `g1` and `f` together for a fixed `g0`; peak edges carry the
/// random-bit estimate.
pub fn optimize_g1_and_f(
    hist: &PEHistogram,
    costs: &CostTable,
    peaks: &[i32],
    g0: &[i32],
    bound: u32,
) -> Result<JointSolution, PlanError> {
    let graph = joint_bigraph(hist, costs, peaks, g0, bound);
    let matching = solve_mwmm(&graph)?;
    let mut g1 = vec![0; peaks.len()];
    let mut shifts = Vec::with_capacity(graph.left().len().saturating_sub(peaks.len()));
    for &(i, j) in &matching.pairs {
        let (u, v) = (graph.left()[i], graph.right()[j]);
        match peaks.iter().position(|&p| p == u) {
            Some(k) => g1[k] = v,
            None => shifts.push((u, v)),
        }
    }
    Ok(JointSolution {
        g1,
        shifts,
        weight: Rational::new(matching.total_weight, 2),
    })
}

fn banded_graph(
    left: &[i32],
    right: &[i32],
    bound: u32,
    weight: impl Fn(i32, i32) -> i64,
) -> WeightedBigraph<i64> {
    // `right` is sorted, so each left vertex's band is a contiguous slice
    let mut edges = Vec::with_capacity(left.len() * (2 * bound as usize + 1));
    let t = bound as i32;
    for (i, &u) in left.iter().enumerate() {
        let start = right.partition_point(|&v| v < u - t);
        for (j, &v) in right.iter().enumerate().skip(start) {
            if v > u + t {
                break;
            }
            edges.push(Edge {
                left: i,
                right: j,
                weight: weight(u, v),
            });
        }
    }
    WeightedBigraph::from_edges(left.to_vec(), right.to_vec(), edges)
}

/// Fixed step-1 plan: bins below the lower peak move down by one, bins above
/// the upper peak move up by one, each peak sends bit 1 one step outward.
pub fn traditional_plan(
    hist: &PEHistogram,
    costs: &CostTable,
    peaks: &[i32],
) -> Result<ShiftPlan, PlanError> {
    let &[lo, hi] = peaks else {
        return Err(PlanError::InvalidPeaks(format!(
            "traditional shifting needs two peaks, got {}",
            peaks.len()
        )));
    };
    if lo >= hi {
        return Err(PlanError::InvalidPeaks("peaks must be increasing".into()));
    }
    for p in [lo, hi] {
        if hist.count(p) == 0 {
            return Err(PlanError::InvalidPeaks(format!("peak {p} is empty")));
        }
    }
    if hist.iter().any(|(v, _)| v > lo && v < hi) {
        return Err(PlanError::InvalidPeaks(format!(
            "bins between {lo} and {hi} are occupied"
        )));
    }
    let shifts: Vec<(i32, i32)> = hist
        .support()
        .into_iter()
        .filter(|&v| v < lo || v > hi)
        .map(|v| if v < lo { (v, v - 1) } else { (v, v + 1) })
        .collect();
    let g0 = vec![lo, hi];
    let g1 = vec![lo - 1, hi + 1];
    let bound = costs.bound().max(1);
    let mut plan = ShiftPlan {
        peaks: peaks.to_vec(),
        g0,
        g1,
        shifts,
        bound,
        predicted_sse: Rational::from_integer(0),
        exact: false,
    };
    plan.validate_for(hist)?;
    let peak_costs = PeakCostSource::Approx(costs);
    plan.predicted_sse = score(&plan.g0, &plan.g1, &plan.shifts, &plan.peaks, costs, &peak_costs);
    Ok(plan)
}

/// Inputs to the outer enumeration over peak sets.
#[derive(Debug, Clone, Copy)]
pub struct PlanRequest<'a> {
    pub hist: &'a PEHistogram,
    pub costs: &'a CostTable,
    /// Needed to score peak bins with real message bits.
    pub pred: Option<&'a PredictionSet>,
    /// Bits handed to the peak sites in site order; zeros pad the rest.
    pub message: Option<&'a [bool]>,
    pub payload_bits: u64,
    pub bound: u32,
    pub m: usize,
    pub policy: PlanPolicy,
}

impl<'a> PlanRequest<'a> {
    pub fn new(hist: &'a PEHistogram, costs: &'a CostTable, payload_bits: u64) -> Self {
        Self {
            hist,
            costs,
            pred: None,
            message: None,
            payload_bits,
            bound: costs.bound(),
            m: 2,
            policy: PlanPolicy::HeuristicG0,
        }
    }
}

enum PeakCostSource<'a> {
    Approx(&'a CostTable),
    Exact(PeakCosts),
}

impl PeakCostSource<'_> {
    fn pair_cost(&self, idx: usize, peak: i32, k0: i32, k1: i32) -> Rational {
        match self {
            PeakCostSource::Approx(costs) => {
                costs.peak_cost_approx(peak, k0) + costs.peak_cost_approx(peak, k1)
            }
            PeakCostSource::Exact(pc) => pc.pair_cost(idx, k0, k1),
        }
    }
}

fn score(
    g0: &[i32],
    g1: &[i32],
    shifts: &[(i32, i32)],
    peaks: &[i32],
    costs: &CostTable,
    peak_costs: &PeakCostSource<'_>,
) -> Rational {
    let peak_part = peaks
        .iter()
        .enumerate()
        .fold(Rational::from_integer(0), |acc, (i, &p)| {
            acc + peak_costs.pair_cost(i, p, g0[i] - p, g1[i] - p)
        });
    let shift_part: u64 = shifts.iter().map(|&(y, t)| costs.shift_cost(y, t - y)).sum();
    peak_part + Rational::from_integer(shift_part as i64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Candidate {
    score: Rational,
    peaks: Vec<i32>,
    g0: Vec<i32>,
    g1: Vec<i32>,
    shifts: Vec<(i32, i32)>,
}

impl Candidate {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.score
            .cmp(&other.score)
            .then_with(|| self.peaks.cmp(&other.peaks))
            .then_with(|| self.g1.cmp(&other.g1))
            .then_with(|| self.g0.cmp(&other.g0))
            .then_with(|| {
                let a = self.shifts.iter().map(|&(_, t)| t);
                let b = other.shifts.iter().map(|&(_, t)| t);
                a.cmp(b)
            })
    }
}

fn better(a: Option<Candidate>, b: Option<Candidate>) -> Option<Candidate> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if b.key_cmp(&a) == Ordering::Less { b } else { a }),
        (a, None) => a,
        (None, b) => b,
    }
}

/// m-subsets of `items` in lexicographic order.
fn combinations(items: &[i32], m: usize) -> Vec<Vec<i32>> {
    fn rec(items: &[i32], m: usize, start: usize, cur: &mut Vec<i32>, out: &mut Vec<Vec<i32>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            if items.len() - i < m - cur.len() {
                break;
            }
            cur.push(items[i]);
            rec(items, m, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if m <= items.len() {
        rec(items, m, 0, &mut Vec::with_capacity(m), &mut out);
    }
    out
}

/// Unordered target pairs `(a, b)`, `a < b`, within the bound of `p`.
fn target_pairs(p: i32, bound: u32, hist: &PEHistogram) -> Vec<(i32, i32)> {
    let t = bound as i32;
    let window: Vec<i32> = ((p - t)..=(p + t)).filter(|&v| hist.in_universe(v)).collect();
    let mut pairs = Vec::new();
    for (i, &a) in window.iter().enumerate() {
        for &b in &window[i + 1..] {
            pairs.push((a, b));
        }
    }
    pairs
}

fn cartesian(choices: &[Vec<(i32, i32)>]) -> Vec<Vec<(i32, i32)>> {
    choices.iter().fold(vec![Vec::new()], |acc, opts| {
        acc.into_iter()
            .flat_map(|prefix| {
                opts.iter().map(move |&o| {
                    let mut next = prefix.clone();
                    next.push(o);
                    next
                })
            })
            .collect()
    })
}

fn candidates_for(req: &PlanRequest<'_>, peaks: &[i32]) -> Option<Candidate> {
    let peak_costs = match (req.pred, req.message) {
        (Some(pred), Some(bits)) => {
            PeakCostSource::Exact(compute_peak_costs(pred, req.costs, peaks, Some(bits)))
        }
        _ => PeakCostSource::Approx(req.costs),
    };
    let make = |g0: Vec<i32>, g1: Vec<i32>, shifts: Vec<(i32, i32)>| Candidate {
        score: score(&g0, &g1, &shifts, peaks, req.costs, &peak_costs),
        peaks: peaks.to_vec(),
        g0,
        g1,
        shifts,
    };
    let mut best = None;

    // the step-1 plan is a feasible point of every policy's search space
    if peaks.len() == 2 {
        if let Ok(t) = traditional_plan(req.hist, req.costs, peaks) {
            if t.validate(req.hist.levels()).is_ok() && req.bound >= 1 {
                best = better(best, Some(make(t.g0, t.g1, t.shifts)));
            }
        }
    }

    match req.policy {
        PlanPolicy::Traditional => {}
        PlanPolicy::HeuristicG0 => {
            let g0 = peaks.to_vec();
            if let Ok(sol) = optimize_g1_and_f(req.hist, req.costs, peaks, &g0, req.bound) {
                best = better(best, Some(make(g0, sol.g1, sol.shifts)));
            }
        }
        PlanPolicy::Exhaustive => {
            let choices: Vec<Vec<(i32, i32)>> = peaks
                .iter()
                .map(|&p| target_pairs(p, req.bound, req.hist))
                .collect();
            for combo in cartesian(&choices) {
                let mut seen = BTreeSet::new();
                if !combo.iter().all(|&(a, b)| seen.insert(a) && seen.insert(b)) {
                    continue;
                }
                let g0: Vec<i32> = combo.iter().map(|&(a, _)| a).collect();
                let g1: Vec<i32> = combo.iter().map(|&(_, b)| b).collect();
                if let Ok((f, _)) = optimize_f(req.hist, req.costs, peaks, &g0, &g1, req.bound) {
                    best = better(best, Some(make(g0, g1, f)));
                }
            }
        }
    }
    best
}

/// Best plan over every admissible peak set with enough capacity.
pub fn enumerate_plans(req: &PlanRequest<'_>) -> Result<ShiftPlan, PlanError> {
    if req.bound == 0 || req.m == 0 {
        return Err(PlanError::InvalidPeaks("m and T must be positive".into()));
    }
    if req.policy == PlanPolicy::Traditional && req.m != 2 {
        return Err(PlanError::InvalidPeaks(
            "traditional shifting is defined for two peaks".into(),
        ));
    }
    let support = req.hist.support();
    let mut peak_sets: Vec<(u64, Vec<i32>)> = combinations(&support, req.m)
        .into_iter()
        .map(|p| (req.hist.capacity(&p).expect("support bins"), p))
        .filter(|(cap, _)| *cap >= req.payload_bits)
        .collect();
    peak_sets.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));

    let best = peak_sets
        .par_iter()
        .map(|(_, peaks)| candidates_for(req, peaks))
        .reduce(|| None, better);

    let best = best.ok_or(PlanError::NoFeasiblePlan {
        payload: req.payload_bits,
    })?;
    let plan = ShiftPlan {
        peaks: best.peaks,
        g0: best.g0,
        g1: best.g1,
        shifts: best.shifts,
        bound: req.bound,
        predicted_sse: best.score,
        exact: matches!((req.pred, req.message), (Some(_), Some(_))),
    };
    debug_assert!(plan.validate_for(req.hist).is_ok());
    Ok(plan)
}

#[cfg(test)]
pub(super) fn combinations_for_tests(items: &[i32], m: usize) -> Vec<Vec<i32>> {
    combinations(items, m)
}

#[cfg(test)]
pub(super) fn target_pairs_for_tests(p: i32, bound: u32, hist: &PEHistogram) -> Vec<(i32, i32)> {
    target_pairs(p, bound, hist)
}
