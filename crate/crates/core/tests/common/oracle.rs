//! Exhaustive reference implementations used to cross-check the solver and
//! the plan search. Costs are recomputed site by site from the prediction
//! set; nothing here goes through `CostTable` or the matching solver.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rdh_core::predictor::PredictionSet;

/// `sum (k + c - o)^2` over the sites whose error is `y`.
pub fn site_cost(pred: &PredictionSet, y: i32, k: i32) -> i64 {
    (0..pred.len())
        .filter(|&i| pred.errors()[i] == y)
        .map(|i| {
            let d = i64::from(k + pred.cover()[i] - pred.originals()[i]);
            d * d
        })
        .sum()
}

/// `site_cost` for every occupied bin and every shift in `[-bound, bound]`.
pub fn site_costs(pred: &PredictionSet, bound: u32) -> BTreeMap<(i32, i32), i64> {
    let t = bound as i32;
    let mut table = BTreeMap::new();
    for y in support(pred) {
        for k in -t..=t {
            table.insert((y, k), site_cost(pred, y, k));
        }
    }
    table
}

pub fn support(pred: &PredictionSet) -> Vec<i32> {
    let set: BTreeSet<i32> = pred.errors().iter().copied().collect();
    set.into_iter().collect()
}

/// Least total cost of an injective map from `domain` into `allowed`
/// moving every bin by at most `bound`, searched by depth-first enumeration.
pub fn min_injection(
    domain: &[i32],
    allowed: &BTreeSet<i32>,
    bound: u32,
    cost: &dyn Fn(i32, i32) -> i64,
) -> Option<i64> {
    fn rec(
        i: usize,
        domain: &[i32],
        allowed: &BTreeSet<i32>,
        bound: i32,
        cost: &dyn Fn(i32, i32) -> i64,
        used: &mut BTreeSet<i32>,
        acc: i64,
        best: &mut Option<i64>,
    ) {
        // costs are nonnegative, so a branch at or above the best cannot improve
        if best.is_some_and(|b| acc >= b) {
            return;
        }
        if i == domain.len() {
            *best = Some(acc);
            return;
        }
        let y = domain[i];
        for t in (y - bound)..=(y + bound) {
            if !allowed.contains(&t) || used.contains(&t) {
                continue;
            }
            used.insert(t);
            rec(i + 1, domain, allowed, bound, cost, used, acc + cost(y, t), best);
            used.remove(&t);
        }
    }
    let mut best = None;
    rec(
        0,
        domain,
        allowed,
        bound as i32,
        cost,
        &mut BTreeSet::new(),
        0,
        &mut best,
    );
    best
}

/// Bin universe `(-levels, levels)` as a set.
pub fn universe(levels: i32) -> BTreeSet<i32> {
    ((-levels + 1)..levels).collect()
}

/// Brute-force optimum of the shifting function for fixed peak targets.
pub fn brute_f(
    pred: &PredictionSet,
    levels: i32,
    peaks: &[i32],
    g0: &[i32],
    g1: &[i32],
    bound: u32,
) -> Option<i64> {
    let domain: Vec<i32> = support(pred)
        .into_iter()
        .filter(|v| !peaks.contains(v))
        .collect();
    let mut allowed = universe(levels);
    for t in g0.iter().chain(g1) {
        allowed.remove(t);
    }
    let table = site_costs(pred, bound);
    min_injection(&domain, &allowed, bound, &|y, t| table[&(y, t - y)])
}

/// Brute-force optimum of `(g1, f)` for fixed `g0`, in half units:
/// peak bins are charged their full shift cost, other bins twice theirs.
pub fn brute_joint_doubled(
    pred: &PredictionSet,
    levels: i32,
    peaks: &[i32],
    g0: &[i32],
    bound: u32,
) -> Option<i64> {
    let domain = support(pred);
    let mut allowed = universe(levels);
    for t in g0 {
        allowed.remove(t);
    }
    let table = site_costs(pred, bound);
    min_injection(&domain, &allowed, bound, &|y, t| {
        let c = table[&(y, t - y)];
        if peaks.contains(&y) {
            c
        } else {
            2 * c
        }
    })
}

/// Least predicted SSE, in half units, over every plan with the given peaks:
/// all distinct `(g0, g1)` target pairs within the bound and every feasible
/// shifting function. Peak sites are charged half the shift cost per bit value.
pub fn brute_plan_doubled(pred: &PredictionSet, levels: i32, peaks: &[i32], bound: u32) -> Option<i64> {
    let t = bound as i32;
    let uni = universe(levels);
    let options: Vec<Vec<(i32, i32)>> = peaks
        .iter()
        .map(|&p| {
            let mut v = Vec::new();
            for a in (p - t)..=(p + t) {
                for b in (p - t)..=(p + t) {
                    if a < b && uni.contains(&a) && uni.contains(&b) {
                        v.push((a, b));
                    }
                }
            }
            v
        })
        .collect();
    let mut best: Option<i64> = None;
    let mut idx = vec![0usize; peaks.len()];
    'outer: loop {
        let choice: Vec<(i32, i32)> = idx.iter().enumerate().map(|(i, &k)| options[i][k]).collect();
        let mut seen = BTreeSet::new();
        if choice.iter().all(|&(a, b)| seen.insert(a) && seen.insert(b)) {
            let g0: Vec<i32> = choice.iter().map(|c| c.0).collect();
            let g1: Vec<i32> = choice.iter().map(|c| c.1).collect();
            if let Some(l) = brute_f(pred, levels, peaks, &g0, &g1, bound) {
                let peak: i64 = peaks
                    .iter()
                    .zip(&choice)
                    .map(|(&p, &(a, b))| site_cost(pred, p, a - p) + site_cost(pred, p, b - p))
                    .sum();
                let total = 2 * l + peak;
                if best.is_none_or(|b| total < b) {
                    best = Some(total);
                }
            }
        }
        for i in 0..idx.len() {
            idx[i] += 1;
            if idx[i] < options[i].len() {
                continue 'outer;
            }
            idx[i] = 0;
        }
        break;
    }
    best
}
