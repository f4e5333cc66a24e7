use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::search::{combinations_for_tests, target_pairs_for_tests};
use super::*;
use crate::cost::compute_shift_costs;
use crate::fixtures::{self, worked_example, worked_example_set, WORKED_LEVELS};
use crate::histogram::build_histogram;
use crate::matching::saturates_left;
use crate::predictor::PredictionSet;

#[path = "../../tests/common/oracle.rs"]
mod oracle;

fn fig1a_f() -> Vec<(i32, i32)> {
    vec![(-3, -4), (-2, -3), (-1, -2), (2, 3), (3, 4), (4, 5)]
}

#[test]
fn fig1a_shift_function_at_layer_zero() {
    let (hist, set) = (worked_example(), worked_example_set());
    let costs = compute_shift_costs(&set, &hist, 1);
    let (f, l) = optimize_f(&hist, &costs, &[0, 1], &[0, 1], &[-1, 2], 1).unwrap();
    assert_eq!(f, fig1a_f());
    assert_eq!(l, 2 + 5 + 12 + 10 + 4 + 1);
    let brute = oracle::brute_f(&set, WORKED_LEVELS, &[0, 1], &[0, 1], &[-1, 2], 1);
    assert_eq!(Some(l as i64), brute);
}

#[test]
fn empty_domain_gives_empty_f() {
    let set = fixtures::prediction_set(&[0, 0, 1], &[0, 0, 0]);
    let hist = build_histogram(&set);
    let costs = compute_shift_costs(&set, &hist, 2);
    assert_eq!(
        optimize_f(&hist, &costs, &[0, 1], &[0, 1], &[-1, 2], 2).unwrap(),
        (vec![], 0)
    );
}

#[test]
fn fig2_bigraph_vertices_and_weights() {
    let (hist, set) = (worked_example(), worked_example_set());
    let costs = compute_shift_costs(&set, &hist, 2);
    let g = shift_bigraph(&hist, &costs, &[0, 1], &[0, 1], &[-2, 3], 2);
    assert_eq!(g.left(), &[-3, -2, -1, 2, 3, 4]);
    assert_eq!(g.right(), &[-5, -4, -3, -1, 2, 4, 5]);
    // edge (-3, -5) shifts bin -3 by -2: 4 * h(-3)
    assert_eq!(g.weight(0, 0), Some(4 * 2));
    assert_eq!(g.weight(0, 0), Some(costs.shift_cost(-3, -2) as i64));
    // -3 cannot reach 2
    assert_eq!(g.weight(0, 4), None);
    assert!(saturates_left(&g));
}

#[test]
fn fig1b_mapping_is_a_valid_plan() {
    let (hist, set) = (worked_example(), worked_example_set());
    let plan = ShiftPlan {
        peaks: vec![0, 1],
        g0: vec![0, 1],
        g1: vec![-2, 3],
        shifts: vec![(-3, -4), (-2, -1), (-1, -3), (2, 4), (3, 2), (4, 5)],
        bound: 2,
        predicted_sse: Rational::from_integer(0),
        exact: false,
    };
    plan.validate_for(&hist).unwrap();
    let costs = compute_shift_costs(&set, &hist, 2);
    let manual: u64 = plan
        .shifts
        .iter()
        .map(|&(y, t)| costs.shift_cost(y, t - y))
        .sum();
    let (_, best) = optimize_f(&hist, &costs, &[0, 1], &[0, 1], &[-2, 3], 2).unwrap();
    assert!(best <= manual);
}

#[test]
fn fig4_joint_graph_admits_the_quoted_matching() {
    let (hist, set) = (worked_example(), worked_example_set());
    let costs = compute_shift_costs(&set, &hist, 2);
    let g = joint_bigraph(&hist, &costs, &[0, 1], &[0, 1], 2);
    assert_eq!(g.left(), &(-3..=4).collect::<Vec<_>>()[..]);
    assert_eq!(g.right(), &[-5, -4, -3, -2, -1, 2, 3, 4, 5]);
    // g1(0) = -1, g1(1) = 3, then the cheapest completion of the rest
    let (_, rest) = optimize_f(&hist, &costs, &[0, 1], &[0, 1], &[-1, 3], 2).unwrap();
    let quoted = costs.peak_cost_approx(0, -1)
        + costs.peak_cost_approx(1, 2)
        + Rational::from_integer(rest as i64);
    let joint = optimize_g1_and_f(&hist, &costs, &[0, 1], &[0, 1], 2).unwrap();
    assert!(joint.weight <= quoted);
    let brute = oracle::brute_joint_doubled(&set, WORKED_LEVELS, &[0, 1], &[0, 1], 2).unwrap();
    assert_eq!(joint.weight, Rational::new(brute, 2));
}

#[test]
fn single_peak_takes_a_unit_step() {
    let set = fixtures::prediction_set(&[3; 9], &[0; 9]);
    let hist = build_histogram(&set);
    let costs = compute_shift_costs(&set, &hist, 1);
    let sol = optimize_g1_and_f(&hist, &costs, &[3], &[3], 1).unwrap();
    assert!(sol.g1 == vec![2] || sol.g1 == vec![4]);
    assert!(sol.shifts.is_empty());
    assert_eq!(sol.weight, Rational::new(9, 2));
}

#[test]
fn traditional_reproduces_fig1a() {
    let (hist, set) = (worked_example(), worked_example_set());
    let costs = compute_shift_costs(&set, &hist, 1);
    let plan = traditional_plan(&hist, &costs, &[0, 1]).unwrap();
    assert_eq!(plan.g0, vec![0, 1]);
    assert_eq!(plan.g1, vec![-1, 2]);
    assert_eq!(plan.shifts, fig1a_f());
    assert_eq!(plan.predicted_sse, Rational::new(55, 2) + 34);
}

#[test]
fn traditional_with_only_peaks() {
    let set = fixtures::prediction_set(&[0, 1, 1], &[0; 3]);
    let hist = build_histogram(&set);
    let costs = compute_shift_costs(&set, &hist, 1);
    let plan = traditional_plan(&hist, &costs, &[0, 1]).unwrap();
    assert!(plan.shifts.is_empty());
    assert_eq!(plan.g1, vec![-1, 2]);
}

#[test]
fn traditional_rejects_occupied_interior() {
    let (hist, set) = (worked_example(), worked_example_set());
    let costs = compute_shift_costs(&set, &hist, 1);
    assert!(matches!(
        traditional_plan(&hist, &costs, &[-1, 1]),
        Err(PlanError::InvalidPeaks(_))
    ));
    assert!(traditional_plan(&hist, &costs, &[0]).is_err());
}

#[test]
fn codec_tables_follow_fig1a() {
    let (hist, set) = (worked_example(), worked_example_set());
    let costs = compute_shift_costs(&set, &hist, 1);
    let plan = traditional_plan(&hist, &costs, &[0, 1]).unwrap();
    assert_eq!(plan.forward(2, true), 3);
    assert_eq!(plan.forward(0, false), 0);
    assert_eq!(plan.forward(5, true), 5);
    let enc = plan.encoder(WORKED_LEVELS);
    assert_eq!(enc.action(1), Action::Peak(1));
    assert_eq!(enc.action(-3), Action::Shift(-4));
    assert_eq!(enc.action(-5), Action::Keep);
    let dec = plan.decoder(WORKED_LEVELS).unwrap();
    assert_eq!(dec.decode(-1), Some(Decoded::Bit { bit: true, error: 0 }));
    assert_eq!(dec.decode(0), Some(Decoded::Bit { bit: false, error: 0 }));
    assert_eq!(dec.decode(-4), Some(Decoded::Shifted { error: -3 }));
    assert_eq!(dec.decode(-5), None);
    assert_eq!(dec.decode(-100), None);
    assert_eq!(plan.summary(), "P[0,1] g0[0,1] g1[-1,2] |f|=6");
}

#[test]
fn overlapping_targets_are_ambiguous() {
    let plan = ShiftPlan {
        peaks: vec![0],
        g0: vec![0],
        g1: vec![1],
        shifts: vec![(2, 1)],
        bound: 1,
        predicted_sse: Rational::from_integer(0),
        exact: false,
    };
    assert!(plan.validate(WORKED_LEVELS).is_err());
    assert_eq!(
        plan.decoder(WORKED_LEVELS).unwrap_err(),
        PlanError::AmbiguousBin(1)
    );
}

#[test]
fn validation_catches_each_invariant() {
    let good = ShiftPlan {
        peaks: vec![0, 1],
        g0: vec![0, 1],
        g1: vec![-1, 2],
        shifts: vec![(-1, -2), (2, 3)],
        bound: 1,
        predicted_sse: Rational::from_integer(0),
        exact: false,
    };
    good.validate(WORKED_LEVELS).unwrap();
    let mut far = good.clone();
    far.shifts[1] = (2, 4);
    assert!(far.validate(WORKED_LEVELS).is_err());
    let mut outside = good.clone();
    outside.shifts[1] = (5, 6);
    assert!(outside.validate(WORKED_LEVELS).is_err());
    let mut shared = good.clone();
    shared.g1 = vec![-1, 1];
    assert!(shared.validate(WORKED_LEVELS).is_err());
    let mut peak_in_domain = good.clone();
    peak_in_domain.shifts = vec![(0, -2)];
    assert!(peak_in_domain.validate(WORKED_LEVELS).is_err());
    let hist = worked_example();
    assert!(good.validate_for(&hist).is_err(), "domain misses bins of the support");
}

#[test]
fn payload_beyond_mass_is_infeasible() {
    let (hist, set) = (worked_example(), worked_example_set());
    let costs = compute_shift_costs(&set, &hist, 1);
    let req = PlanRequest::new(&hist, &costs, hist.total() + 1);
    assert_eq!(
        enumerate_plans(&req),
        Err(PlanError::NoFeasiblePlan {
            payload: hist.total() + 1
        })
    );
}

#[test]
fn two_bin_histogram_selects_fig1a_shape() {
    let set = fixtures::prediction_set(&[0; 40].iter().chain(&[1; 40]).copied().collect::<Vec<_>>(), &[0; 80]);
    let hist = build_histogram(&set);
    let costs = compute_shift_costs(&set, &hist, 1);
    for policy in [PlanPolicy::HeuristicG0, PlanPolicy::Exhaustive, PlanPolicy::Traditional] {
        let req = PlanRequest {
            policy,
            ..PlanRequest::new(&hist, &costs, 80)
        };
        let plan = enumerate_plans(&req).unwrap();
        assert_eq!(plan.peaks, vec![0, 1], "{policy:?}");
        assert!(plan.shifts.is_empty());
        assert_eq!(plan.predicted_sse, Rational::from_integer(40), "{policy:?}");
        assert_eq!(
            (plan.g0.clone(), plan.g1.clone()),
            (vec![0, 1], vec![-1, 2]),
            "{policy:?}"
        );
    }
}

#[test]
fn unordered_target_pairs_are_visited_once() {
    let hist = worked_example();
    for t in 1..=3u32 {
        let pairs = target_pairs_for_tests(0, t, &hist);
        let n = (2 * t + 1) as usize;
        assert_eq!(pairs.len(), n * (n - 1) / 2);
        assert!(pairs.iter().all(|(a, b)| a < b));
    }
    assert_eq!(combinations_for_tests(&[1, 2, 3, 4], 2).len(), 6);
    assert_eq!(combinations_for_tests(&[1], 2).len(), 0);
}

#[test]
fn exact_scoring_uses_message_bits() {
    let (hist, set) = (worked_example(), worked_example_set());
    let costs = compute_shift_costs(&set, &hist, 2);
    let ones = vec![true; 55];
    let req = PlanRequest {
        pred: Some(&set),
        message: Some(&ones),
        ..PlanRequest::new(&hist, &costs, 55)
    };
    let plan = enumerate_plans(&req).unwrap();
    assert!(plan.exact);
    // every peak site carries a 1, so all of its cost is in the g1 shift
    let peak: u64 = plan
        .peaks
        .iter()
        .zip(&plan.g1)
        .map(|(&p, &t)| costs.shift_cost(p, t - p))
        .sum();
    let shift: u64 = plan.shifts.iter().map(|&(y, t)| costs.shift_cost(y, t - y)).sum();
    assert_eq!(plan.predicted_sse, Rational::from_integer((peak + shift) as i64));
}

fn layer_one(seed: u64, max_bins: usize) -> PredictionSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fixtures::random_set(&mut rng, 6, 2, max_bins, 2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn optimize_f_matches_exhaustive_injection(seed in any::<u64>(), t in 1u32..=2) {
        let set = layer_one(seed, 8);
        let hist = build_histogram(&set);
        let costs = compute_shift_costs(&set, &hist, t);
        let support = hist.support();
        let peaks = vec![support[0], support[1]];
        let g0 = peaks.clone();
        let g1 = vec![peaks[0] - 1, peaks[1] + 1];
        let expected = oracle::brute_f(&set, hist.levels(), &peaks, &g0, &g1, t);
        match optimize_f(&hist, &costs, &peaks, &g0, &g1, t) {
            Ok((f, l)) => {
                prop_assert_eq!(Some(l as i64), expected);
                let direct: i64 = f.iter().map(|&(y, q)| oracle::site_cost(&set, y, q - y)).sum();
                prop_assert_eq!(direct, l as i64);
            }
            Err(_) => prop_assert!(expected.is_none()),
        }
    }

    #[test]
    fn joint_matching_matches_exhaustive(seed in any::<u64>(), t in 1u32..=2) {
        let set = layer_one(seed, 7);
        let hist = build_histogram(&set);
        let costs = compute_shift_costs(&set, &hist, t);
        let support = hist.support();
        let peaks = vec![support[0], support[support.len() / 2]];
        let expected = oracle::brute_joint_doubled(&set, hist.levels(), &peaks, &peaks, t);
        match optimize_g1_and_f(&hist, &costs, &peaks, &peaks, t) {
            Ok(sol) => prop_assert_eq!(Some(sol.weight), expected.map(|d| Rational::new(d, 2))),
            Err(_) => prop_assert!(expected.is_none()),
        }
    }

    #[test]
    fn enumerated_plans_are_valid_deterministic_and_dominant(
        seed in any::<u64>(),
        t in 1u32..=2,
        policy in prop_oneof![Just(PlanPolicy::HeuristicG0), Just(PlanPolicy::Exhaustive)],
    ) {
        let set = layer_one(seed, 6);
        let hist = build_histogram(&set);
        let costs = compute_shift_costs(&set, &hist, t);
        let payload = hist.top_capacity(2) / 2;
        let req = PlanRequest { policy, ..PlanRequest::new(&hist, &costs, payload) };
        let Ok(plan) = enumerate_plans(&req) else { return Ok(()) };
        plan.validate_for(&hist).unwrap();
        prop_assert!(hist.capacity(&plan.peaks).unwrap() >= payload);
        prop_assert_eq!(&enumerate_plans(&req).unwrap(), &plan);
        let trad = PlanRequest { policy: PlanPolicy::Traditional, ..req };
        if let Ok(baseline) = enumerate_plans(&trad) {
            prop_assert!(plan.predicted_sse <= baseline.predicted_sse);
        }
    }

    #[test]
    fn exhaustive_policy_matches_full_plan_oracle(seed in any::<u64>()) {
        let set = layer_one(seed, 5);
        let hist = build_histogram(&set);
        let costs = compute_shift_costs(&set, &hist, 1);
        let req = PlanRequest { policy: PlanPolicy::Exhaustive, ..PlanRequest::new(&hist, &costs, 1) };
        let best = combinations_for_tests(&hist.support(), 2)
            .iter()
            .filter_map(|p| oracle::brute_plan_doubled(&set, hist.levels(), p, 1))
            .min();
        match enumerate_plans(&req) {
            Ok(plan) => prop_assert_eq!(Some(plan.predicted_sse), best.map(|d| Rational::new(d, 2))),
            Err(_) => prop_assert!(best.is_none()),
        }
    }
}
