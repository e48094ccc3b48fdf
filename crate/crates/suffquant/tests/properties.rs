//! Randomized invariants: conservation of mass, information-gap
//! equivalences, search dominance, and symmetry laws that must hold for
//! every model the generators can produce.

use proptest::prelude::*;

use suffquant::model::{Axis, CostMatrix, DiscreteModel, Side, Statistic};
use suffquant::quantizer::{
    bayes_estimator, compose, exhaustive_search, pbpo_restarts, risk, LabelingIter, PbpoOpts,
    SearchDomain,
};
use suffquant::sufficiency::{
    conditional_independence, minimal_sufficient, mutual_information_gap, posterior_match,
};
use suffquant::verify::{random_model, ModelRecipe, RecipeKind};

const EPS: f64 = 1e-9;

fn generic(theta: usize, x1: usize, x2: usize, positive: bool, seed: u64) -> DiscreteModel {
    random_model(&ModelRecipe {
        kind: RecipeKind::Generic,
        theta,
        w: None,
        x1,
        x2,
        positive,
        seed,
    })
    .expect("generic recipes are always valid")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn marginals_conserve_mass(
        seed in any::<u64>(),
        nt in 2..=3usize,
        n1 in 2..=4usize,
        n2 in 2..=4usize,
        positive in any::<bool>(),
    ) {
        let m = generic(nt, n1, n2, positive, seed);
        let keeps: [&[Axis]; 6] = [
            &[Axis::Theta],
            &[Axis::X1],
            &[Axis::X2],
            &[Axis::Theta, Axis::X1],
            &[Axis::X1, Axis::X2],
            &[Axis::Theta, Axis::X1, Axis::X2],
        ];
        for keep in keeps {
            let table = m.marginal(keep).unwrap();
            prop_assert!((table.total() - 1.0).abs() <= EPS);
        }
    }

    #[test]
    fn identity_statistics_induce_the_same_model(
        seed in any::<u64>(),
        nt in 2..=3usize,
        n1 in 2..=4usize,
        n2 in 2..=4usize,
        positive in any::<bool>(),
    ) {
        let m = generic(nt, n1, n2, positive, seed);
        let id1 = Statistic::identity(Side::One, m.x1());
        let id2 = Statistic::identity(Side::Two, m.x2());
        let induced = m.induced(&id1, &id2).unwrap();
        for (a, b) in induced.probs().iter().zip(m.probs()) {
            prop_assert!((a - b).abs() < 1e-12);
        }

        let t1 = minimal_sufficient(&m, Side::One, Axis::Theta, EPS).unwrap();
        let reduced = m.induced(&t1, &id2).unwrap();
        let total: f64 = reduced.probs().iter().sum();
        prop_assert!((total - 1.0).abs() <= EPS);
    }

    #[test]
    fn minimal_statistics_close_the_information_gap(
        seed in any::<u64>(),
        nt in 2..=3usize,
        n1 in 2..=5usize,
        n2 in 2..=3usize,
        positive in any::<bool>(),
    ) {
        let m = generic(nt, n1, n2, positive, seed);
        let t = minimal_sufficient(&m, Side::One, Axis::Theta, EPS).unwrap();
        prop_assert!(posterior_match(&m, &t, Axis::Theta, EPS).unwrap().holds);
        let gap = mutual_information_gap(&m, &t, Axis::Theta).unwrap();
        prop_assert!(gap.gap_bits.abs() <= 1e-7);
    }

    #[test]
    fn information_gap_and_posterior_match_agree(
        seed in any::<u64>(),
        nt in 2..=3usize,
        n1 in 2..=5usize,
        n2 in 2..=3usize,
    ) {
        let m = generic(nt, n1, n2, true, seed);
        let constant = Statistic::constant(Side::One, m.x1());
        let holds = posterior_match(&m, &constant, Axis::Theta, EPS).unwrap().holds;
        let gap = mutual_information_gap(&m, &constant, Axis::Theta).unwrap();
        prop_assert_eq!(holds, gap.gap_bits <= 1e-7);

        let minimal = minimal_sufficient(&m, Side::One, Axis::Theta, EPS).unwrap();
        if minimal.class_count() > 1 {
            prop_assert!(!holds, "collapsing a discriminating sensor must lose information");
        }
    }

    #[test]
    fn sufficient_partitions_never_straddle_posterior_classes(
        seed in any::<u64>(),
        nt in 2..=3usize,
        n1 in 2..=4usize,
        n2 in 2..=3usize,
    ) {
        let m = generic(nt, n1, n2, true, seed);
        let minimal = minimal_sufficient(&m, Side::One, Axis::Theta, EPS).unwrap();
        for lv in LabelingIter::new(n1, n1).unwrap() {
            let lv: Vec<usize> = lv.iter().map(|&v| v as usize).collect();
            let t = Statistic::from_levels(Side::One, m.x1(), &lv).unwrap();
            if posterior_match(&m, &t, Axis::Theta, EPS).unwrap().holds {
                for i in 0..n1 {
                    for j in (i + 1)..n1 {
                        if lv[i] == lv[j] {
                            prop_assert_eq!(
                                minimal.apply(i),
                                minimal.apply(j),
                                "a sufficient partition merged symbols with distinct posteriors"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn descent_never_beats_exhaustive_search(
        seed in any::<u64>(),
        nt in 2..=3usize,
        n1 in 2..=4usize,
        n2 in 2..=3usize,
        positive in any::<bool>(),
    ) {
        let m = generic(nt, n1, n2, positive, seed);
        let cost = CostMatrix::zero_one(m.theta());
        let floor = exhaustive_search(&m, &cost, 2, 2, SearchDomain::Raw, None).unwrap();
        let descent = pbpo_restarts(&m, &cost, 2, 2, 6, seed, PbpoOpts::default()).unwrap();
        prop_assert!(descent.best.risk >= floor.min_risk - 1e-12);
        for w in descent.best.risk_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn statistic_search_matches_its_pullback_risk(
        seed in any::<u64>(),
        nt in 2..=3usize,
        n1 in 2..=4usize,
        n2 in 2..=4usize,
        positive in any::<bool>(),
    ) {
        let m = generic(nt, n1, n2, positive, seed);
        let cost = CostMatrix::zero_one(m.theta());
        let t1 = minimal_sufficient(&m, Side::One, Axis::Theta, EPS).unwrap();
        let t2 = minimal_sufficient(&m, Side::Two, Axis::Theta, EPS).unwrap();
        let found = exhaustive_search(
            &m,
            &cost,
            2,
            2,
            SearchDomain::Statistics(&t1, &t2),
            None,
        )
        .unwrap();
        let q1 = compose(&found.quantizer1, &t1).unwrap();
        let q2 = compose(&found.quantizer2, &t2).unwrap();
        let pulled = risk(&m, &cost, &q1, &q2, &found.estimator).unwrap();
        prop_assert!((pulled - found.min_risk).abs() <= 1e-12);
    }

    #[test]
    fn scaling_every_cost_scales_the_risk(
        seed in any::<u64>(),
        nt in 2..=3usize,
        n1 in 2..=4usize,
        n2 in 2..=3usize,
        lambda in 0.0..8.0f64,
    ) {
        let m = generic(nt, n1, n2, true, seed);
        let labels = m.theta().labels().to_vec();
        let base: Vec<Vec<f64>> = (0..nt)
            .map(|i| {
                (0..nt)
                    .map(|j| if i == j { 0.0 } else { 1.0 + ((i * 3 + j) % 4) as f64 })
                    .collect()
            })
            .collect();
        let scaled: Vec<Vec<f64>> = base
            .iter()
            .map(|row| row.iter().map(|c| lambda * c).collect())
            .collect();
        let cost = CostMatrix::new(labels.clone(), labels.clone(), &base).unwrap();
        let cost_scaled = CostMatrix::new(labels.clone(), labels, &scaled).unwrap();

        let found = exhaustive_search(&m, &cost, 2, 2, SearchDomain::Raw, None).unwrap();
        let h = bayes_estimator(&m, &cost, &found.quantizer1, &found.quantizer2).unwrap();
        let h_scaled =
            bayes_estimator(&m, &cost_scaled, &found.quantizer1, &found.quantizer2).unwrap();
        let r = risk(&m, &cost, &found.quantizer1, &found.quantizer2, &h).unwrap();
        let r_scaled = risk(
            &m,
            &cost_scaled,
            &found.quantizer1,
            &found.quantizer2,
            &h_scaled,
        )
        .unwrap();
        prop_assert!((r_scaled - lambda * r).abs() <= 1e-12 * (1.0 + lambda));
    }

    #[test]
    fn independence_checks_are_symmetric(
        seed in any::<u64>(),
        nt in 2..=3usize,
        n1 in 2..=4usize,
        n2 in 2..=4usize,
        positive in any::<bool>(),
    ) {
        let m = generic(nt, n1, n2, positive, seed);
        let ab = conditional_independence(&m, &[Axis::X1], &[Axis::X2], &[Axis::Theta], EPS)
            .unwrap();
        let ba = conditional_independence(&m, &[Axis::X2], &[Axis::X1], &[Axis::Theta], EPS)
            .unwrap();
        prop_assert_eq!(ab.max_deviation.to_bits(), ba.max_deviation.to_bits());
        prop_assert_eq!(ab.holds, ba.holds);
    }
}
