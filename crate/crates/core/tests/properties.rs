use proptest::prelude::*;
use riskdiff::oracle::{oracle_rmle, oracle_tail};
use riskdiff::{
    admissible_p_t, barnard_check, ci_ec, ci_mn_with, conditional_size, critical_region, enumerate_space, joint_pmf,
    p_asy, p_cz_with, p_exact, p_exact_with, p_l_with, restricted_mle, std_normal_cdf, std_normal_quantile, tail_prob,
    z_ec, Margin, Method, NullPoint, ObservedTable, Orientation, SearchConfig, Statistic, StatisticKind, TrialDesign,
};

fn table_in(max_n: u32) -> impl Strategy<Value = (ObservedTable, TrialDesign)> {
    (1..=max_n, 1..=max_n).prop_flat_map(|(n_t, n_c)| {
        (0..=n_t, 0..=n_c).prop_map(move |(x_t, x_c)| (ObservedTable::new(x_t, x_c), TrialDesign::new(n_t, n_c).unwrap()))
    })
}

fn coarse() -> SearchConfig {
    SearchConfig { pt_points: 201, delta_step: 0.01, ..SearchConfig::default() }
}

proptest! {
    #[test]
    fn restricted_mle_agrees_with_oracle((t, d) in table_in(60), c in -0.999f64..0.999) {
        let a = restricted_mle(t, d, c).unwrap();
        let b = oracle_rmle(t, d, c).unwrap();
        prop_assert!((a.p_t - b.p_t).abs() < 1e-6, "{a:?} vs {b:?}");
        let (lo, hi) = admissible_p_t(c);
        prop_assert!(a.p_t >= lo && a.p_t <= hi);
        prop_assert!((a.p_t - a.p_c - c).abs() < 1e-12);
    }

    #[test]
    fn normal_quantile_inverts_cdf(z in -7.5f64..2.0) {
        let back = std_normal_quantile(std_normal_cdf(z)).unwrap().value();
        prop_assert!((back - z).abs() < 1e-7 * (1.0 + z.abs()), "{z} -> {back}");
    }

    #[test]
    fn table_probabilities_sum_to_one(n_t in 1u32..15, n_c in 1u32..15, p_t in 0.0f64..1.0, delta in -1.0f64..1.0) {
        let (lo, hi) = admissible_p_t(delta);
        let p_t = lo + (hi - lo) * p_t;
        let d = TrialDesign::new(n_t, n_c).unwrap();
        let point = NullPoint::new(p_t, delta).unwrap();
        let total: f64 = enumerate_space(d).unwrap().into_iter().map(|t| joint_pmf(t, d, point).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tail_matches_brute_force((t, d) in table_in(8), delta in -0.99f64..0.99, u in 0.0f64..1.0, shift in -0.2f64..0.2) {
        let (lo, hi) = admissible_p_t(delta);
        let p_t = lo + (hi - lo) * u;
        let stat = Statistic::delta_projected(shift);
        let s_obs = stat.eval(t, d);
        let fast = tail_prob(d, delta, p_t, s_obs, stat, Orientation::Upper).unwrap();
        let slow = oracle_tail(d, NullPoint::new(p_t, delta).unwrap(), |x| stat.eval(x, d), s_obs, true).unwrap();
        prop_assert!((fast - slow).abs() < 1e-12);
    }

    #[test]
    fn score_satisfies_barnard(n_t in 1u32..25, n_c in 1u32..25, delta0 in 0.0f64..0.5) {
        let d = TrialDesign::new(n_t, n_c).unwrap();
        let v = barnard_check(StatisticKind::DeltaProjected, d, Margin::new(delta0).unwrap()).unwrap();
        prop_assert!(v.is_empty(), "{v:?}");
    }

    #[test]
    fn mn_interval_is_consistent_with_its_test((t, d) in table_in(30), delta0 in 0.0f64..0.3, alpha in 0.01f64..0.5) {
        let m = Margin::new(delta0).unwrap();
        let iv = ci_mn_with(t, d, alpha, Some(m)).unwrap();
        prop_assert!(iv.lower <= iv.upper);
        let p = p_asy(t, d, m).unwrap();
        if (p - alpha / 2.0).abs() > 1e-6 {
            prop_assert_eq!(iv.lower > -delta0, p <= alpha / 2.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn chan_zhang_dominates_exact((t, d) in table_in(7), delta0 in 0.0f64..0.3) {
        let m = Margin::new(delta0).unwrap();
        let cfg = coarse();
        let exact = p_exact_with(t, d, m, &cfg).unwrap().value;
        let cz = p_cz_with(t, d, m, &cfg).unwrap();
        prop_assert!(cz.value >= exact - 1e-9, "cz {} < exact {exact}", cz.value);
        prop_assert!(cz.argmax_delta <= -delta0 + 1e-12);
    }

    #[test]
    fn chan_zhang_is_the_running_maximum((t, d) in table_in(6), delta0 in 0.0f64..0.3) {
        let m = Margin::new(delta0).unwrap();
        let cfg = coarse();
        let cz = p_cz_with(t, d, m, &cfg).unwrap().value;
        let mut delta = -1.0;
        while delta <= -delta0 {
            let p_l = p_l_with(t, d, delta, &cfg).unwrap().value;
            prop_assert!(p_l <= cz + 1e-9, "p_l({delta}) = {p_l} > {cz}");
            delta += 0.05;
        }
        let boundary = p_l_with(t, d, -delta0, &cfg).unwrap().value;
        prop_assert!(boundary <= cz + 1e-9);
    }

    #[test]
    fn corrected_score_hits_the_exact_probit((t, d) in table_in(10), delta0 in 0.0f64..0.3) {
        let m = Margin::new(delta0).unwrap();
        let p = p_exact(t, d, m).unwrap().value;
        prop_assume!(p > 1e-6 && p < 1.0 - 1e-6);
        let z = z_ec(t, d, m, delta0).unwrap();
        let target = std_normal_quantile(1.0 - p).unwrap().value();
        prop_assert!((z - target).abs() < 1e-9, "{z} vs {target}");
    }

    #[test]
    fn ec_interval_is_consistent_with_exact_test((t, d) in table_in(10), delta0 in 0.0f64..0.3) {
        let m = Margin::new(delta0).unwrap();
        let iv = ci_ec(t, d, m, 0.05).unwrap();
        let p = p_exact(t, d, m).unwrap().value;
        prop_assert!(iv.lower <= iv.upper);
        if (p - 0.025).abs() > 1e-6 {
            prop_assert_eq!(iv.lower > -delta0, p <= 0.025);
        }
    }

    #[test]
    fn rejection_probability_is_a_probability(n_t in 1u32..8, n_c in 1u32..8, delta0 in 0.0f64..0.3, u in 0.0f64..1.0, delta in -1.0f64..1.0) {
        let d = TrialDesign::new(n_t, n_c).unwrap();
        let m = Margin::new(delta0).unwrap();
        let region = critical_region(d, m, 0.1, Method::Mn).unwrap();
        let (lo, hi) = admissible_p_t(delta);
        let size = conditional_size(&region, NullPoint::new(lo + (hi - lo) * u, delta).unwrap()).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&size));
    }
}
