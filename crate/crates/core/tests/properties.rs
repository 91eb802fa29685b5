use bicm_core::oracle::product_sum_identity;
use bicm_core::*;
use proptest::prelude::*;

fn shaped(m: usize, p0: Vec<f64>) -> (Constellation, BitMarginals, SymbolDistribution) {
    let marg = BitMarginals::new(p0).unwrap();
    let qam = build_qam(m).unwrap();
    let d = product_distribution(&qam, &marg).unwrap();
    (normalize(&qam, &d).unwrap(), marg, d)
}

/// Marginals with the sign bits at 1/2 and the other bits free in (0.05, 0.95).
fn symmetric_marginals(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..0.95, m).prop_map(move |mut p| {
        let k = m / 2;
        p[0] = 0.5;
        p[k] = 0.5;
        p
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gray_neighbours_differ_in_one_bit(k in 1usize..=10) {
        let code = brgc(k).unwrap();
        let n = code.len();
        for i in 0..n {
            prop_assert_eq!(code[i].distance(&code[(i + 1) % n]), 1);
            let flipped = code[i].value() ^ (1 << (k - 1));
            prop_assert_eq!(flipped, code[n - 1 - i].value());
        }
    }

    #[test]
    fn marginalizing_recovers_bit_probabilities(
        m in prop::sample::select(vec![2usize, 4, 6]),
        seed in prop::collection::vec(0.0f64..=1.0, 6),
    ) {
        let marg = BitMarginals::new(seed[..m].to_vec()).unwrap();
        let c = build_qam(m).unwrap();
        let d = product_distribution(&c, &marg).unwrap();
        prop_assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for j in 0..m {
            for b in [0u8, 1] {
                let mass: f64 = label_subset(&c, j, b).unwrap().iter().map(|&i| d.probs()[i]).sum();
                prop_assert!((mass - marg.prob(j, b)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn parameterized_inputs_normalize_cleanly(
        m in prop::sample::select(vec![2usize, 4, 6, 8]),
        scheme in prop::sample::select(vec![Scheme::Cm, Scheme::Mlc, Scheme::Bicm]),
        z in prop::collection::vec(-4.0f64..4.0, 8),
    ) {
        let map = free_parameter_map(m, scheme).unwrap();
        let params = map.from_unconstrained(&z[..map.count()]);
        let c = build_qam(m).unwrap();
        let d = map.expand(&c, &params).unwrap().symbol_distribution(&c).unwrap();
        let n = normalize(&c, &d).unwrap();
        prop_assert!((n.energy(&d) - 1.0).abs() < 1e-12);
        prop_assert!(n.mean(&d).norm() < 1e-12);
    }

    #[test]
    fn product_sum_identity_on_random_tables(
        f in prop::collection::vec(prop::array::uniform2(0.0f64..10.0), 1..=10),
    ) {
        let (lhs, rhs) = product_sum_identity(&f);
        prop_assert!((lhs - rhs).abs() <= 1e-13 * rhs.abs().max(1e-300));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ordering_chain_holds(p0 in symmetric_marginals(4), db in -5.0f64..20.0) {
        let rule = default_rule();
        let ch = ChannelSpec::from_db(db).unwrap();
        let (c, marg, d) = shaped(4, p0);
        let bicm = bicm_rate(&c, &marg, &ch, &rule).unwrap();
        let mi = mutual_information(&c, &d, &ch, &rule).unwrap();
        prop_assert!(bicm >= 0.0);
        prop_assert!(bicm <= mi + 1e-12, "{} > {}", bicm, mi);
        prop_assert!(mi <= gaussian_capacity(&ch) + 1e-12);
        for variant in [MetricVariant::Classical, MetricVariant::Normalized] {
            let g = bicm_gmi(&c, &marg, &ch, &rule, 0.8, variant).unwrap();
            prop_assert!(g <= bicm + 1e-12);
        }
    }

    #[test]
    fn rates_ignore_label_position_order(
        p0 in symmetric_marginals(4),
        perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
        db in 0.0f64..15.0,
    ) {
        let rule = default_rule();
        let ch = ChannelSpec::from_db(db).unwrap();
        let (c, marg, d) = shaped(4, p0);
        let pc = c.permute_label_positions(&perm).unwrap();
        let pm = marg.permuted(&perm).unwrap();
        let pd = product_distribution(&pc, &pm).unwrap();
        let a = bicm_rate(&c, &marg, &ch, &rule).unwrap();
        let b = bicm_rate(&pc, &pm, &ch, &rule).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        let a = mutual_information(&c, &d, &ch, &rule).unwrap();
        let b = mutual_information(&pc, &pd, &ch, &rule).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        let a = bicm_gmi(&c, &marg, &ch, &rule, 0.6, MetricVariant::Classical).unwrap();
        let b = bicm_gmi(&pc, &pm, &ch, &rule, 0.6, MetricVariant::Classical).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn gallager_functions_are_concave_in_rho(
        p0 in symmetric_marginals(4),
        db in 0.0f64..14.0,
        rho in 0.05f64..0.95,
        s in 0.2f64..3.0,
    ) {
        let rule = default_rule();
        let ch = ChannelSpec::from_db(db).unwrap();
        let (c, marg, d) = shaped(4, p0);
        let h = 0.05;
        let gs = [
            GallagerFunction::cm(&c, &d, &ch, &rule).unwrap(),
            GallagerFunction::bicm(&c, &marg, &ch, &rule, MetricVariant::Classical).unwrap(),
            GallagerFunction::bicm(&c, &marg, &ch, &rule, MetricVariant::Normalized).unwrap(),
            GallagerFunction::parallel(&c, &marg, &ch, &rule).unwrap(),
        ];
        for g in &gs {
            let e = |r: f64| g.e0(r, s).unwrap();
            let second = e(rho - h) - 2.0 * e(rho) + e(rho + h);
            prop_assert!(second <= 1e-8, "{:?}: {}", g.scheme(), second);
            if !g.is_mismatched() {
                prop_assert!(e(rho) >= 0.0);
            }
        }
    }
}
