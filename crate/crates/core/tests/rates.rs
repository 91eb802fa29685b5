use bicm_core::oracle::{agrees_with_rerun, mc_bit_mutual_information, mc_mutual_information};
use bicm_core::*;

fn setup(m: usize, marg: &BitMarginals) -> (Constellation, SymbolDistribution) {
    let qam = build_qam(m).unwrap();
    let d = product_distribution(&qam, marg).unwrap();
    (normalize(&qam, &d).unwrap(), d)
}

fn amplitude_shaped(m: usize, p: f64) -> BitMarginals {
    let k = m / 2;
    BitMarginals::new((0..m).map(|j| if j % k == 0 { 0.5 } else { p }).collect()).unwrap()
}

#[test]
fn quadrature_converges_on_every_rate_integrand() {
    let coarse = panel_rule(64).unwrap();
    let fine = panel_rule(128).unwrap();
    let mut worst: f64 = 0.0;
    for m in [2, 4, 6] {
        for marg in [BitMarginals::uniform(m), amplitude_shaped(m, 0.3)] {
            let (c, d) = setup(m, &marg);
            for db in (0..=20).step_by(2) {
                let ch = ChannelSpec::from_db(db as f64).unwrap();
                let pairs = [
                    (
                        mutual_information(&c, &d, &ch, &coarse).unwrap(),
                        mutual_information(&c, &d, &ch, &fine).unwrap(),
                    ),
                    (
                        bicm_rate(&c, &marg, &ch, &coarse).unwrap(),
                        bicm_rate(&c, &marg, &ch, &fine).unwrap(),
                    ),
                    (
                        bicm_gmi(&c, &marg, &ch, &coarse, 0.7, MetricVariant::Classical).unwrap(),
                        bicm_gmi(&c, &marg, &ch, &fine, 0.7, MetricVariant::Classical).unwrap(),
                    ),
                ];
                for (a, b) in pairs {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    assert!(worst < 1e-9, "{worst:e}");
}

#[test]
fn qpsk_bits_are_one_dimensional_bpsk() {
    let rule = default_rule();
    let marg = BitMarginals::uniform(2);
    let (c, d) = setup(2, &marg);
    let bpsk = Constellation::from_points(
        vec![(-1.0).into(), 1.0.into()],
        vec![Label::new(0, 1), Label::new(1, 1)],
    )
    .unwrap();
    let half = SymbolDistribution::uniform(2);
    for db in [-3.0, 0.0, 5.0, 10.0] {
        let ch = ChannelSpec::from_db(db).unwrap();
        // each QPSK axis carries half the symbol energy
        let axis = ChannelSpec::new(ch.snr() / 2.0).unwrap();
        let reference = mutual_information(&bpsk, &half, &axis, &rule).unwrap();
        for j in 0..2 {
            let v = bit_level_mi(&c, &marg, &ch, &rule, j).unwrap();
            assert!((v - reference).abs() < 1e-12, "{db} dB bit {j}: {v} vs {reference}");
        }
        let mi = mutual_information(&c, &d, &ch, &rule).unwrap();
        assert!((bicm_rate(&c, &marg, &ch, &rule).unwrap() - mi).abs() < 1e-10);
    }
}

#[test]
fn bit_rates_stay_below_bit_entropy() {
    let rule = default_rule();
    let marg = BitMarginals::new(vec![0.5, 0.2, 0.5, 0.65]).unwrap();
    let (c, _) = setup(4, &marg);
    for db in [0.0, 10.0, 30.0] {
        let ch = ChannelSpec::from_db(db).unwrap();
        for j in 0..4 {
            let v = bit_level_mi(&c, &marg, &ch, &rule, j).unwrap();
            assert!(v >= 0.0 && v <= marg.entropy(j) + 1e-12, "{db} dB bit {j}: {v}");
        }
    }
}

#[test]
fn classical_gmi_profile_is_concave_and_below_the_bit_rate() {
    let rule = default_rule();
    let marg = amplitude_shaped(4, 0.3);
    let (c, _) = setup(4, &marg);
    let ch = ChannelSpec::from_db(8.0).unwrap();
    let grid: Vec<f64> = (0..=30).map(|i| (0.1f64.ln() + i as f64 * (10f64.ln() - 0.1f64.ln()) / 30.0).exp()).collect();
    let values: Vec<f64> = grid
        .iter()
        .map(|&s| bicm_gmi(&c, &marg, &ch, &rule, s, MetricVariant::Classical).unwrap())
        .collect();
    let changes = values
        .windows(3)
        .filter(|w| (w[1] - w[0]).signum() != (w[2] - w[1]).signum())
        .count();
    assert!(changes <= 1);
    let sup = gmi_sup_s(&c, &marg, &ch, &rule, MetricVariant::Classical).unwrap();
    let rate = bicm_rate(&c, &marg, &ch, &rule).unwrap();
    assert!(sup.concave);
    assert!(sup.gmi <= rate);
    assert!(values.iter().all(|&v| v <= sup.gmi + 1e-12));
}

#[test]
fn uniform_bits_peak_at_unit_s_for_both_metrics() {
    let rule = default_rule();
    let marg = BitMarginals::uniform(4);
    let (c, _) = setup(4, &marg);
    let ch = ChannelSpec::from_db(6.0).unwrap();
    for variant in [MetricVariant::Classical, MetricVariant::Normalized] {
        let sup = gmi_sup_s(&c, &marg, &ch, &rule, variant).unwrap();
        assert!((sup.s - 1.0).abs() < 1e-3, "{variant:?}: {}", sup.s);
    }
}

#[test]
fn sixteen_qam_bit_rates_match_monte_carlo() {
    let rule = default_rule();
    let marg = BitMarginals::uniform(4);
    let (c, d) = setup(4, &marg);
    let ch = ChannelSpec::from_db(8.0).unwrap();
    let mi = mutual_information(&c, &d, &ch, &rule).unwrap();
    let (est, ok) = agrees_with_rerun(mi, 3.0, 11, 10_000_000, |seed, n| {
        mc_mutual_information(&c, &d, &ch, seed, n)
    })
    .unwrap();
    assert!(ok, "{mi} vs {est:?}");

    let rate = bicm_rate(&c, &marg, &ch, &rule).unwrap();
    assert!(rate < mi);
    let amplitude = bit_level_mi(&c, &marg, &ch, &rule, 1).unwrap();
    let (est, ok) = agrees_with_rerun(amplitude, 3.0, 12, 1_000_000, |seed, n| {
        mc_bit_mutual_information(&c, &marg, &ch, 1, seed, n)
    })
    .unwrap();
    assert!(ok, "{amplitude} vs {est:?}");
}
