use bicm_core::oracle::*;
use bicm_core::*;

fn setup(m: usize, marg: &BitMarginals) -> (Constellation, SymbolDistribution) {
    let qam = build_qam(m).unwrap();
    let d = product_distribution(&qam, marg).unwrap();
    (normalize(&qam, &d).unwrap(), d)
}

#[test]
fn zero_snr_information_is_zero() {
    let marg = BitMarginals::uniform(4);
    let (c, d) = setup(4, &marg);
    let ch = ChannelSpec::new(0.0).unwrap();
    let est = mc_mutual_information(&c, &d, &ch, 3, 100_000).unwrap();
    assert!(est.agrees(0.0, 3.0), "{est:?}");
}

#[test]
fn standard_error_halves_with_four_times_the_samples() {
    let marg = BitMarginals::uniform(2);
    let (c, d) = setup(2, &marg);
    let ch = ChannelSpec::from_db(5.0).unwrap();
    let a = mc_mutual_information(&c, &d, &ch, 5, 200_000).unwrap();
    let b = mc_mutual_information(&c, &d, &ch, 5, 800_000).unwrap();
    let ratio = a.std_error / b.std_error;
    assert!((ratio - 2.0).abs() < 0.4, "{ratio}");
    let c2 = mc_mutual_information(&c, &d, &ch, 5, 400_000).unwrap();
    let ratio = a.std_error / c2.std_error;
    assert!((ratio - 2f64.sqrt()).abs() < 0.2 * 2f64.sqrt(), "{ratio}");
}

#[test]
fn estimates_are_reproducible() {
    let marg = BitMarginals::new(vec![0.5, 0.3, 0.5, 0.3]).unwrap();
    let (c, _) = setup(4, &marg);
    let ch = ChannelSpec::from_db(6.0).unwrap();
    let a = mc_gmi(&c, &marg, &ch, 0.8, MetricVariant::Classical, 9, 50_000).unwrap();
    let b = mc_gmi(&c, &marg, &ch, 0.8, MetricVariant::Classical, 9, 50_000).unwrap();
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    let other = mc_gmi(&c, &marg, &ch, 0.8, MetricVariant::Classical, 10, 50_000).unwrap();
    assert_ne!(a.mean.to_bits(), other.mean.to_bits());
}

#[test]
fn gallager_estimates_at_rho_zero_vanish() {
    let marg = BitMarginals::uniform(4);
    let (c, _) = setup(4, &marg);
    let ch = ChannelSpec::from_db(6.0).unwrap();
    let input = Shaping::Bits(marg);
    for scheme in [McScheme::Cm, McScheme::Bicm(MetricVariant::Classical)] {
        let est = mc_e0(&c, &input, &ch, scheme, 0.0, 0.5, 1, 20_000).unwrap();
        assert_eq!(est.mean, 0.0);
    }
}

#[test]
fn uniform_bicm_gallager_matches_quadrature() {
    let rule = default_rule();
    let marg = BitMarginals::uniform(4);
    let (c, _) = setup(4, &marg);
    let ch = ChannelSpec::from_db(8.0).unwrap();
    let value = e0_bicm(&c, &marg, &ch, &rule, 1.0, 0.5, MetricVariant::Classical).unwrap();
    let input = Shaping::Bits(marg.clone());
    let (est, ok) = agrees_with_rerun(value, 3.0, 21, 1_000_000, |seed, n| {
        mc_e0(&c, &input, &ch, McScheme::Bicm(MetricVariant::Classical), 1.0, 0.5, seed, n)
    })
    .unwrap();
    assert!(ok, "{value} vs {est:?}");
}

#[test]
fn discrete_suite_identities() {
    let report = exhaustive_discrete_check().unwrap();
    assert!(report.max_identity_error <= IDENTITY_TOL);
    let noiseless = DiscreteChannel::noiseless();
    let uniform = [0.5, 0.5];
    let shaped = [0.7, 0.5];
    for p in [&uniform[..], &shaped[..]] {
        let h = noiseless.entropy(p);
        assert!((noiseless.mutual_information(p) - h).abs() < 1e-15);
        let gmi = noiseless.gmi_bitwise(p, 1.0, MetricVariant::Normalized);
        assert!((gmi - h).abs() < 1e-15);
    }
    let toy = DiscreteChannel::quantized_pam4(0.8);
    let gap = toy.bit_mutual_information(&shaped) - toy.gmi_bitwise(&shaped, 1.0, MetricVariant::Classical);
    assert!(gap > 0.0);
    assert!(toy.gmi_bitwise(&uniform, 1.0, MetricVariant::Classical) - toy.bit_mutual_information(&uniform) < 1e-15);
}
