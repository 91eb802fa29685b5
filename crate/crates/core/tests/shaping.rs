use bicm_core::constellation::PARAM_EPS;
use bicm_core::*;

fn uniform_rates(m: usize, ch: &ChannelSpec, rule: &QuadratureRule) -> (f64, f64) {
    let marg = BitMarginals::uniform(m);
    let qam = build_qam(m).unwrap();
    let d = product_distribution(&qam, &marg).unwrap();
    let c = normalize(&qam, &d).unwrap();
    (
        mutual_information(&c, &d, ch, rule).unwrap(),
        bicm_rate(&c, &marg, ch, rule).unwrap(),
    )
}

#[test]
fn shaped_sixteen_qam_beats_uniform_at_moderate_snr() {
    let rule = default_rule();
    let ch = ChannelSpec::from_db(8.0).unwrap();
    let (cm_u, bicm_u) = uniform_rates(4, &ch, &rule);
    let cm = optimize_cm(4, &ch, &rule).unwrap();
    let mlc = optimize_mlc(4, &ch, &rule).unwrap();
    let bicm = optimize_bicm(4, &ch, &rule).unwrap();
    assert!(cm.rate_nats > cm_u + 1e-4);
    assert!(bicm.rate_nats > bicm_u + 1e-4);
    assert!((cm.rate_nats - mlc.rate_nats).abs() < 1e-6);
    assert!(bicm.rate_nats <= mlc.rate_nats && mlc.rate_nats - bicm.rate_nats < 1e-2);

    let problem = ShapingProblem::new(Scheme::Cm, 4, &ch, &rule).unwrap();
    let scan = (0..=2000)
        .map(|i| {
            let p = PARAM_EPS + (1.0 - 2.0 * PARAM_EPS) * i as f64 / 2000.0;
            problem.evaluate(&[p]).unwrap()
        })
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(cm.rate_nats >= scan - 1e-9);
    assert!(cm.diagnostics.golden_checked);
}

#[test]
fn low_snr_optimum_tracks_the_gaussian_capacity() {
    let rule = default_rule();
    let ch = ChannelSpec::new(1e-3).unwrap();
    let cm = optimize_cm(4, &ch, &rule).unwrap();
    assert!((cm.rate_nats / gaussian_capacity(&ch) - 1.0).abs() < 1e-9);
    let problem = ShapingProblem::new(Scheme::Cm, 4, &ch, &rule).unwrap();
    let scan = (0..=1000)
        .map(|i| problem.evaluate(&[PARAM_EPS + (1.0 - 2.0 * PARAM_EPS) * i as f64 / 1000.0]).unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(cm.rate_nats >= scan - 1e-15);
    // both extreme pairs collapse to QPSK, which the interior optimum beats
    let qpsk = problem.evaluate(&[1.0 - PARAM_EPS]).unwrap();
    assert!(cm.rate_nats > qpsk);
    assert!(cm.params[0] > 0.05 && cm.params[0] < 0.2, "{:?}", cm.params);
}

#[test]
fn sixty_four_qam_multilevel_optimum_beats_grid() {
    let rule = panel_rule(32).unwrap();
    let ch = ChannelSpec::from_db(8.0).unwrap();
    let (cm_u, _) = uniform_rates(6, &ch, &rule);
    let mlc = optimize_mlc(6, &ch, &rule).unwrap();
    assert!(mlc.rate_nats >= cm_u);
    let problem = ShapingProblem::new(Scheme::Mlc, 6, &ch, &rule).unwrap();
    let n = 200;
    let mut scan = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..n {
            let p = [(i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64];
            scan = scan.max(problem.evaluate(&p).unwrap());
        }
    }
    assert!(mlc.rate_nats >= scan - 1e-6, "{} vs {scan}", mlc.rate_nats);
}

#[test]
fn optimized_rates_grow_with_snr_and_keep_their_order() {
    let rule = default_rule();
    let mut last = [0.0; 3];
    for db in (0..=20).step_by(2) {
        let ch = ChannelSpec::from_db(db as f64).unwrap();
        let now = [
            optimize_bicm(4, &ch, &rule).unwrap().rate_nats,
            optimize_mlc(4, &ch, &rule).unwrap().rate_nats,
            optimize_cm(4, &ch, &rule).unwrap().rate_nats,
        ];
        let (_, bicm_u) = uniform_rates(4, &ch, &rule);
        assert!(now[0] >= bicm_u - 1e-12);
        assert!(now[0] <= now[1] + 1e-12 && now[1] <= now[2] + 1e-12);
        assert!(now[2] <= gaussian_capacity(&ch));
        for k in 0..3 {
            assert!(now[k] >= last[k], "{db} dB");
        }
        last = now;
    }
}

#[test]
fn qpsk_all_schemes_coincide() {
    let rule = default_rule();
    let ch = ChannelSpec::from_db(3.0).unwrap();
    let (cm_u, bicm_u) = uniform_rates(2, &ch, &rule);
    for scheme in [Scheme::Cm, Scheme::Mlc, Scheme::Bicm] {
        let r = optimize(scheme, 2, &ch, &rule).unwrap();
        assert!(r.params.is_empty());
        assert!((r.rate_nats - cm_u).abs() < 1e-12);
    }
    assert!((cm_u - bicm_u).abs() < 1e-10);
}
