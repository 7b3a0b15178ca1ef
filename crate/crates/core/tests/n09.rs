use orthokey::adversary::{AttackKind, AttackStrategy, BasisPolicy};
use orthokey::n09::{
    counts_by_pair, n09_qber, run_n09_batch, security_report, sift_n09, Angle, N09Config, N09Error, Outcome,
    SecurityOptions, ANGLE_PAIRS,
};

fn sigma(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[test]
fn ideal_branching_for_every_pair() {
    let n = 40_000;
    for (k, &(a, b)) in ANGLE_PAIRS.iter().enumerate() {
        let r = run_n09_batch(&N09Config::ideal(), n, 10 + k as u64, Some((a, b)), None).unwrap();
        let c = counts_by_pair(&r)[k];
        assert_eq!(c.rounds, n);
        let (p0, p1, p2) = if a == b { (1.0, 0.0, 0.0) } else { (0.25, 0.25, 0.5) };
        for (count, p) in [(c.d0, p0), (c.d1, p1), (c.d2, p2)] {
            let f = count as f64 / n as f64;
            assert!((f - p).abs() <= 4.0 * sigma(p, n), "{a:?},{b:?}: {f} vs {p}");
        }
        assert_eq!(c.none, 0);
    }
}

#[test]
fn key_rounds_never_send_the_photon_back() {
    let r = run_n09_batch(&N09Config::ideal(), 20_000, 4, None, None).unwrap();
    let mut keyed = 0;
    for round in &r {
        if round.key_bit.is_some() {
            keyed += 1;
            assert!(!round.interfering());
            assert!(round.channel_return_weight < 1e-24);
            assert_eq!(round.alice_bit(), round.bob_bit());
        }
        if round.interfering() {
            assert!((round.channel_return_weight - 0.5).abs() < 1e-12);
        }
    }
    assert!(keyed > 0);
    let s = sift_n09(&r);
    assert_eq!(s.errors(), 0);
    assert_eq!(s.indices.len(), keyed);
}

#[test]
fn polarizer_check_rejects_flipped_clicks() {
    let flipped = N09Config {
        wrong_polarization_prob: 1.0,
        ..N09Config::ideal()
    };
    let r = run_n09_batch(&flipped, 5000, 2, None, None).unwrap();
    assert!(r.iter().any(|x| x.outcome == Outcome::D1));
    assert!(r.iter().all(|x| x.key_bit.is_none()));

    let unchecked = N09Config {
        polarizer_check: false,
        ..flipped
    };
    let r = run_n09_batch(&unchecked, 5000, 2, None, None).unwrap();
    for x in r.iter().filter(|x| x.outcome == Outcome::D1) {
        assert!(x.key_bit.is_some());
        assert_eq!(x.d1_polarization_ok, None);
    }
}

#[test]
fn intercept_resend_qber_follows_branch_count() {
    // Eve probes the channel arm and resends what she measured. Whether or
    // not she finds the photon, interference is gone and D1 fires half the
    // time in equal-angle rounds; complementary rounds keep D1 at 1/4.
    // QBER(r) = (r/2) / (r/2 + 1/4).
    let n = 200_000;
    for r in [0.5, 1.0] {
        let attack = AttackStrategy::new(
            AttackKind::InterceptResend {
                basis: BasisPolicy::Rectilinear,
            },
            r,
            21,
        );
        let rounds = run_n09_batch(&N09Config::ideal(), n, 5, None, Some(&attack)).unwrap();
        let q = n09_qber(&rounds).unwrap().raw;
        let expected = (r / 2.0) / (r / 2.0 + 0.25);
        assert!(q.within_sigma(expected, 4.0), "r={r}: {q} vs {expected}");
    }
}

#[test]
fn time_shift_scales_d1() {
    let n = 100_000;
    let attack = AttackStrategy::new(AttackKind::TimeShift { eta_shift: [1.0, 0.5, 1.0] }, 1.0, 1);
    let plain = run_n09_batch(&N09Config::ideal(), n, 8, None, None).unwrap();
    let shifted = run_n09_batch(&N09Config::ideal(), n, 8, None, Some(&attack)).unwrap();
    let k0 = sift_n09(&plain).indices.len() as f64;
    let k1 = sift_n09(&shifted).indices.len() as f64;
    let expected = n as f64 / 16.0;
    assert!((k1 - expected).abs() < 4.0 * (expected * (1.0 - 1.0 / 16.0)).sqrt(), "{k1} vs {expected}");
    assert!(k1 < k0);
}

#[test]
fn store_and_forward_is_not_an_n09_attack() {
    let attack = AttackStrategy::new(AttackKind::GvStoreAndForward { hold_bins: 1 }, 1.0, 1);
    assert!(matches!(
        run_n09_batch(&N09Config::ideal(), 10, 1, None, Some(&attack)),
        Err(N09Error::UnsupportedAttack)
    ));
}

#[test]
fn noisy_preset_is_secure_and_attack_erodes_margin() {
    let cfg = N09Config::paper_noise();
    let r = run_n09_batch(&cfg, 200_000, 12, None, None).unwrap();
    let honest = security_report(&r, &cfg, SecurityOptions::default()).unwrap();
    assert!(honest.secure());
    assert!(honest.m_ts.value < honest.m_ir.value);

    let attack = AttackStrategy::new(
        AttackKind::InterceptResend {
            basis: BasisPolicy::Random,
        },
        0.3,
        2,
    );
    let r = run_n09_batch(&cfg, 200_000, 12, None, Some(&attack)).unwrap();
    let attacked = security_report(&r, &cfg, SecurityOptions::default()).unwrap();
    assert!(attacked.qber.value > honest.qber.value);
    assert!(attacked.m_ir.value < honest.m_ir.value);

    let forced = security_report(
        &r,
        &cfg,
        SecurityOptions {
            gamma: Some(0.0),
            eta: Some(1.0),
        },
    )
    .unwrap();
    assert_eq!(forced.m_ts.value, forced.m_ir.value);
}

#[test]
fn dark_subtraction_never_raises_qber() {
    for seed in 0..4 {
        let r = run_n09_batch(&N09Config::paper_noise(), 30_000, seed, None, None).unwrap();
        let q = n09_qber(&r).unwrap();
        assert!(q.corrected.unwrap().value <= q.raw.value);
    }
}

#[test]
fn angles_parse_from_radians() {
    assert_eq!(Angle::from_radians(0.0).unwrap(), Angle::Zero);
    assert_eq!(Angle::from_radians(std::f64::consts::FRAC_PI_2).unwrap(), Angle::HalfPi);
    assert!(Angle::from_radians(1.0).is_err());
}
