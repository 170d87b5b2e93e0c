mod common;

use ambc_core::amdd::DataRegressors;
use ambc_core::config::Constellation;
use ambc_core::crb::*;
use ambc_core::detect::Alphabet;
use ambc_core::linalg::{CMat, CVec, C64};
use ambc_core::*;
use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn qpsk_c<R: Rng>(len: usize, m: usize, power: f64, r: &mut R) -> CMat {
    let pts = Constellation::Qpsk.points(power);
    CMat::from_fn(len, m, |_, _| pts[r.random_range(0..4)])
}

#[test]
fn explicit_and_structured_routes_agree() {
    let cfg = reference();
    let plan = PilotPlan::build(&cfg).unwrap();
    let a = Alphabet::of(&cfg);
    let c = qpsk_c(50, 4, cfg.transmit_power, &mut rng(1));
    let s2 = 3e-11;
    let (e, s) = (pilot_crb_explicit(&plan, s2).unwrap(), pilot_crb(&plan, s2).unwrap());
    assert!((e - s).abs() < 1e-9 * s);
    let (e, s) = (
        semiblind_crb_explicit(&plan, &c, &a, s2).unwrap(),
        semiblind_crb(&plan, &c, &a, s2).unwrap(),
    );
    assert!((e - s).abs() < 1e-9 * s, "{e} vs {s}");
}

#[test]
fn single_antenna_bound_matches_real_regression() {
    let mut cfg = small(1, 1, 4);
    cfg.n1 = 8;
    cfg.n2 = 8;
    cfg.n3 = 8;
    let plan = PilotPlan::build(&cfg).unwrap();
    let a = stacked_a(&plan);
    let (r, c) = a.shape();
    let ar = DMatrix::from_fn(2 * r, 2 * c, |i, j| {
        let v = a[(i % r, j % c)];
        match (i < r, j < c) {
            (true, true) | (false, false) => v.re,
            (true, false) => -v.im,
            (false, true) => v.im,
        }
    });
    let s2 = 0.7;
    let oracle = s2 / 2.0 * (ar.transpose() * &ar).try_inverse().unwrap().trace();
    let got = pilot_crb_explicit(&plan, s2).unwrap();
    assert!((got - oracle).abs() < 1e-9 * oracle, "{got} vs {oracle}");
}

#[test]
fn tag_data_information_matches_monte_carlo() {
    let (m, len, draws) = (1, 4, 100_000);
    let mut r = rng(5);
    let c = qpsk_c(len, m, 1.0, &mut r);
    let tag = Constellation::Qpsk.points(1.0);
    let x = vec![C64::from(1.0); len];
    let mut acc = CMat::zeros(4 * m, 4 * m);
    for _ in 0..draws {
        let d: Vec<C64> = (0..len).map(|_| tag[r.random_range(0..4)]).collect();
        let u = &DataRegressors::new(&x, &[d], &c).u[0];
        acc += u.map(|v| v.conj()) * u.transpose();
    }
    acc /= C64::from(draws as f64);
    let want = c_check(&c);
    assert!(rel(&acc, &want) < 0.01, "{acc} vs {want}");
}

#[test]
fn no_data_gives_the_pilot_bound() {
    let cfg = reference();
    let plan = PilotPlan::build(&cfg).unwrap();
    let a = Alphabet::of(&cfg);
    let c = CMat::zeros(0, 4);
    let s2 = 1e-11;
    assert_eq!(semiblind_crb(&plan, &c, &a, s2).unwrap(), pilot_crb(&plan, s2).unwrap());
    let e = semiblind_crb_explicit(&plan, &c, &a, s2).unwrap();
    assert!((e - pilot_crb_explicit(&plan, s2).unwrap()).abs() < 1e-12 * e);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn semiblind_bound_never_exceeds_pilot_bound(len in 1usize..300, seed in 0u64..1000, log_s2 in -14.0f64..-6.0) {
        let cfg = reference();
        let plan = PilotPlan::build(&cfg).unwrap();
        let a = Alphabet::of(&cfg);
        let c = qpsk_c(len, 4, cfg.transmit_power, &mut rng(seed));
        let s2 = 10f64.powf(log_s2);
        let p = pilot_crb(&plan, s2).unwrap();
        prop_assert!(semiblind_crb(&plan, &c, &a, s2).unwrap() <= p * (1.0 + 1e-12));
    }

    #[test]
    fn bounds_scale_linearly_with_noise(log_s2 in -14.0f64..-2.0, factor in 1.5f64..100.0) {
        let cfg = reference();
        let plan = PilotPlan::build(&cfg).unwrap();
        let a = Alphabet::of(&cfg);
        let c = qpsk_c(40, 4, cfg.transmit_power, &mut rng(3));
        let s2 = 10f64.powf(log_s2);
        let ratio = pilot_crb(&plan, factor * s2).unwrap() / pilot_crb(&plan, s2).unwrap();
        prop_assert!((ratio - factor).abs() < 1e-9 * factor);
        let ratio = semiblind_crb(&plan, &c, &a, factor * s2).unwrap() / semiblind_crb(&plan, &c, &a, s2).unwrap();
        prop_assert!((ratio - factor).abs() < 1e-9 * factor);
    }
}

#[test]
fn more_data_tightens_the_semiblind_bound() {
    let cfg = reference();
    let plan = PilotPlan::build(&cfg).unwrap();
    let a = Alphabet::of(&cfg);
    let c = qpsk_c(400, 4, cfg.transmit_power, &mut rng(8));
    let b: Vec<f64> = [0, 50, 100, 200, 400]
        .iter()
        .map(|&d| semiblind_crb(&plan, &c.rows(0, d).into_owned(), &a, 1e-11).unwrap())
        .collect();
    assert!(b.windows(2).all(|w| w[1] < w[0]), "{b:?}");
}

#[test]
fn improper_constellations_are_rejected() {
    let mut cfg = reference();
    let plan = PilotPlan::build(&cfg).unwrap();
    let c = qpsk_c(10, 4, cfg.transmit_power, &mut rng(2));
    cfg.tag_constellation = Constellation::Bpsk;
    let a = Alphabet::of(&cfg);
    assert!(matches!(semiblind_crb(&plan, &c, &a, 1e-11), Err(Error::Unsupported(_))));
    assert!(matches!(semiblind_crb_explicit(&plan, &c, &a, 1e-11), Err(Error::Unsupported(_))));
    cfg.tag_constellation = Constellation::Qpsk;
    cfg.lu_constellation = Constellation::Bpsk;
    assert!(semiblind_crb(&plan, &c, &Alphabet::of(&cfg), 1e-11).is_err());
    // the pilot bound does not involve data symbols
    assert!(pilot_crb(&plan, 1e-11).is_ok());
}

#[test]
fn unidentifiable_block_is_named() {
    let mut plan = PilotPlan::build(&reference()).unwrap();
    plan.r3 = CMat::zeros(plan.n3, 4);
    for r in [pilot_crb(&plan, 1e-11), pilot_crb_explicit(&plan, 1e-11)] {
        match r {
            Err(Error::SingularFisher { block }) => assert_eq!(block, "u1"),
            other => panic!("expected singular Fisher error, got {other:?}"),
        }
    }
}

#[test]
fn pseudo_information_vanishes() {
    let mut cfg = small(1, 1, 1);
    cfg.n1 = 8;
    cfg.n2 = 8;
    cfg.n3 = 8;
    let plan = PilotPlan::build(&cfg).unwrap();
    let mut r = rng(4);
    let theta = CVec::from_fn(plan.layout.theta_len(), |_, _| C64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)));
    let (pseudo, full) = wirtinger_check(&plan, &theta, 1e-6);
    assert!(pseudo < 1e-6 * full, "{pseudo} vs {full}");
}

#[test]
fn real_fisher_has_proper_block_form() {
    let g = CMat::from_fn(3, 3, |i, j| C64::new((i + j) as f64, i as f64 - j as f64));
    let j = real_fisher(&g, 2.0);
    for a in 0..3 {
        for b in 0..3 {
            assert_eq!(j[(a, b)], j[(a + 3, b + 3)]);
            assert_eq!(j[(a, b + 3)], -j[(a + 3, b)]);
        }
    }
}
