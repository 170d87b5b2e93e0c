mod common;

use ambc_core::linalg::{hstack, kron, CMat};
use ambc_core::pilot_est::{estimate_phase1, estimate_phase2, estimate_phase3};
use ambc_core::*;
use common::*;

#[test]
fn noiseless_pilots_recover_every_block() {
    for (m, k) in [(4, 2), (1, 1), (3, 3)] {
        let cfg = noiseless(if (m, k) == (4, 2) { reference() } else { small(m, k, 10) });
        let sc = scenario(&cfg, 7);
        let est = pilot_estimate(&sc.sig, &sc.plan).unwrap();
        assert_eq!(est.kind, EstimatorKind::Pilot);
        assert!(rel(&est.channels.theta, &sc.truth.theta) < 1e-9, "M={m} K={k}");
    }
}

#[test]
fn phases_use_only_their_own_blocks() {
    // Corrupting phase 3 must leave the phase-1 and phase-2 outputs untouched.
    let sc = scenario(&reference(), 3);
    let (h, q) = estimate_phase1(&sc.sig.y1, &sc.plan).unwrap();
    let v = estimate_phase2(&sc.sig.y2, &h, &sc.plan).unwrap();
    let mut bad = sc.sig.clone();
    bad.y3[0][1] *= ambc_core::linalg::C64::new(3.0, 1.0);
    let est = pilot_estimate(&bad, &sc.plan).unwrap().channels;
    assert_eq!(est.h(), h);
    assert_eq!(est.q(), q);
    for (kk, vk) in v.iter().enumerate() {
        assert_eq!(&est.v(kk), vk);
    }
    let u_bad = estimate_phase3(&bad.y3, &q, &sc.plan).unwrap();
    assert_eq!(est.u(0), u_bad[0]);
}

#[test]
fn phase1_error_matches_ls_covariance() {
    let cfg = reference();
    let plan = PilotPlan::build(&cfg).unwrap();
    let m = cfg.antennas;
    let a1 = kron(&hstack(&[&plan.s1_pair(), &plan.r_tilde()]), &CMat::identity(m, m));
    let cov = (a1.adjoint() * &a1).try_inverse().unwrap();
    let tr = |lo: usize, n: usize| (lo..lo + n).map(|i| cov[(i, i)].re).sum::<f64>();
    let (tr_h, tr_q) = (tr(0, 2 * m), tr(2 * m, 2 * m * m));

    let trials = 100;
    let (mut eh, mut eq, mut ph, mut pq) = (0.0, 0.0, 0.0, 0.0);
    for t in 0..trials {
        let sc = scenario(&cfg, 1000 + t);
        let (h, q) = estimate_phase1(&sc.sig.y1, &sc.plan).unwrap();
        eh += (h - sc.truth.h()).norm_squared();
        eq += (q - sc.truth.q()).norm_squared();
        ph += sc.sigma2 * tr_h;
        pq += sc.sigma2 * tr_q;
    }
    assert!((eh / ph - 1.0).abs() < 0.10, "h: measured/predicted = {}", eh / ph);
    assert!((eq / pq - 1.0).abs() < 0.10, "q: measured/predicted = {}", eq / pq);
}

#[test]
fn pilot_mse_is_not_below_its_bound() {
    let mut cfg = reference();
    let plan = PilotPlan::build(&cfg).unwrap();
    for dbm in [-5.0, 10.0, 20.0] {
        cfg.transmit_power = ambc_core::config::dbm_to_watts(dbm);
        let plan_p = PilotPlan::build(&cfg).unwrap();
        let (mut mse, mut bound) = (0.0, 0.0);
        for t in 0..60 {
            let sc = scenario(&cfg, 50 + t);
            mse += pilot_estimate(&sc.sig, &sc.plan).unwrap().channels.sq_error(&sc.truth);
            bound += ambc_core::crb::pilot_crb(&plan_p, sc.sigma2).unwrap();
        }
        assert!(mse >= 0.9 * bound, "{dbm} dBm: mse {mse} bound {bound}");
    }
    assert_eq!(plan.total_slots(), 112);
}

#[test]
fn mismatched_observation_is_a_dimension_error() {
    let sc = scenario(&reference(), 1);
    let short = sc.sig.y1.columns(0, 10).into_owned();
    assert!(matches!(estimate_phase1(&short, &sc.plan), Err(Error::Dimension(_))));
}
