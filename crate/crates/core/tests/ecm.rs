mod common;

use ambc_core::amdd::{amdd_sweep, AmddInputs, DataRegressors};
use ambc_core::detect::Alphabet;
use ambc_core::ecm::*;
use ambc_core::linalg::{CMat, CVec, C64};
use ambc_core::*;
use common::*;
use proptest::prelude::*;
use rand::Rng;

/// Direct evaluation of the normalised Gaussian kernel over all hypotheses.
fn brute_posterior(z: &CMat, c: &CMat, est: &EffectiveChannels, a: &Alphabet, s2: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for n in 0..z.ncols() {
        let cn: Vec<C64> = c.row(n).iter().copied().collect();
        let k: Vec<f64> = (0..a.hypotheses())
            .map(|h| {
                let (l, r) = a.decode(h);
                let t: Vec<C64> = r.iter().map(|&i| a.tag[i]).collect();
                (-(z.column(n) - est.response(a.lu[l], &cn, &t)).norm_squared() / s2).exp()
            })
            .collect();
        let total: f64 = k.iter().sum();
        out.extend(k.iter().map(|v| v / total));
    }
    out
}

fn unit_scale_block(m: usize, k: usize, len: usize, seed: u64) -> (EffectiveChannels, Alphabet, CMat, CMat) {
    let mut r = rng(seed);
    let est = random_channels(Layout::new(m, k), &mut r);
    let a = Alphabet::from_constellations(config::Constellation::Qpsk, config::Constellation::Qpsk, 1.0, k);
    let z = random_cmat(m, len, 3.0, &mut r);
    let c = CMat::from_fn(len, m, |_, _| a.lu[r.random_range(0..4)]);
    (est, a, z, c)
}

#[test]
fn posteriors_match_direct_kernel() {
    let (est, a, z, c) = unit_scale_block(2, 1, 6, 1);
    let post = compute_posteriors(&z, &c, &est, &a, 4.0);
    let want = brute_posterior(&z, &c, &est, &a, 4.0);
    for (p, q) in post.probs.iter().zip(&want) {
        assert!((p - q).abs() < 1e-12);
    }
}

#[test]
fn zero_channels_give_uniform_posteriors() {
    let (_, a, z, c) = unit_scale_block(3, 2, 4, 2);
    let est = EffectiveChannels::zeros(Layout::new(3, 2));
    let post = compute_posteriors(&z, &c, &est, &a, 0.5);
    let u = 1.0 / a.hypotheses() as f64;
    assert!(post.probs.iter().all(|p| (p - u).abs() < 1e-15));
}

#[test]
fn vanishing_noise_concentrates_on_truth() {
    let (est, a, _, c) = unit_scale_block(3, 2, 20, 3);
    let mut r = rng(4);
    let truth: Vec<usize> = (0..20).map(|_| r.random_range(0..a.hypotheses())).collect();
    let z = CMat::from_fn(3, 20, |i, n| {
        let (l, rho) = a.decode(truth[n]);
        let t: Vec<C64> = rho.iter().map(|&j| a.tag[j]).collect();
        let cn: Vec<C64> = c.row(n).iter().copied().collect();
        est.response(a.lu[l], &cn, &t)[i]
    });
    let post = compute_posteriors(&z, &c, &est, &a, 1e-12);
    for (n, &h) in truth.iter().enumerate() {
        assert!(post.slot(n)[h] > 1.0 - 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn posteriors_are_normalised(seed in 0u64..1000, log_s2 in -6.0f64..3.0, k in 1usize..4) {
        let (est, a, z, c) = unit_scale_block(2, k, 5, seed);
        let post = compute_posteriors(&z, &c, &est, &a, 10f64.powf(log_s2));
        for n in 0..5 {
            let s: f64 = post.slot(n).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(post.slot(n).iter().all(|&p| p >= 0.0));
        }
    }
}

/// `Σ_n Σ_h p_h φ_h φ_hᴴ` and `Σ_n z_n (Σ_h p_h φ_h)ᴴ` by direct enumeration.
fn brute_moments(post: &PosteriorTable, z: &CMat, c: &CMat, a: &Alphabet, l: Layout) -> (CMat, CMat) {
    let p = l.regressor_len();
    let mut r = CMat::zeros(p, p);
    let mut s = CMat::zeros(l.m, p);
    for n in 0..z.ncols() {
        let cn: Vec<C64> = c.row(n).iter().copied().collect();
        let mut mean = CVec::zeros(p);
        for h in 0..a.hypotheses() {
            let w = post.slot(n)[h];
            let (lam, rho) = a.decode(h);
            let t: Vec<C64> = rho.iter().map(|&i| a.tag[i]).collect();
            let phi = l.regressor(a.lu[lam], &cn, &t);
            r += &phi * phi.adjoint() * C64::from(w);
            mean += phi * C64::from(w);
        }
        s += z.column(n) * mean.adjoint();
    }
    (r, s)
}

#[test]
fn moments_match_exhaustive_enumeration() {
    for (m, k) in [(2, 1), (2, 3)] {
        let (est, a, z, c) = unit_scale_block(m, k, 3, 10 + k as u64);
        let post = compute_posteriors(&z, &c, &est, &a, 2.0);
        let mut mom = Moments::zeros(est.layout);
        mom.add_block(&a, &post, &z, &c);
        let (r, s) = brute_moments(&post, &z, &c, &a, est.layout);
        assert!(rel(&mom.r, &r) < 1e-12, "R, K={k}");
        assert!(rel(&mom.s, &s) < 1e-12, "S, K={k}");
        assert!((mom.yy - z.norm_squared()).abs() < 1e-12 * mom.yy);
    }
}

#[test]
fn known_ap_symbols_give_exact_rsi_gram() {
    let sc = scenario(&reference(), 21);
    let pilot = pilot_estimate(&sc.sig, &sc.plan).unwrap();
    let post = compute_posteriors(&sc.data.z, &sc.data.c, &pilot.channels, &sc.alphabet, sc.sigma2);
    let mut mom = Moments::zeros(sc.plan.layout);
    mom.add_block(&sc.alphabet, &post, &sc.data.z, &sc.data.c);
    let bc = DataRegressors::new(&sc.data.x, &sc.data.d, &sc.data.c).c;
    let gram = &bc * bc.adjoint();
    assert!(rel(&mom.omega(Block::Q, Block::Q), &gram) < 1e-14);
    for b in [Block::H, Block::Q, Block::V, Block::U(0), Block::U(1)] {
        let w = mom.omega(b, b);
        assert!(rel(&w, &w.adjoint()) < 1e-14, "{b} not Hermitian");
    }
}

#[test]
fn uniform_posteriors_zero_the_lu_linear_statistics() {
    let (est, a, z, c) = unit_scale_block(3, 2, 8, 30);
    let post = PosteriorTable {
        hypotheses: a.hypotheses(),
        probs: vec![1.0 / a.hypotheses() as f64; 8 * a.hypotheses()],
    };
    let mut mom = Moments::zeros(est.layout);
    mom.add_block(&a, &post, &z, &c);
    let sh = mom.s.columns(0, 2).norm();
    let sv = mom.s.columns(est.layout.v_cols().start, 8).norm();
    assert!(sh < 1e-14 && sv < 1e-14, "{sh} {sv}");
}

#[test]
fn lu_gram_averages_to_block_power() {
    let cfg = reference();
    let a = Alphabet::of(&cfg);
    let (len, blocks) = (10, 10_000);
    let mut r = rng(77);
    let c = CMat::from_element(len, 4, a.lu[0]);
    let mut acc = CMat::zeros(2, 2);
    let layout = Layout::of(&cfg);
    for _ in 0..blocks {
        let x: Vec<usize> = (0..len).map(|_| r.random_range(0..4)).collect();
        let d: Vec<Vec<usize>> = (0..2).map(|_| (0..len).map(|_| r.random_range(0..4)).collect()).collect();
        let post = PosteriorTable::point_mass(&a, &x, &d);
        let mut mom = Moments::zeros(layout);
        for n in 0..len {
            mom.add_slot(&a, &post.marginals(&a, n), &c.row(n).iter().copied().collect::<Vec<_>>(), None);
        }
        acc += mom.omega(Block::H, Block::H);
    }
    acc /= C64::from(blocks as f64);
    let target = CMat::identity(2, 2) * C64::from(len as f64 * cfg.transmit_power);
    assert!(rel(&acc, &target) < 0.02, "{acc}");
}

#[test]
fn point_mass_sweep_equals_genie_decision_directed_sweep() {
    let sc = scenario(&reference(), 40);
    let init = pilot_estimate(&sc.sig, &sc.plan).unwrap().channels;
    let post = PosteriorTable::point_mass(&sc.alphabet, &sc.data.x_idx, &sc.data.d_idx);
    let mut mom = Moments::pilot(&sc.sig, &sc.plan);
    mom.add_block(&sc.alphabet, &post, &sc.data.z, &sc.data.c);
    let mut theta = init.theta.clone();
    mom.cm_sweep(&mut theta).unwrap();

    let data = DataRegressors::new(&sc.data.x, &sc.data.d, &sc.data.c);
    let inp = AmddInputs {
        sig: &sc.sig,
        plan: &sc.plan,
        z: &sc.data.z,
        data: &data,
    };
    let dd = amdd_sweep(&inp, &init).unwrap();
    assert!(rel(&theta, &dd.theta) < 1e-10, "{}", rel(&theta, &dd.theta));
}

#[test]
fn cm_updates_never_decrease_the_objective() {
    for seed in 0..6 {
        let mut cfg = reference();
        cfg.transmit_power = config::dbm_to_watts(-5.0 + 5.0 * seed as f64);
        let sc = scenario(&cfg, 50 + seed);
        let init = pilot_estimate(&sc.sig, &sc.plan).unwrap().channels;
        let post = compute_posteriors(&sc.data.z, &sc.data.c, &init, &sc.alphabet, sc.sigma2);
        let mut mom = Moments::pilot(&sc.sig, &sc.plan);
        mom.add_block(&sc.alphabet, &post, &sc.data.z, &sc.data.c);
        let mut theta = init.theta.clone();
        let mut last = mom.objective(&theta);
        for _ in 0..3 {
            for b in sc.plan.layout.update_order() {
                mom.cm_update(&mut theta, b).unwrap();
                let now = mom.objective(&theta);
                assert!(now >= last - 1e-9 * last.abs(), "block {b}: {last} -> {now}");
                last = now;
            }
        }
    }
}

#[test]
fn likelihood_is_monotone_across_iterations() {
    let mut cfg = reference();
    cfg.transmit_power = config::dbm_to_watts(0.0);
    let sc = scenario(&cfg, 60);
    let init = pilot_estimate(&sc.sig, &sc.plan).unwrap().channels;
    let out = ecm_estimate(&sc.sig, &sc.data.z, &sc.data.c, &sc.plan, &sc.alphabet, &init, 6, sc.sigma2).unwrap();
    assert_eq!(out.iterates.len(), 7);
    let ll: Vec<f64> = out
        .iterates
        .iter()
        .map(|e| log_likelihood(&sc.sig, &sc.plan, &sc.data.z, &sc.data.c, e, &sc.alphabet, sc.sigma2))
        .collect();
    for w in ll.windows(2) {
        assert!(w[1] >= w[0] - 1e-9 * w[0].abs(), "{ll:?}");
    }
}

#[test]
fn without_data_cm_update_is_the_pilot_phase_fit() {
    let sc = scenario(&reference(), 70);
    let init = pilot_estimate(&sc.sig, &sc.plan).unwrap().channels;
    let mom = Moments::pilot(&sc.sig, &sc.plan);
    let mut theta = init.theta.clone();
    for k in 0..2 {
        mom.cm_update(&mut theta, Block::U(k)).unwrap();
    }
    mom.cm_update(&mut theta, Block::V).unwrap();
    assert!(rel(&theta, &init.theta) < 1e-10);
}

#[test]
fn noiseless_ecm_recovers_the_channels() {
    let sc = scenario(&noiseless(reference()), 80);
    let init = pilot_estimate(&sc.sig, &sc.plan).unwrap().channels;
    let out = ecm_estimate(&sc.sig, &sc.data.z, &sc.data.c, &sc.plan, &sc.alphabet, &init, 2, 0.0).unwrap();
    assert_eq!(out.estimate.kind, EstimatorKind::Ecm);
    assert!(rel(&out.estimate.channels.theta, &sc.truth.theta) < 1e-9);
}

#[test]
fn ecm_improves_on_its_starting_point() {
    let sc = scenario(&reference(), 90);
    let init = pilot_estimate(&sc.sig, &sc.plan).unwrap().channels;
    let out = ecm_estimate(&sc.sig, &sc.data.z, &sc.data.c, &sc.plan, &sc.alphabet, &init, 5, sc.sigma2).unwrap();
    let trace: Vec<f64> = out.iterates.iter().map(|e| e.sq_error(&sc.truth)).collect();
    assert!(trace[5] < 0.5 * trace[0], "{trace:?}");
}
