mod common;

use ambc_core::channel::IqParams;
use ambc_core::config::Constellation;
use ambc_core::detect::Alphabet;
use ambc_core::linalg::{conj_vec, off_diagonal_ratio, CVec, C64};
use ambc_core::synth::{slot_effective, slot_physical, training_mean};
use ambc_core::*;
use common::*;
use proptest::prelude::*;
use rand::Rng;

fn unit<R: Rng>(r: &mut R) -> C64 {
    C64::from_polar(1.0, r.random_range(0.0..std::f64::consts::TAU))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn physical_and_effective_paths_agree(
        m in 1usize..6, k in 1usize..4, seed in 0u64..10_000,
        gt in 0.8f64..1.2, pt in -1.0f64..1.0, gr in 0.8f64..1.2, pr in -1.0f64..1.0,
    ) {
        let cfg = small(m, k, 1);
        let mut r = rng(seed);
        let phys = sample_channels(&cfg, &mut r).unwrap();
        let iq = IqParams::from_imbalance(gt, pt, gr, pr);
        let eff = derive_effective(&phys, &iq);
        let s = unit(&mut r) * 0.1;
        let rv = CVec::from_fn(m, |_, _| unit(&mut r) * 0.1);
        let t: Vec<C64> = (0..k).map(|_| unit(&mut r)).collect();
        let w = CVec::from_fn(m, |_, _| unit(&mut r) * 1e-9);
        let a = slot_physical(&phys, &iq, s, &rv, &t, &w);
        let b = slot_effective(&eff, s, &rv, &t, &(&w * iq.k1 + conj_vec(&w) * iq.k2));
        prop_assert!((&a - &b).norm() <= 1e-12 * b.norm());
    }

    #[test]
    fn regressor_reproduces_response(m in 1usize..5, k in 0usize..4, seed in 0u64..10_000) {
        let l = Layout::new(m, k);
        let mut r = rng(seed);
        let est = random_channels(l, &mut r);
        let s = unit(&mut r);
        let c: Vec<C64> = (0..m).map(|_| unit(&mut r)).collect();
        let t: Vec<C64> = (0..k).map(|_| unit(&mut r)).collect();
        let direct = est.response(s, &c, &t);
        let via = &est.theta * l.regressor(s, &c, &t);
        prop_assert!((&direct - &via).norm() <= 1e-12 * direct.norm().max(1.0));
        prop_assert_eq!(l.theta_len(), 2 * m + 2 * m * m + 4 * k * m + 4 * k * m * m);
    }

    #[test]
    fn pack_and_unpack_are_inverse(m in 1usize..5, k in 0usize..4, seed in 0u64..1000) {
        let l = Layout::new(m, k);
        let est = random_channels(l, &mut rng(seed));
        let back = EffectiveChannels::unpack(l, &est.pack()).unwrap();
        prop_assert_eq!(back, est);
    }

    #[test]
    fn pilot_grams_are_diagonal(m in 1usize..7, k in 1usize..5, extra in 0usize..4) {
        let mut cfg = small(m, k, 1);
        cfg.n1 += 2 * extra;
        cfg.n2 += 2 * extra;
        cfg.n3 += 2 * extra;
        let plan = PilotPlan::build(&cfg).unwrap();
        for g in [plan.phase1_gram(), plan.phase2_gram(), plan.phase3_gram()] {
            prop_assert!(off_diagonal_ratio(&g) <= 1e-10);
        }
        prop_assert!(plan.t.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        prop_assert_eq!(plan.total_slots(), cfg.n1 + 2 * cfg.n2 + 2 * k * cfg.n3);
    }

    #[test]
    fn hypothesis_numbering_is_bijective(k in 0usize..5, seed in 0u64..1000) {
        let a = Alphabet::from_constellations(Constellation::Qpsk, Constellation::Qpsk, 1.0, k);
        let mut r = rng(seed);
        for _ in 0..32 {
            let h = r.random_range(0..a.hypotheses());
            let (l, t) = a.decode(h);
            prop_assert_eq!(a.index(l, &t), h);
        }
    }

    #[test]
    fn noiseless_training_equals_its_mean(seed in 0u64..1000) {
        let sc = scenario(&noiseless(reference()), seed);
        prop_assert_eq!(sc.sig.stacked(), training_mean(&sc.truth, &sc.plan));
    }
}

#[test]
fn balanced_receiver_keeps_noise_level() {
    assert!((IqParams::balanced().noise_gain() - 1.0).abs() < 1e-15);
}
