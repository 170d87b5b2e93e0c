#![allow(dead_code)]

use ambc_core::detect::Alphabet;
use ambc_core::linalg::{CMat, C64};
use ambc_core::synth::{synth_data, synth_training};
use ambc_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Scenario {
    pub cfg: SystemConfig,
    pub plan: PilotPlan,
    pub alphabet: Alphabet,
    pub truth: EffectiveChannels,
    pub iq: IqParams,
    pub sigma2: f64,
    pub sig: TrainingSignals,
    pub data: DataSignals,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn scenario(cfg: &SystemConfig, seed: u64) -> Scenario {
    let mut r = rng(seed);
    let plan = PilotPlan::build(cfg).unwrap();
    let phys = sample_channels(cfg, &mut r).unwrap();
    let iq = IqParams::sample(&cfg.iq, &mut r);
    let truth = derive_effective(&phys, &iq);
    let sig = synth_training(cfg, &truth, &iq, &plan, &mut r);
    let data = synth_data(cfg, &truth, &iq, cfg.block_len, &mut r);
    Scenario {
        cfg: cfg.clone(),
        alphabet: Alphabet::of(cfg),
        sigma2: cfg.noise_power * iq.noise_gain(),
        plan,
        truth,
        iq,
        sig,
        data,
    }
}

pub fn reference() -> SystemConfig {
    SystemConfig::default()
}

pub fn noiseless(mut cfg: SystemConfig) -> SystemConfig {
    cfg.noise_power = 0.0;
    cfg
}

/// Smallest feasible pilot lengths for `m` antennas and `k` tags, rounded up
/// to even sizes.
pub fn small(m: usize, k: usize, block_len: usize) -> SystemConfig {
    let even = |n: usize| n + n % 2;
    let mut cfg = SystemConfig::default();
    cfg.antennas = m;
    cfg.tags = k;
    cfg.n1 = even(2 * m + 4);
    cfg.n2 = even(2 * k + 2);
    cfg.n3 = even(2 * m + 2);
    cfg.block_len = block_len;
    cfg.ser_block_len = block_len.max(1);
    cfg
}

pub fn random_cmat<R: Rng>(rows: usize, cols: usize, scale: f64, r: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        C64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)) * scale
    })
}

/// Effective channels with unit-order entries, unrelated to any physics.
pub fn random_channels<R: Rng>(layout: Layout, r: &mut R) -> EffectiveChannels {
    EffectiveChannels::from_matrix(layout, random_cmat(layout.m, layout.regressor_len(), 1.0, r)).unwrap()
}

pub fn rel(a: &CMat, b: &CMat) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

pub fn db(x: f64) -> f64 {
    10.0 * x.log10()
}
