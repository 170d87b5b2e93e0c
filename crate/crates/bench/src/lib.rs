//! Fixed-seed inputs shared by the benchmarks.

use ambc_core::detect::Alphabet;
use ambc_core::{
    derive_effective, pilot_estimate, sample_channels, synth_data, synth_training, DataSignals, EffectiveChannels,
    IqParams, PilotPlan, SystemConfig, TrainingSignals,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One simulated link: configuration, received signals and the pilot estimate.
pub struct Fixture {
    pub cfg: SystemConfig,
    pub plan: PilotPlan,
    pub alphabet: Alphabet,
    pub sig: TrainingSignals,
    pub data: DataSignals,
    pub sigma2: f64,
    pub pilot: EffectiveChannels,
}

impl Fixture {
    /// Reference link with `tags` tags and a data block of `block_len` slots.
    pub fn new(tags: usize, block_len: usize) -> Self {
        let cfg = SystemConfig {
            tags,
            block_len,
            ..SystemConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0xBE7C);
        let plan = PilotPlan::build(&cfg).expect("valid plan");
        let phys = sample_channels(&cfg, &mut rng).expect("valid geometry");
        let iq = IqParams::sample(&cfg.iq, &mut rng);
        let truth = derive_effective(&phys, &iq);
        let sig = synth_training(&cfg, &truth, &iq, &plan, &mut rng);
        let data = synth_data(&cfg, &truth, &iq, block_len, &mut rng);
        let pilot = pilot_estimate(&sig, &plan).expect("pilot estimate").channels;
        Fixture {
            alphabet: Alphabet::of(&cfg),
            sigma2: cfg.noise_power * iq.noise_gain(),
            cfg,
            plan,
            sig,
            data,
            pilot,
        }
    }
}
