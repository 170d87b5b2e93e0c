//! Physical, protocol and experiment configuration.
//!
//! Configurations are read from TOML. Power-like quantities accept either a
//! bare number (linear units) or a string with a unit suffix: `"10 dBm"`,
//! `"0.01 W"`, `"5 mW"` for powers, `"-10 dB"` for the self-interference
//! variance. Everything is converted to linear units at load time.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Symbol alphabet used by the legacy user, the AP and the tags.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Constellation {
    Bpsk,
    Qpsk,
}

impl Constellation {
    pub fn size(self) -> usize {
        match self {
            Constellation::Bpsk => 2,
            Constellation::Qpsk => 4,
        }
    }

    /// Constellation points scaled to average power `power`.
    pub fn points(self, power: f64) -> Vec<C64> {
        let a = power.sqrt();
        match self {
            Constellation::Bpsk => vec![C64::new(a, 0.0), C64::new(-a, 0.0)],
            Constellation::Qpsk => {
                let b = a / std::f64::consts::SQRT_2;
                vec![
                    C64::new(b, b),
                    C64::new(-b, b),
                    C64::new(-b, -b),
                    C64::new(b, -b),
                ]
            }
        }
    }

    /// Zero mean with vanishing pseudo-variance (`E[d] = E[d²] = 0`).
    pub fn is_proper(self) -> bool {
        matches!(self, Constellation::Qpsk)
    }
}

/// A per-tag quantity given either once for all tags or tag by tag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerTag {
    Same(f64),
    Each(Vec<f64>),
}

impl PerTag {
    pub fn get(&self, k: usize) -> f64 {
        match self {
            PerTag::Same(v) => *v,
            PerTag::Each(v) => v[k],
        }
    }

    fn covers(&self, tags: usize) -> bool {
        match self {
            PerTag::Same(_) => true,
            PerTag::Each(v) => v.len() >= tags,
        }
    }

    fn all(&self, tags: usize, pred: impl Fn(f64) -> bool) -> bool {
        (0..tags).all(|k| pred(self.get(k)))
    }
}

/// Transmit/receive I/Q imbalance settings.
///
/// A phase left as `None` is drawn uniformly from `phase_range` in every
/// Monte-Carlo trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IqSpec {
    #[serde(default = "one")]
    pub tx_gain: f64,
    #[serde(default = "one")]
    pub rx_gain: f64,
    #[serde(default)]
    pub tx_phase: Option<f64>,
    #[serde(default)]
    pub rx_phase: Option<f64>,
    #[serde(default = "unit_range")]
    pub phase_range: (f64, f64),
}

fn one() -> f64 {
    1.0
}

fn unit_range() -> (f64, f64) {
    (0.0, 1.0)
}

impl Default for IqSpec {
    fn default() -> Self {
        IqSpec {
            tx_gain: 1.0,
            rx_gain: 1.0,
            tx_phase: None,
            rx_phase: None,
            phase_range: unit_range(),
        }
    }
}

impl IqSpec {
    /// Perfect I/Q balance on both ends.
    pub fn balanced() -> Self {
        IqSpec {
            tx_phase: Some(0.0),
            rx_phase: Some(0.0),
            ..IqSpec::default()
        }
    }
}

/// All physical and protocol constants of one link, in linear units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Number of AP antennas (M).
    pub antennas: usize,
    /// Number of tags (K).
    pub tags: usize,
    pub lu_ap_distance: f64,
    pub tag_ap_distance: PerTag,
    pub lu_tag_distance: PerTag,
    pub reference_distance: f64,
    pub carrier_hz: f64,
    pub pathloss_exponent: f64,
    pub nakagami_m: f64,
    /// Residual self-interference variance per entry (linear).
    pub rsi_variance: f64,
    /// Tag reflection coefficients, each in (0, 1).
    pub reflection: PerTag,
    pub iq: IqSpec,
    /// Per-symbol transmit power in watts.
    pub transmit_power: f64,
    /// Receiver noise power in watts.
    pub noise_power: f64,
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    /// Data block length D used for semi-blind estimation.
    pub block_len: usize,
    /// Length of the held-out block used for symbol-error measurement.
    pub ser_block_len: usize,
    pub ecm_iterations: usize,
    pub seed: u64,
    pub lu_constellation: Constellation,
    pub tag_constellation: Constellation,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            antennas: 4,
            tags: 2,
            lu_ap_distance: 30.0,
            tag_ap_distance: PerTag::Same(2.0),
            lu_tag_distance: PerTag::Same(30.0),
            reference_distance: 1.0,
            carrier_hz: 915e6,
            pathloss_exponent: 2.5,
            nakagami_m: 3.0,
            rsi_variance: 0.1,
            reflection: PerTag::Same(0.6),
            iq: IqSpec::default(),
            transmit_power: dbm_to_watts(10.0),
            noise_power: dbm_to_watts(-80.0),
            n1: 16,
            n2: 16,
            n3: 16,
            block_len: 200,
            ser_block_len: 200,
            ecm_iterations: 10,
            seed: 1,
            lu_constellation: Constellation::Qpsk,
            tag_constellation: Constellation::Qpsk,
        }
    }
}

impl SystemConfig {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Total number of pilot slots `N1 + 2·N2 + 2·K·N3`.
    pub fn pilot_slots(&self) -> usize {
        self.n1 + 2 * self.n2 + 2 * self.tags * self.n3
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.antennas == 0 {
            return bad("antennas must be positive");
        }
        if self.tags == 0 {
            return bad("tags must be positive");
        }
        for (name, field) in [
            ("tag_ap_distance", &self.tag_ap_distance),
            ("lu_tag_distance", &self.lu_tag_distance),
            ("reflection", &self.reflection),
        ] {
            if !field.covers(self.tags) {
                return Err(Error::Config(format!(
                    "{name} lists fewer values than the {} tags",
                    self.tags
                )));
            }
        }
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !(positive(self.lu_ap_distance)
            && positive(self.reference_distance)
            && self.tag_ap_distance.all(self.tags, positive)
            && self.lu_tag_distance.all(self.tags, positive))
        {
            return bad("all distances must be positive");
        }
        if !self.reflection.all(self.tags, |e| e > 0.0 && e < 1.0) {
            return bad("reflection coefficients must lie in (0, 1)");
        }
        if !positive(self.pathloss_exponent) {
            return bad("pathloss exponent must be positive");
        }
        if !positive(self.carrier_hz) {
            return bad("carrier frequency must be positive");
        }
        if !(self.nakagami_m >= 0.5) {
            return bad("Nakagami shape must be at least 0.5");
        }
        if !(self.rsi_variance >= 0.0) {
            return bad("self-interference variance must be non-negative");
        }
        if !positive(self.transmit_power) {
            return bad("transmit power must be positive");
        }
        if !(self.noise_power >= 0.0 && self.noise_power.is_finite()) {
            return bad("noise power must be non-negative");
        }
        if !(positive(self.iq.tx_gain) && positive(self.iq.rx_gain)) {
            return bad("I/Q amplitude imbalances must be positive");
        }
        if !(self.iq.phase_range.0 <= self.iq.phase_range.1) {
            return bad("I/Q phase range must be ordered");
        }
        if self.ser_block_len == 0 {
            return bad("ser_block_len must be positive");
        }
        let m = self.antennas;
        let k = self.tags;
        check_pilot_len(self.n1, m + 1)?;
        check_pilot_len(self.n2, k)?;
        check_pilot_len(self.n3, m)?;
        Ok(())
    }

    /// Loads a configuration file and validates it.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(ExperimentConfig::from_toml_str(text)?.system)
    }
}

fn check_pilot_len(n: usize, count: usize) -> Result<()> {
    crate::pilots::select_pilot_columns(n, count).map(|_| ())
}

/// Monte-Carlo execution settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub trials: usize,
    /// Worker threads; 0 picks the rayon default.
    pub threads: usize,
    pub run_amdd: bool,
    pub run_ecm: bool,
    pub measure_ser: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            trials: 100,
            threads: 0,
            run_amdd: true,
            run_ecm: true,
            measure_ser: true,
        }
    }
}

/// Grids for the four sweep kinds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    /// Transmit powers in dBm.
    pub transmit_power_dbm: Vec<f64>,
    pub block_len: Vec<usize>,
    pub tags: Vec<usize>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            transmit_power_dbm: vec![-5.0, 0.0, 5.0, 10.0, 15.0, 20.0],
            block_len: vec![50, 100, 200, 400],
            tags: vec![2, 3, 4, 5],
        }
    }
}

/// Everything a configuration file describes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub run: RunConfig,
    pub sweep: SweepGrid,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            system: SystemConfig::default(),
            run: RunConfig::default(),
            sweep: SweepGrid::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let cfg = raw.resolve()?;
        cfg.system.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// A number or a unit-suffixed string, as written in the config file.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum Level {
    Linear(f64),
    Text(String),
}

#[derive(Clone, Copy)]
enum LevelKind {
    Power,
    Ratio,
}

impl Level {
    fn resolve(&self, field: &str, kind: LevelKind) -> Result<f64> {
        let text = match self {
            Level::Linear(v) => return Ok(*v),
            Level::Text(t) => t.trim(),
        };
        let err = || Error::Config(format!("{field}: cannot parse level {text:?}"));
        let split = text
            .find(|c: char| c.is_ascii_alphabetic() && c != 'e' && c != 'E')
            .unwrap_or(text.len());
        // keep exponents like 1e-3 inside the number part
        let (num, unit) = text.split_at(split);
        let value: f64 = num.trim().parse().map_err(|_| err())?;
        let unit = unit.trim();
        match (kind, unit) {
            (_, "") => Ok(value),
            (LevelKind::Power, "dBm") => Ok(dbm_to_watts(value)),
            (LevelKind::Power, "W") => Ok(value),
            (LevelKind::Power, "mW") => Ok(value * 1e-3),
            (LevelKind::Ratio, "dB") => Ok(db_to_linear(value)),
            _ => Err(Error::Config(format!(
                "{field}: unit {unit:?} not allowed here"
            ))),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    system: RawSystem,
    #[serde(default)]
    iq: Option<IqSpec>,
    #[serde(default)]
    pilots: Option<RawPilots>,
    #[serde(default)]
    data: Option<RawData>,
    #[serde(default)]
    ecm: Option<RawEcm>,
    #[serde(default)]
    run: Option<RawRun>,
    #[serde(default)]
    sweep: Option<RawSweep>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    antennas: usize,
    tags: usize,
    #[serde(default = "d_lu_ap")]
    lu_ap_distance_m: f64,
    #[serde(default = "d_tag_ap")]
    tag_ap_distance_m: PerTag,
    #[serde(default = "d_lu_tag")]
    lu_tag_distance_m: PerTag,
    #[serde(default = "one")]
    reference_distance_m: f64,
    #[serde(default = "fc")]
    carrier_hz: f64,
    #[serde(default = "gamma")]
    pathloss_exponent: f64,
    #[serde(default = "nak")]
    nakagami_m: f64,
    #[serde(default)]
    rsi_variance: Option<Level>,
    #[serde(default = "eta")]
    reflection: PerTag,
    #[serde(default)]
    transmit_power: Option<Level>,
    #[serde(default)]
    noise_power: Option<Level>,
}

fn d_lu_ap() -> f64 {
    30.0
}
fn d_tag_ap() -> PerTag {
    PerTag::Same(2.0)
}
fn d_lu_tag() -> PerTag {
    PerTag::Same(30.0)
}
fn fc() -> f64 {
    915e6
}
fn gamma() -> f64 {
    2.5
}
fn nak() -> f64 {
    3.0
}
fn eta() -> PerTag {
    PerTag::Same(0.6)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPilots {
    n1: usize,
    n2: usize,
    n3: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    #[serde(default)]
    block_len: Option<usize>,
    #[serde(default)]
    ser_block_len: Option<usize>,
    #[serde(default)]
    lu_constellation: Option<Constellation>,
    #[serde(default)]
    tag_constellation: Option<Constellation>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEcm {
    iterations: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    trials: Option<usize>,
    #[serde(default)]
    threads: Option<usize>,
    #[serde(default)]
    run_amdd: Option<bool>,
    #[serde(default)]
    run_ecm: Option<bool>,
    #[serde(default)]
    measure_ser: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    #[serde(default)]
    transmit_power_dbm: Option<Vec<f64>>,
    #[serde(default)]
    block_len: Option<Vec<usize>>,
    #[serde(default)]
    tags: Option<Vec<usize>>,
}

impl RawFile {
    fn resolve(self) -> Result<ExperimentConfig> {
        let d = SystemConfig::default();
        let s = self.system;
        let mut sys = SystemConfig {
            antennas: s.antennas,
            tags: s.tags,
            lu_ap_distance: s.lu_ap_distance_m,
            tag_ap_distance: s.tag_ap_distance_m,
            lu_tag_distance: s.lu_tag_distance_m,
            reference_distance: s.reference_distance_m,
            carrier_hz: s.carrier_hz,
            pathloss_exponent: s.pathloss_exponent,
            nakagami_m: s.nakagami_m,
            rsi_variance: match s.rsi_variance {
                Some(l) => l.resolve("rsi_variance", LevelKind::Ratio)?,
                None => d.rsi_variance,
            },
            reflection: s.reflection,
            iq: self.iq.unwrap_or_default(),
            transmit_power: match s.transmit_power {
                Some(l) => l.resolve("transmit_power", LevelKind::Power)?,
                None => d.transmit_power,
            },
            noise_power: match s.noise_power {
                Some(l) => l.resolve("noise_power", LevelKind::Power)?,
                None => d.noise_power,
            },
            ..d
        };
        if let Some(p) = self.pilots {
            sys.n1 = p.n1;
            sys.n2 = p.n2;
            sys.n3 = p.n3;
        }
        if let Some(data) = self.data {
            sys.block_len = data.block_len.unwrap_or(sys.block_len);
            sys.ser_block_len = data.ser_block_len.unwrap_or(sys.block_len);
            sys.lu_constellation = data.lu_constellation.unwrap_or(sys.lu_constellation);
            sys.tag_constellation = data.tag_constellation.unwrap_or(sys.tag_constellation);
        }
        if let Some(e) = self.ecm {
            sys.ecm_iterations = e.iterations;
        }
        let mut run = RunConfig::default();
        if let Some(r) = self.run {
            sys.seed = r.seed.unwrap_or(sys.seed);
            run.trials = r.trials.unwrap_or(run.trials);
            run.threads = r.threads.unwrap_or(run.threads);
            run.run_amdd = r.run_amdd.unwrap_or(run.run_amdd);
            run.run_ecm = r.run_ecm.unwrap_or(run.run_ecm);
            run.measure_ser = r.measure_ser.unwrap_or(run.measure_ser);
        }
        let mut sweep = SweepGrid::default();
        if let Some(sw) = self.sweep {
            sweep.transmit_power_dbm = sw.transmit_power_dbm.unwrap_or(sweep.transmit_power_dbm);
            sweep.block_len = sw.block_len.unwrap_or(sweep.block_len);
            sweep.tags = sw.tags.unwrap_or(sweep.tags);
        }
        Ok(ExperimentConfig {
            system: sys,
            run,
            sweep,
        })
    }
}
