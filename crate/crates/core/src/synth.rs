//! Received-signal synthesis for the training phases and the data block.
//!
//! Two independent paths compute a received slot: [`slot_physical`] walks
//! the hardware chain (TX I/Q, propagation, noise, RX I/Q) while
//! [`slot_effective`] evaluates the effective-channel model. They agree to
//! rounding for any input and are cross-checked in the tests.

use rand::Rng;

use crate::channel::{complex_normal, EffectiveChannels, IqParams, PhysicalChannels};
use crate::config::{Constellation, SystemConfig};
use crate::linalg::{CMat, CVec, C64};
use crate::pilots::PilotPlan;

/// `c1·z + c2·z*`, element-wise.
pub fn apply_iq(z: &CMat, c1: C64, c2: C64) -> CMat {
    z.map(|v| c1 * v + c2 * v.conj())
}

fn apply_iq_vec(z: &CVec, c1: C64, c2: C64) -> CVec {
    z.map(|v| c1 * v + c2 * v.conj())
}

/// Received vector through the physical chain. `w` is the noise before the
/// receive I/Q stage.
pub fn slot_physical(
    phys: &PhysicalChannels,
    iq: &IqParams,
    s: C64,
    r: &CVec,
    t: &[C64],
    w: &CVec,
) -> CVec {
    let s_tx = iq.g1 * s + iq.g2 * s.conj();
    let r_tx = apply_iq_vec(r, iq.g1, iq.g2);
    let mut y = &phys.h_o * s_tx + &phys.q_o * &r_tx;
    for (k, &tk) in t.iter().enumerate() {
        y += &phys.v[k] * (s_tx * tk);
        y += &phys.u[k] * &r_tx * tk;
    }
    y += w;
    apply_iq_vec(&y, iq.k1, iq.k2)
}

/// Received vector from the effective channels; `w_eff` is the noise after
/// the receive I/Q stage.
pub fn slot_effective(eff: &EffectiveChannels, s: C64, r: &CVec, t: &[C64], w_eff: &CVec) -> CVec {
    eff.response(s, r.as_slice(), t) + w_eff
}

/// Effective noise block `K1·W + K2·W*` with `W` white of power `sigma2`.
pub fn effective_noise<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    sigma2: f64,
    iq: &IqParams,
    rng: &mut R,
) -> CMat {
    if sigma2 == 0.0 {
        return CMat::zeros(rows, cols);
    }
    let w = CMat::from_fn(rows, cols, |_, _| complex_normal(sigma2, rng));
    apply_iq(&w, iq.k1, iq.k2)
}

/// Received pilot blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSignals {
    /// Phase 1, `M×N1`.
    pub y1: CMat,
    /// Phase 2 sub-phases, `M×N2` each.
    pub y2: [CMat; 2],
    /// Phase 3, indexed `[tag][sub-stage]`, `M×N3` each.
    pub y3: Vec<[CMat; 2]>,
}

impl TrainingSignals {
    /// All blocks side by side in the order of [`PilotPlan::slots`].
    pub fn stacked(&self) -> CMat {
        let mut blocks: Vec<&CMat> = vec![&self.y1, &self.y2[0], &self.y2[1]];
        for pair in &self.y3 {
            blocks.push(&pair[0]);
            blocks.push(&pair[1]);
        }
        crate::linalg::hstack(&blocks)
    }

    pub fn from_stacked(y: &CMat, plan: &PilotPlan) -> Self {
        let take = |at: usize, n: usize| y.columns(at, n).into_owned();
        let y1 = take(0, plan.n1);
        let y2 = [take(plan.n1, plan.n2), take(plan.n1 + plan.n2, plan.n2)];
        let y3 = (0..plan.layout.k)
            .map(|k| {
                [
                    take(plan.phase3_offset(k, 0), plan.n3),
                    take(plan.phase3_offset(k, 1), plan.n3),
                ]
            })
            .collect();
        TrainingSignals { y1, y2, y3 }
    }
}

/// Noise-free pilot observations `Θ·Φ_pilot`.
pub fn training_mean(eff: &EffectiveChannels, plan: &PilotPlan) -> CMat {
    &eff.theta * plan.regressors()
}

/// Simulates every pilot slot with fresh effective noise.
pub fn synth_training<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    eff: &EffectiveChannels,
    iq: &IqParams,
    plan: &PilotPlan,
    rng: &mut R,
) -> TrainingSignals {
    let m = eff.layout.m;
    let mut y = training_mean(eff, plan);
    y += effective_noise(m, plan.total_slots(), cfg.noise_power, iq, rng);
    TrainingSignals::from_stacked(&y, plan)
}

/// A data block and its transmitted symbols.
#[derive(Clone, Debug, PartialEq)]
pub struct DataSignals {
    /// Received block, `M×D`.
    pub z: CMat,
    /// LU symbols.
    pub x: Vec<C64>,
    /// AP symbols, `D×M` (row `n` is `c[n]ᵀ`).
    pub c: CMat,
    /// Tag symbols, `d[k][n]`.
    pub d: Vec<Vec<C64>>,
    /// Constellation indices of `x` and `d`, for error counting.
    pub x_idx: Vec<usize>,
    pub d_idx: Vec<Vec<usize>>,
}

impl DataSignals {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// AP symbols of slot `n`.
    pub fn c_row(&self, n: usize) -> Vec<C64> {
        self.c.row(n).iter().copied().collect()
    }

    /// Tag symbols of slot `n`, one per tag.
    pub fn tags_at(&self, n: usize) -> Vec<C64> {
        self.d.iter().map(|dk| dk[n]).collect()
    }
}

/// Draws a data block of `len` slots: LU and AP symbols at power `P_T`,
/// unit-modulus tag symbols, received through `eff` with fresh noise.
pub fn synth_data<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    eff: &EffectiveChannels,
    iq: &IqParams,
    len: usize,
    rng: &mut R,
) -> DataSignals {
    let lu = cfg.lu_constellation.points(cfg.transmit_power);
    let ap = Constellation::Qpsk.points(cfg.transmit_power);
    let tag = cfg.tag_constellation.points(1.0);
    let (m, k) = (eff.layout.m, eff.layout.k);

    let x_idx: Vec<usize> = (0..len).map(|_| rng.random_range(0..lu.len())).collect();
    let c = CMat::from_fn(len, m, |_, _| ap[rng.random_range(0..ap.len())]);
    let d_idx: Vec<Vec<usize>> = (0..k)
        .map(|_| (0..len).map(|_| rng.random_range(0..tag.len())).collect())
        .collect();
    let x: Vec<C64> = x_idx.iter().map(|&i| lu[i]).collect();
    let d: Vec<Vec<C64>> = d_idx.iter().map(|v| v.iter().map(|&i| tag[i]).collect()).collect();

    let noise = effective_noise(m, len, cfg.noise_power, iq, rng);
    let mut z = CMat::zeros(m, len);
    for n in 0..len {
        let r = c.row(n).transpose();
        let t: Vec<C64> = d.iter().map(|dk| dk[n]).collect();
        let w = noise.column(n).into_owned();
        z.set_column(n, &slot_effective(eff, x[n], &r, &t, &w));
    }
    DataSignals {
        z,
        x,
        c,
        d,
        x_idx,
        d_idx,
    }
}
