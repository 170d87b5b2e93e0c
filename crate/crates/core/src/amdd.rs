//! Decision-directed semi-blind estimation.
//!
//! The data block is detected once with the pilot estimates, then every
//! channel block is re-estimated by least squares over its pilot phases plus
//! the detected data, treating decisions as known symbols. Updates run in the
//! order `u_1 … u_K, v, q, h`, each cancelling the other components with the
//! freshest estimates available.
//!
//! All updates are written in matrix form (`X·G = B` with `G` Hermitian), so
//! they do not share code with the generic regressor used elsewhere.

use crate::channel::{EffectiveChannels, EstimateSet, EstimatorKind};
use crate::detect::{ml_detect, Alphabet, DetectedBlock};
use crate::error::Result;
use crate::linalg::{conj, solve_right_hpd, vstack, CMat, C64};
use crate::pilot_est::pilot_estimate;
use crate::pilots::PilotPlan;
use crate::synth::TrainingSignals;

/// Detected symbols arranged as block regressors, one column per slot.
#[derive(Clone, Debug)]
pub struct DataRegressors {
    /// `[xᵀ; xᴴ]`, `2×D`.
    pub x: CMat,
    /// `[Cᵀ; Cᴴ]`, `2M×D`.
    pub c: CMat,
    /// Per tag, rows `[d∘x, d*∘x*, d∘x*, d*∘x]`, `4×D`.
    pub v: Vec<CMat>,
    /// Per tag, `[Cᵀdiag(d); Cᴴdiag(d*); Cᴴdiag(d); Cᵀdiag(d*)]`, `4M×D`.
    pub u: Vec<CMat>,
}

impl DataRegressors {
    /// `c` is `D×M` with row `n` holding the AP symbols of slot `n`.
    pub fn new(x: &[C64], d: &[Vec<C64>], c: &CMat) -> Self {
        let len = x.len();
        let m = c.ncols();
        let xr = CMat::from_fn(2, len, |i, n| if i == 0 { x[n] } else { x[n].conj() });
        let ct = c.transpose();
        let cc = conj(&ct);
        let cr = vstack(&[&ct, &cc]);
        let v = d
            .iter()
            .map(|dk| {
                CMat::from_fn(4, len, |i, n| {
                    let (a, b) = (x[n], dk[n]);
                    match i {
                        0 => a * b,
                        1 => (a * b).conj(),
                        2 => a.conj() * b,
                        _ => a * b.conj(),
                    }
                })
            })
            .collect();
        let u = d
            .iter()
            .map(|dk| {
                CMat::from_fn(4 * m, len, |i, n| {
                    let (g, j) = (i / m, i % m);
                    let (cv, t) = (c[(n, j)], dk[n]);
                    match g {
                        0 => cv * t,
                        1 => (cv * t).conj(),
                        2 => cv.conj() * t,
                        _ => cv * t.conj(),
                    }
                })
            })
            .collect();
        DataRegressors { x: xr, c: cr, v, u }
    }

    pub fn from_detected(det: &DetectedBlock, c: &CMat) -> Self {
        DataRegressors::new(&det.x, &det.d, c)
    }

    /// All tag-LU cascade rows stacked tag by tag, `4K×D`.
    pub fn v_stacked(&self) -> CMat {
        let refs: Vec<&CMat> = self.v.iter().collect();
        stack_or_empty(&refs, 0, self.x.ncols())
    }
}

fn stack_or_empty(blocks: &[&CMat], rows_if_empty: usize, cols: usize) -> CMat {
    if blocks.is_empty() {
        CMat::zeros(rows_if_empty, cols)
    } else {
        vstack(blocks)
    }
}

/// Phase-2 regressor of the stacked `V`, `N2×4K`: row `n` is
/// `[s t_k, s* t_k*, s* t_k, s t_k*]` for each tag, `s` the LU constant.
pub fn phase2_v_regressor(plan: &PilotPlan, sub: usize) -> CMat {
    let s = plan.lu2[sub];
    CMat::from_fn(plan.n2, 4 * plan.layout.k, |n, col| {
        let t = plan.t[(n, col / 4)];
        match col % 4 {
            0 => s * t,
            1 => (s * t).conj(),
            2 => s.conj() * t,
            _ => s * t.conj(),
        }
    })
}

/// Phase-3 regressor of the active tag's `U_k`, `N3×4M`: row `n` is
/// `[r t, r* t*, r* t, r t*]` with `t` the tag constant of the sub-stage.
pub fn phase3_u_regressor(plan: &PilotPlan, sub: usize) -> CMat {
    let (m, t) = (plan.layout.m, plan.tag3[sub]);
    CMat::from_fn(plan.n3, 4 * m, |n, col| {
        let r = plan.r3[(n, col % m)];
        match col / m {
            0 => r * t,
            1 => (r * t).conj(),
            2 => r.conj() * t,
            _ => r * t.conj(),
        }
    })
}

/// Inputs shared by all updates: pilot observations, the data block and the
/// AP symbols that were sent during it.
pub struct AmddInputs<'a> {
    pub sig: &'a TrainingSignals,
    pub plan: &'a PilotPlan,
    /// Received data block, `M×D`.
    pub z: &'a CMat,
    pub data: &'a DataRegressors,
}

impl AmddInputs<'_> {
    fn stacked_v(est: &EffectiveChannels) -> CMat {
        est.theta.columns(est.layout.v_cols().start, 4 * est.layout.k).into_owned()
    }

    /// Data block minus every component except those flagged `keep`.
    fn data_residual(&self, est: &EffectiveChannels, keep_h: bool, keep_q: bool, keep_v: bool, keep_u: Option<usize>) -> CMat {
        let mut z = self.z.clone();
        if !keep_h {
            z -= est.h() * &self.data.x;
        }
        if !keep_q {
            z -= est.q() * &self.data.c;
        }
        if !keep_v {
            z -= Self::stacked_v(est) * self.data.v_stacked();
        }
        for k in 0..est.layout.k {
            if keep_u != Some(k) {
                z -= est.u(k) * &self.data.u[k];
            }
        }
        z
    }
}

/// Fused LS update of `U_k`.
pub fn amdd_update_u(k: usize, inp: &AmddInputs, est: &EffectiveChannels) -> Result<CMat> {
    let b = &inp.data.u[k];
    // Every other tag and the LU cascade of tag k still sit in Z; only U_k is kept.
    let z_u = inp.data_residual(est, false, false, false, Some(k));
    let mut gram = b * b.adjoint();
    let mut rhs = &z_u * b.adjoint();
    let r3t = inp.plan.r3_tilde().transpose();
    for i in 0..2 {
        let p = phase3_u_regressor(inp.plan, i);
        let y = &inp.sig.y3[k][i] - est.q() * &r3t;
        gram += p.transpose() * conj(&p);
        rhs += y * conj(&p);
    }
    solve_right_hpd(&rhs, &gram)
}

/// Fused LS update of `V = [V_1 … V_K]`, returned `M×4K`.
pub fn amdd_update_v(inp: &AmddInputs, est: &EffectiveChannels) -> Result<CMat> {
    let b = inp.data.v_stacked();
    let z_v = inp.data_residual(est, false, false, true, None);
    let mut gram = &b * b.adjoint();
    let mut rhs = &z_v * b.adjoint();
    for i in 0..2 {
        let p = phase2_v_regressor(inp.plan, i);
        let y = &inp.sig.y2[i] - est.h() * inp.plan.s2_pair(i).transpose();
        gram += p.transpose() * conj(&p);
        rhs += y * conj(&p);
    }
    solve_right_hpd(&rhs, &gram)
}

/// Fused LS update of `Q = [Q̄ Q̌]`.
pub fn amdd_update_q(inp: &AmddInputs, est: &EffectiveChannels) -> Result<CMat> {
    let plan = inp.plan;
    let b = &inp.data.c;
    let z_q = inp.data_residual(est, false, true, false, None);
    let r1 = plan.r_tilde();
    let r3 = plan.r3_tilde();
    let mut gram = b * b.adjoint() + r1.transpose() * conj(&r1);
    let mut rhs = &z_q * b.adjoint() + (&inp.sig.y1 - est.h() * plan.s1_pair().transpose()) * conj(&r1);
    let g3 = r3.transpose() * conj(&r3);
    for k in 0..plan.layout.k {
        for i in 0..2 {
            // Only the active tag reflects during its own stage.
            let p = phase3_u_regressor(plan, i);
            let y = &inp.sig.y3[k][i] - est.u(k) * p.transpose();
            gram += &g3;
            rhs += y * conj(&r3);
        }
    }
    solve_right_hpd(&rhs, &gram)
}

/// Fused LS update of `H = [h̄ ȟ]`.
pub fn amdd_update_h(inp: &AmddInputs, est: &EffectiveChannels) -> Result<CMat> {
    let plan = inp.plan;
    let b = &inp.data.x;
    let z_h = inp.data_residual(est, true, false, false, None);
    let s1 = plan.s1_pair();
    let mut gram = b * b.adjoint() + s1.transpose() * conj(&s1);
    let mut rhs = &z_h * b.adjoint() + (&inp.sig.y1 - est.q() * plan.r_tilde().transpose()) * conj(&s1);
    let v = AmddInputs::stacked_v(est);
    for i in 0..2 {
        let s2 = plan.s2_pair(i);
        let y = &inp.sig.y2[i] - &v * phase2_v_regressor(plan, i).transpose();
        gram += s2.transpose() * conj(&s2);
        rhs += y * conj(&s2);
    }
    solve_right_hpd(&rhs, &gram)
}

/// One alternating sweep `u_1 … u_K, v, q, h` starting from `init`.
pub fn amdd_sweep(inp: &AmddInputs, init: &EffectiveChannels) -> Result<EffectiveChannels> {
    let l = init.layout;
    let mut est = init.clone();
    for k in 0..l.k {
        let u = amdd_update_u(k, inp, &est)?;
        est.theta.columns_mut(l.u_cols(k).start, 4 * l.m).copy_from(&u);
    }
    let v = amdd_update_v(inp, &est)?;
    est.theta.columns_mut(l.v_cols().start, 4 * l.k).copy_from(&v);
    let q = amdd_update_q(inp, &est)?;
    est.theta.columns_mut(l.q_cols().start, 2 * l.m).copy_from(&q);
    let h = amdd_update_h(inp, &est)?;
    est.theta.columns_mut(l.h_cols().start, 2).copy_from(&h);
    Ok(est)
}

/// Output of the decision-directed estimator.
#[derive(Clone, Debug)]
pub struct AmddOutput {
    pub estimate: EstimateSet,
    /// Decisions made with the pilot estimates.
    pub detected: DetectedBlock,
    /// Pilot estimate the sweep started from.
    pub pilot: EstimateSet,
}

/// Pilot estimation, ML detection of the data block, then one fused sweep.
/// `c` holds the AP symbols of the data block, `D×M`.
pub fn amdd_estimate(
    sig: &TrainingSignals,
    z: &CMat,
    c: &CMat,
    plan: &PilotPlan,
    alphabet: &Alphabet,
) -> Result<AmddOutput> {
    let pilot = pilot_estimate(sig, plan)?;
    let detected = ml_detect(z, c, &pilot.channels, alphabet);
    let data = DataRegressors::from_detected(&detected, c);
    let inp = AmddInputs { sig, plan, z, data: &data };
    let channels = amdd_sweep(&inp, &pilot.channels)?;
    Ok(AmddOutput {
        estimate: EstimateSet {
            kind: EstimatorKind::Amdd,
            channels,
        },
        detected,
        pilot,
    })
}

/// Noise-free data block implied by `est` and the given symbols, `M×D`.
pub fn data_mean(est: &EffectiveChannels, data: &DataRegressors) -> CMat {
    let mut refs: Vec<&CMat> = vec![&data.x, &data.c];
    refs.extend(data.v.iter());
    refs.extend(data.u.iter());
    &est.theta * vstack(&refs)
}

