//! Three-phase least-squares channel estimation from the pilot blocks.

use crate::channel::{EffectiveChannels, EstimateSet, EstimatorKind, Layout};
use crate::error::Result;
use crate::linalg::{hstack, ls_right, CMat, C64};
use crate::pilots::PilotPlan;
use crate::synth::TrainingSignals;

/// Phase 1: joint LS of `H = [h̄ ȟ]` and `Q = [Q̄ Q̌]` from
/// `Y1 = H·S1ᵀ + Q·R̃ᵀ + W`.
pub fn estimate_phase1(y1: &CMat, plan: &PilotPlan) -> Result<(CMat, CMat)> {
    let p = hstack(&[&plan.s1_pair(), &plan.r_tilde()]);
    let x = ls_right(y1, &p.transpose())?;
    let h = x.columns(0, 2).into_owned();
    let q = x.columns(2, 2 * plan.layout.m).into_owned();
    Ok((h, q))
}

/// Aggregates `[ṽ̄_1 … ṽ̄_K ṽ̌_1 … ṽ̌_K]` (sub-phase 1) or
/// `[v̄̄_1 … v̄̄_K v̄̌_1 … v̄̌_K]` (sub-phase 2) after removing the direct path.
pub fn phase2_aggregates(y2: &CMat, h: &CMat, plan: &PilotPlan, sub: usize) -> Result<CMat> {
    let residual = y2 - h * plan.s2_pair(sub).transpose();
    let phi = (plan.t_matrix() * plan.lu2[sub]).transpose();
    ls_right(&residual, &phi)
}

/// Splits the two sets of phase-2 aggregates into `V_k = [v̄ v̌ v̈ v̇]`.
pub fn recombine_v(a1: &CMat, a2: &CMat, k_tags: usize) -> Vec<CMat> {
    let half = C64::new(0.5, 0.0);
    (0..k_tags)
        .map(|k| {
            let (sum_bar, dif_bar) = (a1.column(k), a2.column(k));
            let (sum_chk, dif_chk) = (a1.column(k_tags + k), a2.column(k_tags + k));
            let v_bar = (sum_bar + dif_bar) * half;
            let v_ddot = (sum_bar - dif_bar) * half;
            let v_dot = (sum_chk + dif_chk) * half;
            let v_check = (sum_chk - dif_chk) * half;
            let mut v = CMat::zeros(a1.nrows(), 4);
            for (c, col) in [v_bar, v_check, v_ddot, v_dot].iter().enumerate() {
                v.set_column(c, col);
            }
            v
        })
        .collect()
}

/// Phase 2: `V_1 … V_K` from both sub-phases, given the phase-1 `Ĥ`.
pub fn estimate_phase2(y2: &[CMat; 2], h: &CMat, plan: &PilotPlan) -> Result<Vec<CMat>> {
    let a1 = phase2_aggregates(&y2[0], h, plan, 0)?;
    let a2 = phase2_aggregates(&y2[1], h, plan, 1)?;
    Ok(recombine_v(&a1, &a2, plan.layout.k))
}

/// Aggregates `[Ũ̄_k Ũ̌_k]` (sub-stage 1) or `[Ū̄_k Ū̌_k]` (sub-stage 2)
/// after removing the self-interference.
pub fn phase3_aggregates(y3: &CMat, q: &CMat, plan: &PilotPlan, sub: usize) -> Result<CMat> {
    let r3t = plan.r3_tilde();
    let residual = y3 - q * r3t.transpose();
    let phi = (r3t * plan.tag3[sub]).transpose();
    ls_right(&residual, &phi)
}

/// Splits the two phase-3 aggregates of one tag into `U_k = [Ū Ǔ Ü U̇]`.
pub fn recombine_u(a1: &CMat, a2: &CMat, m: usize) -> CMat {
    let half = C64::new(0.5, 0.0);
    let (sum_bar, dif_bar) = (a1.columns(0, m), a2.columns(0, m));
    let (sum_chk, dif_chk) = (a1.columns(m, m), a2.columns(m, m));
    let u_bar = (sum_bar + dif_bar) * half;
    let u_dot = (sum_bar - dif_bar) * half;
    let u_ddot = (sum_chk + dif_chk) * half;
    let u_check = (sum_chk - dif_chk) * half;
    hstack(&[&u_bar, &u_check, &u_ddot, &u_dot])
}

/// Phase 3: `U_1 … U_K`, given the phase-1 `Q̂`.
pub fn estimate_phase3(y3: &[[CMat; 2]], q: &CMat, plan: &PilotPlan) -> Result<Vec<CMat>> {
    y3.iter()
        .map(|pair| {
            let a1 = phase3_aggregates(&pair[0], q, plan, 0)?;
            let a2 = phase3_aggregates(&pair[1], q, plan, 1)?;
            Ok(recombine_u(&a1, &a2, plan.layout.m))
        })
        .collect()
}

/// Runs the three phases in order, each cancelling with the previous ones.
pub fn pilot_estimate(sig: &TrainingSignals, plan: &PilotPlan) -> Result<EstimateSet> {
    let (h, q) = estimate_phase1(&sig.y1, plan)?;
    let v = estimate_phase2(&sig.y2, &h, plan)?;
    let u = estimate_phase3(&sig.y3, &q, plan)?;
    Ok(EstimateSet {
        kind: EstimatorKind::Pilot,
        channels: assemble_estimate(plan.layout, &h, &q, &v, &u),
    })
}

pub(crate) fn assemble_estimate(layout: Layout, h: &CMat, q: &CMat, v: &[CMat], u: &[CMat]) -> EffectiveChannels {
    let mut blocks: Vec<&CMat> = vec![h, q];
    blocks.extend(v.iter());
    blocks.extend(u.iter());
    EffectiveChannels {
        layout,
        theta: hstack(&blocks),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rel_err;

    #[test]
    fn recombination_inverts_aggregation() {
        let m = 3;
        let u = CMat::from_fn(m, 4 * m, |i, j| C64::new(i as f64 - 0.3 * j as f64, (i * j) as f64 * 0.1));
        let col = |b: usize| u.columns(b * m, m).into_owned();
        let (ub, uc, udd, ud) = (col(0), col(1), col(2), col(3));
        let a1 = hstack(&[&(&ub + &ud), &(&uc + &udd)]);
        let a2 = hstack(&[&(&ub - &ud), &(&udd - &uc)]);
        assert!(rel_err(&recombine_u(&a1, &a2, m), &u) < 1e-15);
    }
}
