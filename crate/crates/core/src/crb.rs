//! Cramér–Rao bounds on the total squared error `E‖θ̂ − θ‖²`.
//!
//! Two routes are provided. The explicit one stacks every pilot block into
//! `A` (each block expanded by `⊗ I_M`), forms `I_θθ = AᴴA/σ̃²` and inverts the
//! real-parameter Fisher matrix. The structured one exploits
//! `AᴴA = conj(F) ⊗ I_M` with `F` the `P×P` Gram of the pilot regressors, so
//! the bound is `σ̃²·M·tr(F⁻¹)`. The semi-blind variant adds the expected
//! information of `D` data slots with independent, equiprobable symbols.

use nalgebra::{Cholesky, DMatrix};

use crate::amdd::{phase2_v_regressor, phase3_u_regressor};
use crate::channel::{Block, Layout};
use crate::detect::Alphabet;
use crate::ecm::{Moments, SlotMarginals};
use crate::error::{Error, Result};
use crate::linalg::{conj, hstack, kron, CMat, CVec, C64};
use crate::pilots::PilotPlan;

/// Parameter blocks in `θ` order with their index ranges.
pub fn theta_blocks(layout: Layout) -> Vec<(Block, std::ops::Range<usize>)> {
    let m = layout.m;
    let mut order = vec![Block::H, Block::Q, Block::V];
    order.extend((0..layout.k).map(Block::U));
    order
        .into_iter()
        .map(|b| {
            let c = layout.cols(b);
            (b, c.start * m..c.end * m)
        })
        .collect()
}

/// Stacked pilot model `vec(Y_pilot) = A·θ`, built phase by phase.
pub fn stacked_a(plan: &PilotPlan) -> CMat {
    let l = plan.layout;
    let eye = CMat::identity(l.m, l.m);
    let width = l.theta_len();
    let blocks = theta_blocks(l);
    let range = |b: Block| blocks.iter().find(|(x, _)| *x == b).unwrap().1.clone();
    let rows = l.m * plan.total_slots();
    let mut a = CMat::zeros(rows, width);
    let mut row = 0;
    let put = |a: &mut CMat, row: usize, b: Block, m: &CMat| {
        let e = kron(m, &eye);
        a.view_mut((row, range(b).start), e.shape()).copy_from(&e);
    };
    put(&mut a, row, Block::H, &plan.s1_pair());
    put(&mut a, row, Block::Q, &plan.r_tilde());
    row += l.m * plan.n1;
    for i in 0..2 {
        put(&mut a, row, Block::H, &plan.s2_pair(i));
        put(&mut a, row, Block::V, &phase2_v_regressor(plan, i));
        row += l.m * plan.n2;
    }
    let r3 = plan.r3_tilde();
    for k in 0..l.k {
        for i in 0..2 {
            put(&mut a, row, Block::Q, &r3);
            put(&mut a, row, Block::U(k), &phase3_u_regressor(plan, i));
            row += l.m * plan.n3;
        }
    }
    debug_assert_eq!(row, rows);
    a
}

/// `E[D̄* D̄ᵀ]` for one tag over equiprobable proper tag symbols, `4M×4M`,
/// given the AP symbols `c` (`D×M`).
pub fn c_check(c: &CMat) -> CMat {
    let m = c.ncols();
    let ch_c = c.adjoint() * c;
    let ct_cc = c.transpose() * conj(c);
    let ch_cc = c.adjoint() * conj(c);
    let ct_c = c.transpose() * c;
    let mut out = CMat::zeros(4 * m, 4 * m);
    let mut put = |i: usize, j: usize, b: &CMat| out.view_mut((i * m, j * m), (m, m)).copy_from(b);
    put(0, 0, &ch_c);
    put(0, 2, &ch_cc);
    put(1, 1, &ct_cc);
    put(1, 3, &ct_c);
    put(2, 0, &ct_c);
    put(2, 2, &ct_cc);
    put(3, 1, &ch_cc);
    put(3, 3, &ch_c);
    out
}

/// Expected data information `σ̃²·J̃` in `θ` coordinates: block diagonal with
/// `D·P_x·I` on `h` and `v`, `(C̃ᴴC̃) ⊗ I_M` on `q` and `Č ⊗ I_M` on each `u_k`.
pub fn data_information(layout: Layout, c: &CMat, lu_power: f64) -> CMat {
    let m = layout.m;
    let eye = CMat::identity(m, m);
    let d = c.nrows() as f64;
    let mut g = CMat::zeros(layout.theta_len(), layout.theta_len());
    let ctilde = hstack(&[c, &conj(c)]);
    let cc = kron(&(ctilde.adjoint() * &ctilde), &eye);
    let uu = kron(&c_check(c), &eye);
    for (b, r) in theta_blocks(layout) {
        let w = r.len();
        match b {
            Block::H | Block::V => g.view_mut((r.start, r.start), (w, w)).fill_diagonal(C64::from(d * lu_power)),
            Block::Q => g.view_mut((r.start, r.start), (w, w)).copy_from(&cc),
            Block::U(_) => g.view_mut((r.start, r.start), (w, w)).copy_from(&uu),
        }
    }
    g
}

/// Real-parameter Fisher matrix of `[Re θ; Im θ]` for a proper complex model
/// with information `I_θθ = g/σ̃²` and zero pseudo-information.
pub fn real_fisher(g: &CMat, sigma2: f64) -> DMatrix<f64> {
    let n = g.nrows();
    let s = 2.0 / sigma2;
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let v = g[(i % n, j % n)];
        s * match (i < n, j < n) {
            (true, true) | (false, false) => v.re,
            (true, false) => -v.im,
            (false, true) => v.im,
        }
    })
}

fn first_deficient_block(g: &CMat, layout: Layout) -> String {
    for (b, r) in theta_blocks(layout) {
        let w = r.len();
        let sub = g.view((r.start, r.start), (w, w)).into_owned();
        if !well_conditioned_chol(&sub) {
            return b.to_string();
        }
    }
    "coupled".to_string()
}

fn well_conditioned_chol(g: &CMat) -> bool {
    let scale = (0..g.nrows()).map(|i| g[(i, i)].re).fold(0.0, f64::max);
    match Cholesky::new(g.clone()) {
        Some(ch) => {
            let l = ch.l_dirty();
            (0..g.nrows()).all(|i| l[(i, i)].re * l[(i, i)].re > 1e-12 * scale)
        }
        None => false,
    }
}

fn trace_inverse_real(j: DMatrix<f64>) -> Option<f64> {
    let n = j.nrows();
    let scale = (0..n).map(|i| j[(i, i)]).fold(0.0, f64::max);
    let ch = Cholesky::new(j)?;
    let l = ch.l_dirty();
    if (0..n).any(|i| l[(i, i)] * l[(i, i)] <= 1e-12 * scale) {
        return None;
    }
    Some(ch.inverse().trace())
}

fn explicit_bound(g: &CMat, layout: Layout, sigma2: f64) -> Result<f64> {
    if sigma2 == 0.0 {
        return Ok(0.0);
    }
    trace_inverse_real(real_fisher(g, sigma2)).ok_or_else(|| Error::SingularFisher {
        block: first_deficient_block(g, layout),
    })
}

fn require_proper(alphabet: &Alphabet) -> Result<()> {
    let proper = |pts: &[C64]| {
        let n = pts.len() as f64;
        let mean: C64 = pts.iter().sum::<C64>() / n;
        let pseudo: C64 = pts.iter().map(|p| p * p).sum::<C64>() / n;
        mean.norm() < 1e-12 && pseudo.norm() < 1e-12 * pts.iter().map(|p| p.norm_sqr()).sum::<f64>().max(1e-300)
    };
    if !proper(&alphabet.lu) || !proper(&alphabet.tag) {
        return Err(Error::Unsupported(
            "semi-blind bound needs zero-mean proper LU and tag constellations (BPSK is improper)".into(),
        ));
    }
    Ok(())
}

/// Pilot-only bound through the stacked `A`.
pub fn pilot_crb_explicit(plan: &PilotPlan, sigma2: f64) -> Result<f64> {
    let a = stacked_a(plan);
    explicit_bound(&(a.adjoint() * &a), plan.layout, sigma2)
}

/// Semi-blind bound through the stacked `A` plus the closed-form data
/// information. `c` holds the AP symbols of the data block (`D×M`).
pub fn semiblind_crb_explicit(plan: &PilotPlan, c: &CMat, alphabet: &Alphabet, sigma2: f64) -> Result<f64> {
    require_proper(alphabet)?;
    let a = stacked_a(plan);
    let px = alphabet.lu.iter().map(|p| p.norm_sqr()).sum::<f64>() / alphabet.lu.len() as f64;
    let g = a.adjoint() * &a + data_information(plan.layout, c, px);
    explicit_bound(&g, plan.layout, sigma2)
}

/// Structured bound `σ̃²·M·tr(F⁻¹)`.
fn structured_bound(f: CMat, layout: Layout, sigma2: f64) -> Result<f64> {
    let p = f.nrows();
    let singular = || Error::SingularFisher {
        block: first_deficient_block(&kron(&conj(&f), &CMat::identity(layout.m, layout.m)), layout),
    };
    if !well_conditioned_chol(&f) {
        return Err(singular());
    }
    let inv = Cholesky::new(f.clone()).ok_or_else(singular)?.inverse();
    let tr: f64 = (0..p).map(|i| inv[(i, i)].re).sum();
    Ok(sigma2 * layout.m as f64 * tr)
}

/// Pilot regressor Gram `F = Φ_pilot Φ_pilotᴴ`.
pub fn pilot_gram(plan: &PilotPlan) -> CMat {
    let phi = plan.regressors();
    &phi * phi.adjoint()
}

pub fn pilot_crb(plan: &PilotPlan, sigma2: f64) -> Result<f64> {
    structured_bound(pilot_gram(plan), plan.layout, sigma2)
}

/// Semi-blind (modified) bound with `D = c.nrows()` data slots.
pub fn semiblind_crb(plan: &PilotPlan, c: &CMat, alphabet: &Alphabet, sigma2: f64) -> Result<f64> {
    require_proper(alphabet)?;
    let mut mom = Moments::zeros(plan.layout);
    mom.r = pilot_gram(plan);
    let marg = SlotMarginals::uniform(alphabet);
    for n in 0..c.nrows() {
        let cn: Vec<C64> = c.row(n).iter().copied().collect();
        mom.add_slot(alphabet, &marg, &cn, None);
    }
    structured_bound(mom.r, plan.layout, sigma2)
}

/// Finite-difference check of the proper-model assumption: returns
/// `(‖∂μ/∂θ*‖, ‖∂μ/∂θ‖)` for the pilot mean `μ(θ) = A·θ` evaluated through
/// the unvectorised model at `theta`.
pub fn wirtinger_check(plan: &PilotPlan, theta: &CVec, step: f64) -> (f64, f64) {
    let l = plan.layout;
    let phi = plan.regressors();
    let mean = |t: &CVec| {
        let th = crate::linalg::unvec(t, l.m, l.regressor_len());
        crate::linalg::vec_of(&(th * &phi))
    };
    let mut conj_part = 0.0;
    let mut holo_part = 0.0;
    for i in 0..theta.len() {
        let mut tr = theta.clone();
        tr[i] += C64::new(step, 0.0);
        let mut ti = theta.clone();
        ti[i] += C64::new(0.0, step);
        let base = mean(theta);
        let dr = (mean(&tr) - &base) / C64::from(step);
        let di = (mean(&ti) - &base) / C64::from(step);
        // ∂/∂θ = (∂_re − j∂_im)/2, ∂/∂θ* = (∂_re + j∂_im)/2
        let j = C64::new(0.0, 1.0);
        holo_part += ((&dr - &di * j) * C64::from(0.5)).norm_squared();
        conj_part += ((&dr + &di * j) * C64::from(0.5)).norm_squared();
    }
    (conj_part.sqrt(), holo_part.sqrt())
}
