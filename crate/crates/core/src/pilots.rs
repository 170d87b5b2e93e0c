//! DFT-based training sequences for the three pilot phases.
//!
//! Phase 1 (tags absorbing): the LU sends `s1`, the AP sends the columns of
//! `R`. Phase 2 (AP silent): the LU sends `√P_T·1` then `j√P_T·1` while every
//! tag sends its unit-modulus sequence `t_k`. Phase 3 (LU silent): for each
//! tag in turn the AP sends `R3` while the tag holds the constant `1`, then
//! `j`; all other tags are silent.
//!
//! Every sequence is a DFT column that is neither real nor the conjugate of
//! another chosen column, which makes all sequences mutually orthogonal and
//! orthogonal to every conjugate.

use serde::{Deserialize, Serialize};

use crate::channel::Layout;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{conj, hstack, CMat, CVec, C64, J, ONE, ZERO};

/// Unitary `N`-point DFT matrix, `F[i][j] = e^{−j2π ij/N}/√N`.
pub fn dft_matrix(n: usize) -> CMat {
    let scale = 1.0 / (n as f64).sqrt();
    CMat::from_fn(n, n, |i, j| {
        let k = (i * j) % n;
        C64::from_polar(scale, -std::f64::consts::TAU * k as f64 / n as f64)
    })
}

/// Picks `count` DFT column indices, skipping real columns and conjugates.
pub fn select_pilot_columns(n: usize, count: usize) -> Result<Vec<usize>> {
    if n % 2 != 0 {
        return Err(Error::Config(format!("pilot length {n} must be even")));
    }
    let available = n.saturating_sub(2) / 2;
    if count > available {
        return Err(Error::Capacity {
            size: n,
            requested: count,
            available,
        });
    }
    let mut taken = vec![false; n];
    let mut out = Vec::with_capacity(count);
    for idx in 1..n {
        if out.len() == count {
            break;
        }
        if idx == n / 2 || taken[n - idx] {
            continue;
        }
        taken[idx] = true;
        out.push(idx);
    }
    Ok(out)
}

fn dft_columns(n: usize, idx: &[usize], scale: f64) -> CMat {
    let f = dft_matrix(n);
    CMat::from_fn(n, idx.len(), |i, j| f[(i, idx[j])] * scale)
}

/// The full training schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct PilotPlan {
    pub layout: Layout,
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    /// Per-symbol transmit power of LU and AP pilots.
    pub power: f64,
    pub phase1_columns: Vec<usize>,
    pub phase2_columns: Vec<usize>,
    pub phase3_columns: Vec<usize>,
    /// LU sequence of phase 1 (`N1`).
    pub s1: CVec,
    /// AP sequences of phase 1 (`N1×M`).
    pub r: CMat,
    /// Tag sequences of phase 2 (`N2×K`), unit modulus.
    pub t: CMat,
    /// Constant LU symbols of the two phase-2 sub-phases.
    pub lu2: [C64; 2],
    /// AP sequences of phase 3 (`N3×M`).
    pub r3: CMat,
    /// Constant tag symbols of the two phase-3 sub-stages.
    pub tag3: [C64; 2],
}

/// Serializable description of a plan: column choices and scale factors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub antennas: usize,
    pub tags: usize,
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub total_slots: usize,
    pub phase1_columns: Vec<usize>,
    pub phase2_columns: Vec<usize>,
    pub phase3_columns: Vec<usize>,
    pub phase1_scale: f64,
    pub phase2_tag_scale: f64,
    pub phase2_lu_scale: f64,
    pub phase3_scale: f64,
}

impl PilotPlan {
    pub fn build(cfg: &SystemConfig) -> Result<Self> {
        let layout = Layout::of(cfg);
        let (m, k) = (layout.m, layout.k);
        let p = cfg.transmit_power;
        let c1 = select_pilot_columns(cfg.n1, m + 1)?;
        let c2 = select_pilot_columns(cfg.n2, k)?;
        let c3 = select_pilot_columns(cfg.n3, m)?;
        let p1 = dft_columns(cfg.n1, &c1, (cfg.n1 as f64 * p).sqrt());
        let s1 = p1.column(0).into_owned();
        let r = p1.columns(1, m).into_owned();
        let t = dft_columns(cfg.n2, &c2, (cfg.n2 as f64).sqrt());
        let r3 = dft_columns(cfg.n3, &c3, (cfg.n3 as f64 * p).sqrt());
        let a = C64::from(p.sqrt());
        let plan = PilotPlan {
            layout,
            n1: cfg.n1,
            n2: cfg.n2,
            n3: cfg.n3,
            power: p,
            phase1_columns: c1,
            phase2_columns: c2,
            phase3_columns: c3,
            s1,
            r,
            t,
            lu2: [a, a * J],
            r3,
            tag3: [ONE, J],
        };
        debug_assert_eq!(plan.total_slots(), cfg.pilot_slots());
        Ok(plan)
    }

    /// `N1 + 2·N2 + 2·K·N3`.
    pub fn total_slots(&self) -> usize {
        self.n1 + 2 * self.n2 + 2 * self.layout.k * self.n3
    }

    pub fn summary(&self) -> PlanSummary {
        PlanSummary {
            antennas: self.layout.m,
            tags: self.layout.k,
            n1: self.n1,
            n2: self.n2,
            n3: self.n3,
            total_slots: self.total_slots(),
            phase1_columns: self.phase1_columns.clone(),
            phase2_columns: self.phase2_columns.clone(),
            phase3_columns: self.phase3_columns.clone(),
            phase1_scale: (self.n1 as f64 * self.power).sqrt(),
            phase2_tag_scale: (self.n2 as f64).sqrt(),
            phase2_lu_scale: self.power.sqrt(),
            phase3_scale: (self.n3 as f64 * self.power).sqrt(),
        }
    }

    /// `S1 = [s1 s1*]`.
    pub fn s1_pair(&self) -> CMat {
        let s = CMat::from_column_slice(self.n1, 1, self.s1.as_slice());
        hstack(&[&s, &conj(&s)])
    }

    /// `R̃ = [R R*]`.
    pub fn r_tilde(&self) -> CMat {
        hstack(&[&self.r, &conj(&self.r)])
    }

    /// `S2^(i) = [s2 s2*]` for the constant LU sequence of sub-phase `i`.
    pub fn s2_pair(&self, i: usize) -> CMat {
        let a = self.lu2[i];
        CMat::from_fn(self.n2, 2, |_, j| if j == 0 { a } else { a.conj() })
    }

    /// `T = [t_1 … t_K t_1* … t_K*]`.
    pub fn t_matrix(&self) -> CMat {
        hstack(&[&self.t, &conj(&self.t)])
    }

    /// `R̃3 = [R3 R3*]`.
    pub fn r3_tilde(&self) -> CMat {
        hstack(&[&self.r3, &conj(&self.r3)])
    }

    /// Gram matrix of `[s1, s1*, r_1, r_1*, …]` (any ordering is equivalent).
    pub fn phase1_gram(&self) -> CMat {
        let p = hstack(&[&self.s1_pair(), &self.r_tilde()]);
        p.adjoint() * p
    }

    pub fn phase2_gram(&self) -> CMat {
        let t = self.t_matrix();
        t.adjoint() * t
    }

    pub fn phase3_gram(&self) -> CMat {
        let r = self.r3_tilde();
        r.adjoint() * r
    }

    /// Symbols `(s, r, t)` of every pilot slot, in the canonical order:
    /// phase 1, phase 2 sub-phases 1 and 2, then phase 3 stage by stage.
    pub fn slots(&self) -> Vec<(C64, Vec<C64>, Vec<C64>)> {
        let (m, k) = (self.layout.m, self.layout.k);
        let mut out = Vec::with_capacity(self.total_slots());
        let silent_tags = vec![ZERO; k];
        for n in 0..self.n1 {
            let r: Vec<C64> = self.r.row(n).iter().copied().collect();
            out.push((self.s1[n], r, silent_tags.clone()));
        }
        for i in 0..2 {
            for n in 0..self.n2 {
                let t: Vec<C64> = self.t.row(n).iter().copied().collect();
                out.push((self.lu2[i], vec![ZERO; m], t));
            }
        }
        for tag in 0..k {
            for i in 0..2 {
                let mut t = silent_tags.clone();
                t[tag] = self.tag3[i];
                for n in 0..self.n3 {
                    let r: Vec<C64> = self.r3.row(n).iter().copied().collect();
                    out.push((ZERO, r, t.clone()));
                }
            }
        }
        out
    }

    /// Column offset of phase-3 block `(tag, sub-stage)` in the stacked order.
    pub fn phase3_offset(&self, tag: usize, i: usize) -> usize {
        self.n1 + 2 * self.n2 + (2 * tag + i) * self.n3
    }

    /// Regressors of every pilot slot as the columns of a `P×N_tot` matrix.
    pub fn regressors(&self) -> CMat {
        let l = self.layout;
        let slots = self.slots();
        let mut phi = CMat::zeros(l.regressor_len(), slots.len());
        for (n, (s, r, t)) in slots.iter().enumerate() {
            l.regressor_into(*s, r, t, phi.column_mut(n).as_mut_slice());
        }
        phi
    }
}
