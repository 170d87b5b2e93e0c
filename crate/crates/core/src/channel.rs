//! Physical channel draws and the effective (I/Q-distorted) parameterisation.
//!
//! All effective channels are kept as the columns of one `M×P` matrix
//! `Θ = [H Q V_1 … V_K U_1 … U_K]` with
//!
//! * `H = [h̄ ȟ]`, `Q = [Q̄ Q̌]`,
//! * `V_k = [v̄_k v̌_k v̈_k v̇_k]`, `U_k = [Ū_k Ǔ_k Ü_k U̇_k]`.
//!
//! Every received slot is then `ỹ = Θ·φ(s, r, t) + w̃` for a regressor `φ`
//! built by [`Layout::regressor`], and the stacked parameter vector is
//! simply `θ = vec(Θ)`.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::{IqSpec, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::{conj, conj_vec, frob2, CMat, CVec, C64, ZERO};

/// Column bookkeeping for `Θ` with `M` antennas and `K` tags.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub m: usize,
    pub k: usize,
}

/// A contiguous group of columns of `Θ` that is updated as one unit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    H,
    Q,
    /// All tag-LU cascades `[V_1 … V_K]` together.
    V,
    /// The tag-AP cascade of one tag.
    U(usize),
}

impl std::fmt::Display for Block {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Block::H => write!(f, "h"),
            Block::Q => write!(f, "q"),
            Block::V => write!(f, "v"),
            Block::U(k) => write!(f, "u{}", k + 1),
        }
    }
}

impl Layout {
    pub fn new(m: usize, k: usize) -> Self {
        Layout { m, k }
    }

    pub fn of(cfg: &SystemConfig) -> Self {
        Layout::new(cfg.antennas, cfg.tags)
    }

    /// Regressor length `P = 2 + 2M + 4K + 4KM`.
    pub fn regressor_len(&self) -> usize {
        2 + 2 * self.m + 4 * self.k + 4 * self.k * self.m
    }

    /// Length of `θ`: `2M + 2M² + 4KM + 4KM²`.
    pub fn theta_len(&self) -> usize {
        self.m * self.regressor_len()
    }

    pub fn h_cols(&self) -> std::ops::Range<usize> {
        0..2
    }

    pub fn q_cols(&self) -> std::ops::Range<usize> {
        2..2 + 2 * self.m
    }

    pub fn v_cols(&self) -> std::ops::Range<usize> {
        let s = 2 + 2 * self.m;
        s..s + 4 * self.k
    }

    pub fn vk_cols(&self, k: usize) -> std::ops::Range<usize> {
        let s = 2 + 2 * self.m + 4 * k;
        s..s + 4
    }

    pub fn u_cols(&self, k: usize) -> std::ops::Range<usize> {
        let s = 2 + 2 * self.m + 4 * self.k + 4 * self.m * k;
        s..s + 4 * self.m
    }

    pub fn cols(&self, b: Block) -> std::ops::Range<usize> {
        match b {
            Block::H => self.h_cols(),
            Block::Q => self.q_cols(),
            Block::V => self.v_cols(),
            Block::U(k) => self.u_cols(k),
        }
    }

    /// Blocks in the order the semi-blind estimators update them.
    pub fn update_order(&self) -> Vec<Block> {
        let mut order: Vec<Block> = (0..self.k).map(Block::U).collect();
        order.extend([Block::V, Block::Q, Block::H]);
        order
    }

    /// Writes `φ(s, r, t)` into `out` (length `P`).
    pub fn regressor_into(&self, s: C64, r: &[C64], t: &[C64], out: &mut [C64]) {
        debug_assert_eq!(r.len(), self.m);
        debug_assert_eq!(t.len(), self.k);
        let m = self.m;
        out[0] = s;
        out[1] = s.conj();
        let q = self.q_cols().start;
        for i in 0..m {
            out[q + i] = r[i];
            out[q + m + i] = r[i].conj();
        }
        for (k, &tk) in t.iter().enumerate() {
            let v = self.vk_cols(k).start;
            out[v] = s * tk;
            out[v + 1] = s.conj() * tk.conj();
            out[v + 2] = s.conj() * tk;
            out[v + 3] = s * tk.conj();
            let u = self.u_cols(k).start;
            for i in 0..m {
                out[u + i] = r[i] * tk;
                out[u + m + i] = r[i].conj() * tk.conj();
                out[u + 2 * m + i] = r[i].conj() * tk;
                out[u + 3 * m + i] = r[i] * tk.conj();
            }
        }
    }

    pub fn regressor(&self, s: C64, r: &[C64], t: &[C64]) -> CVec {
        let mut out = CVec::zeros(self.regressor_len());
        self.regressor_into(s, r, t, out.as_mut_slice());
        out
    }
}

/// Transmit (`G1`, `G2`) and receive (`K1`, `K2`) I/Q imbalance coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IqParams {
    pub g1: C64,
    pub g2: C64,
    pub k1: C64,
    pub k2: C64,
}

impl IqParams {
    /// Coefficients for amplitude imbalances `g_t`, `g_r` and phase imbalances
    /// `phi_t`, `phi_r` (radians).
    pub fn from_imbalance(g_t: f64, phi_t: f64, g_r: f64, phi_r: f64) -> Self {
        let half = 0.5;
        IqParams {
            g1: (C64::new(1.0, 0.0) + C64::from_polar(g_t, phi_t)) * half,
            g2: (C64::new(1.0, 0.0) - C64::from_polar(g_t, -phi_t)) * half,
            k1: (C64::new(1.0, 0.0) + C64::from_polar(g_r, phi_r)) * half,
            k2: (C64::new(1.0, 0.0) - C64::from_polar(g_r, -phi_r)) * half,
        }
    }

    pub fn balanced() -> Self {
        IqParams::from_imbalance(1.0, 0.0, 1.0, 0.0)
    }

    /// Draws the phases left open in `spec`.
    pub fn sample<R: Rng + ?Sized>(spec: &IqSpec, rng: &mut R) -> Self {
        let (lo, hi) = spec.phase_range;
        let mut draw = |fixed: Option<f64>| match fixed {
            Some(p) => p,
            None if hi > lo => rng.random_range(lo..hi),
            None => lo,
        };
        let phi_t = draw(spec.tx_phase);
        let phi_r = draw(spec.rx_phase);
        IqParams::from_imbalance(spec.tx_gain, phi_t, spec.rx_gain, phi_r)
    }

    /// Factor `|K1|² + |K2|²` relating the receiver noise power to the
    /// variance of the effective noise.
    pub fn noise_gain(&self) -> f64 {
        self.k1.norm_sqr() + self.k2.norm_sqr()
    }
}

/// Free-space-style pathloss `(λ/(4π d_o))² (d_o/d)^γ`.
pub fn pathloss(d: f64, cfg: &SystemConfig) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("pathloss distance must be positive, got {d}")));
    }
    let d0 = cfg.reference_distance;
    let base = cfg.wavelength() / (4.0 * std::f64::consts::PI * d0);
    Ok(base * base * (d0 / d).powf(cfg.pathloss_exponent))
}

/// One realisation of the small- and large-scale fading.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalChannels {
    /// LU→AP small-scale fading.
    pub a: CVec,
    /// LU→tag small-scale fading, one scalar per tag.
    pub f: Vec<C64>,
    /// Tag→AP small-scale fading, one vector per tag.
    pub g: Vec<CVec>,
    /// Residual self-interference channel.
    pub q_o: CMat,
    pub h_o: CVec,
    pub v: Vec<CVec>,
    pub u: Vec<CMat>,
}

/// Nakagami-m coefficient with unit mean-square amplitude and uniform phase.
pub fn nakagami<R: Rng + ?Sized>(m: f64, rng: &mut R) -> C64 {
    let gamma = Gamma::new(m, 1.0 / m).expect("Nakagami shape validated");
    let power: f64 = gamma.sample(rng);
    let phase = rng.random::<f64>() * std::f64::consts::TAU;
    C64::from_polar(power.sqrt(), phase)
}

/// Circularly-symmetric complex Gaussian sample with the given variance.
pub fn complex_normal<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(s * re, s * im)
}

pub fn sample_channels<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<PhysicalChannels> {
    let m = cfg.antennas;
    let nm = cfg.nakagami_m;
    let a = CVec::from_fn(m, |_, _| nakagami(nm, rng));
    let f: Vec<C64> = (0..cfg.tags).map(|_| nakagami(nm, rng)).collect();
    let g: Vec<CVec> = (0..cfg.tags)
        .map(|_| CVec::from_fn(m, |_, _| nakagami(nm, rng)))
        .collect();
    let q_o = CMat::from_fn(m, m, |_, _| complex_normal(cfg.rsi_variance, rng));
    assemble(cfg, a, f, g, q_o)
}

/// Applies pathloss and reflection to raw fading draws.
pub fn assemble(
    cfg: &SystemConfig,
    a: CVec,
    f: Vec<C64>,
    g: Vec<CVec>,
    q_o: CMat,
) -> Result<PhysicalChannels> {
    let h_o = &a * C64::from(pathloss(cfg.lu_ap_distance, cfg)?.sqrt());
    let mut v = Vec::with_capacity(cfg.tags);
    let mut u = Vec::with_capacity(cfg.tags);
    for k in 0..cfg.tags {
        let l_tag = pathloss(cfg.tag_ap_distance.get(k), cfg)?;
        let l_lu = pathloss(cfg.lu_tag_distance.get(k), cfg)?;
        let eta = cfg.reflection.get(k);
        v.push(&g[k] * (f[k] * (l_tag * l_lu).sqrt() * eta));
        u.push(&g[k] * g[k].transpose() * C64::from(l_tag * eta));
    }
    Ok(PhysicalChannels {
        a,
        f,
        g,
        q_o,
        h_o,
        v,
        u,
    })
}

/// Effective channels stored as `Θ = [H Q V_1 … V_K U_1 … U_K]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveChannels {
    pub layout: Layout,
    pub theta: CMat,
}

macro_rules! column_accessor {
    ($($name:ident => $col:expr;)*) => {
        $(
            pub fn $name(&self, k: usize) -> CVec {
                let c = self.layout.vk_cols(k).start + $col;
                self.theta.column(c).into_owned()
            }
        )*
    };
}

macro_rules! matrix_accessor {
    ($($name:ident => $blk:expr;)*) => {
        $(
            pub fn $name(&self, k: usize) -> CMat {
                let m = self.layout.m;
                let c = self.layout.u_cols(k).start + $blk * m;
                self.theta.columns(c, m).into_owned()
            }
        )*
    };
}

impl EffectiveChannels {
    pub fn zeros(layout: Layout) -> Self {
        EffectiveChannels {
            layout,
            theta: CMat::zeros(layout.m, layout.regressor_len()),
        }
    }

    pub fn from_matrix(layout: Layout, theta: CMat) -> Result<Self> {
        if theta.shape() != (layout.m, layout.regressor_len()) {
            return Err(Error::Dimension(format!(
                "channel matrix is {}x{}, expected {}x{}",
                theta.nrows(),
                theta.ncols(),
                layout.m,
                layout.regressor_len()
            )));
        }
        Ok(EffectiveChannels { layout, theta })
    }

    pub fn block(&self, b: Block) -> CMat {
        let r = self.layout.cols(b);
        self.theta.columns(r.start, r.len()).into_owned()
    }

    pub fn set_block(&mut self, b: Block, value: &CMat) {
        let r = self.layout.cols(b);
        assert_eq!(value.shape(), (self.layout.m, r.len()), "block {b} shape");
        self.theta.columns_mut(r.start, r.len()).copy_from(value);
    }

    /// `H = [h̄ ȟ]`.
    pub fn h(&self) -> CMat {
        self.block(Block::H)
    }

    /// `Q = [Q̄ Q̌]`.
    pub fn q(&self) -> CMat {
        self.block(Block::Q)
    }

    /// `V_k = [v̄_k v̌_k v̈_k v̇_k]`.
    pub fn v(&self, k: usize) -> CMat {
        let r = self.layout.vk_cols(k);
        self.theta.columns(r.start, 4).into_owned()
    }

    /// `U_k = [Ū_k Ǔ_k Ü_k U̇_k]`.
    pub fn u(&self, k: usize) -> CMat {
        self.block(Block::U(k))
    }

    pub fn h_bar(&self) -> CVec {
        self.theta.column(0).into_owned()
    }

    pub fn h_check(&self) -> CVec {
        self.theta.column(1).into_owned()
    }

    pub fn q_bar(&self) -> CMat {
        self.theta.columns(2, self.layout.m).into_owned()
    }

    pub fn q_check(&self) -> CMat {
        self.theta.columns(2 + self.layout.m, self.layout.m).into_owned()
    }

    column_accessor! {
        v_bar => 0;
        v_check => 1;
        v_ddot => 2;
        v_dot => 3;
    }

    matrix_accessor! {
        u_bar => 0;
        u_check => 1;
        u_ddot => 2;
        u_dot => 3;
    }

    /// `θ = [h; q; v; u]`, which is exactly the column-major `vec(Θ)`.
    pub fn pack(&self) -> CVec {
        CVec::from_column_slice(self.theta.as_slice())
    }

    pub fn unpack(layout: Layout, theta: &CVec) -> Result<Self> {
        if theta.len() != layout.theta_len() {
            return Err(Error::Dimension(format!(
                "parameter vector has length {}, expected {}",
                theta.len(),
                layout.theta_len()
            )));
        }
        Ok(EffectiveChannels {
            layout,
            theta: CMat::from_column_slice(layout.m, layout.regressor_len(), theta.as_slice()),
        })
    }

    /// Noise-free received vector for one slot.
    pub fn response(&self, s: C64, r: &[C64], t: &[C64]) -> CVec {
        &self.theta * self.layout.regressor(s, r, t)
    }

    /// Total squared distance `‖θ̂ − θ‖²`.
    pub fn sq_error(&self, truth: &EffectiveChannels) -> f64 {
        frob2(&(&self.theta - &truth.theta))
    }

    /// Squared error split as (h, q, v, u).
    pub fn block_errors(&self, truth: &EffectiveChannels) -> BlockErrors {
        let e = &self.theta - &truth.theta;
        let part = |r: std::ops::Range<usize>| frob2(&e.columns(r.start, r.len()).into_owned());
        let l = self.layout;
        BlockErrors {
            h: part(l.h_cols()),
            q: part(l.q_cols()),
            v: part(l.v_cols()),
            u: (0..l.k).map(|k| part(l.u_cols(k))).sum(),
        }
    }
}

/// Squared estimation error per parameter group.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockErrors {
    pub h: f64,
    pub q: f64,
    pub v: f64,
    pub u: f64,
}

impl BlockErrors {
    pub fn total(&self) -> f64 {
        self.h + self.q + self.v + self.u
    }

    pub fn add(&mut self, o: &BlockErrors) {
        self.h += o.h;
        self.q += o.q;
        self.v += o.v;
        self.u += o.u;
    }

    pub fn scale(&mut self, s: f64) {
        self.h *= s;
        self.q *= s;
        self.v *= s;
        self.u *= s;
    }
}

/// Folds the I/Q coefficients into the physical channels.
pub fn derive_effective(phys: &PhysicalChannels, iq: &IqParams) -> EffectiveChannels {
    let m = phys.h_o.len();
    let layout = Layout::new(m, phys.v.len());
    let IqParams { g1, g2, k1, k2 } = *iq;
    let mut eff = EffectiveChannels::zeros(layout);

    let h_conj = conj_vec(&phys.h_o);
    let h_bar = &phys.h_o * (k1 * g1) + &h_conj * (k2 * g2.conj());
    let h_check = &phys.h_o * (k1 * g2) + &h_conj * (k2 * g1.conj());
    eff.theta.set_column(0, &h_bar);
    eff.theta.set_column(1, &h_check);

    let q_conj = conj(&phys.q_o);
    let q_bar = &phys.q_o * (k1 * g1) + &q_conj * (k2 * g2.conj());
    let q_check = &phys.q_o * (k1 * g2) + &q_conj * (k2 * g1.conj());
    eff.theta.columns_mut(2, m).copy_from(&q_bar);
    eff.theta.columns_mut(2 + m, m).copy_from(&q_check);

    for (k, (v, u)) in phys.v.iter().zip(&phys.u).enumerate() {
        let vc = conj_vec(v);
        let c = layout.vk_cols(k).start;
        eff.theta.set_column(c, &(v * (k1 * g1)));
        eff.theta.set_column(c + 1, &(&vc * (k2 * g1.conj())));
        eff.theta.set_column(c + 2, &(v * (k1 * g2)));
        eff.theta.set_column(c + 3, &(&vc * (k2 * g2.conj())));

        let uc = conj(u);
        let c = layout.u_cols(k).start;
        eff.theta.columns_mut(c, m).copy_from(&(u * (k1 * g1)));
        eff.theta.columns_mut(c + m, m).copy_from(&(&uc * (k2 * g1.conj())));
        eff.theta.columns_mut(c + 2 * m, m).copy_from(&(u * (k1 * g2)));
        eff.theta.columns_mut(c + 3 * m, m).copy_from(&(&uc * (k2 * g2.conj())));
    }
    eff
}

/// Which estimator produced a set of channel estimates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Pilot,
    Amdd,
    Ecm,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Pilot => "pilot",
            EstimatorKind::Amdd => "amdd",
            EstimatorKind::Ecm => "ecm",
        }
    }
}

/// Channel estimates tagged with their origin.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateSet {
    pub kind: EstimatorKind,
    pub channels: EffectiveChannels,
}

/// Whether every entry of `m` is exactly zero.
pub fn is_zero(m: &CMat) -> bool {
    m.iter().all(|&z| z == ZERO)
}
