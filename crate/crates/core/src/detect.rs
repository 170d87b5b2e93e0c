//! Exhaustive joint detection of the LU symbol and all tag symbols.
//!
//! A hypothesis is a pair `(λ, ρ)` with `λ` an LU constellation point and
//! `ρ ∈ 𝒟^K` one tag symbol per tag. Hypotheses are numbered
//! `λ·D̄^K + Σ_k ρ_k·D̄^(K−1−k)`, so tag 1 is the most significant tag digit.
//! Ties in the ML rule go to the lowest index.

use crate::channel::EffectiveChannels;
use crate::config::{Constellation, SystemConfig};
use crate::linalg::{CMat, C64, ZERO};

/// Symbol alphabets of one link.
#[derive(Clone, Debug, PartialEq)]
pub struct Alphabet {
    pub lu: Vec<C64>,
    pub tag: Vec<C64>,
    pub tags: usize,
}

impl Alphabet {
    pub fn new(lu: Vec<C64>, tag: Vec<C64>, tags: usize) -> Self {
        Alphabet { lu, tag, tags }
    }

    pub fn of(cfg: &SystemConfig) -> Self {
        Alphabet::from_constellations(cfg.lu_constellation, cfg.tag_constellation, cfg.transmit_power, cfg.tags)
    }

    pub fn from_constellations(lu: Constellation, tag: Constellation, power: f64, tags: usize) -> Self {
        Alphabet::new(lu.points(power), tag.points(1.0), tags)
    }

    /// `S̄·D̄^K`.
    pub fn hypotheses(&self) -> usize {
        self.lu.len() * self.tag.len().pow(self.tags as u32)
    }

    pub fn index(&self, lu: usize, tags: &[usize]) -> usize {
        let dbar = self.tag.len();
        tags.iter().fold(lu, |acc, &r| acc * dbar + r)
    }

    /// Inverse of [`Alphabet::index`].
    pub fn decode(&self, mut idx: usize) -> (usize, Vec<usize>) {
        let dbar = self.tag.len();
        let mut tags = vec![0; self.tags];
        for k in (0..self.tags).rev() {
            tags[k] = idx % dbar;
            idx /= dbar;
        }
        (idx, tags)
    }

    /// Nearest-point index of `z` in the tag alphabet.
    pub fn nearest_tag(&self, z: C64) -> usize {
        nearest(&self.tag, z)
    }

    pub fn nearest_lu(&self, z: C64) -> usize {
        nearest(&self.lu, z)
    }
}

fn nearest(points: &[C64], z: C64) -> usize {
    let mut best = 0;
    for (i, p) in points.iter().enumerate() {
        if (p - z).norm_sqr() < (points[best] - z).norm_sqr() {
            best = i;
        }
    }
    best
}

/// Precomputed per-channel tables that make the residual of every hypothesis
/// in a slot cost `O(M)` amortised.
pub struct SlotScorer<'a> {
    alphabet: &'a Alphabet,
    m: usize,
    /// `h̄λ + ȟλ*` for every LU point, flattened `[λ][i]`.
    direct: Vec<C64>,
    /// Tag-LU cascade contribution of tag `k`, flattened `[k][λ][ρ][i]`.
    cascade: Vec<C64>,
    est: &'a EffectiveChannels,
}

impl<'a> SlotScorer<'a> {
    pub fn new(est: &'a EffectiveChannels, alphabet: &'a Alphabet) -> Self {
        let m = est.layout.m;
        let (sbar, dbar, k_tags) = (alphabet.lu.len(), alphabet.tag.len(), alphabet.tags);
        let th = &est.theta;
        let mut direct = vec![ZERO; sbar * m];
        for (l, &lam) in alphabet.lu.iter().enumerate() {
            for i in 0..m {
                direct[l * m + i] = th[(i, 0)] * lam + th[(i, 1)] * lam.conj();
            }
        }
        let mut cascade = vec![ZERO; k_tags * sbar * dbar * m];
        for k in 0..k_tags {
            let c0 = est.layout.vk_cols(k).start;
            for (l, &lam) in alphabet.lu.iter().enumerate() {
                for (r, &rho) in alphabet.tag.iter().enumerate() {
                    let w = [lam * rho, lam.conj() * rho.conj(), lam.conj() * rho, lam * rho.conj()];
                    let at = ((k * sbar + l) * dbar + r) * m;
                    for i in 0..m {
                        cascade[at + i] = (0..4).map(|j| th[(i, c0 + j)] * w[j]).sum();
                    }
                }
            }
        }
        SlotScorer {
            alphabet,
            m,
            direct,
            cascade,
            est,
        }
    }

    /// Squared residual of every hypothesis for received vector `z` and AP
    /// symbols `c`, written to `out` in hypothesis order.
    pub fn costs(&self, z: &[C64], c: &[C64], out: &mut [f64]) {
        let m = self.m;
        let l = self.est.layout;
        let th = &self.est.theta;
        let (sbar, dbar, k_tags) = (self.alphabet.lu.len(), self.alphabet.tag.len(), self.alphabet.tags);
        debug_assert_eq!(out.len(), self.alphabet.hypotheses());

        // RSI removal, then the per-tag AP-cascade vectors Ū c, Ǔ c*, Ü c*, U̇ c.
        let mut base = z.to_vec();
        let qc = l.q_cols().start;
        for j in 0..m {
            let (cj, cjc) = (c[j], c[j].conj());
            if cj == ZERO {
                continue;
            }
            for i in 0..m {
                base[i] -= th[(i, qc + j)] * cj + th[(i, qc + m + j)] * cjc;
            }
        }
        let mut ap = vec![ZERO; k_tags * 4 * m];
        for k in 0..k_tags {
            let u0 = l.u_cols(k).start;
            for j in 0..m {
                let (cj, cjc) = (c[j], c[j].conj());
                if cj == ZERO {
                    continue;
                }
                for i in 0..m {
                    ap[(k * 4) * m + i] += th[(i, u0 + j)] * cj;
                    ap[(k * 4 + 1) * m + i] += th[(i, u0 + m + j)] * cjc;
                    ap[(k * 4 + 2) * m + i] += th[(i, u0 + 2 * m + j)] * cjc;
                    ap[(k * 4 + 3) * m + i] += th[(i, u0 + 3 * m + j)] * cj;
                }
            }
        }
        // Per-tag contribution table for this slot: [k][λ][ρ][i].
        let mut table = vec![ZERO; k_tags * sbar * dbar * m];
        for k in 0..k_tags {
            for (r, &rho) in self.alphabet.tag.iter().enumerate() {
                let rc = rho.conj();
                for lam in 0..sbar {
                    let at = ((k * sbar + lam) * dbar + r) * m;
                    for i in 0..m {
                        let a = ap[(k * 4) * m + i] * rho
                            + ap[(k * 4 + 1) * m + i] * rc
                            + ap[(k * 4 + 2) * m + i] * rho
                            + ap[(k * 4 + 3) * m + i] * rc;
                        table[at + i] = self.cascade[at + i] + a;
                    }
                }
            }
        }

        // Depth-first walk over tag digits with running partial residuals.
        let mut partial = vec![ZERO; (k_tags + 1) * m];
        let leaves = dbar.pow(k_tags as u32);
        for lam in 0..sbar {
            for i in 0..m {
                partial[i] = base[i] - self.direct[lam * m + i];
            }
            let out_l = &mut out[lam * leaves..(lam + 1) * leaves];
            if k_tags == 0 {
                out_l[0] = partial[..m].iter().map(|v| v.norm_sqr()).sum();
                continue;
            }
            let mut digits = vec![0usize; k_tags];
            // refresh levels 1..=K for the all-zero digit string
            for k in 0..k_tags {
                refresh(&mut partial, &table, k, lam, 0, m, sbar, dbar);
            }
            for leaf in 0..leaves {
                let last = &partial[k_tags * m..(k_tags + 1) * m];
                out_l[leaf] = last.iter().map(|v| v.norm_sqr()).sum();
                if leaf + 1 == leaves {
                    break;
                }
                // odometer increment, least significant digit is the last tag
                let mut k = k_tags - 1;
                loop {
                    digits[k] += 1;
                    if digits[k] < dbar {
                        break;
                    }
                    digits[k] = 0;
                    k -= 1;
                }
                for kk in k..k_tags {
                    refresh(&mut partial, &table, kk, lam, digits[kk], m, sbar, dbar);
                }
            }
        }
    }

    /// Index of the minimum-residual hypothesis (lowest index on ties).
    pub fn best(&self, z: &[C64], c: &[C64], scratch: &mut Vec<f64>) -> usize {
        scratch.resize(self.alphabet.hypotheses(), 0.0);
        self.costs(z, c, scratch);
        argmin(scratch)
    }
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn refresh(partial: &mut [C64], table: &[C64], k: usize, lam: usize, rho: usize, m: usize, sbar: usize, dbar: usize) {
    let at = ((k * sbar + lam) * dbar + rho) * m;
    let (prev, next) = partial.split_at_mut((k + 1) * m);
    let prev = &prev[k * m..];
    for i in 0..m {
        next[i] = prev[i] - table[at + i];
    }
}

/// First index of the smallest value.
pub fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = i;
        }
    }
    best
}

/// Hard decisions for a data block.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectedBlock {
    pub x: Vec<C64>,
    pub d: Vec<Vec<C64>>,
    pub x_idx: Vec<usize>,
    pub d_idx: Vec<Vec<usize>>,
}

impl DetectedBlock {
    pub fn from_indices(alphabet: &Alphabet, x_idx: Vec<usize>, d_idx: Vec<Vec<usize>>) -> Self {
        let x = x_idx.iter().map(|&i| alphabet.lu[i]).collect();
        let d = d_idx
            .iter()
            .map(|dk| dk.iter().map(|&i| alphabet.tag[i]).collect())
            .collect();
        DetectedBlock { x, d, x_idx, d_idx }
    }

    /// Symbol errors against reference indices: (LU errors, errors per tag).
    pub fn errors(&self, x_idx: &[usize], d_idx: &[Vec<usize>]) -> (usize, Vec<usize>) {
        let lu = self.x_idx.iter().zip(x_idx).filter(|(a, b)| a != b).count();
        let tags = self
            .d_idx
            .iter()
            .zip(d_idx)
            .map(|(a, b)| a.iter().zip(b).filter(|(p, q)| p != q).count())
            .collect();
        (lu, tags)
    }
}

/// ML detection of every column of `z` (`M×D`) given AP symbols `c`
/// (`D×M`) and channel estimates.
pub fn ml_detect(z: &CMat, c: &CMat, est: &EffectiveChannels, alphabet: &Alphabet) -> DetectedBlock {
    let scorer = SlotScorer::new(est, alphabet);
    let len = z.ncols();
    let mut x_idx = Vec::with_capacity(len);
    let mut d_idx = vec![Vec::with_capacity(len); alphabet.tags];
    let mut scratch = Vec::new();
    let mut crow = vec![ZERO; c.ncols()];
    for n in 0..len {
        for (j, v) in crow.iter_mut().enumerate() {
            *v = c[(n, j)];
        }
        let zc: Vec<C64> = z.column(n).iter().copied().collect();
        let (lam, rho) = alphabet.decode(scorer.best(&zc, &crow, &mut scratch));
        x_idx.push(lam);
        for (k, r) in rho.into_iter().enumerate() {
            d_idx[k].push(r);
        }
    }
    DetectedBlock::from_indices(alphabet, x_idx, d_idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Layout;
    use crate::linalg::CVec;

    #[test]
    fn index_round_trip() {
        let a = Alphabet::from_constellations(Constellation::Qpsk, Constellation::Qpsk, 1.0, 3);
        assert_eq!(a.hypotheses(), 256);
        for idx in 0..a.hypotheses() {
            let (l, r) = a.decode(idx);
            assert_eq!(a.index(l, &r), idx);
        }
        assert_eq!(a.index(1, &[0, 0, 2]), 64 + 2);
    }

    #[test]
    fn costs_match_direct_evaluation() {
        let l = Layout::new(3, 2);
        let theta = CMat::from_fn(3, l.regressor_len(), |i, j| {
            C64::new(((i * 31 + j * 7) % 11) as f64 - 5.0, ((i + 3 * j) % 5) as f64 - 2.0)
        });
        let est = EffectiveChannels::from_matrix(l, theta).unwrap();
        let a = Alphabet::from_constellations(Constellation::Qpsk, Constellation::Qpsk, 2.0, 2);
        let c = [C64::new(1.0, -1.0), C64::new(-1.0, -1.0), C64::new(1.0, 1.0)];
        let z = [C64::new(0.3, 2.0), C64::new(-4.0, 1.0), C64::new(0.5, 0.5)];
        let mut out = vec![0.0; a.hypotheses()];
        SlotScorer::new(&est, &a).costs(&z, &c, &mut out);
        for (idx, &got) in out.iter().enumerate() {
            let (lam, rho) = a.decode(idx);
            let t: Vec<C64> = rho.iter().map(|&r| a.tag[r]).collect();
            let resid = CVec::from_column_slice(&z) - est.response(a.lu[lam], &c, &t);
            assert!((resid.norm_squared() - got).abs() < 1e-9 * got.max(1.0));
        }
    }
}
