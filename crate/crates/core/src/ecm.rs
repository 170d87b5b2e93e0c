//! Expectation conditional maximisation over the unknown data symbols.
//!
//! Each iteration computes, for every data slot, the posterior of all
//! `S̄·D̄^K` symbol hypotheses under the current channel estimate, reduces it
//! to the second-order statistics of the regressor, and then updates the
//! blocks `u_1 … u_K, v, q, h` one at a time with the others frozen.
//!
//! The statistics are kept in unvectorised form: `R = Σ E[φφᴴ]` (`P×P`) and
//! `S = Σ y·E[φ]ᴴ` (`M×P`) over pilot and data slots together. With
//! `Θ = [H Q V U]` the expected complete-data objective is
//! `2·Re tr(SΘᴴ) − tr(ΘRΘᴴ)` up to a constant.

use crate::channel::{Block, EffectiveChannels, EstimateSet, EstimatorKind, Layout};
use crate::detect::{argmin, Alphabet, SlotScorer};
use crate::error::Result;
use crate::linalg::{solve_right_hpd, CMat, C64, ONE, ZERO};
use crate::pilots::PilotPlan;
use crate::synth::TrainingSignals;

/// Per-slot posterior probabilities over the joint hypothesis space, in the
/// order of [`Alphabet::index`].
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorTable {
    pub hypotheses: usize,
    /// `slots × hypotheses`, row-major by slot.
    pub probs: Vec<f64>,
}

impl PosteriorTable {
    pub fn slots(&self) -> usize {
        self.probs.len() / self.hypotheses.max(1)
    }

    pub fn slot(&self, n: usize) -> &[f64] {
        &self.probs[n * self.hypotheses..(n + 1) * self.hypotheses]
    }

    /// All mass on the given hypotheses.
    pub fn point_mass(alphabet: &Alphabet, x_idx: &[usize], d_idx: &[Vec<usize>]) -> Self {
        let h = alphabet.hypotheses();
        let mut probs = vec![0.0; h * x_idx.len()];
        for n in 0..x_idx.len() {
            let tags: Vec<usize> = d_idx.iter().map(|d| d[n]).collect();
            probs[n * h + alphabet.index(x_idx[n], &tags)] = 1.0;
        }
        PosteriorTable { hypotheses: h, probs }
    }

    pub fn marginals(&self, alphabet: &Alphabet, n: usize) -> SlotMarginals {
        SlotMarginals::from_joint(alphabet, self.slot(n))
    }
}

/// Posterior of every hypothesis given residual costs, in the log domain.
/// A zero noise level gives a point mass on the smallest cost.
pub fn softmax_costs(costs: &[f64], sigma2: f64, out: &mut [f64]) {
    if sigma2 <= 0.0 {
        out.iter_mut().for_each(|p| *p = 0.0);
        out[argmin(costs)] = 1.0;
        return;
    }
    let best = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let mut total = 0.0;
    for (p, &c) in out.iter_mut().zip(costs) {
        *p = (-(c - best) / sigma2).exp();
        total += *p;
    }
    out.iter_mut().for_each(|p| *p /= total);
}

/// E-step: posteriors of every data slot under channel estimate `est`.
pub fn compute_posteriors(z: &CMat, c: &CMat, est: &EffectiveChannels, alphabet: &Alphabet, sigma2: f64) -> PosteriorTable {
    let h = alphabet.hypotheses();
    let len = z.ncols();
    let scorer = SlotScorer::new(est, alphabet);
    let mut probs = vec![0.0; h * len];
    let mut costs = vec![0.0; h];
    for n in 0..len {
        let zn: Vec<C64> = z.column(n).iter().copied().collect();
        let cn: Vec<C64> = c.row(n).iter().copied().collect();
        scorer.costs(&zn, &cn, &mut costs);
        softmax_costs(&costs, sigma2, &mut probs[n * h..(n + 1) * h]);
    }
    PosteriorTable { hypotheses: h, probs }
}

/// Marginals of one slot needed for second-order moments: `p(λ)`,
/// `p(λ, ρ_k)` and `p(λ, ρ_k, ρ_l)` for `k < l`.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotMarginals {
    pub lu: Vec<f64>,
    /// `[k][λ][ρ]`, flattened.
    pub pair: Vec<f64>,
    /// `[(k,l)][λ][ρ_k][ρ_l]` over pairs `k < l` in lexicographic order.
    pub triple: Vec<f64>,
}

fn pair_index(k: usize, l: usize, tags: usize) -> usize {
    // position of (k, l), k < l, in the lexicographic list of pairs
    k * (2 * tags - k - 1) / 2 + (l - k - 1)
}

impl SlotMarginals {
    fn zeros(alphabet: &Alphabet) -> Self {
        let (s, d, k) = (alphabet.lu.len(), alphabet.tag.len(), alphabet.tags);
        SlotMarginals {
            lu: vec![0.0; s],
            pair: vec![0.0; k * s * d],
            triple: vec![0.0; k * k.saturating_sub(1) / 2 * s * d * d],
        }
    }

    pub fn from_joint(alphabet: &Alphabet, probs: &[f64]) -> Self {
        let (s, d, k) = (alphabet.lu.len(), alphabet.tag.len(), alphabet.tags);
        let mut out = SlotMarginals::zeros(alphabet);
        let leaves = d.pow(k as u32);
        let mut digits = vec![0usize; k];
        for lam in 0..s {
            digits.iter_mut().for_each(|x| *x = 0);
            for leaf in 0..leaves {
                let p = probs[lam * leaves + leaf];
                if p != 0.0 {
                    out.lu[lam] += p;
                    for a in 0..k {
                        out.pair[(a * s + lam) * d + digits[a]] += p;
                        for b in a + 1..k {
                            let pi = pair_index(a, b, k);
                            out.triple[((pi * s + lam) * d + digits[a]) * d + digits[b]] += p;
                        }
                    }
                }
                for a in (0..k).rev() {
                    digits[a] += 1;
                    if digits[a] < d {
                        break;
                    }
                    digits[a] = 0;
                }
            }
        }
        out
    }

    /// Equiprobable, independent symbols.
    pub fn uniform(alphabet: &Alphabet) -> Self {
        let (s, d) = (alphabet.lu.len(), alphabet.tag.len());
        let mut out = SlotMarginals::zeros(alphabet);
        out.lu.iter_mut().for_each(|p| *p = 1.0 / s as f64);
        out.pair.iter_mut().for_each(|p| *p = 1.0 / (s * d) as f64);
        out.triple.iter_mut().for_each(|p| *p = 1.0 / (s * d * d) as f64);
        out
    }
}

/// Number of distinct symbol features: `λ, λ*, 1`, then per tag
/// `λρ, λ*ρ*, λ*ρ, λρ*, ρ, ρ*`.
fn feature_count(tags: usize) -> usize {
    3 + 6 * tags
}

fn tag_features(lam: C64, rho: C64) -> [C64; 6] {
    [lam * rho, (lam * rho).conj(), lam.conj() * rho, lam * rho.conj(), rho, rho.conj()]
}

/// `E[ψ]` and `E[ψψᴴ]` of one slot, with `ψ` the feature vector above.
fn feature_moments(alphabet: &Alphabet, marg: &SlotMarginals) -> (Vec<C64>, CMat) {
    let (s, d, k) = (alphabet.lu.len(), alphabet.tag.len(), alphabet.tags);
    let f = feature_count(k);
    let mut mean = vec![ZERO; f];
    let mut cov = CMat::zeros(f, f);
    let base = |l: usize| {
        let lam = alphabet.lu[l];
        [lam, lam.conj(), ONE]
    };
    for l in 0..s {
        let p = marg.lu[l];
        if p == 0.0 {
            continue;
        }
        let a = base(l);
        for i in 0..3 {
            mean[i] += a[i] * p;
            for j in 0..3 {
                cov[(i, j)] += a[i] * a[j].conj() * p;
            }
        }
    }
    for t in 0..k {
        let o = 3 + 6 * t;
        for l in 0..s {
            let a = base(l);
            for r in 0..d {
                let p = marg.pair[(t * s + l) * d + r];
                if p == 0.0 {
                    continue;
                }
                let g = tag_features(alphabet.lu[l], alphabet.tag[r]);
                for i in 0..6 {
                    mean[o + i] += g[i] * p;
                    for j in 0..6 {
                        cov[(o + i, o + j)] += g[i] * g[j].conj() * p;
                    }
                    for j in 0..3 {
                        let v = g[i] * a[j].conj() * p;
                        cov[(o + i, j)] += v;
                        cov[(j, o + i)] += v.conj();
                    }
                }
            }
        }
        for t2 in t + 1..k {
            let o2 = 3 + 6 * t2;
            let pi = pair_index(t, t2, k);
            for l in 0..s {
                for r in 0..d {
                    let g = tag_features(alphabet.lu[l], alphabet.tag[r]);
                    for r2 in 0..d {
                        let p = marg.triple[((pi * s + l) * d + r) * d + r2];
                        if p == 0.0 {
                            continue;
                        }
                        let g2 = tag_features(alphabet.lu[l], alphabet.tag[r2]);
                        for i in 0..6 {
                            for j in 0..6 {
                                let v = g[i] * g2[j].conj() * p;
                                cov[(o + i, o2 + j)] += v;
                                cov[(o2 + j, o + i)] += v.conj();
                            }
                        }
                    }
                }
            }
        }
    }
    (mean, cov)
}

/// Every regressor entry is `coef·ψ[feature]` with `coef` built from the
/// known AP symbols. Returns `(coef, feature)` per regressor index.
fn regressor_map(layout: Layout, c: &[C64]) -> Vec<(C64, usize)> {
    let m = layout.m;
    let mut map = Vec::with_capacity(layout.regressor_len());
    map.push((ONE, 0));
    map.push((ONE, 1));
    for i in 0..m {
        map.push((c[i], 2));
    }
    for i in 0..m {
        map.push((c[i].conj(), 2));
    }
    for k in 0..layout.k {
        for j in 0..4 {
            map.push((ONE, 3 + 6 * k + j));
        }
    }
    for k in 0..layout.k {
        let (rho, rho_c) = (3 + 6 * k + 4, 3 + 6 * k + 5);
        for i in 0..m {
            map.push((c[i], rho));
        }
        for i in 0..m {
            map.push((c[i].conj(), rho_c));
        }
        for i in 0..m {
            map.push((c[i].conj(), rho));
        }
        for i in 0..m {
            map.push((c[i], rho_c));
        }
    }
    map
}

/// Sufficient statistics of the expected complete-data objective.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub layout: Layout,
    /// `Σ E[φφᴴ]`, `P×P`.
    pub r: CMat,
    /// `Σ y·E[φ]ᴴ`, `M×P`.
    pub s: CMat,
    /// `Σ ‖y‖²`.
    pub yy: f64,
}

impl Moments {
    pub fn zeros(layout: Layout) -> Self {
        let p = layout.regressor_len();
        Moments {
            layout,
            r: CMat::zeros(p, p),
            s: CMat::zeros(layout.m, p),
            yy: 0.0,
        }
    }

    /// Statistics of the pilot slots, whose regressors are known exactly.
    pub fn pilot(sig: &TrainingSignals, plan: &PilotPlan) -> Self {
        let phi = plan.regressors();
        let y = sig.stacked();
        Moments {
            layout: plan.layout,
            r: &phi * phi.adjoint(),
            s: &y * phi.adjoint(),
            yy: y.norm_squared(),
        }
    }

    /// Adds one data slot with symbol marginals `marg`, AP symbols `c` and,
    /// when available, its observation `z`.
    pub fn add_slot(&mut self, alphabet: &Alphabet, marg: &SlotMarginals, c: &[C64], z: Option<&[C64]>) {
        let (mean, cov) = feature_moments(alphabet, marg);
        let map = regressor_map(self.layout, c);
        let p = map.len();
        for j in 0..p {
            let (cj, fj) = map[j];
            let cj = cj.conj();
            for i in 0..p {
                let (ci, fi) = map[i];
                self.r[(i, j)] += ci * cj * cov[(fi, fj)];
            }
        }
        if let Some(z) = z {
            for j in 0..p {
                let (cj, fj) = map[j];
                let e = (cj * mean[fj]).conj();
                for (i, zi) in z.iter().enumerate() {
                    self.s[(i, j)] += zi * e;
                }
            }
            self.yy += z.iter().map(|v| v.norm_sqr()).sum::<f64>();
        }
    }

    /// Adds every slot of a data block, in slot order.
    pub fn add_block(&mut self, alphabet: &Alphabet, post: &PosteriorTable, z: &CMat, c: &CMat) {
        for n in 0..z.ncols() {
            let marg = post.marginals(alphabet, n);
            let zn: Vec<C64> = z.column(n).iter().copied().collect();
            let cn: Vec<C64> = c.row(n).iter().copied().collect();
            self.add_slot(alphabet, &marg, &cn, Some(&zn));
        }
    }

    /// Sub-block `Σ E[φ_a φ_bᴴ]` of two parameter blocks.
    pub fn omega(&self, a: Block, b: Block) -> CMat {
        let (ra, rb) = (self.layout.cols(a), self.layout.cols(b));
        self.r.view((ra.start, rb.start), (ra.len(), rb.len())).into_owned()
    }

    /// `2·Re tr(SΘᴴ) − tr(ΘRΘᴴ) − Σ‖y‖²`, the negated expected squared
    /// residual.
    pub fn objective(&self, theta: &CMat) -> f64 {
        let cross = (&self.s.component_mul(&theta.map(|v| v.conj()))).sum().re;
        let quad = (theta * &self.r).component_mul(&theta.map(|v| v.conj())).sum().re;
        2.0 * cross - quad - self.yy
    }

    /// Conditional maximisation of block `b` with the rest of `theta` fixed.
    pub fn cm_update(&self, theta: &mut CMat, b: Block) -> Result<()> {
        let cols = self.layout.cols(b);
        let (lo, w) = (cols.start, cols.len());
        let r_b = self.r.columns(lo, w);
        let r_bb = self.r.view((lo, lo), (w, w)).into_owned();
        let rhs = self.s.columns(lo, w) - &*theta * r_b + theta.columns(lo, w) * &r_bb;
        let new = solve_right_hpd(&rhs, &r_bb)?;
        theta.columns_mut(lo, w).copy_from(&new);
        Ok(())
    }

    /// One CM sweep in the canonical order `u_1 … u_K, v, q, h`.
    pub fn cm_sweep(&self, theta: &mut CMat) -> Result<()> {
        for b in self.layout.update_order() {
            self.cm_update(theta, b)?;
        }
        Ok(())
    }
}

/// Observed-data log-likelihood up to a constant, with equiprobable symbols:
/// exact Gaussian terms for pilots, log-sum-exp over hypotheses for data.
pub fn log_likelihood(
    sig: &TrainingSignals,
    plan: &PilotPlan,
    z: &CMat,
    c: &CMat,
    est: &EffectiveChannels,
    alphabet: &Alphabet,
    sigma2: f64,
) -> f64 {
    let resid = sig.stacked() - &est.theta * plan.regressors();
    let mut ll = -resid.norm_squared() / sigma2;
    let scorer = SlotScorer::new(est, alphabet);
    let mut costs = vec![0.0; alphabet.hypotheses()];
    for n in 0..z.ncols() {
        let zn: Vec<C64> = z.column(n).iter().copied().collect();
        let cn: Vec<C64> = c.row(n).iter().copied().collect();
        scorer.costs(&zn, &cn, &mut costs);
        let best = costs.iter().copied().fold(f64::INFINITY, f64::min);
        let s: f64 = costs.iter().map(|&v| (-(v - best) / sigma2).exp()).sum();
        ll += -best / sigma2 + (s / costs.len() as f64).ln();
    }
    ll
}

/// Result of an ECM run.
#[derive(Clone, Debug)]
pub struct EcmOutput {
    pub estimate: EstimateSet,
    /// Estimate after each iteration; entry 0 is the initial point.
    pub iterates: Vec<EffectiveChannels>,
}

/// Runs `iters` E-step / CM-sweep iterations from `init`. `c` holds the AP
/// symbols of the data block (`D×M`) and `sigma2` the effective noise level.
#[allow(clippy::too_many_arguments)]
pub fn ecm_estimate(
    sig: &TrainingSignals,
    z: &CMat,
    c: &CMat,
    plan: &PilotPlan,
    alphabet: &Alphabet,
    init: &EffectiveChannels,
    iters: usize,
    sigma2: f64,
) -> Result<EcmOutput> {
    let pilot = Moments::pilot(sig, plan);
    let mut est = init.clone();
    let mut iterates = vec![est.clone()];
    for _ in 0..iters {
        let post = compute_posteriors(z, c, &est, alphabet, sigma2);
        let mut mom = pilot.clone();
        mom.add_block(alphabet, &post, z, c);
        mom.cm_sweep(&mut est.theta)?;
        iterates.push(est.clone());
    }
    Ok(EcmOutput {
        estimate: EstimateSet {
            kind: EstimatorKind::Ecm,
            channels: est,
        },
        iterates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Constellation;

    #[test]
    fn pair_positions_are_dense() {
        let k = 5;
        let mut seen = vec![];
        for a in 0..k {
            for b in a + 1..k {
                seen.push(pair_index(a, b, k));
            }
        }
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn uniform_marginals_match_joint() {
        let a = Alphabet::from_constellations(Constellation::Qpsk, Constellation::Qpsk, 1.0, 3);
        let h = a.hypotheses();
        let joint = SlotMarginals::from_joint(&a, &vec![1.0 / h as f64; h]);
        let direct = SlotMarginals::uniform(&a);
        for (x, y) in joint.triple.iter().zip(&direct.triple) {
            assert!((x - y).abs() < 1e-15);
        }
        assert_eq!(joint.lu.len(), direct.lu.len());
    }

    #[test]
    fn zero_noise_is_point_mass() {
        let mut out = vec![0.0; 4];
        softmax_costs(&[3.0, 1.0, 1.0, 2.0], 0.0, &mut out);
        assert_eq!(out, vec![0.0, 1.0, 0.0, 0.0]);
    }
}
