//! Small dense complex linear-algebra helpers on top of nalgebra.
//!
//! Every linear model in the crate has the shape `Y = X·Φ + W` with the
//! unknown `X` on the left (M rows, one per receive antenna). The vectorised
//! form `vec(Y) = (Φᵀ ⊗ I_M)·vec(X)` is never materialised here; solving on
//! the un-vectorised matrices is equivalent and M times cheaper.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const J: C64 = C64::new(0.0, 1.0);

/// Relative pivot size below which a triangular factor is declared singular.
const RANK_TOL: f64 = 1e-12;

pub fn conj(m: &CMat) -> CMat {
    m.map(|z| z.conj())
}

pub fn conj_vec(v: &CVec) -> CVec {
    v.map(|z| z.conj())
}

/// Squared Frobenius norm.
pub fn frob2(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn hstack(blocks: &[&CMat]) -> CMat {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows, "hstack row mismatch");
        out.columns_mut(at, b.ncols()).copy_from(*b);
        at += b.ncols();
    }
    out
}

pub fn vstack(blocks: &[&CMat]) -> CMat {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack column mismatch");
        out.rows_mut(at, b.nrows()).copy_from(*b);
        at += b.nrows();
    }
    out
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMat::zeros(ar * br, ac * bc);
    for j in 0..ac {
        for i in 0..ar {
            let s = a[(i, j)];
            if s == ZERO {
                continue;
            }
            for q in 0..bc {
                for p in 0..br {
                    out[(i * br + p, j * bc + q)] = s * b[(p, q)];
                }
            }
        }
    }
    out
}

/// Column-major vectorisation.
pub fn vec_of(m: &CMat) -> CVec {
    CVec::from_column_slice(m.as_slice())
}

pub fn unvec(v: &CVec, rows: usize, cols: usize) -> CMat {
    CMat::from_column_slice(rows, cols, v.as_slice())
}

/// Least-squares fit of `X` in `Y ≈ X·Φ`.
///
/// `Y` is `m×n`, `Φ` is `p×n` with `n ≥ p`. Solved through a QR factorisation
/// of `Φᴴ`, never through explicit normal equations. A rank-deficient `Φ`
/// is reported, not regularised.
pub fn ls_right(y: &CMat, phi: &CMat) -> Result<CMat> {
    let (p, n) = phi.shape();
    if y.ncols() != n {
        return Err(Error::Dimension(format!(
            "observation has {} columns, regressor has {}",
            y.ncols(),
            n
        )));
    }
    if n < p {
        return Err(Error::Numerical(format!(
            "underdetermined least squares: {p} unknown columns from {n} observations"
        )));
    }
    let qr = phi.adjoint().qr();
    let r = qr.r();
    let scale = (0..p).map(|i| r[(i, i)].norm()).fold(0.0, f64::max);
    if (0..p).any(|i| r[(i, i)].norm() <= RANK_TOL * scale) || scale == 0.0 {
        return Err(Error::Numerical("rank-deficient pilot regressor".into()));
    }
    let rhs = qr.q().adjoint() * y.adjoint();
    let xh = r
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    Ok(xh.adjoint())
}

/// Solves `X·G = B` for Hermitian positive-definite `G`.
pub fn solve_right_hpd(b: &CMat, g: &CMat) -> Result<CMat> {
    let chol = Cholesky::new(g.clone())
        .ok_or_else(|| Error::Numerical("normal-equation matrix is not positive definite".into()))?;
    // X G = B  <=>  G Xᴴ = Bᴴ (G = Gᴴ)
    Ok(chol.solve(&b.adjoint()).adjoint())
}

/// Largest absolute off-diagonal entry relative to the largest diagonal entry.
pub fn off_diagonal_ratio(g: &CMat) -> f64 {
    let n = g.nrows().min(g.ncols());
    let diag = (0..n).map(|i| g[(i, i)].norm()).fold(0.0, f64::max);
    let mut off: f64 = 0.0;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            if i != j {
                off = off.max(g[(i, j)].norm());
            }
        }
    }
    if diag == 0.0 {
        off
    } else {
        off / diag
    }
}

/// Relative Frobenius distance `‖a − b‖ / max(‖b‖, tiny)`.
pub fn rel_err(a: &CMat, b: &CMat) -> f64 {
    let num = frob2(&(a - b)).sqrt();
    let den = frob2(b).sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}
