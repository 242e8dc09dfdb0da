//! Normal-equation helpers shared by the GLM solvers and the covariate
//! adjustment of group means.

use nalgebra::{DMatrix, DVector};

use crate::data::DesignMatrix;

pub const RIDGE_JITTER: f64 = 1e-8;

/// Xᵀ W X as a dense p×p matrix (W diagonal, identity when `None`).
pub fn gram(x: &DesignMatrix, w: Option<&[f64]>) -> DMatrix<f64> {
    let p = x.n_cols();
    let mut g = DMatrix::zeros(p, p);
    let mut wcol = vec![0.0; x.n_rows()];
    for a in 0..p {
        let ca = x.column(a);
        match w {
            Some(w) => wcol.iter_mut().zip(ca.iter().zip(w)).for_each(|(o, (c, w))| *o = c * w),
            None => wcol.copy_from_slice(ca),
        }
        for b in a..p {
            let s: f64 = wcol.iter().zip(x.column(b)).map(|(u, v)| u * v).sum();
            g[(a, b)] = s;
            g[(b, a)] = s;
        }
    }
    g
}

/// Xᵀ W y.
pub fn cross(x: &DesignMatrix, w: Option<&[f64]>, y: &[f64]) -> DVector<f64> {
    DVector::from_iterator(
        x.n_cols(),
        (0..x.n_cols()).map(|j| match w {
            Some(w) => x.column(j).iter().zip(w).zip(y).map(|((a, w), y)| a * w * y).sum(),
            None => x.column(j).iter().zip(y).map(|(a, y)| a * y).sum(),
        }),
    )
}


/// Solve a symmetric positive (semi)definite system by Cholesky. A singular
/// or numerically rank-deficient system gets `RIDGE_JITTER` on the diagonal;
/// the returned flag reports whether that happened.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<(DVector<f64>, bool)> {
    let p = a.nrows();
    let max_diag = (0..p).map(|i| a[(i, i)].abs()).fold(0.0_f64, f64::max).max(1.0);
    if let Some(ch) = a.clone().cholesky() {
        let l = ch.l_dirty();
        let min_pivot = (0..p).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
        if min_pivot > 1e-11 * max_diag {
            return Some((ch.solve(b), false));
        }
    }
    let mut j = a.clone();
    for i in 0..p {
        j[(i, i)] += RIDGE_JITTER;
    }
    j.cholesky().map(|ch| (ch.solve(b), true))
}

/// Ordinary least squares through the normal equations.
pub fn least_squares(x: &DesignMatrix, y: &[f64], w: Option<&[f64]>) -> Option<(Vec<f64>, bool)> {
    let g = gram(x, w);
    let c = cross(x, w, y);
    solve_spd(&g, &c).map(|(b, jit)| (b.iter().copied().collect(), jit))
}
