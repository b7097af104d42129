//! Small dense helpers shared by the solvers.
//!
//! Participation columns differ by many orders of magnitude (1/ohm, unitless,
//! 1/(ohm*m)), so everything that looks at singular values works on the
//! column-normalized matrix.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::loss_model::CHANNELS;

pub(crate) fn dense(rows: &[[f64; CHANNELS]]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), CHANNELS, |i, j| rows[i][j])
}

/// Euclidean column norms; all-zero columns get scale 1.
pub(crate) fn column_norms(a: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(
        a.ncols(),
        a.column_iter().map(|c| {
            let n = c.norm();
            if n > 0.0 {
                n
            } else {
                1.0
            }
        }),
    )
}

pub(crate) fn scale_columns(a: &DMatrix<f64>, scales: &DVector<f64>) -> DMatrix<f64> {
    let mut out = a.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col /= scales[j];
    }
    out
}

pub(crate) struct RankInfo {
    pub rank: usize,
    /// Left singular vector of the smallest singular value.
    pub weakest_left: DVector<f64>,
}

pub(crate) fn numerical_rank(a: &DMatrix<f64>, tolerance: f64) -> RankInfo {
    let scaled = scale_columns(a, &column_norms(a));
    // Pad to at least as many rows as columns so the thin SVD exposes every
    // column direction.
    let padded = if scaled.nrows() < scaled.ncols() {
        let mut p = DMatrix::zeros(scaled.ncols(), scaled.ncols());
        p.view_mut((0, 0), (scaled.nrows(), scaled.ncols()))
            .copy_from(&scaled);
        p
    } else {
        scaled
    };
    let svd = padded.svd(true, false);
    let s = &svd.singular_values;
    let smax = s.max();
    let rank = if smax > 0.0 {
        s.iter().filter(|&&v| v > tolerance * smax).count()
    } else {
        0
    };
    let imin = s.imin();
    let u = svd.u.expect("left singular vectors requested");
    let weakest_left = DVector::from_iterator(a.nrows(), u.column(imin).iter().take(a.nrows()).copied());
    RankInfo { rank, weakest_left }
}

/// Row indices that carry most of the weight of the weakest direction.
pub(crate) fn near_dependent_rows(info: &RankInfo) -> Vec<usize> {
    let w = &info.weakest_left;
    let wmax = w.amax();
    if wmax == 0.0 {
        return (0..w.len()).collect();
    }
    w.iter()
        .enumerate()
        .filter(|(_, v)| v.abs() >= 0.1 * wmax)
        .map(|(i, _)| i)
        .collect()
}

pub(crate) struct LeastSquares {
    pub x: DVector<f64>,
    /// `(A^T A)^{-1}`
    pub covariance: DMatrix<f64>,
}

/// Unconstrained least squares on a full-column-rank system.
pub(crate) fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> LeastSquares {
    let scales = column_norms(a);
    let scaled = scale_columns(a, &scales);
    let svd = scaled.svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let s = &svd.singular_values;
    let k = a.ncols();

    let utb = u.transpose() * b;
    let mut z = DVector::zeros(k);
    for i in 0..k {
        z[i] = utb[i] / s[i];
    }
    let mut x = v_t.transpose() * z;
    for j in 0..k {
        x[j] /= scales[j];
    }

    // C = D^-1 V S^-2 V^T D^-1
    let mut vs = v_t.transpose();
    for (i, mut col) in vs.column_iter_mut().enumerate() {
        col /= s[i];
    }
    let mut covariance = &vs * vs.transpose();
    for i in 0..k {
        for j in 0..k {
            covariance[(i, j)] /= scales[i] * scales[j];
        }
    }
    let symmetric = (&covariance + covariance.transpose()) * 0.5;
    LeastSquares {
        x,
        covariance: symmetric,
    }
}
