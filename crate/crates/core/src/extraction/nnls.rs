//! Lawson-Hanson active-set non-negative least squares.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NnlsOptions {
    /// Cap on passive-set solves; `None` means `3 * columns`.
    pub max_iterations: Option<usize>,
    /// Dual feasibility tolerance, relative to `||b||`.
    pub dual_tolerance: f64,
}

impl Default for NnlsOptions {
    fn default() -> Self {
        Self {
            max_iterations: None,
            dual_tolerance: 1e-12,
        }
    }
}

impl NnlsOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == Some(0) {
            return Err(Error::invalid("nnls max_iterations", "must be positive"));
        }
        if !(self.dual_tolerance > 0.0 && self.dual_tolerance < 1.0) {
            return Err(Error::invalid("nnls dual_tolerance", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution {
    pub x: DVector<f64>,
    /// `A^T (b - A x)`; non-positive on the zero components at optimum,
    /// zero on the free ones.
    pub dual: DVector<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Minimizes `||A x - b||` subject to `x >= 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>, options: &NnlsOptions) -> Result<NnlsSolution> {
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.len(),
        });
    }
    if a.ncols() == 0 {
        return Err(Error::invalid("nnls", "matrix has no columns"));
    }
    let scales = linalg::column_norms(a);
    let scaled = linalg::scale_columns(a, &scales);
    let (mut x, iterations) = nnls_normalized(&scaled, b, options)?;
    for j in 0..x.len() {
        x[j] /= scales[j];
    }
    let residual = b - a * &x;
    Ok(NnlsSolution {
        dual: a.transpose() * &residual,
        residual_norm: residual.norm(),
        x,
        iterations,
    })
}

/// Core loop on a matrix whose columns have unit norm.
pub(crate) fn nnls_normalized(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    options: &NnlsOptions,
) -> Result<(DVector<f64>, usize)> {
    let n = a.ncols();
    let max_iterations = options.max_iterations.unwrap_or(3 * n);
    let mut x = DVector::zeros(n);
    let b_norm = b.norm();
    if b_norm == 0.0 {
        return Ok((x, 0));
    }
    let tol = options.dual_tolerance * b_norm;
    let mut passive = alloc::vec![false; n];
    let mut iterations = 0;

    loop {
        let w = a.transpose() * (b - a * &x);
        // Columns that would immediately bounce back are skipped for this round.
        let mut skipped = alloc::vec![false; n];
        let entering = loop {
            let candidate = (0..n)
                .filter(|&j| !passive[j] && !skipped[j] && w[j] > tol)
                .max_by(|&i, &j| w[i].total_cmp(&w[j]));
            let Some(t) = candidate else { break None };
            passive[t] = true;
            let z = solve_passive(a, b, &passive);
            if z[t] > 0.0 {
                break Some(z);
            }
            passive[t] = false;
            skipped[t] = true;
        };
        let Some(mut z) = entering else { break };

        loop {
            iterations += 1;
            if iterations > max_iterations {
                return Err(Error::NnlsNoConvergence {
                    iterations: iterations - 1,
                    residual: (b - a * &x).norm(),
                });
            }
            if (0..n).filter(|&j| passive[j]).all(|j| z[j] > 0.0) {
                x = z;
                break;
            }
            let alpha = (0..n)
                .filter(|&j| passive[j] && z[j] <= 0.0)
                .map(|j| x[j] / (x[j] - z[j]))
                .fold(f64::INFINITY, f64::min);
            x += (&z - &x) * alpha;
            let xmax = x.amax();
            for j in 0..n {
                if passive[j] && x[j] <= 1e-15 * xmax {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
            z = solve_passive(a, b, &passive);
        }
    }
    Ok((x, iterations))
}

/// Unconstrained least squares restricted to the passive columns; other
/// components are zero.
fn solve_passive(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let cols: Vec<usize> = (0..a.ncols()).filter(|&j| passive[j]).collect();
    let mut z = DVector::zeros(a.ncols());
    if cols.is_empty() {
        return z;
    }
    let sub = a.select_columns(&cols);
    let svd = sub.svd(true, true);
    let smax = svd.singular_values.max();
    let sol = svd
        .solve(b, smax * 1e-14)
        .expect("u and v_t were computed");
    for (k, &j) in cols.iter().enumerate() {
        z[j] = sol[k];
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_kkt(a: &DMatrix<f64>, b: &DVector<f64>, s: &NnlsSolution) {
        let scales = linalg::column_norms(a);
        let tol = 1e-12 * b.norm().max(1.0) * 10.0;
        for j in 0..s.x.len() {
            let w = s.dual[j] / scales[j];
            assert!(s.x[j] >= 0.0);
            if s.x[j] == 0.0 {
                assert!(w <= tol, "active column {j} has dual {w}");
            } else {
                assert!(w.abs() <= tol, "free column {j} has dual {w}");
            }
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0]);
        let b = DVector::zeros(3);
        let s = nnls(&a, &b, &NnlsOptions::default()).unwrap();
        assert_eq!(s.x, DVector::zeros(3));
    }

    #[test]
    fn clamps_negative_direction() {
        // Unconstrained solution is (1, -1); constrained optimum has x2 = 0.
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(alloc::vec![1.0, -1.0, 0.0]);
        let s = nnls(&a, &b, &NnlsOptions::default()).unwrap();
        assert!((s.x[0] - 0.5).abs() < 1e-14);
        assert_eq!(s.x[1], 0.0);
        check_kkt(&a, &b, &s);
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let b = DVector::from_vec(alloc::vec![1.0, 2.0, 3.0]);
        let opts = NnlsOptions {
            max_iterations: Some(1),
            ..NnlsOptions::default()
        };
        match nnls(&a, &b, &opts) {
            Err(Error::NnlsNoConvergence { iterations, residual }) => {
                assert_eq!(iterations, 1);
                assert!(residual > 0.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn kkt_holds(entries in proptest::collection::vec(-1.0..1.0f64, 15), rhs in proptest::collection::vec(-1.0..1.0f64, 5)) {
                let a = DMatrix::from_row_slice(5, 3, &entries);
                prop_assume!(linalg::numerical_rank(&a, 1e-6).rank == 3);
                let b = DVector::from_vec(rhs);
                let s = nnls(&a, &b, &NnlsOptions { max_iterations: Some(30), ..Default::default() }).unwrap();
                check_kkt(&a, &b, &s);
            }
        }
    }
}
