//! Taubin algebraic circle fit.

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Complex64,
    pub radius: f64,
}

impl Circle {
    /// Root-mean-square radial distance of the points from the circle.
    pub fn rms_residual(&self, points: &[Complex64]) -> f64 {
        let ss: f64 = points
            .iter()
            .map(|z| {
                let d = (z - self.center).norm() - self.radius;
                d * d
            })
            .sum();
        libm::sqrt(ss / points.len() as f64)
    }
}

/// Fits a circle to points in the complex plane; `None` for fewer than three
/// points or collinear data.
///
/// The characteristic polynomial of the Taubin generalized eigenproblem is
/// solved by Newton iteration from zero, which converges to the smallest
/// root.
pub fn taubin_fit(points: &[Complex64]) -> Option<Circle> {
    let n = points.len();
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    let mean = points.iter().sum::<Complex64>() / nf;
    let (mut mxx, mut myy, mut mxy, mut mxz, mut myz, mut mzz) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for p in points {
        let x = p.re - mean.re;
        let y = p.im - mean.im;
        let z = x * x + y * y;
        mxx += x * x;
        myy += y * y;
        mxy += x * y;
        mxz += x * z;
        myz += y * z;
        mzz += z * z;
    }
    mxx /= nf;
    myy /= nf;
    mxy /= nf;
    mxz /= nf;
    myz /= nf;
    mzz /= nf;

    let mz = mxx + myy;
    let cov_xy = mxx * myy - mxy * mxy;
    let var_z = mzz - mz * mz;
    let a3 = 4.0 * mz;
    let a2 = -3.0 * mz * mz - mzz;
    let a1 = var_z * mz + 4.0 * cov_xy * mz - mxz * mxz - myz * myz;
    let a0 = mxz * (mxz * myy - myz * mxy) + myz * (myz * mxx - mxz * mxy) - var_z * cov_xy;
    let (a22, a33) = (a2 + a2, a3 + a3 + a3);

    let mut x = 0.0;
    let mut y = a0;
    for _ in 0..100 {
        let dy = a1 + x * (a22 + a33 * x);
        let x_new = x - y / dy;
        if x_new == x || !x_new.is_finite() {
            break;
        }
        let y_new = a0 + x_new * (a1 + x_new * (a2 + x_new * a3));
        if y_new.abs() >= y.abs() {
            break;
        }
        x = x_new;
        y = y_new;
    }

    let det = x * x - x * mz + cov_xy;
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let xc = (mxz * (myy - x) - myz * mxy) / det / 2.0;
    let yc = (myz * (mxx - x) - mxz * mxy) / det / 2.0;
    let radius = libm::sqrt(xc * xc + yc * yc + mz);
    if !(radius.is_finite() && xc.is_finite() && yc.is_finite()) {
        return None;
    }
    Some(Circle {
        center: Complex64::new(xc + mean.re, yc + mean.im),
        radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn on_circle(c: Complex64, r: f64, from: f64, to: f64, n: usize) -> alloc::vec::Vec<Complex64> {
        (0..n)
            .map(|k| {
                let t = from + (to - from) * k as f64 / (n - 1) as f64;
                c + Complex64::from_polar(r, t)
            })
            .collect()
    }

    #[test]
    fn exact_points_are_fitted_exactly() {
        let c = Complex64::new(0.3, -1.2);
        for (from, to) in [(0.0, 6.0), (0.5, 2.0), (-0.3, 0.4)] {
            let fit = taubin_fit(&on_circle(c, 0.7, from, to, 50)).unwrap();
            assert!((fit.center - c).norm() < 1e-9);
            assert!((fit.radius - 0.7).abs() < 1e-9);
            assert!(fit.rms_residual(&on_circle(c, 0.7, from, to, 50)) < 1e-9);
        }
    }

    #[test]
    fn tiny_circles_far_from_origin() {
        let c = Complex64::new(1e3, 2e3);
        let fit = taubin_fit(&on_circle(c, 1e-3, 0.0, 5.0, 80)).unwrap();
        assert!((fit.radius / 1e-3 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(taubin_fit(&[Complex64::new(0.0, 0.0), Complex64::new(1.0, 1.0)]).is_none());
        let line: alloc::vec::Vec<_> = (0..10).map(|k| Complex64::new(k as f64, 2.0 * k as f64)).collect();
        assert!(taubin_fit(&line).map_or(true, |c| c.radius > 1e6));
    }
}
