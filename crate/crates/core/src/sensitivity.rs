//! Measurement sensitivity over the material-loss space.
//!
//! With the loss-rate uncertainties following the model, `sigma_y,i =
//! eps_i (P x)_i`, the relative uncertainty of channel `c` is
//! `sqrt(C_cc(x)) / x_c`. Where it is below one the channel is resolvable.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::extraction::model_covariance;
use crate::loss_model::{Channel, MaterialLossVector, ParticipationMatrix};

/// Rank cutoff used for sensitivity evaluations.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Bisection stops when the bracket is this narrow in natural-log units.
const LN_TOLERANCE: f64 = 1e-6;

const SCAN_POINTS_PER_DECADE: f64 = 20.0;

pub fn relative_uncertainty_at(
    p: &ParticipationMatrix,
    eps_y: &[f64],
    x: &MaterialLossVector,
    channel: Channel,
) -> Result<f64> {
    check_eps(p, eps_y)?;
    let i = channel.index();
    if x.get(channel) <= 0.0 {
        return Err(Error::invalid(
            "x",
            alloc::format!("{} must be positive", channel.name()),
        ));
    }
    let rows = p.as_arrays();
    let c = model_covariance(&rows, eps_y, &x.as_array(), RANK_TOLERANCE).map_err(|e| match e {
        Error::ZeroLossRate { label } => Error::ZeroLossRate {
            label: label
                .strip_prefix("row ")
                .and_then(|k| k.parse::<usize>().ok())
                .map(|k| alloc::string::String::from(&p.rows()[k].0[..]))
                .unwrap_or(label),
        },
        other => other,
    })?;
    Ok(libm::sqrt(c[i][i]) / x.get(channel))
}

fn check_eps(p: &ParticipationMatrix, eps_y: &[f64]) -> Result<()> {
    if eps_y.len() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: eps_y.len(),
        });
    }
    if eps_y.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
        return Err(Error::invalid("eps_y", "each entry must lie in (0, 1)"));
    }
    Ok(())
}

/// A log-spaced sweep of one channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepAxis {
    pub channel: Channel,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl SweepAxis {
    pub fn new(channel: Channel, min: f64, max: f64, points: usize) -> Self {
        Self {
            channel,
            min,
            max,
            points,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        let (a, b) = (libm::log(self.min), libm::log(self.max));
        (0..self.points)
            .map(|k| libm::exp(a + (b - a) * k as f64 / (self.points - 1) as f64))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.min > 0.0 && self.min < self.max && self.max.is_finite()) {
            return Err(Error::invalid(
                alloc::format!("axis {}", self.channel.name()),
                "range must satisfy 0 < min < max",
            ));
        }
        if self.points < 2 {
            return Err(Error::invalid(
                alloc::format!("axis {}", self.channel.name()),
                "needs at least two points",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityGridSpec {
    pub channel_under_test: Channel,
    pub axes: [SweepAxis; 2],
    /// Values of the channels that are not swept; swept entries are ignored.
    pub fixed: MaterialLossVector,
    /// Relative loss-rate uncertainty per mode.
    pub eps_y: Vec<f64>,
}

pub const DEFAULT_GRID_POINTS: usize = 50;

impl SensitivityGridSpec {
    /// The plane of the two channels other than `fixed_channel`, each swept
    /// over its default range, with the plateau defaults for the rest.
    pub fn plane(channel_under_test: Channel, fixed_channel: Channel, fixed_value: f64, modes: usize) -> Result<Self> {
        let swept: Vec<Channel> = Channel::ALL.into_iter().filter(|c| *c != fixed_channel).collect();
        let axis = |c: Channel| {
            let (lo, hi) = default_search_range(c);
            SweepAxis::new(c, lo, hi, DEFAULT_GRID_POINTS)
        };
        let spec = Self {
            channel_under_test,
            axes: [axis(swept[0]), axis(swept[1])],
            fixed: MaterialLossVector::zero().with(fixed_channel, fixed_value)?,
            eps_y: alloc::vec![crate::fixtures::DEFAULT_EPS_Y; modes],
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.axes[0].validate()?;
        self.axes[1].validate()?;
        if self.axes[0].channel == self.axes[1].channel {
            return Err(Error::invalid("axes", "swept channels must differ"));
        }
        Ok(())
    }

    /// Index of the axis along which boundaries are bisected: the channel
    /// under test when it is swept, otherwise the second axis.
    pub fn column_axis(&self) -> usize {
        if self.axes[0].channel == self.channel_under_test {
            0
        } else {
            1
        }
    }

    fn point(&self, a0: f64, a1: f64) -> Result<MaterialLossVector> {
        self.fixed
            .with(self.axes[0].channel, a0)?
            .with(self.axes[1].channel, a1)
    }
}

/// One line of the grid along the column axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityColumn {
    /// Value of the non-column axis.
    pub position: f64,
    /// `sigma/x` at each node of the column axis.
    pub values: Vec<f64>,
    /// Column-axis coordinates where `sigma/x = 1`.
    pub crossings: Vec<f64>,
}

/// Evaluates column `k` of the grid (index into the non-column axis).
pub fn sensitivity_column(p: &ParticipationMatrix, spec: &SensitivityGridSpec, k: usize) -> Result<SensitivityColumn> {
    let col = spec.column_axis();
    let row = 1 - col;
    let position = spec.axes[row].values()[k];
    let at = |v: f64| -> Result<f64> {
        let mut coords = [0.0; 2];
        coords[col] = v;
        coords[row] = position;
        let x = spec.point(coords[0], coords[1])?;
        relative_uncertainty_at(p, &spec.eps_y, &x, spec.channel_under_test)
    };
    let nodes = spec.axes[col].values();
    let values = nodes.iter().map(|&v| at(v)).collect::<Result<Vec<_>>>()?;
    let mut crossings = Vec::new();
    for w in 0..nodes.len() - 1 {
        let (ga, gb) = (values[w] - 1.0, values[w + 1] - 1.0);
        if (ga > 0.0) != (gb > 0.0) {
            let g = |ln_v: f64| at(libm::exp(ln_v)).map(|s| s - 1.0);
            crossings.push(libm::exp(bisect_ln(&g, libm::log(nodes[w]), libm::log(nodes[w + 1]), ga > 0.0)?));
        }
    }
    Ok(SensitivityColumn {
        position,
        values,
        crossings,
    })
}

/// Bisection in log space; `positive_at_lo` gives the sign at `a`.
fn bisect_ln(g: &impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, positive_at_lo: bool) -> Result<f64> {
    while b - a > LN_TOLERANCE {
        let mid = 0.5 * (a + b);
        if (g(mid)? > 0.0) == positive_at_lo {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityGrid {
    pub spec: SensitivityGridSpec,
    /// Node coordinates of each axis.
    pub axis_values: [Vec<f64>; 2],
    /// `values[i][j]` is `sigma/x` at `(axis_values[0][i], axis_values[1][j])`.
    pub values: Vec<Vec<f64>>,
    /// `(axis 0, axis 1)` points where `sigma/x = 1`, ordered along the
    /// non-column axis.
    pub boundary: Vec<[f64; 2]>,
}

impl SensitivityGrid {
    /// Builds the grid from all columns, in order.
    pub fn assemble(spec: SensitivityGridSpec, columns: Vec<SensitivityColumn>) -> Self {
        let axis_values = [spec.axes[0].values(), spec.axes[1].values()];
        let col = spec.column_axis();
        let n0 = axis_values[0].len();
        let n1 = axis_values[1].len();
        let mut values = alloc::vec![alloc::vec![0.0; n1]; n0];
        let mut boundary = Vec::new();
        for (k, c) in columns.iter().enumerate() {
            for (w, v) in c.values.iter().enumerate() {
                if col == 0 {
                    values[w][k] = *v;
                } else {
                    values[k][w] = *v;
                }
            }
            for &t in &c.crossings {
                boundary.push(if col == 0 { [t, c.position] } else { [c.position, t] });
            }
        }
        Self {
            spec,
            axis_values,
            values,
            boundary,
        }
    }
}

/// Serial evaluation of a full grid.
pub fn sensitivity_grid(p: &ParticipationMatrix, spec: &SensitivityGridSpec) -> Result<SensitivityGrid> {
    spec.validate()?;
    check_eps(p, &spec.eps_y)?;
    let n = spec.axes[1 - spec.column_axis()].points;
    let columns = (0..n)
        .map(|k| sensitivity_column(p, spec, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(SensitivityGrid::assemble(spec.clone(), columns))
}

/// Values of the other channels that put a system in its plateau regime when
/// `channel` is under test.
pub fn default_fixed(channel: Channel) -> MaterialLossVector {
    let v = match channel {
        Channel::SurfaceResistance => [0.0, 1e-8, 1e-4],
        Channel::LossTangent => [1e-9, 0.0, 1e-4],
        Channel::SeamResistance => [1e-9, 5e-2, 0.0],
    };
    MaterialLossVector::from_array(v).expect("valid defaults")
}

/// Default sweep range of a channel, SI units.
pub fn default_search_range(channel: Channel) -> (f64, f64) {
    match channel {
        Channel::SurfaceResistance => (1e-12, 1e-3),
        Channel::LossTangent => (1e-9, 10.0),
        Channel::SeamResistance => (1e-12, 1e-1),
    }
}

/// Smallest value of `channel` at which `sigma/x` falls to one, with the other
/// channels pinned to `fixed`.
///
/// The range is scanned upward in log space and the first crossing is bisected.
pub fn minimum_resolvable(
    p: &ParticipationMatrix,
    eps_y: &[f64],
    channel: Channel,
    fixed: &MaterialLossVector,
    range: (f64, f64),
) -> Result<f64> {
    check_eps(p, eps_y)?;
    let (lo, hi) = range;
    if !(lo > 0.0 && lo < hi && hi.is_finite()) {
        return Err(Error::invalid("search range", "must satisfy 0 < lo < hi"));
    }
    let g = |ln_v: f64| -> Result<f64> {
        let x = fixed.with(channel, libm::exp(ln_v))?;
        Ok(relative_uncertainty_at(p, eps_y, &x, channel)? - 1.0)
    };
    let (a, b) = (libm::log(lo), libm::log(hi));
    let steps = (libm::ceil((b - a) / core::f64::consts::LN_10 * SCAN_POINTS_PER_DECADE) as usize).max(1);
    let mut prev = a;
    if g(a)? <= 0.0 {
        return Err(Error::NoBoundary { lo, hi });
    }
    for k in 1..=steps {
        let t = a + (b - a) * k as f64 / steps as f64;
        if g(t)? <= 0.0 {
            return Ok(libm::exp(bisect_ln(&g, prev, t, true)?));
        }
        prev = t;
    }
    Err(Error::NoBoundary { lo, hi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{p_ellip, p_fwgmr};

    const EPS: [f64; 3] = [0.05; 3];

    fn identity() -> ParticipationMatrix {
        ParticipationMatrix::from_arrays([("a", [1.0, 0.0, 0.0]), ("b", [0.0, 1.0, 0.0]), ("c", [0.0, 0.0, 1.0])]).unwrap()
    }

    fn within(value: f64, target: f64, tol: f64) -> bool {
        (value / target - 1.0).abs() <= tol
    }

    #[test]
    fn identity_gives_eps() {
        let x = MaterialLossVector::new(3e-6, 0.2, 7e-5).unwrap();
        for c in Channel::ALL {
            let r = relative_uncertainty_at(&identity(), &EPS, &x, c).unwrap();
            assert!((r - 0.05).abs() < 1e-12);
        }
    }

    #[test]
    fn doubling_eps_doubles_uncertainty() {
        let x = MaterialLossVector::new(5e-7, 1e-3, 3e-5).unwrap();
        for c in Channel::ALL {
            let a = relative_uncertainty_at(&p_fwgmr(), &EPS, &x, c).unwrap();
            let b = relative_uncertainty_at(&p_fwgmr(), &[0.1; 3], &x, c).unwrap();
            assert!((b / a - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn single_channel_is_scale_free() {
        let p = p_fwgmr();
        let a = relative_uncertainty_at(&p, &EPS, &MaterialLossVector::new(1e-6, 0.0, 0.0).unwrap(), Channel::SurfaceResistance).unwrap();
        let b = relative_uncertainty_at(&p, &EPS, &MaterialLossVector::new(4e-3, 0.0, 0.0).unwrap(), Channel::SurfaceResistance).unwrap();
        assert!((a / b - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_loss_mode_is_an_error() {
        let x = MaterialLossVector::new(1e-6, 0.0, 0.0).unwrap();
        let p = ParticipationMatrix::from_arrays([("a", [1.0, 0.0, 0.0]), ("b", [0.0, 1.0, 0.0]), ("c", [0.0, 0.0, 1.0])]).unwrap();
        assert_eq!(
            relative_uncertainty_at(&p, &EPS, &x, Channel::SurfaceResistance),
            Err(Error::ZeroLossRate { label: "b".into() })
        );
    }

    #[test]
    fn fwgmr_surface_resistance_example() {
        let x = MaterialLossVector::new(7.0e-9, 1e-8, 1e-4).unwrap();
        let r = relative_uncertainty_at(&p_fwgmr(), &EPS, &x, Channel::SurfaceResistance).unwrap();
        assert!(within(r, 1.0, 0.2), "{r}");
    }

    #[test]
    fn published_minima() {
        let cases = [
            (p_fwgmr(), Channel::SurfaceResistance, 7.0e-9),
            (p_fwgmr(), Channel::LossTangent, 1.5e-4),
            (p_fwgmr(), Channel::SeamResistance, 240e-9),
            (p_ellip(), Channel::SurfaceResistance, 64e-9),
            (p_ellip(), Channel::LossTangent, 2.2e-2),
            (p_ellip(), Channel::SeamResistance, 1.0e-9),
        ];
        for (p, c, target) in cases {
            let v = minimum_resolvable(&p, &EPS, c, &default_fixed(c), default_search_range(c)).unwrap();
            assert!(within(v, target, 0.15), "{c}: {v:e} vs {target:e}");
            let at = relative_uncertainty_at(&p, &EPS, &default_fixed(c).with(c, v).unwrap(), c).unwrap();
            assert!((at - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn identity_has_no_boundary() {
        let err = minimum_resolvable(&identity(), &EPS, Channel::LossTangent, &default_fixed(Channel::LossTangent), (1e-9, 10.0));
        assert!(matches!(err, Err(Error::NoBoundary { .. })));
    }

    #[test]
    fn tiny_identity_grid() {
        let spec = SensitivityGridSpec {
            channel_under_test: Channel::SurfaceResistance,
            axes: [
                SweepAxis::new(Channel::SurfaceResistance, 1e-9, 1e-6, 2),
                SweepAxis::new(Channel::LossTangent, 1e-6, 1e-2, 2),
            ],
            fixed: MaterialLossVector::new(0.0, 0.0, 1e-5).unwrap(),
            eps_y: EPS.to_vec(),
        };
        let g = sensitivity_grid(&identity(), &spec).unwrap();
        assert!(g.values.iter().flatten().all(|v| (v - 0.05).abs() < 1e-12));
        assert!(g.boundary.is_empty());
    }

    #[test]
    fn fwgmr_loss_tangent_plane_has_plateau() {
        let spec = SensitivityGridSpec {
            channel_under_test: Channel::LossTangent,
            axes: [
                SweepAxis::new(Channel::SurfaceResistance, 1e-10, 1e-4, 50),
                SweepAxis::new(Channel::LossTangent, 1e-7, 1.0, 50),
            ],
            fixed: MaterialLossVector::new(0.0, 0.0, 1e-4).unwrap(),
            eps_y: EPS.to_vec(),
        };
        let p = p_fwgmr();
        let g = sensitivity_grid(&p, &spec).unwrap();
        assert_eq!(g.values.len(), 50);
        assert!(g.values.iter().flatten().all(|v| *v > 0.0));
        for b in &g.boundary {
            let x = MaterialLossVector::new(b[0], b[1], 1e-4).unwrap();
            let r = relative_uncertainty_at(&p, &EPS, &x, Channel::LossTangent).unwrap();
            assert!((r - 1.0).abs() < 2e-3);
        }
        // Flat at low surface resistance, rising with it at high values.
        let at = |rs: f64| {
            g.boundary
                .iter()
                .min_by(|a, b| (a[0] / rs).ln().abs().total_cmp(&(b[0] / rs).ln().abs()))
                .unwrap()[1]
        };
        assert!(within(at(1e-10), at(1e-9), 0.05));
        assert!(within(at(1e-10), 1.5e-4, 0.2));
        assert!(at(1e-4) > 10.0 * at(1e-8));
    }

    #[test]
    fn ellipsoidal_surface_resistance_boundary_is_vertical() {
        let spec = SensitivityGridSpec {
            channel_under_test: Channel::SurfaceResistance,
            axes: [
                SweepAxis::new(Channel::SurfaceResistance, 1e-10, 1e-4, 50),
                SweepAxis::new(Channel::LossTangent, 1e-7, 1e-3, 50),
            ],
            fixed: MaterialLossVector::new(0.0, 0.0, 1e-4).unwrap(),
            eps_y: EPS.to_vec(),
        };
        let g = sensitivity_grid(&p_ellip(), &spec).unwrap();
        assert_eq!(g.boundary.len(), 50);
        let rs: Vec<f64> = g.boundary.iter().map(|b| b[0]).collect();
        let lo = rs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = rs.iter().copied().fold(0.0, f64::max);
        assert!(hi / lo < 1.05);
    }

    #[test]
    fn adjacent_nodes_vary_smoothly() {
        let spec = SensitivityGridSpec::plane(Channel::SeamResistance, Channel::LossTangent, 5e-2, 3).unwrap();
        let spec = SensitivityGridSpec {
            axes: [
                SweepAxis::new(spec.axes[0].channel, 1e-10, 1e-4, 151),
                SweepAxis::new(spec.axes[1].channel, 1e-10, 1e-4, 151),
            ],
            ..spec
        };
        let g = sensitivity_grid(&p_ellip(), &spec).unwrap();
        for i in 0..150 {
            for j in 0..150 {
                let v = g.values[i][j];
                for w in [g.values[i + 1][j], g.values[i][j + 1]] {
                    assert!(w / v < 10.0 && v / w < 10.0);
                }
            }
        }
    }

    #[test]
    fn spec_validation() {
        let mut spec = SensitivityGridSpec::plane(Channel::LossTangent, Channel::SeamResistance, 1e-4, 3).unwrap();
        spec.axes[1].channel = spec.axes[0].channel;
        assert!(spec.validate().is_err());
        let mut spec = SensitivityGridSpec::plane(Channel::LossTangent, Channel::SeamResistance, 1e-4, 3).unwrap();
        spec.axes[0].points = 1;
        assert!(spec.validate().is_err());
        spec.axes[0].points = 3;
        spec.axes[0].min = 2.0 * spec.axes[0].max;
        assert!(spec.validate().is_err());
    }
}
