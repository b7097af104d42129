//! Assembly-gap inference from measured mode frequencies.
//!
//! Each mode's simulated frequency-versus-gap curve is interpolated with a
//! monotone piecewise-cubic Hermite (Fritsch-Carlson) scheme; the gap is the
//! minimizer of the summed squared fractional frequency mismatch.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A curve counts as gap-sensitive when its frequency varies by more than
/// this fraction over the tabulated range.
pub const GAP_SENSITIVITY: f64 = 0.01;

/// Mismatch above which an estimate is flagged.
pub const MISMATCH_FLAG: f64 = 0.05;

const SCAN_POINTS: usize = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct GapCurve {
    label: String,
    gaps: Vec<f64>,
    frequencies: Vec<f64>,
    slopes: Vec<f64>,
}

impl GapCurve {
    /// `samples` are `(gap in m, frequency in Hz)` with strictly increasing gap.
    pub fn new(label: impl Into<String>, samples: Vec<(f64, f64)>) -> Result<Self> {
        let label = label.into();
        if samples.len() < 2 {
            return Err(Error::invalid(
                alloc::format!("gap curve {label}"),
                "needs at least two samples",
            ));
        }
        for (i, &(g, f)) in samples.iter().enumerate() {
            if !(g.is_finite() && f.is_finite() && g > 0.0 && f > 0.0) {
                return Err(Error::invalid(
                    alloc::format!("gap curve {label}[{i}]"),
                    "gap and frequency must be finite and positive",
                ));
            }
            if i > 0 && g <= samples[i - 1].0 {
                return Err(Error::invalid(
                    alloc::format!("gap curve {label}[{i}]"),
                    "gaps must be strictly increasing",
                ));
            }
        }
        let (gaps, frequencies): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
        let slopes = pchip_slopes(&gaps, &frequencies);
        Ok(Self {
            label,
            gaps,
            frequencies,
            slopes,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.gaps.iter().copied().zip(self.frequencies.iter().copied())
    }

    pub fn gap_range(&self) -> (f64, f64) {
        (self.gaps[0], self.gaps[self.gaps.len() - 1])
    }

    pub fn frequency_range(&self) -> (f64, f64) {
        let lo = self.frequencies.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.frequencies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    pub fn is_gap_sensitive(&self) -> bool {
        let (lo, hi) = self.frequency_range();
        (hi - lo) / lo > GAP_SENSITIVITY
    }

    /// Interpolated frequency; `None` outside the tabulated gaps.
    pub fn eval(&self, gap: f64) -> Option<f64> {
        let (lo, hi) = self.gap_range();
        if !(gap >= lo && gap <= hi) {
            return None;
        }
        let k = match self.gaps.binary_search_by(|g| g.total_cmp(&gap)) {
            Ok(k) => return Some(self.frequencies[k]),
            Err(k) => k - 1,
        };
        let h = self.gaps[k + 1] - self.gaps[k];
        let t = (gap - self.gaps[k]) / h;
        let (y0, y1) = (self.frequencies[k], self.frequencies[k + 1]);
        let (d0, d1) = (self.slopes[k] * h, self.slopes[k + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        Some(
            (2.0 * t3 - 3.0 * t2 + 1.0) * y0
                + (t3 - 2.0 * t2 + t) * d0
                + (-2.0 * t3 + 3.0 * t2) * y1
                + (t3 - t2) * d1,
        )
    }
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    if n == 2 {
        return alloc::vec![delta[0]; 2];
    }
    let mut d = alloc::vec![0.0; n];
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

/// Three-point end slope, limited to keep the interpolant monotone.
fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() || d0 == 0.0 {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapFrequencyTable {
    curves: Vec<GapCurve>,
}

impl GapFrequencyTable {
    pub fn new(curves: Vec<GapCurve>) -> Result<Self> {
        if curves.is_empty() {
            return Err(Error::invalid("gap table", "no modes"));
        }
        for (i, c) in curves.iter().enumerate() {
            if curves[..i].iter().any(|o| o.label == c.label) {
                return Err(Error::invalid(
                    "gap table",
                    alloc::format!("duplicate mode `{}`", c.label),
                ));
            }
        }
        Ok(Self { curves })
    }

    pub fn curves(&self) -> &[GapCurve] {
        &self.curves
    }

    pub fn curve(&self, label: &str) -> Option<&GapCurve> {
        self.curves.iter().find(|c| c.label == label)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapEstimate {
    /// meters
    pub gap: f64,
    /// `(label, (f_meas - f_model) / f_meas)` in input order.
    pub residuals: Vec<(String, f64)>,
    pub rms: f64,
    pub max_abs: f64,
    /// Set when any mode mismatches by more than [`MISMATCH_FLAG`].
    pub flagged: bool,
}

/// Gap that best reproduces the measured `(label, frequency in Hz)` pairs.
pub fn infer_gap<S: AsRef<str>>(
    table: &GapFrequencyTable,
    measured: &[(S, f64)],
) -> Result<GapEstimate> {
    if measured.is_empty() {
        return Err(Error::invalid("measured", "no frequencies given"));
    }
    let mut modes = Vec::with_capacity(measured.len());
    for (label, f) in measured {
        let label = label.as_ref();
        if !(f.is_finite() && *f > 0.0) {
            return Err(Error::invalid(
                alloc::format!("measured {label}"),
                "frequency must be finite and positive",
            ));
        }
        let curve = table.curve(label).ok_or_else(|| {
            Error::invalid(
                "measured",
                alloc::format!("mode `{label}` is not in the gap table"),
            )
        })?;
        modes.push((curve, *f));
    }
    let sensitive: Vec<_> = modes.iter().filter(|(c, _)| c.is_gap_sensitive()).collect();
    if sensitive.is_empty() {
        return Err(Error::NoGapSensitiveMode);
    }
    let reachable = sensitive.iter().any(|(c, f)| {
        let (lo, hi) = c.frequency_range();
        *f >= lo && *f <= hi
    });
    if !reachable {
        return Err(Error::GapOutOfRange);
    }

    let lo = modes.iter().map(|(c, _)| c.gap_range().0).fold(f64::NEG_INFINITY, f64::max);
    let hi = modes.iter().map(|(c, _)| c.gap_range().1).fold(f64::INFINITY, f64::min);
    if !(lo < hi) {
        return Err(Error::invalid("gap table", "mode curves share no gap range"));
    }
    let objective = |g: f64| -> f64 {
        modes
            .iter()
            .map(|(c, f)| {
                let r = (f - c.eval(g).expect("gap inside common range")) / f;
                r * r
            })
            .sum()
    };

    let mut grid: Vec<f64> = (0..=SCAN_POINTS)
        .map(|k| lo + (hi - lo) * k as f64 / SCAN_POINTS as f64)
        .chain(
            modes
                .iter()
                .flat_map(|(c, _)| c.gaps.iter().copied())
                .filter(|g| *g >= lo && *g <= hi),
        )
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let values: Vec<f64> = grid.iter().map(|&g| objective(g)).collect();
    let best = (0..grid.len())
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .expect("grid is not empty");
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(grid.len() - 1)];
    let refined = golden_section(&objective, a, b, 1e-12 * (hi - lo));
    let gap = if objective(refined) < values[best] {
        refined
    } else {
        grid[best]
    };

    let residuals: Vec<(String, f64)> = modes
        .iter()
        .map(|(c, f)| (c.label.clone(), (f - c.eval(gap).expect("in range")) / f))
        .collect();
    let rms = libm::sqrt(
        residuals.iter().map(|(_, r)| r * r).sum::<f64>() / residuals.len() as f64,
    );
    let max_abs = residuals.iter().map(|(_, r)| r.abs()).fold(0.0, f64::max);
    Ok(GapEstimate {
        gap,
        residuals,
        rms,
        max_abs,
        flagged: max_abs > MISMATCH_FLAG,
    })
}

pub(crate) fn golden_section(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    const R: f64 = 0.618_033_988_749_895;
    let mut c = b - R * (b - a);
    let mut d = a + R * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - R * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + R * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
