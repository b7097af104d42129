//! Resolved / upper-bound classification of the extracted channels.

use alloc::vec::Vec;

use super::{Covariance, ExtractionConfig, LsqSolution, McSummary, WeightedSystem};
use crate::error::{Error, Result};
use crate::linalg;
use crate::loss_model::{Channel, MaterialLossVector, CHANNELS};

/// How the value of an unresolved channel's upper bound is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundRule {
    /// Smallest channel value that the system would resolve at
    /// `sigma_multiple` standard deviations, i.e. the root of
    /// `sigma_multiple * sqrt(C_ii(x)) = x_i` with the other channels held at
    /// their estimates and the loss-rate uncertainties following the model.
    SigmaCrossing { sigma_multiple: f64 },
    /// Percentile `p` of the Monte-Carlo distribution, `0.5 < p < 1`.
    McPercentile(f64),
}

impl Default for BoundRule {
    fn default() -> Self {
        BoundRule::SigmaCrossing {
            sigma_multiple: 2.0,
        }
    }
}

impl BoundRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BoundRule::SigmaCrossing { sigma_multiple } => {
                if !(sigma_multiple.is_finite() && sigma_multiple > 0.0) {
                    return Err(Error::invalid("bound_rule", "sigma multiple must be positive"));
                }
            }
            BoundRule::McPercentile(p) => {
                if !(p > 0.5 && p < 1.0) {
                    return Err(Error::invalid("bound_rule", "percentile must lie in (0.5, 1)"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Classification {
    Resolved { value: f64, sigma: f64 },
    UpperBound { value: f64 },
}

impl Classification {
    pub fn is_resolved(&self) -> bool {
        matches!(self, Classification::Resolved { .. })
    }

    pub fn value(&self) -> f64 {
        match *self {
            Classification::Resolved { value, .. } | Classification::UpperBound { value } => value,
        }
    }
}

/// A channel is resolved when `sqrt(C_ii) / x_i < 1` and the Monte-Carlo mass
/// at zero stays below the configured threshold.
pub fn classify_and_bound(
    system: &WeightedSystem,
    x_hat: &MaterialLossVector,
    unconstrained: &LsqSolution,
    mc: &McSummary,
    config: &ExtractionConfig,
) -> [Classification; CHANNELS] {
    let sigma = unconstrained.sigma();
    let x = x_hat.as_array();
    core::array::from_fn(|i| {
        let ratio = if x[i] > 0.0 { sigma[i] / x[i] } else { f64::INFINITY };
        if ratio < 1.0 && mc.mass_at_zero[i] < config.zero_mass_threshold {
            return Classification::Resolved {
                value: x[i],
                sigma: sigma[i],
            };
        }
        let bound = match config.bound_rule {
            BoundRule::McPercentile(p) => mc
                .percentile(p)
                .map(|v| v[i])
                .unwrap_or(x[i] + 2.0 * sigma[i]),
            BoundRule::SigmaCrossing { sigma_multiple } => {
                let channel = Channel::from_index(i).expect("index below CHANNELS");
                sigma_crossing(system, x_hat, channel, sigma_multiple)
                    .unwrap_or(x[i] + sigma_multiple * sigma[i])
            }
        };
        Classification::UpperBound {
            value: bound.max(x[i]),
        }
    })
}

/// Covariance of the extracted factors when the loss rates follow the model
/// at `x` with relative uncertainties `eps`.
pub fn model_covariance(
    rows: &[[f64; CHANNELS]],
    eps: &[f64],
    x: &[f64; CHANNELS],
    rank_tolerance: f64,
) -> Result<Covariance> {
    if rows.len() != eps.len() {
        return Err(Error::DimensionMismatch {
            expected: rows.len(),
            found: eps.len(),
        });
    }
    let mut sigmas = Vec::with_capacity(rows.len());
    for (i, (row, e)) in rows.iter().zip(eps).enumerate() {
        let y: f64 = row.iter().zip(x).map(|(p, v)| p * v).sum();
        let s = e * y;
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::ZeroLossRate {
                label: alloc::format!("row {i}"),
            });
        }
        sigmas.push(s);
    }
    let weighted = nalgebra::DMatrix::from_fn(rows.len(), CHANNELS, |i, j| rows[i][j] / sigmas[i]);
    let info = linalg::numerical_rank(&weighted, rank_tolerance);
    if info.rank < CHANNELS {
        return Err(Error::RankDeficient {
            rank: info.rank,
            required: CHANNELS,
            rows: linalg::near_dependent_rows(&info)
                .into_iter()
                .map(|i| alloc::format!("row {i}"))
                .collect(),
        });
    }
    let rhs = nalgebra::DVector::zeros(rows.len());
    let ls = linalg::least_squares(&weighted, &rhs);
    Ok(core::array::from_fn(|i| core::array::from_fn(|j| ls.covariance[(i, j)])))
}

const CROSSING_POINTS_PER_DECADE: usize = 20;

fn sigma_crossing(
    system: &WeightedSystem,
    x_hat: &MaterialLossVector,
    channel: Channel,
    sigma_multiple: f64,
) -> Option<f64> {
    let i = channel.index();
    let rows = system.rows();
    let eps: Vec<f64> = system
        .sigmas()
        .iter()
        .zip(system.loss_rates())
        .map(|(s, y)| s / y)
        .collect();
    if eps.iter().any(|e| !e.is_finite()) {
        return None;
    }
    // Scale of the channel: the value that alone explains the lossiest mode.
    let reference = rows
        .iter()
        .zip(system.loss_rates())
        .filter(|(r, _)| r[i] > 0.0)
        .map(|(r, y)| y / r[i])
        .fold(0.0, f64::max);
    if reference <= 0.0 {
        return None;
    }
    let g = |ln_t: f64| -> Option<f64> {
        let t = libm::exp(ln_t);
        let mut x = x_hat.as_array();
        x[i] = t;
        let c = model_covariance(rows, &eps, &x, 1e-14).ok()?;
        Some(sigma_multiple * libm::sqrt(c[i][i]) / t - 1.0)
    };
    let lo = libm::log(reference * 1e-12);
    let hi = libm::log(reference * 10.0);
    let steps = 13 * CROSSING_POINTS_PER_DECADE;
    let dt = (hi - lo) / steps as f64;
    let mut prev = (lo, g(lo)?);
    if prev.1 <= 0.0 {
        return None;
    }
    for k in 1..=steps {
        let t = lo + dt * k as f64;
        let v = g(t)?;
        if v <= 0.0 {
            let (mut a, mut b) = (prev.0, t);
            while b - a > 1e-10 {
                let mid = 0.5 * (a + b);
                if g(mid)? > 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            return Some(libm::exp(0.5 * (a + b)));
        }
        prev = (t, v);
    }
    None
}
