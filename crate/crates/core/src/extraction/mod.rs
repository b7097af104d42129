//! Inverse problem: material loss factors from measured internal quality
//! factors.
//!
//! The measured loss rates are weighted by their standard deviations, giving
//! `b_i = y_i / sigma_i` and `P~_ij = P_ij / sigma_i`. The unconstrained
//! solution is `x = C P~^T b` with covariance `C = (P~^T P~)^{-1}`; the
//! constrained one comes from non-negative least squares on the same system,
//! with Monte-Carlo sampling for its distribution.

mod bounds;
mod monte_carlo;
mod nnls;

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::loss_model::{MaterialLossVector, ModeMeasurement, ParticipationMatrix, CHANNELS};

pub use bounds::{classify_and_bound, model_covariance, BoundRule, Classification};
pub use monte_carlo::{
    monte_carlo_extract, summarize_samples, Histogram, McSummary, MonteCarloPlan,
};
pub use nnls::{nnls, NnlsOptions, NnlsSolution};

/// 3x3 covariance matrix in SI units.
pub type Covariance = [[f64; CHANNELS]; CHANNELS];

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionConfig {
    pub mc_samples: usize,
    pub seed: u64,
    pub bound_rule: BoundRule,
    /// Singular-value cutoff, relative to the largest singular value of the
    /// column-normalized weighted matrix.
    pub rank_tolerance: f64,
    /// A channel whose Monte-Carlo mass at exactly zero reaches this fraction is
    /// reported as a bound.
    pub zero_mass_threshold: f64,
    /// Abort when more than this fraction of Monte-Carlo samples fail.
    pub max_failure_fraction: f64,
    pub nnls: NnlsOptions,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            mc_samples: 5000,
            seed: 0,
            bound_rule: BoundRule::default(),
            rank_tolerance: 1e-10,
            zero_mass_threshold: 0.05,
            max_failure_fraction: 0.01,
            nnls: NnlsOptions::default(),
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mc_samples < 100 {
            return Err(Error::invalid("mc_samples", "must be at least 100"));
        }
        self.bound_rule.validate()?;
        if !(self.rank_tolerance > 0.0 && self.rank_tolerance < 1.0) {
            return Err(Error::invalid("rank_tolerance", "must lie in (0, 1)"));
        }
        if !(self.zero_mass_threshold > 0.0 && self.zero_mass_threshold < 1.0) {
            return Err(Error::invalid("zero_mass_threshold", "must lie in (0, 1)"));
        }
        if !(0.0..1.0).contains(&self.max_failure_fraction) {
            return Err(Error::invalid("max_failure_fraction", "must lie in [0, 1)"));
        }
        self.nnls.validate()
    }
}

/// Loss rates, their standard deviations and the matching participation rows.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSystem {
    labels: Vec<String>,
    rows: Vec<[f64; CHANNELS]>,
    loss_rates: Vec<f64>,
    sigmas: Vec<f64>,
}

impl WeightedSystem {
    /// Pairs each measurement with the participation row of the same label.
    pub fn new(p: &ParticipationMatrix, measurements: &[ModeMeasurement]) -> Result<Self> {
        if measurements.is_empty() {
            return Err(Error::invalid("measurements", "no modes given"));
        }
        let mut labels = Vec::with_capacity(measurements.len());
        let mut rows = Vec::with_capacity(measurements.len());
        for (i, m) in measurements.iter().enumerate() {
            if measurements[..i].iter().any(|o| o.label() == m.label()) {
                return Err(Error::invalid(
                    "measurements",
                    alloc::format!("duplicate mode `{}`", m.label()),
                ));
            }
            let row = p.row(m.label()).ok_or_else(|| {
                Error::invalid(
                    "measurements",
                    alloc::format!("mode `{}` has no participation row", m.label()),
                )
            })?;
            labels.push(String::from(m.label()));
            rows.push(row.as_array());
        }
        let loss_rates = measurements.iter().map(ModeMeasurement::loss_rate).collect();
        let sigmas = measurements
            .iter()
            .map(ModeMeasurement::loss_rate_sigma)
            .collect();
        Self::from_parts(labels, rows, loss_rates, sigmas)
    }

    /// Builds a system from raw parts. Loss rates may be zero; sigmas must be
    /// positive.
    pub fn from_parts(
        labels: Vec<String>,
        rows: Vec<[f64; CHANNELS]>,
        loss_rates: Vec<f64>,
        sigmas: Vec<f64>,
    ) -> Result<Self> {
        let m = rows.len();
        for len in [labels.len(), loss_rates.len(), sigmas.len()] {
            if len != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: len,
                });
            }
        }
        if rows.iter().flatten().chain(&loss_rates).any(|v| !v.is_finite()) {
            return Err(Error::invalid("weighted system", "non-finite entry"));
        }
        for (label, &s) in labels.iter().zip(&sigmas) {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::ZeroLossRate {
                    label: label.clone(),
                });
            }
        }
        Ok(Self {
            labels,
            rows,
            loss_rates,
            sigmas,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn rows(&self) -> &[[f64; CHANNELS]] {
        &self.rows
    }

    pub fn loss_rates(&self) -> &[f64] {
        &self.loss_rates
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    /// Same rows and sigmas, different loss rates.
    pub fn with_loss_rates(&self, loss_rates: Vec<f64>) -> Result<Self> {
        Self::from_parts(
            self.labels.clone(),
            self.rows.clone(),
            loss_rates,
            self.sigmas.clone(),
        )
    }

    /// Same loss rates, all sigmas multiplied by `factor`.
    pub fn with_scaled_sigmas(&self, factor: f64) -> Result<Self> {
        Self::from_parts(
            self.labels.clone(),
            self.rows.clone(),
            self.loss_rates.clone(),
            self.sigmas.iter().map(|s| s * factor).collect(),
        )
    }

    pub(crate) fn weighted_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), CHANNELS, |i, j| self.rows[i][j] / self.sigmas[i])
    }

    pub(crate) fn weighted_rhs(&self, loss_rates: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            loss_rates.iter().zip(&self.sigmas).map(|(y, s)| y / s),
        )
    }

    pub fn check_rank(&self, tolerance: f64) -> Result<()> {
        let info = linalg::numerical_rank(&self.weighted_matrix(), tolerance);
        if info.rank < CHANNELS {
            return Err(Error::RankDeficient {
                rank: info.rank,
                required: CHANNELS,
                rows: linalg::near_dependent_rows(&info)
                    .into_iter()
                    .map(|i| self.labels[i].clone())
                    .collect(),
            });
        }
        Ok(())
    }

    /// Unconstrained weighted least squares and its covariance.
    pub fn lsq(&self, rank_tolerance: f64) -> Result<LsqSolution> {
        self.check_rank(rank_tolerance)?;
        let ls = linalg::least_squares(
            &self.weighted_matrix(),
            &self.weighted_rhs(&self.loss_rates),
        );
        Ok(LsqSolution {
            x: core::array::from_fn(|j| ls.x[j]),
            covariance: core::array::from_fn(|i| core::array::from_fn(|j| ls.covariance[(i, j)])),
        })
    }

    /// Non-negative weighted least squares.
    pub fn nnls(&self, rank_tolerance: f64, options: &NnlsOptions) -> Result<NnlsSolution> {
        self.check_rank(rank_tolerance)?;
        nnls(
            &self.weighted_matrix(),
            &self.weighted_rhs(&self.loss_rates),
            options,
        )
    }

    /// `P x` for every mode.
    pub fn predict(&self, x: &[f64; CHANNELS]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().zip(x).map(|(p, v)| p * v).sum())
            .collect()
    }
}

/// Unconstrained solution; components may be negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsqSolution {
    pub x: [f64; CHANNELS],
    pub covariance: Covariance,
}

impl LsqSolution {
    pub fn sigma(&self) -> [f64; CHANNELS] {
        core::array::from_fn(|i| libm::sqrt(self.covariance[i][i]))
    }
}

pub fn weighted_lsq_solve(
    p: &ParticipationMatrix,
    measurements: &[ModeMeasurement],
    rank_tolerance: f64,
) -> Result<LsqSolution> {
    WeightedSystem::new(p, measurements)?.lsq(rank_tolerance)
}

pub fn nnls_solve(
    p: &ParticipationMatrix,
    measurements: &[ModeMeasurement],
    rank_tolerance: f64,
    options: &NnlsOptions,
) -> Result<MaterialLossVector> {
    let solution = WeightedSystem::new(p, measurements)?.nnls(rank_tolerance, options)?;
    MaterialLossVector::from_array(core::array::from_fn(|j| solution.x[j]))
}

/// Per-mode comparison of measured and predicted loss rates.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeResidual {
    pub label: String,
    pub measured: f64,
    /// Prediction from the non-negative estimate.
    pub predicted: f64,
    /// Prediction from the unconstrained estimate.
    pub predicted_unconstrained: f64,
}

impl ModeResidual {
    /// `predicted - measured`
    pub fn residual(&self) -> f64 {
        self.predicted - self.measured
    }

    pub fn relative(&self) -> f64 {
        self.residual() / self.measured
    }

    pub fn relative_unconstrained(&self) -> f64 {
        (self.predicted_unconstrained - self.measured) / self.measured
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionResult {
    /// Non-negative point estimate.
    pub x_hat: MaterialLossVector,
    pub unconstrained: LsqSolution,
    pub mc: McSummary,
    pub classification: [Classification; CHANNELS],
    pub residuals: Vec<ModeResidual>,
}

impl ExtractionResult {
    pub fn covariance(&self) -> &Covariance {
        &self.unconstrained.covariance
    }

    pub fn sigma(&self) -> [f64; CHANNELS] {
        self.unconstrained.sigma()
    }
}

/// Runs the whole extraction, delegating sample evaluation to `run`.
///
/// `run` must return one entry per sample index `0..plan.samples()`, in index
/// order; any evaluation strategy that does so yields bit-identical results.
pub fn extract_with<F>(
    p: &ParticipationMatrix,
    measurements: &[ModeMeasurement],
    config: &ExtractionConfig,
    run: F,
) -> Result<ExtractionResult>
where
    F: FnOnce(&MonteCarloPlan) -> Vec<Result<[f64; CHANNELS]>>,
{
    config.validate()?;
    let system = WeightedSystem::new(p, measurements)?;
    let unconstrained = system.lsq(config.rank_tolerance)?;
    let constrained = system.nnls(config.rank_tolerance, &config.nnls)?;
    let x_hat = MaterialLossVector::from_array(core::array::from_fn(|j| constrained.x[j]))?;

    let plan = MonteCarloPlan::new(&system, config)?;
    let samples = run(&plan);
    let mc = summarize_samples(samples, config)?;

    let classification = classify_and_bound(&system, &x_hat, &unconstrained, &mc, config);

    let predicted = system.predict(&x_hat.as_array());
    let predicted_unconstrained = system.predict(&unconstrained.x);
    let residuals = system
        .labels()
        .iter()
        .enumerate()
        .map(|(i, label)| ModeResidual {
            label: label.clone(),
            measured: system.loss_rates()[i],
            predicted: predicted[i],
            predicted_unconstrained: predicted_unconstrained[i],
        })
        .collect();

    Ok(ExtractionResult {
        x_hat,
        unconstrained,
        mc,
        classification,
        residuals,
    })
}

/// One sweep point: photon number and the modes measured there.
pub type SweepPoint = (f64, Vec<ModeMeasurement>);

/// Independent extraction at every power point.
pub fn power_sweep_extract(
    p: &ParticipationMatrix,
    sweep: &[SweepPoint],
    config: &ExtractionConfig,
) -> Result<Vec<(f64, ExtractionResult)>> {
    check_sweep_modes(sweep)?;
    sweep
        .iter()
        .map(|(n, modes)| Ok((*n, monte_carlo_extract(p, modes, config)?)))
        .collect()
}

/// Every sweep point must list the same modes in the same order.
pub fn check_sweep_modes(sweep: &[SweepPoint]) -> Result<()> {
    if let Some((_, first)) = sweep.first() {
        for (k, (_, modes)) in sweep.iter().enumerate().skip(1) {
            let same = modes.len() == first.len()
                && modes
                    .iter()
                    .zip(first)
                    .all(|(a, b)| a.label() == b.label());
            if !same {
                return Err(Error::InconsistentModes {
                    first: 0,
                    second: k,
                });
            }
        }
    }
    Ok(())
}
