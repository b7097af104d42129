//! Seeded Monte-Carlo propagation of loss-rate noise through the
//! non-negative solver.
//!
//! Sample `i` draws from its own ChaCha stream `(seed, i)`, so the statistics
//! depend only on the seed and the sample count, never on evaluation order.

use alloc::string::ToString;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use super::{extract_with, ExtractionConfig, ExtractionResult, NnlsOptions, WeightedSystem};
use crate::error::{Error, Result};
use crate::linalg;
use crate::loss_model::{ModeMeasurement, ParticipationMatrix, CHANNELS};

/// Redraw budget for a loss rate that comes out non-positive.
const MAX_REDRAWS: usize = 64;

const HISTOGRAM_BINS: usize = 40;

/// Everything a single Monte-Carlo sample needs, precomputed once.
#[derive(Debug, Clone)]
pub struct MonteCarloPlan {
    samples: usize,
    seed: u64,
    loss_rates: Vec<f64>,
    sigmas: Vec<f64>,
    normalized: DMatrix<f64>,
    scales: DVector<f64>,
    nnls: NnlsOptions,
}

impl MonteCarloPlan {
    pub fn new(system: &WeightedSystem, config: &ExtractionConfig) -> Result<Self> {
        let weighted = system.weighted_matrix();
        let scales = linalg::column_norms(&weighted);
        Ok(Self {
            samples: config.mc_samples,
            seed: config.seed,
            loss_rates: system.loss_rates().to_vec(),
            sigmas: system.sigmas().to_vec(),
            normalized: linalg::scale_columns(&weighted, &scales),
            scales,
            nnls: config.nnls,
        })
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Perturbs every loss rate with its own normal noise and solves the
    /// non-negative problem.
    pub fn sample(&self, index: usize) -> Result<[f64; CHANNELS]> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        let b = DVector::from_iterator(
            self.loss_rates.len(),
            self.loss_rates
                .iter()
                .zip(&self.sigmas)
                .map(|(&y, &s)| {
                    for _ in 0..MAX_REDRAWS {
                        let n: f64 = StandardNormal.sample(&mut rng);
                        let perturbed = y + s * n;
                        if perturbed > 0.0 {
                            return Ok(perturbed / s);
                        }
                    }
                    Err(Error::invalid(
                        "monte-carlo sample",
                        "could not draw a positive loss rate",
                    ))
                })
                .collect::<Result<Vec<_>>>()?,
        );
        let (x, _) = super::nnls::nnls_normalized(&self.normalized, &b, &self.nnls)?;
        Ok(core::array::from_fn(|j| x[j] / self.scales[j]))
    }

    /// Serial evaluation of every sample, in index order.
    pub fn run_serial(&self) -> Vec<Result<[f64; CHANNELS]>> {
        (0..self.samples).map(|i| self.sample(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    fn build(values: &[f64]) -> Self {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut counts = alloc::vec![0; HISTOGRAM_BINS];
        let width = (hi - lo) / HISTOGRAM_BINS as f64;
        for &v in values {
            let bin = if width > 0.0 {
                (((v - lo) / width) as usize).min(HISTOGRAM_BINS - 1)
            } else {
                0
            };
            counts[bin] += 1;
        }
        Self { lo, hi, counts }
    }

    pub fn bin_edges(&self) -> Vec<f64> {
        let n = self.counts.len();
        (0..=n)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / n as f64)
            .collect()
    }
}

/// Per-channel statistics of the Monte-Carlo distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub samples: usize,
    pub failed: usize,
    pub mean: [f64; CHANNELS],
    pub std: [f64; CHANNELS],
    /// `(p, value per channel)`, sorted by `p`.
    pub percentiles: Vec<(f64, [f64; CHANNELS])>,
    /// Fraction of samples with the channel exactly at zero.
    pub mass_at_zero: [f64; CHANNELS],
    pub histograms: [Histogram; CHANNELS],
}

impl McSummary {
    /// Linear-interpolated percentile of a channel, `p` in `[0, 1]`.
    pub fn percentile(&self, p: f64) -> Option<[f64; CHANNELS]> {
        self.percentiles
            .iter()
            .find(|(q, _)| (q - p).abs() < 1e-12)
            .map(|(_, v)| *v)
    }
}

const REPORTED_PERCENTILES: [f64; 5] = [0.05, 0.16, 0.5, 0.84, 0.95];

/// Reduces per-sample results (in index order) to statistics.
pub fn summarize_samples(
    samples: Vec<Result<[f64; CHANNELS]>>,
    config: &ExtractionConfig,
) -> Result<McSummary> {
    let total = samples.len();
    let mut first_failure = None;
    let mut good = Vec::with_capacity(total);
    for s in samples {
        match s {
            Ok(x) => good.push(x),
            Err(e) => {
                if first_failure.is_none() {
                    first_failure = Some(e.to_string());
                }
            }
        }
    }
    let failed = total - good.len();
    if good.is_empty() || failed as f64 > config.max_failure_fraction * total as f64 {
        return Err(Error::MonteCarlo {
            failed,
            total,
            first: first_failure.unwrap_or_default(),
        });
    }

    let n = good.len() as f64;
    let columns: [Vec<f64>; CHANNELS] =
        core::array::from_fn(|j| good.iter().map(|x| x[j]).collect());
    let mean: [f64; CHANNELS] = core::array::from_fn(|j| columns[j].iter().sum::<f64>() / n);
    let std = core::array::from_fn(|j| {
        if good.len() < 2 {
            return 0.0;
        }
        let ss: f64 = columns[j].iter().map(|v| (v - mean[j]) * (v - mean[j])).sum();
        libm::sqrt(ss / (n - 1.0))
    });
    let mass_at_zero = core::array::from_fn(|j| columns[j].iter().filter(|&&v| v == 0.0).count() as f64 / n);

    let sorted: [Vec<f64>; CHANNELS] = core::array::from_fn(|j| {
        let mut v = columns[j].clone();
        v.sort_by(f64::total_cmp);
        v
    });
    let mut levels: Vec<f64> = REPORTED_PERCENTILES.to_vec();
    if let super::BoundRule::McPercentile(p) = config.bound_rule {
        levels.push(p);
    }
    levels.sort_by(f64::total_cmp);
    levels.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let percentiles = levels
        .into_iter()
        .map(|p| (p, core::array::from_fn(|j| quantile(&sorted[j], p))))
        .collect();

    Ok(McSummary {
        samples: good.len(),
        failed,
        mean,
        std,
        percentiles,
        mass_at_zero,
        histograms: core::array::from_fn(|j| Histogram::build(&columns[j])),
    })
}

/// Linear interpolation between order statistics.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Full extraction with serial Monte-Carlo evaluation.
pub fn monte_carlo_extract(
    p: &ParticipationMatrix,
    measurements: &[ModeMeasurement],
    config: &ExtractionConfig,
) -> Result<ExtractionResult> {
    extract_with(p, measurements, config, MonteCarloPlan::run_serial)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.0);
        assert_eq!(quantile(&v, 0.95), 3.8);
        assert_eq!(quantile(&v, 1.0), 4.0);
    }

    #[test]
    fn failures_above_threshold_abort() {
        let config = ExtractionConfig::default();
        let mut samples: Vec<Result<[f64; CHANNELS]>> = (0..100).map(|_| Ok([1.0, 1.0, 1.0])).collect();
        samples[3] = Err(Error::ZeroTotalLoss);
        assert!(summarize_samples(samples.clone(), &config).is_ok());
        samples[4] = Err(Error::ZeroTotalLoss);
        assert!(matches!(
            summarize_samples(samples, &config),
            Err(Error::MonteCarlo { failed: 2, total: 100, .. })
        ));
    }

    #[test]
    fn histogram_counts_everything() {
        let h = Histogram::build(&[0.0, 0.5, 1.0, 1.0]);
        assert_eq!(h.counts.iter().sum::<usize>(), 4);
        assert_eq!(h.counts[HISTOGRAM_BINS - 1], 2);
        assert_eq!(h.bin_edges().len(), HISTOGRAM_BINS + 1);
    }
}
