//! Rayon-parallel drivers for the Monte-Carlo extraction and sensitivity
//! grids. Results do not depend on the thread count.

use rayon::prelude::*;
use resolveq_core::extraction::{extract_with, ExtractionConfig, ExtractionResult, MonteCarloPlan};
use resolveq_core::sensitivity::{sensitivity_column, SensitivityGrid, SensitivityGridSpec};
use resolveq_core::{ModeMeasurement, ParticipationMatrix};

use crate::error::{CoreContext, Error, Result};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "RESOLVEQ_THREADS";

/// Thread cap from [`THREADS_ENV`], if set.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Usage(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
        _ => Ok(None),
    }
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    b.build()
        .map_err(|e| Error::Usage(format!("cannot start worker threads: {e}")))
}

/// Extraction with the Monte-Carlo samples spread over `threads` workers
/// (all cores when `None`).
pub fn extract(
    p: &ParticipationMatrix,
    measurements: &[ModeMeasurement],
    config: &ExtractionConfig,
    threads: Option<usize>,
) -> Result<ExtractionResult> {
    let pool = pool(threads)?;
    extract_with(p, measurements, config, |plan: &MonteCarloPlan| {
        pool.install(|| (0..plan.samples()).into_par_iter().map(|i| plan.sample(i)).collect())
    })
    .context("extraction")
}

/// Sensitivity grid with columns evaluated in parallel.
pub fn sensitivity_grid(
    p: &ParticipationMatrix,
    spec: &SensitivityGridSpec,
    threads: Option<usize>,
) -> Result<SensitivityGrid> {
    spec.validate().context("sensitivity grid")?;
    let pool = pool(threads)?;
    let n = spec.axes[1 - spec.column_axis()].points;
    let columns = pool
        .install(|| {
            (0..n)
                .into_par_iter()
                .map(|k| sensitivity_column(p, spec, k))
                .collect::<resolveq_core::Result<Vec<_>>>()
        })
        .context("sensitivity grid")?;
    Ok(SensitivityGrid::assemble(spec.clone(), columns))
}
