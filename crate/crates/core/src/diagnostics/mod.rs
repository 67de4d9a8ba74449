//! Comparison metrics for relabelled traces and a convergence monitor.

mod kl;
mod misclassification;
mod rhat;
mod summary;

use std::time::Instant;

pub use kl::{kl_distance, KlConfig};
pub use misclassification::{majority_allocation, misclassification, Misclassification};
pub use rhat::{gelman_rubin, gelman_rubin_from_moments, RhatReport};
pub use summary::{posterior_summary, summarize_trace, PosteriorSummary};

use crate::error::Result;
use crate::model::{Dataset, MixtureSpec};
use crate::relabel::{Method, RelabelResult};

/// Runs `f` and returns its output with the elapsed wall-clock seconds.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

/// Everything reported for one method on one dataset.
#[derive(Clone, Debug)]
pub struct DiagnosticsReport {
    pub method: Method,
    pub kl: Option<f64>,
    pub misclassification: Option<Misclassification>,
    pub summary: PosteriorSummary,
    pub time_seconds: f64,
    pub retained: usize,
    pub excluded: usize,
}

impl DiagnosticsReport {
    pub fn total_variance(&self) -> f64 {
        self.summary.total_variance
    }

    pub fn misclassification_rate(&self) -> Option<f64> {
        self.misclassification.as_ref().map(|m| m.rate)
    }
}

/// Summary, KL distance to `reference` (if given) and misclassification
/// against the dataset's true allocation (if it has one).
pub fn diagnose(
    result: &RelabelResult,
    data: Option<&Dataset>,
    reference: Option<&MixtureSpec>,
    kl_cfg: &KlConfig,
) -> Result<DiagnosticsReport> {
    let summary = posterior_summary(result)?;
    let kl = match reference {
        Some(p) => Some(kl_distance(p, &summary.mean_spec()?, kl_cfg)?),
        None => None,
    };
    let misclassification = match data {
        Some(d) if d.true_allocation().is_some() => Some(misclassification(result, d)?),
        _ => None,
    };
    Ok(DiagnosticsReport {
        method: result.method,
        kl,
        misclassification,
        summary,
        time_seconds: result.wall_time,
        retained: result.relabelled.len(),
        excluded: result.excluded.len(),
    })
}
