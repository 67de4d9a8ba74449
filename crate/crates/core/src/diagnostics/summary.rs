use crate::error::{Error, Result};
use crate::model::{coordinate_names, MixtureSpec, Trace};
use crate::relabel::{RelabelResult, RunningMoments};

/// Coordinate-wise posterior mean and sample variance of a relabelled trace.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSummary {
    pub k: usize,
    pub dim: usize,
    pub count: usize,
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub total_variance: f64,
}

impl PosteriorSummary {
    /// Mixture at the posterior mean parameters, weights renormalised.
    pub fn mean_spec(&self) -> Result<MixtureSpec> {
        MixtureSpec::unflatten_normalized(&self.mean, self.k, self.dim)
    }

    /// Posterior mean of each component weight.
    pub fn weights(&self) -> Vec<f64> {
        let b = self.mean.len() / self.k.max(1);
        (0..self.k).map(|c| self.mean[c * b]).collect()
    }

    /// Posterior mean of each component mean vector.
    pub fn means(&self) -> Vec<Vec<f64>> {
        let b = self.mean.len() / self.k.max(1);
        (0..self.k)
            .map(|c| self.mean[c * b + 1..c * b + 1 + self.dim].to_vec())
            .collect()
    }
}

pub fn posterior_summary(result: &RelabelResult) -> Result<PosteriorSummary> {
    summarize_trace(&result.relabelled)
}

pub fn summarize_trace(trace: &Trace) -> Result<PosteriorSummary> {
    if trace.is_empty() {
        return Err(Error::InvalidTrace("cannot summarise an empty trace".into()));
    }
    let (k, d) = (trace.k(), trace.dim());
    let names = coordinate_names(k, d);
    let mut moments = RunningMoments::new(names.len());
    for draw in trace.draws() {
        moments.push(&draw.spec.flatten());
    }
    Ok(PosteriorSummary {
        k,
        dim: d,
        count: moments.count(),
        names,
        mean: moments.mean().to_vec(),
        variance: moments.variance().to_vec(),
        total_variance: moments.total_variance(),
    })
}
