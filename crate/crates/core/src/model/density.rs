//! Log-space Gaussian and mixture densities.

use nalgebra::DMatrix;

use super::{ComponentParams, MixtureSpec, Scale};
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// A component with its normalising constant and Cholesky factor cached.
#[derive(Clone, Debug)]
pub struct PreparedComponent {
    mean: Vec<f64>,
    /// Lower Cholesky factor, row-major, d*d. For d = 1 holds the standard deviation.
    chol: Vec<f64>,
    log_norm: f64,
}

impl PreparedComponent {
    pub fn new(params: &ComponentParams) -> Result<Self> {
        let d = params.dim();
        match params.scale() {
            Scale::Variance(v) => Ok(Self {
                mean: params.mean().to_vec(),
                chol: vec![v.sqrt()],
                log_norm: -0.5 * (LN_2PI + v.ln()),
            }),
            Scale::Covariance(cov) => {
                let chol = cholesky_lower(cov).ok_or_else(|| {
                    Error::Numerical("covariance matrix is not positive definite".into())
                })?;
                let log_det: f64 = (0..d).map(|i| chol[i * d + i].ln()).sum::<f64>() * 2.0;
                Ok(Self {
                    mean: params.mean().to_vec(),
                    chol,
                    log_norm: -0.5 * (d as f64 * LN_2PI + log_det),
                })
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let d = self.mean.len();
        if d == 1 {
            let z = (x[0] - self.mean[0]) / self.chol[0];
            return self.log_norm - 0.5 * z * z;
        }
        // forward substitution L y = x - mu
        let mut y = [0.0f64; 16];
        let mut heap;
        let y: &mut [f64] = if d <= 16 {
            &mut y[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        let mut quad = 0.0;
        for i in 0..d {
            let mut s = x[i] - self.mean[i];
            for j in 0..i {
                s -= self.chol[i * d + j] * y[j];
            }
            y[i] = s / self.chol[i * d + i];
            quad += y[i] * y[i];
        }
        self.log_norm - 0.5 * quad
    }
}

/// Row-major lower Cholesky factor, or `None` if the matrix is not positive definite.
pub(crate) fn cholesky_lower(m: &DMatrix<f64>) -> Option<Vec<f64>> {
    let d = m.nrows();
    let chol = nalgebra::Cholesky::new(m.clone())?;
    let l = chol.l();
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            out[i * d + j] = l[(i, j)];
        }
    }
    Some(out)
}

/// A mixture ready for repeated evaluation.
#[derive(Clone, Debug)]
pub struct PreparedMixture {
    log_weights: Vec<f64>,
    components: Vec<PreparedComponent>,
}

impl PreparedMixture {
    pub fn new(spec: &MixtureSpec) -> Result<Self> {
        Ok(Self {
            log_weights: spec.weights().iter().map(|w| w.ln()).collect(),
            components: spec
                .components()
                .iter()
                .map(PreparedComponent::new)
                .collect::<Result<_>>()?,
        })
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// `log w_k + log f(x | theta_k)` for every component.
    pub fn weighted_log_terms(&self, x: &[f64], out: &mut [f64]) {
        for (k, c) in self.components.iter().enumerate() {
            out[k] = self.log_weights[k] + c.log_pdf(x);
        }
    }

    pub fn log_pdf(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let mut terms = vec![0.0; self.k()];
        self.weighted_log_terms(x, &mut terms);
        Ok(log_sum_exp(&terms))
    }

    pub fn pdf(&self, x: &[f64]) -> Result<f64> {
        Ok(self.log_pdf(x)?.exp())
    }

    pub fn allocation_probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut terms = vec![0.0; self.k()];
        self.weighted_log_terms(x, &mut terms);
        let lse = log_sum_exp(&terms);
        if lse.is_nan() {
            return Err(Error::NonFinite("allocation log-density is NaN".into()));
        }
        if !lse.is_finite() {
            return Err(Error::DensityUnderflow);
        }
        Ok(terms.iter().map(|t| (t - lse).exp()).collect())
    }

    /// Index of the largest weighted density; ties go to the lowest index.
    pub fn modal_component(&self, x: &[f64], scratch: &mut [f64]) -> usize {
        self.weighted_log_terms(x, scratch);
        argmax_first(scratch)
    }
}

pub(crate) fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = k;
        }
    }
    best
}

pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        let v = log_sum_exp(&[-1000.0, -1000.0]);
        assert!((v - (-1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn multivariate_density_matches_closed_form_for_diagonal() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        let c = ComponentParams::multivariate(vec![1.0, -1.0], cov).unwrap();
        let p = PreparedComponent::new(&c).unwrap();
        let x = [0.3, 0.2];
        let a = -0.5 * (LN_2PI + 2f64.ln()) - (0.3f64 - 1.0).powi(2) / 4.0;
        let b = -0.5 * (LN_2PI + 0.5f64.ln()) - (1.2f64).powi(2) / 1.0;
        assert!((p.log_pdf(&x) - (a + b)).abs() < 1e-12);
    }
}
