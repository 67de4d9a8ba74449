use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Draws `Sigma ~ IW(nu, psi)` through the Bartlett decomposition of
/// `Sigma^-1 ~ Wishart(nu, psi^-1)`.
pub(crate) fn sample_inverse_wishart<R: Rng>(rng: &mut R, nu: f64, psi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = psi.nrows();
    let psi_inv = psi
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("inverse-Wishart scale is not SPD".into()))?
        .inverse();
    let l = psi_inv
        .cholesky()
        .ok_or_else(|| Error::Numerical("inverse of the scale is not SPD".into()))?
        .l();
    let mut a = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        let chi = ChiSquared::new(nu - i as f64)
            .map_err(|e| Error::Numerical(format!("chi-square degrees of freedom: {e}")))?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let la = l * a;
    let precision = &la * la.transpose();
    let sigma = precision
        .cholesky()
        .ok_or_else(|| Error::Numerical("sampled precision is not SPD".into()))?
        .inverse();
    Ok(symmetrize(sigma))
}

pub(crate) fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}
