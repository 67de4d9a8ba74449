//! Mixture specifications, MCMC draws and traces.
//!
//! Component labels and allocations are zero-based in memory and one-based
//! in every file format.

mod density;
mod permutation;

use nalgebra::DMatrix;

pub use density::{log_sum_exp, PreparedComponent, PreparedMixture};
pub(crate) use density::cholesky_lower;
pub use permutation::{LexicographicPermutations, Permutation};

use crate::error::{Error, Result};

/// Eigenvalue floor for covariance matrices.
pub const SPD_TOLERANCE: f64 = 1e-10;
/// Tolerance on the sum of the mixture weights.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum Scale {
    Variance(f64),
    Covariance(DMatrix<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComponentParams {
    mean: Vec<f64>,
    scale: Scale,
}

impl ComponentParams {
    pub fn univariate(mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) || !mean.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "univariate component needs finite mean and positive variance, got mean {mean}, variance {variance}"
            )));
        }
        Ok(Self {
            mean: vec![mean],
            scale: Scale::Variance(variance),
        })
    }

    pub fn multivariate(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d < 2 {
            return Err(Error::InvalidSpec(
                "multivariate component needs d >= 2; use univariate for d = 1".into(),
            ));
        }
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: cov.nrows(),
            });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("non-finite mean or covariance entry".into()));
        }
        check_spd(&cov)?;
        Ok(Self {
            mean,
            scale: Scale::Covariance(cov),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn scale(&self) -> &Scale {
        &self.scale
    }

    /// Entry `(i, j)` of the covariance (the variance when d = 1).
    pub fn cov(&self, i: usize, j: usize) -> f64 {
        match &self.scale {
            Scale::Variance(v) => *v,
            Scale::Covariance(m) => m[(i, j)],
        }
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        match &self.scale {
            Scale::Variance(v) => DMatrix::from_element(1, 1, *v),
            Scale::Covariance(m) => m.clone(),
        }
    }
}

fn check_spd(cov: &DMatrix<f64>) -> Result<()> {
    let d = cov.nrows();
    let scale = cov.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    for i in 0..d {
        for j in 0..i {
            if (cov[(i, j)] - cov[(j, i)]).abs() > SPD_TOLERANCE * scale {
                return Err(Error::InvalidSpec(format!(
                    "covariance is not symmetric at ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    let eig = nalgebra::SymmetricEigen::new(cov.clone());
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > SPD_TOLERANCE) {
        return Err(Error::InvalidSpec(format!(
            "covariance is not positive definite (smallest eigenvalue {min:e})"
        )));
    }
    Ok(())
}

/// Number of scale entries stored per component.
pub fn scale_len(d: usize) -> usize {
    if d == 1 {
        1
    } else {
        d * (d + 1) / 2
    }
}

/// Length of one flattened component block `(w, mean, lower-triangle scale)`.
pub fn block_len(d: usize) -> usize {
    1 + d + scale_len(d)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixtureSpec {
    weights: Vec<f64>,
    components: Vec<ComponentParams>,
}

impl MixtureSpec {
    pub fn new(weights: Vec<f64>, components: Vec<ComponentParams>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidSpec("mixture needs K >= 1 components".into()));
        }
        if weights.len() != components.len() {
            return Err(Error::LengthMismatch {
                what: "component list",
                expected: weights.len(),
                actual: components.len(),
            });
        }
        let d = components[0].dim();
        if let Some(c) = components.iter().find(|c| c.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: c.dim(),
            });
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidSpec(format!("weights must be >= 0, got {weights:?}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidSpec(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self {
            weights,
            components,
        })
    }

    /// Convenience constructor for univariate mixtures from `(w, mu, sigma^2)` triples.
    pub fn univariate(params: &[(f64, f64, f64)]) -> Result<Self> {
        let components = params
            .iter()
            .map(|&(_, m, v)| ComponentParams::univariate(m, v))
            .collect::<Result<_>>()?;
        Self::new(params.iter().map(|p| p.0).collect(), components)
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[ComponentParams] {
        &self.components
    }

    /// Flattened parameter dimension `q = K (1 + d + s)`.
    pub fn q(&self) -> usize {
        self.k() * block_len(self.dim())
    }

    pub fn prepared(&self) -> Result<PreparedMixture> {
        PreparedMixture::new(self)
    }

    /// Canonical coordinates: per component `w_k`, `mu_k`, then the lower
    /// triangle of the covariance in row-major order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.q());
        for (w, c) in self.weights.iter().zip(&self.components) {
            push_block(&mut out, *w, c);
        }
        out
    }

    /// Inverse of [`flatten`](Self::flatten), validating the result.
    pub fn unflatten(flat: &[f64], k: usize, d: usize) -> Result<Self> {
        let b = block_len(d);
        if flat.len() != k * b {
            return Err(Error::LengthMismatch {
                what: "flattened parameter vector",
                expected: k * b,
                actual: flat.len(),
            });
        }
        let mut weights = Vec::with_capacity(k);
        let mut components = Vec::with_capacity(k);
        for block in flat.chunks(b) {
            weights.push(block[0]);
            let mean = block[1..1 + d].to_vec();
            let tri = &block[1 + d..];
            if d == 1 {
                components.push(ComponentParams::univariate(mean[0], tri[0])?);
            } else {
                let mut cov = DMatrix::zeros(d, d);
                let mut t = 0;
                for i in 0..d {
                    for j in 0..=i {
                        cov[(i, j)] = tri[t];
                        cov[(j, i)] = tri[t];
                        t += 1;
                    }
                }
                components.push(ComponentParams::multivariate(mean, cov)?);
            }
        }
        Self::new(weights, components)
    }

    /// Same as [`unflatten`](Self::unflatten) but renormalises the weights,
    /// which is what averaging many draws needs.
    pub fn unflatten_normalized(flat: &[f64], k: usize, d: usize) -> Result<Self> {
        let b = block_len(d);
        let mut owned = flat.to_vec();
        let total: f64 = owned.chunks(b).map(|c| c[0]).sum();
        if total > 0.0 {
            for c in owned.chunks_mut(b) {
                c[0] /= total;
            }
        }
        Self::unflatten(&owned, k, d)
    }

    /// Flattened component block `k`.
    pub fn block(&self, k: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(block_len(self.dim()));
        push_block(&mut out, self.weights[k], &self.components[k]);
        out
    }

    pub fn permuted(&self, nu: &Permutation) -> Result<Self> {
        if nu.len() != self.k() {
            return Err(Error::LengthMismatch {
                what: "permutation",
                expected: self.k(),
                actual: nu.len(),
            });
        }
        Ok(Self {
            weights: nu.permute(&self.weights),
            components: nu.permute(&self.components),
        })
    }
}

fn push_block(out: &mut Vec<f64>, w: f64, c: &ComponentParams) {
    out.push(w);
    out.extend_from_slice(c.mean());
    match c.scale() {
        Scale::Variance(v) => out.push(*v),
        Scale::Covariance(m) => {
            for i in 0..m.nrows() {
                for j in 0..=i {
                    out.push(m[(i, j)]);
                }
            }
        }
    }
}

/// Coordinate names matching [`MixtureSpec::flatten`], one-based.
pub fn coordinate_names(k: usize, d: usize) -> Vec<String> {
    let mut names = Vec::with_capacity(k * block_len(d));
    for c in 1..=k {
        names.push(format!("w_{c}"));
        for i in 1..=d {
            names.push(format!("mu_{c}_{i}"));
        }
        for i in 1..=d {
            for j in 1..=i {
                names.push(format!("sigma_{c}_{i}_{j}"));
            }
        }
    }
    names
}

/// Mixture density at `x`.
pub fn mixture_pdf(spec: &MixtureSpec, x: &[f64]) -> Result<f64> {
    spec.prepared()?.pdf(x)
}

/// Posterior membership probabilities of `x` under `spec`, computed in log space.
pub fn allocation_probabilities(spec: &MixtureSpec, x: &[f64]) -> Result<Vec<f64>> {
    spec.prepared()?.allocation_probabilities(x)
}

/// One MCMC iterate.
#[derive(Clone, Debug, PartialEq)]
pub struct Draw {
    pub iter: u64,
    pub spec: MixtureSpec,
    /// Zero-based component labels, one per observation.
    pub allocation: Option<Vec<usize>>,
    pub log_posterior: Option<f64>,
}

impl Draw {
    pub fn new(iter: u64, spec: MixtureSpec) -> Self {
        Self {
            iter,
            spec,
            allocation: None,
            log_posterior: None,
        }
    }

    pub fn k(&self) -> usize {
        self.spec.k()
    }
}

/// Relabels a draw: output block `k` is input block `nu[k]`, and allocation
/// value `j` becomes `nu^{-1}(j)` so parameters and labels stay consistent.
pub fn apply_permutation(draw: &Draw, nu: &Permutation) -> Result<Draw> {
    let spec = draw.spec.permuted(nu)?;
    let allocation = draw.allocation.as_ref().map(|z| {
        let inv = nu.inverse();
        z.iter().map(|&j| inv.get(j)).collect()
    });
    Ok(Draw {
        iter: draw.iter,
        spec,
        allocation,
        log_posterior: draw.log_posterior,
    })
}

/// An ordered run of homogeneous draws.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    draws: Vec<Draw>,
    dataset_id: String,
}

impl Trace {
    pub fn new(draws: Vec<Draw>, dataset_id: impl Into<String>) -> Result<Self> {
        if let Some(first) = draws.first() {
            let (k, d) = (first.spec.k(), first.spec.dim());
            let n = first.allocation.as_ref().map(|z| z.len());
            for (idx, draw) in draws.iter().enumerate() {
                if draw.spec.k() != k || draw.spec.dim() != d {
                    return Err(Error::InvalidTrace(format!(
                        "draw {} has K = {}, d = {}; expected K = {k}, d = {d}",
                        draw.iter,
                        draw.spec.k(),
                        draw.spec.dim()
                    )));
                }
                if draw.allocation.as_ref().map(|z| z.len()) != n {
                    return Err(Error::InvalidTrace(format!(
                        "draw {} allocation length differs from the first draw",
                        draw.iter
                    )));
                }
                if let Some(z) = &draw.allocation {
                    if let Some(bad) = z.iter().find(|&&v| v >= k) {
                        return Err(Error::InvalidTrace(format!(
                            "draw {} has allocation label {} outside 1..{k}",
                            draw.iter,
                            bad + 1
                        )));
                    }
                }
                if idx > 0 && draws[idx - 1].iter >= draw.iter {
                    return Err(Error::InvalidTrace(format!(
                        "iterations must be strictly increasing ({} then {})",
                        draws[idx - 1].iter,
                        draw.iter
                    )));
                }
            }
        }
        Ok(Self {
            draws,
            dataset_id: dataset_id.into(),
        })
    }

    pub fn draws(&self) -> &[Draw] {
        &self.draws
    }

    pub fn into_draws(self) -> Vec<Draw> {
        self.draws
    }

    pub fn dataset_id(&self) -> &str {
        &self.dataset_id
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn k(&self) -> usize {
        self.draws.first().map_or(0, Draw::k)
    }

    pub fn dim(&self) -> usize {
        self.draws.first().map_or(0, |d| d.spec.dim())
    }

    pub fn has_allocations(&self) -> bool {
        self.draws.first().is_some_and(|d| d.allocation.is_some())
    }

    pub fn has_log_posterior(&self) -> bool {
        !self.draws.is_empty() && self.draws.iter().all(|d| d.log_posterior.is_some())
    }

    /// Applies one permutation per draw.
    pub fn relabelled(&self, perms: &[Permutation]) -> Result<Trace> {
        if perms.len() != self.draws.len() {
            return Err(Error::LengthMismatch {
                what: "permutation list",
                expected: self.draws.len(),
                actual: perms.len(),
            });
        }
        let draws = self
            .draws
            .iter()
            .zip(perms)
            .map(|(d, p)| apply_permutation(d, p))
            .collect::<Result<_>>()?;
        Ok(Trace {
            draws,
            dataset_id: self.dataset_id.clone(),
        })
    }

    /// Keeps only the draws at the given (sorted) indices.
    pub fn subset(&self, keep: &[usize]) -> Trace {
        Trace {
            draws: keep.iter().map(|&i| self.draws[i].clone()).collect(),
            dataset_id: self.dataset_id.clone(),
        }
    }
}

/// Observations, optionally with the generating truth.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    points: Vec<Vec<f64>>,
    true_allocation: Option<Vec<usize>>,
    true_spec: Option<MixtureSpec>,
}

impl Dataset {
    pub fn new(
        points: Vec<Vec<f64>>,
        true_allocation: Option<Vec<usize>>,
        true_spec: Option<MixtureSpec>,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidDataset("dataset needs at least one observation".into()));
        }
        let d = points[0].len();
        if d == 0 {
            return Err(Error::InvalidDataset("observations need d >= 1".into()));
        }
        if let Some(p) = points.iter().find(|p| p.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: p.len(),
            });
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite observation".into()));
        }
        if let Some(z) = &true_allocation {
            if z.len() != points.len() {
                return Err(Error::LengthMismatch {
                    what: "true allocation",
                    expected: points.len(),
                    actual: z.len(),
                });
            }
            if let Some(spec) = &true_spec {
                if let Some(bad) = z.iter().find(|&&v| v >= spec.k()) {
                    return Err(Error::InvalidDataset(format!(
                        "true allocation label {} outside 1..{}",
                        bad + 1,
                        spec.k()
                    )));
                }
            }
        }
        if let Some(spec) = &true_spec {
            if spec.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: spec.dim(),
                });
            }
        }
        Ok(Self {
            points,
            true_allocation,
            true_spec,
        })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn true_allocation(&self) -> Option<&[usize]> {
        self.true_allocation.as_deref()
    }

    pub fn true_spec(&self) -> Option<&MixtureSpec> {
        self.true_spec.as_ref()
    }

    /// Stable identifier derived from the observations (FNV-1a over the bit patterns).
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for b in bytes {
                h ^= *b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        eat(&(self.n() as u64).to_le_bytes());
        eat(&(self.dim() as u64).to_le_bytes());
        for v in self.points.iter().flatten() {
            eat(&v.to_bits().to_le_bytes());
        }
        format!("ds-{h:016x}")
    }

    /// Number of true components: from the true spec, else the largest label.
    pub fn true_k(&self) -> Option<usize> {
        self.true_spec
            .as_ref()
            .map(MixtureSpec::k)
            .or_else(|| self.true_allocation.as_ref().map(|z| z.iter().max().map_or(0, |m| m + 1)))
    }
}
