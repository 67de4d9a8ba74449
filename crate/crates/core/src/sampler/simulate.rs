use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{rng_from_seed, sample_categorical, SamplerRng};
use crate::error::{Error, Result};
use crate::model::{cholesky_lower, Dataset, MixtureSpec};

/// `n` iid draws from `spec`: `z ~ Categorical(w)`, `x | z ~ N(mu_z, Sigma_z)`.
pub fn simulate_dataset(spec: &MixtureSpec, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidConfig("cannot simulate an empty dataset (n = 0)".into()));
    }
    let mut rng = rng_from_seed(seed);
    let z: Vec<usize> = (0..n).map(|_| sample_categorical(&mut rng, spec.weights())).collect();
    draw_points(spec, z, &mut rng)
}

/// Like [`simulate_dataset`] but with component counts fixed at `n w_k`
/// (largest remainder rounding), in random order.
pub fn simulate_stratified(spec: &MixtureSpec, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidConfig("cannot simulate an empty dataset (n = 0)".into()));
    }
    let mut rng = rng_from_seed(seed);
    let counts = stratified_counts(spec.weights(), n);
    let mut z: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(k, &c)| std::iter::repeat_n(k, c))
        .collect();
    z.shuffle(&mut rng);
    draw_points(spec, z, &mut rng)
}

/// Observations for a given allocation (e.g. a Potts lattice).
pub fn simulate_from_allocation(spec: &MixtureSpec, allocation: &[usize], seed: u64) -> Result<Dataset> {
    if allocation.is_empty() {
        return Err(Error::InvalidConfig("allocation is empty".into()));
    }
    if let Some(bad) = allocation.iter().find(|&&z| z >= spec.k()) {
        return Err(Error::InvalidConfig(format!(
            "allocation label {} outside 1..{}",
            bad + 1,
            spec.k()
        )));
    }
    let mut rng = rng_from_seed(seed);
    draw_points(spec, allocation.to_vec(), &mut rng)
}

fn stratified_counts(weights: &[f64], n: usize) -> Vec<usize> {
    let raw: Vec<f64> = weights.iter().map(|w| w * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let mut short = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    // largest fractional part first, lowest index on ties
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for k in order.into_iter().cycle() {
        if short == 0 {
            break;
        }
        counts[k] += 1;
        short -= 1;
    }
    counts
}

fn draw_points(spec: &MixtureSpec, z: Vec<usize>, rng: &mut SamplerRng) -> Result<Dataset> {
    let d = spec.dim();
    let factors: Vec<Vec<f64>> = spec
        .components()
        .iter()
        .map(|c| {
            cholesky_lower(&c.covariance_matrix())
                .ok_or_else(|| Error::Numerical("covariance is not positive definite".into()))
        })
        .collect::<Result<_>>()?;
    let mut eps = vec![0.0; d];
    let points = z
        .iter()
        .map(|&k| {
            let c = &spec.components()[k];
            let l = &factors[k];
            for e in eps.iter_mut() {
                *e = rng.sample(StandardNormal);
            }
            (0..d)
                .map(|i| c.mean()[i] + (0..=i).map(|j| l[i * d + j] * eps[j]).sum::<f64>())
                .collect()
        })
        .collect();
    Dataset::new(points, Some(z), Some(spec.clone()))
}
