//! Conjugate Gibbs sampler for multivariate normal mixtures with
//! normal / inverse-Wishart component priors.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::potts::neighbour_table;
use super::wishart::{sample_inverse_wishart, symmetrize};
use super::{random_permutation, rng_from_seed, sample_dirichlet, sample_log_categorical, ConjugatePrior, PriorSpec, SamplerConfig, SamplerRng};
use crate::error::{Error, Result};
use crate::relabel::kmeans;
use crate::model::{log_sum_exp, ComponentParams, Dataset, Draw, MixtureSpec, PreparedComponent, Trace};

const INIT_LLOYD_ITERATIONS: usize = 100;

pub fn gibbs_multivariate(data: &Dataset, prior: &PriorSpec, cfg: &SamplerConfig) -> Result<Trace> {
    if data.dim() < 2 {
        return Err(Error::InvalidConfig(
            "multivariate sampler needs d >= 2; use the univariate sampler".into(),
        ));
    }
    let PriorSpec::Multivariate(prior) = prior else {
        return Err(Error::InvalidConfig(
            "multivariate sampler needs a normal / inverse-Wishart prior".into(),
        ));
    };
    run(data.points(), data.dim(), prior, cfg, &data.fingerprint())
}

struct State {
    w: Vec<f64>,
    mu: Vec<DVector<f64>>,
    sigma: Vec<DMatrix<f64>>,
    z: Vec<usize>,
}

pub(crate) fn run(
    points: &[Vec<f64>],
    d: usize,
    prior: &ConjugatePrior,
    cfg: &SamplerConfig,
    dataset_id: &str,
) -> Result<Trace> {
    cfg.validate()?;
    prior.validate(d)?;
    let k = cfg.k;
    let n = points.len();
    let neighbours = match &cfg.spatial {
        Some(s) => {
            if s.dims.iter().product::<usize>() != n {
                return Err(Error::InvalidConfig(format!(
                    "lattice {:?} has {} sites but the dataset has {n} points",
                    s.dims,
                    s.dims.iter().product::<usize>()
                )));
            }
            Some((neighbour_table(s.dims), s.kappa))
        }
        None => None,
    };
    let mut rng = rng_from_seed(cfg.seed);
    let mut state = initial_state(points, d, prior, k, &mut rng)?;
    let kappa0 = prior.tau.recip();

    let mut draws = Vec::with_capacity(cfg.retained());
    let mut logw = vec![0.0; k];
    let mut scratch = vec![0.0; k];

    for iter in 1..=cfg.iterations {
        // z | w, mu, Sigma (sequential when a Potts coupling is present)
        let comps = prepared(&state)?;
        let log_w: Vec<f64> = state.w.iter().map(|w| w.ln()).collect();
        for i in 0..n {
            for c in 0..k {
                logw[c] = log_w[c] + comps[c].log_pdf(&points[i]);
            }
            if let Some((table, kappa)) = &neighbours {
                for &nb in &table[i] {
                    logw[state.z[nb]] += kappa;
                }
            }
            state.z[i] = sample_log_categorical(&mut rng, &logw, &mut scratch);
        }

        // sufficient statistics
        let mut counts = vec![0usize; k];
        let mut sums = vec![DVector::<f64>::zeros(d); k];
        for (x, &c) in points.iter().zip(&state.z) {
            counts[c] += 1;
            for j in 0..d {
                sums[c][j] += x[j];
            }
        }
        let means: Vec<DVector<f64>> = (0..k)
            .map(|c| if counts[c] > 0 { &sums[c] / counts[c] as f64 } else { DVector::zeros(d) })
            .collect();
        let mut scatter = vec![DMatrix::<f64>::zeros(d, d); k];
        for (x, &c) in points.iter().zip(&state.z) {
            let r = DVector::from_fn(d, |j, _| x[j] - means[c][j]);
            scatter[c] += &r * r.transpose();
        }

        // w | z
        let alpha: Vec<f64> = counts.iter().map(|&c| prior.delta + c as f64).collect();
        state.w = sample_dirichlet(&mut rng, &alpha);

        // (Sigma_k, mu_k) | z, x: Sigma from its mu-marginal, then mu | Sigma
        for c in 0..k {
            let nk = counts[c] as f64;
            let kn = kappa0 + nk;
            let xbar = &means[c];
            let shift = xbar - &prior.m0;
            let psi_n = symmetrize(&prior.psi + &scatter[c] + &shift * shift.transpose() * (kappa0 * nk / kn));
            let sigma = sample_inverse_wishart(&mut rng, prior.nu0 + nk, &psi_n)?;
            let centre = (&prior.m0 * kappa0 + xbar * nk) / kn;
            state.mu[c] = sample_mvn(&mut rng, &centre, &(&sigma / kn))?;
            state.sigma[c] = sigma;
        }

        if cfg.switch_injection && k > 1 && rng.random::<f64>() < cfg.switch_rate {
            let nu = random_permutation(&mut rng, k);
            let inv = nu.inverse();
            state.w = nu.permute(&state.w);
            state.mu = nu.permute(&state.mu);
            state.sigma = nu.permute(&state.sigma);
            state.z.iter_mut().for_each(|z| *z = inv.get(*z));
        }

        if iter > cfg.burn_in {
            let components = (0..k)
                .map(|c| ComponentParams::multivariate(state.mu[c].iter().copied().collect(), state.sigma[c].clone()))
                .collect::<Result<Vec<_>>>()?;
            let spec = MixtureSpec::new(state.w.clone(), components)?;
            let lp = log_posterior(points, prior, &state, &mut logw)?;
            draws.push(Draw {
                iter: iter as u64,
                spec,
                allocation: Some(state.z.clone()),
                log_posterior: Some(lp),
            });
        }
    }
    Trace::new(draws, dataset_id)
}

fn prepared(state: &State) -> Result<Vec<PreparedComponent>> {
    state
        .mu
        .iter()
        .zip(&state.sigma)
        .map(|(m, s)| {
            let c = ComponentParams::multivariate(m.iter().copied().collect(), s.clone())?;
            PreparedComponent::new(&c)
        })
        .collect()
}

fn sample_mvn(rng: &mut SamplerRng, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<DVector<f64>> {
    let l = cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("normal covariance is not SPD".into()))?
        .l();
    let eps = DVector::from_fn(mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok(mean + l * eps)
}

fn initial_state(
    points: &[Vec<f64>],
    d: usize,
    prior: &ConjugatePrior,
    k: usize,
    rng: &mut SamplerRng,
) -> Result<State> {
    let n = points.len();
    if n == 0 {
        let mut mu = Vec::with_capacity(k);
        let mut sigma = Vec::with_capacity(k);
        for _ in 0..k {
            let s = sample_inverse_wishart(rng, prior.nu0, &prior.psi)?;
            mu.push(sample_mvn(rng, &prior.m0, &(&s * prior.tau))?);
            sigma.push(s);
        }
        return Ok(State {
            w: vec![1.0 / k as f64; k],
            mu,
            sigma,
            z: Vec::new(),
        });
    }
    // maximin seeds refined by Lloyd's algorithm
    let flat: Vec<f64> = points.iter().flatten().copied().collect();
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    let mut seeds = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = points.iter().map(|p| sq(p, &points[seeds[0]])).collect();
    while seeds.len() < k {
        let far = (0..n).fold(0, |b, i| if nearest[i] > nearest[b] { i } else { b });
        seeds.push(far);
        for (m, p) in nearest.iter_mut().zip(points) {
            *m = m.min(sq(p, &points[far]));
        }
    }
    let init: Vec<f64> = seeds.iter().flat_map(|&i| points[i].iter().copied()).collect();
    let km = kmeans(&flat, d, &init, INIT_LLOYD_ITERATIONS);

    let mut cov = DMatrix::<f64>::zeros(d, d);
    for (p, &c) in points.iter().zip(&km.labels) {
        let r = DVector::from_fn(d, |j, _| p[j] - km.centroids[c * d + j]);
        cov += &r * r.transpose();
    }
    cov /= n as f64;
    cov += DMatrix::identity(d, d) * 1e-6;
    if cov.clone().cholesky().is_none() {
        cov = DMatrix::identity(d, d);
    }
    let mut counts = vec![0usize; k];
    for &c in &km.labels {
        counts[c] += 1;
    }
    Ok(State {
        w: counts.iter().map(|&c| (c as f64 + 1.0) / (n + k) as f64).collect(),
        mu: (0..k).map(|c| DVector::from_column_slice(&km.centroids[c * d..(c + 1) * d])).collect(),
        sigma: vec![cov; k],
        z: km.labels,
    })
}

/// Unnormalised log posterior with allocations integrated out (iid allocation model).
fn log_posterior(points: &[Vec<f64>], prior: &ConjugatePrior, s: &State, buf: &mut [f64]) -> Result<f64> {
    let k = s.w.len();
    let d = prior.psi.nrows() as f64;
    let comps = prepared(s)?;
    let log_w: Vec<f64> = s.w.iter().map(|w| w.ln()).collect();
    let mut ll = 0.0;
    for x in points {
        for c in 0..k {
            buf[c] = log_w[c] + comps[c].log_pdf(x);
        }
        ll += log_sum_exp(&buf[..k]);
    }
    let mut lp = 0.0;
    for c in 0..k {
        lp += (prior.delta - 1.0) * log_w[c];
        let chol = s.sigma[c]
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical("sampled covariance is not SPD".into()))?;
        let log_det: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
        let inv = chol.inverse();
        // mu ~ N(m0, tau Sigma)
        let r = &s.mu[c] - &prior.m0;
        let quad = (r.transpose() * &inv * &r)[(0, 0)] / prior.tau;
        lp += -0.5 * (d * prior.tau.ln() + log_det) - 0.5 * quad;
        // Sigma ~ IW(nu0, psi)
        lp += -0.5 * (prior.nu0 + d + 1.0) * log_det - 0.5 * (&prior.psi * &inv).trace();
    }
    Ok(ll + lp)
}
