//! Data-augmentation Gibbs sampler for univariate normal mixtures with the
//! Richardson–Green hierarchical prior and a fixed number of components.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};

use super::{random_permutation, rng_from_seed, sample_dirichlet, sample_log_categorical, PriorSpec, RgPrior, SamplerConfig, SamplerRng};
use crate::error::{Error, Result};
use crate::model::{log_sum_exp, ComponentParams, Dataset, Draw, MixtureSpec, Trace};
use crate::relabel::kmeans;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
const INIT_LLOYD_ITERATIONS: usize = 100;

pub fn gibbs_univariate(data: &Dataset, prior: &PriorSpec, cfg: &SamplerConfig) -> Result<Trace> {
    if data.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            actual: data.dim(),
        });
    }
    let PriorSpec::Univariate(prior) = prior else {
        return Err(Error::InvalidConfig(
            "univariate sampler needs a Richardson-Green prior".into(),
        ));
    };
    let xs: Vec<f64> = data.points().iter().map(|p| p[0]).collect();
    run(&xs, prior, cfg, &data.fingerprint())
}

struct State {
    w: Vec<f64>,
    mu: Vec<f64>,
    /// precisions sigma^-2
    tau: Vec<f64>,
    beta: f64,
    z: Vec<usize>,
}

pub(crate) fn run(xs: &[f64], prior: &RgPrior, cfg: &SamplerConfig, dataset_id: &str) -> Result<Trace> {
    cfg.validate()?;
    prior.validate()?;
    let k = cfg.k;
    let mut rng = rng_from_seed(cfg.seed);
    let mut state = initial_state(xs, prior, k, &mut rng)?;

    let mut draws = Vec::with_capacity(cfg.retained());
    let mut logw = vec![0.0; k];
    let mut scratch = vec![0.0; k];
    let mut counts = vec![0usize; k];
    let mut sums = vec![0.0; k];
    let mut ss = vec![0.0; k];
    let dir_alpha = |counts: &[usize]| -> Vec<f64> { counts.iter().map(|&c| prior.delta + c as f64).collect() };

    for iter in 1..=cfg.iterations {
        // z | w, mu, tau
        let log_norm: Vec<f64> = (0..k)
            .map(|c| state.w[c].ln() + 0.5 * state.tau[c].ln())
            .collect();
        for (i, &x) in xs.iter().enumerate() {
            for c in 0..k {
                let r = x - state.mu[c];
                logw[c] = log_norm[c] - 0.5 * state.tau[c] * r * r;
            }
            state.z[i] = sample_log_categorical(&mut rng, &logw, &mut scratch);
        }
        counts.iter_mut().for_each(|v| *v = 0);
        sums.iter_mut().for_each(|v| *v = 0.0);
        for (&x, &c) in xs.iter().zip(&state.z) {
            counts[c] += 1;
            sums[c] += x;
        }

        // w | z
        state.w = sample_dirichlet(&mut rng, &dir_alpha(&counts));

        // mu_k | z, tau
        for c in 0..k {
            let prec = state.tau[c] * counts[c] as f64 + prior.kappa;
            let mean = (state.tau[c] * sums[c] + prior.kappa * prior.xi) / prec;
            state.mu[c] = Normal::new(mean, prec.sqrt().recip())
                .map_err(|e| Error::Numerical(format!("mean update: {e}")))?
                .sample(&mut rng);
        }

        // tau_k | z, mu, beta
        ss.iter_mut().for_each(|v| *v = 0.0);
        for (&x, &c) in xs.iter().zip(&state.z) {
            let r = x - state.mu[c];
            ss[c] += r * r;
        }
        for c in 0..k {
            let shape = prior.alpha + 0.5 * counts[c] as f64;
            let rate = state.beta + 0.5 * ss[c];
            state.tau[c] = gamma(&mut rng, shape, rate)?;
        }

        // beta | tau
        let shape = prior.g + k as f64 * prior.alpha;
        let rate = prior.h + state.tau.iter().sum::<f64>();
        state.beta = gamma(&mut rng, shape, rate)?;

        if cfg.switch_injection && k > 1 && rng.random::<f64>() < cfg.switch_rate {
            let nu = random_permutation(&mut rng, k);
            let inv = nu.inverse();
            state.w = nu.permute(&state.w);
            state.mu = nu.permute(&state.mu);
            state.tau = nu.permute(&state.tau);
            state.z.iter_mut().for_each(|z| *z = inv.get(*z));
        }

        if iter > cfg.burn_in {
            let components = (0..k)
                .map(|c| ComponentParams::univariate(state.mu[c], state.tau[c].recip()))
                .collect::<Result<Vec<_>>>()?;
            let spec = MixtureSpec::new(state.w.clone(), components)?;
            draws.push(Draw {
                iter: iter as u64,
                spec,
                allocation: Some(state.z.clone()),
                log_posterior: Some(log_posterior(xs, prior, &state, &mut logw)),
            });
        }
    }
    debug_assert_eq!(draws.len(), cfg.retained());
    Trace::new(draws, dataset_id)
}

fn gamma(rng: &mut SamplerRng, shape: f64, rate: f64) -> Result<f64> {
    let g = Gamma::new(shape, rate.recip())
        .map_err(|e| Error::Numerical(format!("gamma(shape {shape}, rate {rate}): {e}")))?
        .sample(rng);
    // guard against a zero precision from extreme rates
    Ok(g.max(f64::MIN_POSITIVE))
}

fn initial_state(xs: &[f64], prior: &RgPrior, k: usize, rng: &mut SamplerRng) -> Result<State> {
    let n = xs.len();
    if n == 0 {
        let beta = gamma(rng, prior.g, prior.h)?;
        let mut tau = Vec::with_capacity(k);
        let mut mu = Vec::with_capacity(k);
        for _ in 0..k {
            tau.push(gamma(rng, prior.alpha, beta)?);
            mu.push(prior.xi + rng.sample::<f64, _>(rand_distr::StandardNormal) / prior.kappa.sqrt());
        }
        return Ok(State {
            w: vec![1.0 / k as f64; k],
            mu,
            tau,
            beta,
            z: Vec::new(),
        });
    }
    // maximin seeds refined by Lloyd's algorithm
    let mut seeds = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = xs.iter().map(|x| (x - xs[seeds[0]]).abs()).collect();
    while seeds.len() < k {
        let far = (0..n).fold(0, |b, i| if nearest[i] > nearest[b] { i } else { b });
        seeds.push(far);
        for (m, x) in nearest.iter_mut().zip(xs) {
            *m = m.min((x - xs[far]).abs());
        }
    }
    let init: Vec<f64> = seeds.iter().map(|&i| xs[i]).collect();
    let km = kmeans(xs, 1, &init, INIT_LLOYD_ITERATIONS);
    let within = xs
        .iter()
        .zip(&km.labels)
        .map(|(x, &c)| (x - km.centroids[c]).powi(2))
        .sum::<f64>()
        / n as f64;
    let var = if within > 0.0 { within } else { 1.0 };
    let mut counts = vec![0usize; k];
    for &c in &km.labels {
        counts[c] += 1;
    }
    Ok(State {
        w: counts.iter().map(|&c| (c as f64 + 1.0) / (n + k) as f64).collect(),
        mu: km.centroids,
        tau: vec![var.recip(); k],
        beta: prior.g / prior.h,
        z: km.labels,
    })
}

/// Unnormalised log posterior of `(w, mu, tau, beta)` with `z` integrated out.
/// Invariant under relabelling because the prior is exchangeable.
fn log_posterior(xs: &[f64], prior: &RgPrior, s: &State, buf: &mut [f64]) -> f64 {
    let k = s.w.len();
    let log_norm: Vec<f64> = (0..k)
        .map(|c| s.w[c].ln() + 0.5 * s.tau[c].ln() - HALF_LN_2PI)
        .collect();
    let mut ll = 0.0;
    for &x in xs {
        for c in 0..k {
            let r = x - s.mu[c];
            buf[c] = log_norm[c] - 0.5 * s.tau[c] * r * r;
        }
        ll += log_sum_exp(&buf[..k]);
    }
    let mut lp = 0.0;
    for c in 0..k {
        lp += (prior.delta - 1.0) * s.w[c].ln();
        let r = s.mu[c] - prior.xi;
        lp += -0.5 * prior.kappa * r * r;
        lp += prior.alpha * s.beta.ln() + (prior.alpha - 1.0) * s.tau[c].ln() - s.beta * s.tau[c];
    }
    lp += (prior.g - 1.0) * s.beta.ln() - prior.h * s.beta;
    ll + lp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::simulate_stratified;

    fn eq7() -> MixtureSpec {
        MixtureSpec::univariate(&[(0.10, -20.0, 1.0), (0.65, 20.0, 3.0), (0.25, 21.0, 0.5)]).unwrap()
    }

    #[test]
    fn retains_exactly_iterations_minus_burn_in() {
        let data = simulate_stratified(&eq7(), 60, 1).unwrap();
        let prior = PriorSpec::Univariate(RgPrior::from_data(&data.points().iter().map(|p| p[0]).collect::<Vec<_>>()).unwrap());
        let cfg = SamplerConfig::new(250, 50, 3, 9);
        let trace = gibbs_univariate(&data, &prior, &cfg).unwrap();
        assert_eq!(trace.len(), 200);
        assert_eq!(trace.draws()[0].iter, 51);
        assert!(trace.has_log_posterior() && trace.has_allocations());
        let again = gibbs_univariate(&data, &prior, &cfg).unwrap();
        assert_eq!(trace, again);
    }

    #[test]
    fn single_component_posterior_centres_on_sample_mean() {
        let spec = MixtureSpec::univariate(&[(1.0, 5.0, 4.0)]).unwrap();
        let data = crate::sampler::simulate_dataset(&spec, 200, 3).unwrap();
        let xs: Vec<f64> = data.points().iter().map(|p| p[0]).collect();
        let prior = PriorSpec::Univariate(RgPrior::from_data(&xs).unwrap());
        let trace = gibbs_univariate(&data, &prior, &SamplerConfig::new(3000, 500, 1, 2)).unwrap();
        let post_mean = trace.draws().iter().map(|d| d.spec.components()[0].mean()[0]).sum::<f64>() / trace.len() as f64;
        let xbar = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((post_mean - xbar).abs() < 0.1, "{post_mean} vs {xbar}");
        assert!(trace.draws().iter().all(|d| d.spec.weights() == [1.0]));
    }

    #[test]
    fn rejects_multivariate_data() {
        let c = ComponentParams::multivariate(vec![0.0, 0.0], nalgebra::DMatrix::identity(2, 2)).unwrap();
        let spec = MixtureSpec::new(vec![1.0], vec![c]).unwrap();
        let data = crate::sampler::simulate_dataset(&spec, 10, 0).unwrap();
        let prior = PriorSpec::Univariate(RgPrior::from_data(&[0.0, 1.0]).unwrap());
        assert!(gibbs_univariate(&data, &prior, &SamplerConfig::new(10, 0, 1, 0)).is_err());
    }

    /// With no data every conditional is a prior draw, so the sampled
    /// marginals must match the prior moments.
    #[test]
    fn empty_data_recovers_prior_moments() {
        let prior = RgPrior {
            xi: 2.0,
            kappa: 0.25,
            alpha: 2.0,
            g: 3.0,
            h: 1.5,
            delta: 1.0,
        };
        let k = 3;
        let cfg = SamplerConfig::new(50_000, 0, k, 17);
        let trace = run(&[], &prior, &cfg, "empty").unwrap();
        let m = trace.len() as f64;
        let w1: Vec<f64> = trace.draws().iter().map(|d| d.spec.weights()[0]).collect();
        let mu1: Vec<f64> = trace.draws().iter().map(|d| d.spec.components()[0].mean()[0]).collect();
        let (wm, wv) = moments(&w1);
        let (mm, mv) = moments(&mu1);
        // Dirichlet(1,1,1): mean 1/3, variance 1/18
        assert!((wm - 1.0 / 3.0).abs() < 3.0 * (wv / m).sqrt());
        assert!((wv - 1.0 / 18.0).abs() < 3.0 * variance_se(&w1));
        assert!((mm - 2.0).abs() < 3.0 * (mv / m).sqrt());
        assert!((mv - 4.0).abs() < 3.0 * variance_se(&mu1));
    }

    fn moments(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        (m, v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0))
    }

    fn variance_se(v: &[f64]) -> f64 {
        let n = v.len() as f64;
        let (m, var) = moments(v);
        let m4 = v.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
        ((m4 - var * var) / n).sqrt()
    }
}
