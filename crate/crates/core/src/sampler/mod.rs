//! Data generators and Gibbs samplers for finite normal mixtures.
//!
//! Every routine is a deterministic function of its inputs and a 64-bit
//! seed; the generator is ChaCha8 (a counter-based stream cipher RNG).

mod multivariate;
mod potts;
mod simulate;
mod switching;
mod univariate;
mod wishart;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use multivariate::gibbs_multivariate;
pub use potts::{neighbour_agreement, simulate_potts_allocation, PottsLattice};
pub use simulate::{simulate_dataset, simulate_from_allocation, simulate_stratified};
pub use switching::{inject_label_switching, SwitchedTrace};
pub use univariate::gibbs_univariate;

use crate::error::{Error, Result};

pub type SamplerRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SamplerRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Richardson–Green hierarchy for univariate mixtures:
/// `w ~ Dir(delta)`, `mu_k ~ N(xi, 1/kappa)`, `sigma_k^-2 ~ Gamma(alpha, beta)`,
/// `beta ~ Gamma(g, h)` (rate parametrisation throughout).
#[derive(Clone, Debug, PartialEq)]
pub struct RgPrior {
    pub xi: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub g: f64,
    pub h: f64,
    pub delta: f64,
}

impl RgPrior {
    /// The usual data-range based defaults: `xi` the midrange, `kappa = 1/R^2`,
    /// `alpha = 2`, `g = 0.2`, `h = 10/R^2`, `delta = 1`.
    pub fn from_data(points: &[f64]) -> Result<Self> {
        let min = points.iter().copied().fold(f64::INFINITY, f64::min);
        let max = points.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(min.is_finite() && max.is_finite()) {
            return Err(Error::InvalidDataset(
                "cannot derive data-range prior from an empty dataset".into(),
            ));
        }
        let range = if max > min { max - min } else { 1.0 };
        Ok(Self {
            xi: 0.5 * (min + max),
            kappa: 1.0 / (range * range),
            alpha: 2.0,
            g: 0.2,
            h: 10.0 / (range * range),
            delta: 1.0,
        })
    }

    fn validate(&self) -> Result<()> {
        let positive = [self.kappa, self.alpha, self.g, self.h, self.delta];
        if !self.xi.is_finite() || positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig(format!("invalid univariate prior {self:?}")));
        }
        Ok(())
    }
}

/// Conjugate normal / inverse-Wishart prior:
/// `mu_k | Sigma_k ~ N(m0, tau Sigma_k)`, `Sigma_k ~ IW(nu0, psi)`, `w ~ Dir(delta)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConjugatePrior {
    pub m0: DVector<f64>,
    pub tau: f64,
    pub nu0: f64,
    pub psi: DMatrix<f64>,
    pub delta: f64,
}

impl ConjugatePrior {
    /// `m0 = 0`, `tau = 100`, `nu0 = 3`, `psi = 1.5 I`.
    pub fn spatial_default(d: usize) -> Self {
        Self {
            m0: DVector::zeros(d),
            tau: 100.0,
            nu0: 3.0,
            psi: DMatrix::identity(d, d) * 1.5,
            delta: 1.0,
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        if !(self.tau > 0.0) || !(self.delta > 0.0) {
            return Err(Error::InvalidConfig("tau and delta must be positive".into()));
        }
        if self.m0.len() != d || self.m0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("prior mean must be {d} finite values")));
        }
        if self.psi.nrows() != d || self.psi.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: self.psi.nrows(),
            });
        }
        if !(self.nu0 > d as f64 - 1.0) {
            return Err(Error::InvalidConfig(format!(
                "inverse-Wishart degrees of freedom {} must exceed d - 1 = {}",
                self.nu0,
                d - 1
            )));
        }
        if crate::model::cholesky_lower(&self.psi).is_none() {
            return Err(Error::InvalidConfig("prior scale matrix is not SPD".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PriorSpec {
    Univariate(RgPrior),
    Multivariate(ConjugatePrior),
}

impl PriorSpec {
    /// Key/value description for trace metadata.
    pub fn describe(&self) -> Vec<(String, String)> {
        match self {
            PriorSpec::Univariate(p) => vec![
                ("prior".into(), "richardson-green".into()),
                ("prior_xi".into(), format!("{:e}", p.xi)),
                ("prior_kappa".into(), format!("{:e}", p.kappa)),
                ("prior_alpha".into(), format!("{:e}", p.alpha)),
                ("prior_g".into(), format!("{:e}", p.g)),
                ("prior_h".into(), format!("{:e}", p.h)),
                ("prior_delta".into(), format!("{:e}", p.delta)),
            ],
            PriorSpec::Multivariate(p) => vec![
                ("prior".into(), "normal-inverse-wishart".into()),
                (
                    "prior_m0".into(),
                    p.m0.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(";"),
                ),
                ("prior_tau".into(), format!("{:e}", p.tau)),
                ("prior_nu0".into(), format!("{:e}", p.nu0)),
                (
                    "prior_psi".into(),
                    p.psi.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(";"),
                ),
                ("prior_delta".into(), format!("{:e}", p.delta)),
            ],
        }
    }
}

/// Fixed-kappa Potts coupling for the allocation update of the spatial sampler.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialCoupling {
    pub dims: [usize; 3],
    pub kappa: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub k: usize,
    /// Insert random relabelling moves while sampling. They leave the
    /// (permutation invariant) posterior unchanged but force label switching.
    pub switch_injection: bool,
    /// Per-iteration probability of a relabelling move when injection is on.
    pub switch_rate: f64,
    pub spatial: Option<SpatialCoupling>,
}

impl SamplerConfig {
    pub fn new(iterations: usize, burn_in: usize, k: usize, seed: u64) -> Self {
        Self {
            iterations,
            burn_in,
            seed,
            k,
            switch_injection: false,
            switch_rate: DEFAULT_SWITCH_RATE,
            spatial: None,
        }
    }

    pub fn retained(&self) -> usize {
        self.iterations - self.burn_in
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("K must be at least 1".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidConfig(format!(
                "burn-in ({}) must be smaller than the iteration count ({})",
                self.burn_in, self.iterations
            )));
        }
        if !(0.0..=1.0).contains(&self.switch_rate) {
            return Err(Error::InvalidConfig("switch rate must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

pub const DEFAULT_SWITCH_RATE: f64 = 0.002;

#[derive(Clone, Debug, PartialEq)]
pub struct PottsConfig {
    pub dims: [usize; 3],
    pub k: usize,
    pub kappa: f64,
    pub sweeps: usize,
    pub seed: u64,
}

/// Samples an index from unnormalised log weights (max-subtracted).
pub(crate) fn sample_log_categorical<R: rand::Rng>(rng: &mut R, log_w: &[f64], scratch: &mut [f64]) -> usize {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (s, &l) in scratch.iter_mut().zip(log_w) {
        *s = (l - max).exp();
        total += *s;
    }
    let mut u = rng.random::<f64>() * total;
    for (k, &s) in scratch[..log_w.len()].iter().enumerate() {
        if u < s {
            return k;
        }
        u -= s;
    }
    log_w.len() - 1
}

pub(crate) fn sample_categorical<R: rand::Rng>(rng: &mut R, w: &[f64]) -> usize {
    let total: f64 = w.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, &p) in w.iter().enumerate() {
        if u < p {
            return k;
        }
        u -= p;
    }
    w.len() - 1
}

pub(crate) fn sample_dirichlet<R: rand::Rng>(rng: &mut R, alpha: &[f64]) -> Vec<f64> {
    use rand_distr::{Distribution, Gamma};
    let mut g: Vec<f64> = alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
        .collect();
    let total: f64 = g.iter().sum();
    if total > 0.0 {
        g.iter_mut().for_each(|v| *v /= total);
    } else {
        let k = g.len() as f64;
        g.iter_mut().for_each(|v| *v = 1.0 / k);
    }
    // exact unit sum so the spec validator never trips on rounding
    let rest: f64 = g[1..].iter().sum();
    g[0] = (1.0 - rest).max(0.0);
    g
}

pub(crate) fn random_permutation<R: rand::Rng>(rng: &mut R, k: usize) -> crate::model::Permutation {
    use rand::seq::SliceRandom;
    let mut map: Vec<usize> = (0..k).collect();
    map.shuffle(rng);
    crate::model::Permutation::new(map).expect("shuffle yields a bijection")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirichlet_sums_to_one_exactly() {
        let mut rng = rng_from_seed(1);
        for _ in 0..1000 {
            let w = sample_dirichlet(&mut rng, &[1.0, 2.0, 0.5, 7.0]);
            let s: f64 = w.iter().sum();
            assert!((s - 1.0).abs() <= 1e-15);
            assert!(w.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn log_categorical_frequencies() {
        let mut rng = rng_from_seed(2);
        let logw = [0.0f64.ln(), 1.0f64.ln(), 3.0f64.ln()];
        let mut scratch = [0.0; 3];
        let mut counts = [0usize; 3];
        for _ in 0..40_000 {
            counts[sample_log_categorical(&mut rng, &logw, &mut scratch)] += 1;
        }
        assert_eq!(counts[0], 0);
        let p = counts[2] as f64 / 40_000.0;
        assert!((p - 0.75).abs() < 0.01, "{p}");
    }

    #[test]
    fn config_validation() {
        assert!(SamplerConfig::new(10, 10, 2, 0).validate().is_err());
        assert!(SamplerConfig::new(10, 0, 0, 0).validate().is_err());
        assert!(SamplerConfig::new(10, 5, 1, 0).validate().is_ok());
        let mut p = ConjugatePrior::spatial_default(3);
        assert!(p.validate(3).is_ok());
        p.nu0 = 2.0;
        assert!(p.validate(3).is_err());
    }
}
