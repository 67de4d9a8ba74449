use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{MixtureSpec, Scale};
use crate::sampler::simulate_dataset;

const Q_FLOOR: f64 = 1e-300;
const NEGATIVE_TOLERANCE: f64 = 1e-9;

/// Numerical settings for [`kl_distance`].
#[derive(Clone, Debug, PartialEq)]
pub struct KlConfig {
    /// Quadrature nodes for d = 1.
    pub grid_points: usize,
    /// Half-widths (in the largest component sd) added beyond the extreme means.
    pub width_sd: f64,
    /// Monte Carlo sample size for d > 1.
    pub mc_draws: usize,
    pub seed: u64,
}

impl Default for KlConfig {
    fn default() -> Self {
        Self {
            grid_points: 10_001,
            width_sd: 5.0,
            mc_draws: 100_000,
            seed: 20_240_601,
        }
    }
}

/// `KL(p || q)`: trapezoid rule for univariate mixtures, Monte Carlo
/// from `p` otherwise. `q` is floored at 1e-300 inside the logarithm.
pub fn kl_distance(p: &MixtureSpec, q: &MixtureSpec, cfg: &KlConfig) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            actual: q.dim(),
        });
    }
    if p.dim() == 1 {
        quadrature(p, q, cfg)
    } else {
        monte_carlo(p, q, cfg)
    }
}

fn quadrature(p: &MixtureSpec, q: &MixtureSpec, cfg: &KlConfig) -> Result<f64> {
    if cfg.grid_points < 2 {
        return Err(Error::InvalidConfig("KL grid needs at least 2 points".into()));
    }
    let mus: Vec<f64> = p.components().iter().map(|c| c.mean()[0]).collect();
    let sd_max = p
        .components()
        .iter()
        .map(|c| match c.scale() {
            Scale::Variance(v) => v.sqrt(),
            Scale::Covariance(m) => m[(0, 0)].sqrt(),
        })
        .fold(0.0, f64::max);
    let lo = mus.iter().copied().fold(f64::INFINITY, f64::min) - cfg.width_sd * sd_max;
    let hi = mus.iter().copied().fold(f64::NEG_INFINITY, f64::max) + cfg.width_sd * sd_max;
    let (pm, qm) = (p.prepared()?, q.prepared()?);
    let h = (hi - lo) / (cfg.grid_points - 1) as f64;
    let values = (0..cfg.grid_points)
        .into_par_iter()
        .map(|i| {
            let x = [lo + h * i as f64];
            let lp = pm.log_pdf(&x)?;
            let lq = qm.log_pdf(&x)?.max(Q_FLOOR.ln());
            let pv = lp.exp();
            let f = if pv > 0.0 { pv * (lp - lq) } else { 0.0 };
            let w = if i == 0 || i + 1 == cfg.grid_points { 0.5 } else { 1.0 };
            Ok(w * f)
        })
        .collect::<Result<Vec<f64>>>()?;
    let kl = h * values.iter().sum::<f64>();
    check(kl)
}

fn monte_carlo(p: &MixtureSpec, q: &MixtureSpec, cfg: &KlConfig) -> Result<f64> {
    if cfg.mc_draws == 0 {
        return Err(Error::InvalidConfig("KL Monte Carlo needs at least one draw".into()));
    }
    let sample = simulate_dataset(p, cfg.mc_draws, cfg.seed)?;
    let (pm, qm) = (p.prepared()?, q.prepared()?);
    let total = sample
        .points()
        .par_iter()
        .map(|x| Ok(pm.log_pdf(x)? - qm.log_pdf(x)?.max(Q_FLOOR.ln())))
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum::<f64>();
    if !total.is_finite() {
        return Err(Error::NonFinite("KL Monte Carlo estimate".into()));
    }
    // sampling noise can push a near-zero estimate below zero
    Ok((total / cfg.mc_draws as f64).max(0.0))
}

fn check(kl: f64) -> Result<f64> {
    if !kl.is_finite() {
        return Err(Error::NonFinite("KL quadrature".into()));
    }
    if kl < -NEGATIVE_TOLERANCE {
        return Err(Error::Numerical(format!(
            "KL quadrature returned {kl:.3e}; widen the grid"
        )));
    }
    Ok(kl.max(0.0))
}
