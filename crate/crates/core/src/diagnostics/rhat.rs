use crate::error::{Error, Result};
use crate::model::{coordinate_names, Trace};
use crate::relabel::RunningMoments;

/// Potential scale reduction per coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct RhatReport {
    pub names: Vec<String>,
    pub chains: usize,
    pub length: usize,
    pub within: Vec<f64>,
    pub between: Vec<f64>,
    pub pooled: Vec<f64>,
    /// `sqrt(pooled / within)`; NaN where `within` is zero.
    pub rhat: Vec<f64>,
}

impl RhatReport {
    pub fn max_rhat(&self) -> f64 {
        self.rhat.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Gelman–Rubin statistics from relabelled chains of equal length.
pub fn gelman_rubin(chains: &[Trace]) -> Result<RhatReport> {
    let first = chains
        .first()
        .ok_or_else(|| Error::InvalidConfig("no chains supplied".into()))?;
    let moments: Vec<RunningMoments> = chains
        .iter()
        .map(|t| {
            let mut m = RunningMoments::new(t.draws().first().map_or(0, |d| d.spec.q()));
            for d in t.draws() {
                m.push(&d.spec.flatten());
            }
            m
        })
        .collect();
    let mut report = gelman_rubin_from_moments(&moments)?;
    report.names = coordinate_names(first.k(), first.dim());
    Ok(report)
}

/// Gelman–Rubin statistics from per-chain running moments.
///
/// `W` is the mean within-chain variance, `B = M/(J-1) sum_j (mean_j - mean)^2`,
/// the pooled estimate is `((M-1)/M) W + B/M` and `R = sqrt(pooled / W)`.
pub fn gelman_rubin_from_moments(chains: &[RunningMoments]) -> Result<RhatReport> {
    let j = chains.len();
    if j < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 chains, got {j}")));
    }
    let m = chains[0].count();
    let q = chains[0].q();
    if let Some(c) = chains.iter().find(|c| c.count() != m) {
        return Err(Error::LengthMismatch {
            what: "chain",
            expected: m,
            actual: c.count(),
        });
    }
    if let Some(c) = chains.iter().find(|c| c.q() != q) {
        return Err(Error::LengthMismatch {
            what: "chain parameter vector",
            expected: q,
            actual: c.q(),
        });
    }
    if m < 2 {
        return Err(Error::InvalidConfig("chains need at least 2 draws".into()));
    }
    let (jf, mf) = (j as f64, m as f64);
    let mut within = vec![0.0; q];
    let mut between = vec![0.0; q];
    let mut pooled = vec![0.0; q];
    let mut rhat = vec![0.0; q];
    for i in 0..q {
        let w = chains.iter().map(|c| c.variance()[i]).sum::<f64>() / jf;
        let grand = chains.iter().map(|c| c.mean()[i]).sum::<f64>() / jf;
        let b = mf / (jf - 1.0) * chains.iter().map(|c| (c.mean()[i] - grand).powi(2)).sum::<f64>();
        let v = (mf - 1.0) / mf * w + b / mf;
        within[i] = w;
        between[i] = b;
        pooled[i] = v;
        rhat[i] = if w > 0.0 { (v / w).sqrt() } else { f64::NAN };
    }
    Ok(RhatReport {
        names: (1..=q).map(|i| format!("phi_{i}")).collect(),
        chains: j,
        length: m,
        within,
        between,
        pooled,
        rhat,
    })
}
