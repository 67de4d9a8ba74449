use std::fmt;
use std::str::FromStr;

use super::moments::RunningMoments;
use super::{check_m, exhaustive_argmin, require_exhaustive, Method, RelabelResult, SCALE_FLOOR};
use crate::diagnostics::timed;
use crate::error::{Error, Result};
use crate::model::{block_len, Trace};

/// What each residual is divided by before squaring.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CeleuxScale {
    /// The running variance `s_i = (1/n) sum (phi_i - mean_i)^2`.
    #[default]
    Variance,
    /// Its square root.
    StdDev,
}

impl fmt::Display for CeleuxScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CeleuxScale::Variance => "variance",
            CeleuxScale::StdDev => "sd",
        })
    }
}

impl FromStr for CeleuxScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "variance" | "var" => Ok(CeleuxScale::Variance),
            "sd" | "stddev" => Ok(CeleuxScale::StdDev),
            other => Err(Error::InvalidConfig(format!(
                "celeux scale must be 'variance' or 'sd', got '{other}'"
            ))),
        }
    }
}

pub fn relabel_celeux(trace: &Trace, m: usize) -> Result<RelabelResult> {
    relabel_celeux_with(trace, m, CeleuxScale::default())
}

/// Sequential nearest-centre relabelling with a scaled squared distance.
///
/// The first `m` draws seed the location and scale estimates and keep their
/// labels; each later draw takes the permutation closest to the current
/// estimates and is then absorbed into them.
pub fn relabel_celeux_with(trace: &Trace, m: usize, scale: CeleuxScale) -> Result<RelabelResult> {
    check_m(m, trace.len())?;
    let (result, elapsed) = timed(|| {
        let (k, b) = (trace.k(), block_len(trace.dim()));
        let perms = require_exhaustive(k, Method::Celeux)?;
        let draws = trace.draws();
        let mut moments = RunningMoments::new(k * b);
        for d in &draws[..m] {
            moments.push(&d.spec.flatten());
        }
        let mut chosen = vec![perms[0].clone(); m];
        let mut floor_hits = 0usize;
        let mut cost = vec![0.0; k * k];
        for d in &draws[m..] {
            let flat = d.spec.flatten();
            let s: Vec<f64> = moments
                .population_variance()
                .into_iter()
                .map(|v| {
                    let v = match scale {
                        CeleuxScale::Variance => v,
                        CeleuxScale::StdDev => v.sqrt(),
                    };
                    if v < SCALE_FLOOR {
                        floor_hits += 1;
                        SCALE_FLOOR
                    } else {
                        v
                    }
                })
                .collect();
            let mean = moments.mean();
            for h in 0..k {
                for j in 0..k {
                    let mut dist = 0.0;
                    for t in 0..b {
                        let r = (flat[j * b + t] - mean[h * b + t]) / s[h * b + t];
                        dist += r * r;
                    }
                    cost[h * k + j] = dist;
                }
            }
            let nu = perms[exhaustive_argmin(&perms, k, &cost)].clone();
            moments.push(&nu.permute_blocks(&flat, b));
            chosen.push(nu);
        }
        let mut r = RelabelResult::new(Method::Celeux, trace, chosen)?;
        r.scale_floor_hits = floor_hits;
        if floor_hits > 0 {
            r.notes.push(format!(
                "{floor_hits} scale coordinates were below {SCALE_FLOOR:e} and were floored"
            ));
        }
        Ok(r)
    });
    result.map(|mut r: RelabelResult| {
        r.wall_time = elapsed;
        r
    })
}
