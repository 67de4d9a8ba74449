//! Relabelling algorithms for mixture MCMC output.
//!
//! Every method returns one [`Permutation`] per input draw, using the
//! convention of [`apply_permutation`](crate::model::apply_permutation):
//! output block `k` is input block `nu[k]`.

mod allocation;
mod celeux;
mod fs;
pub mod hungarian;
mod marin;
mod minvar;
mod moments;
mod pivot;

use std::fmt;
use std::str::FromStr;

use crate::diagnostics::timed;
use crate::error::{Error, Result};
use crate::model::{Dataset, Permutation, Trace};

pub use allocation::{match_counts, misclassification_cost, relabel_cron_west, relabel_papastamoulis};
pub use celeux::{relabel_celeux, relabel_celeux_with, CeleuxScale};
pub use fs::{kmeans, relabel_fs, relabel_fs_with_pivot, KMeans};
pub use hungarian::{hungarian, CostMatrix};
pub use marin::{relabel_marin, MarinDirection, MarinOptions};
pub use minvar::{relabel_minvar, relabel_minvar_chains, relabel_minvar_window, MinVarState};
pub use moments::{batch_moments, RunningMoments};
pub use pivot::{
    derive_allocation, ensure_log_posterior, reference_window, select_pivot, ReferenceWindow,
};

/// Largest K for which permutations are enumerated exhaustively.
pub const EXHAUSTIVE_LIMIT: usize = 8;

/// Floor applied to Celeux scale coordinates.
pub const SCALE_FLOOR: f64 = 1e-12;

/// Default reference-sample size.
pub const DEFAULT_M: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Celeux,
    FruhwirthSchnatter,
    Marin,
    CronWest,
    Papastamoulis,
    MinVar,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Celeux,
        Method::FruhwirthSchnatter,
        Method::Marin,
        Method::CronWest,
        Method::Papastamoulis,
        Method::MinVar,
    ];

    /// Command-line name.
    pub fn name(self) -> &'static str {
        match self {
            Method::Celeux => "celeux",
            Method::FruhwirthSchnatter => "fs",
            Method::Marin => "marin",
            Method::CronWest => "cron-west",
            Method::Papastamoulis => "papastamoulis",
            Method::MinVar => "minvar",
        }
    }

    /// Human-readable name for tables.
    pub fn title(self) -> &'static str {
        match self {
            Method::Celeux => "Celeux et al",
            Method::FruhwirthSchnatter => "Fruhwirth-Schnatter",
            Method::Marin => "Marin et al",
            Method::CronWest => "Cron and West",
            Method::Papastamoulis => "Papastamoulis et al",
            Method::MinVar => "Minimum Variance",
        }
    }

    pub fn available() -> String {
        Method::ALL.map(Method::name).join(", ")
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        let m = match key.as_str() {
            "celeux" => Method::Celeux,
            "fs" | "fruhwirth-schnatter" | "kmeans" => Method::FruhwirthSchnatter,
            "marin" => Method::Marin,
            "cron-west" | "cronwest" | "cw" => Method::CronWest,
            "papastamoulis" | "pi" => Method::Papastamoulis,
            "minvar" | "min-var" => Method::MinVar,
            _ => {
                return Err(Error::UnknownMethod {
                    name: s.to_string(),
                    available: Method::available(),
                })
            }
        };
        Ok(m)
    }
}

/// Settings shared by the dispatcher.
#[derive(Clone, Debug, PartialEq)]
pub struct RelabelConfig {
    pub m: usize,
    pub marin: MarinOptions,
    pub celeux_scale: CeleuxScale,
}

impl Default for RelabelConfig {
    fn default() -> Self {
        Self {
            m: DEFAULT_M,
            marin: MarinOptions::default(),
            celeux_scale: CeleuxScale::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelabelResult {
    pub method: Method,
    /// One per input draw; identity for draws in `excluded`.
    pub permutations: Vec<Permutation>,
    /// Relabelled draws. Excluded draws are dropped.
    pub relabelled: Trace,
    /// Indices of input draws that were dropped.
    pub excluded: Vec<usize>,
    pub wall_time: f64,
    pub notes: Vec<String>,
    /// Number of scale coordinates clamped to [`SCALE_FLOOR`].
    pub scale_floor_hits: usize,
}

impl RelabelResult {
    pub(crate) fn new(method: Method, trace: &Trace, permutations: Vec<Permutation>) -> Result<Self> {
        let relabelled = trace.relabelled(&permutations)?;
        Ok(Self {
            method,
            permutations,
            relabelled,
            excluded: Vec::new(),
            wall_time: 0.0,
            notes: Vec::new(),
            scale_floor_hits: 0,
        })
    }
}

/// Runs one method, choosing pivots and reference allocations as each needs.
///
/// `data` is used to derive allocations for draws that lack them and to
/// rank draws by log-likelihood when the trace has no log posterior.
pub fn relabel(
    method: Method,
    trace: &Trace,
    data: Option<&Dataset>,
    cfg: &RelabelConfig,
) -> Result<RelabelResult> {
    if trace.is_empty() {
        return Err(Error::InvalidTrace("trace has no draws".into()));
    }
    let (mut result, elapsed) = timed(|| -> Result<RelabelResult> {
        if method == Method::Celeux {
            return relabel_celeux_with(trace, cfg.m, cfg.celeux_scale);
        }
        let (ranked, note) = ensure_log_posterior(trace, data)?;
        let ranked = ranked.as_ref();
        let mut result = match method {
            Method::Celeux => unreachable!(),
            Method::FruhwirthSchnatter => relabel_fs(ranked)?,
            Method::Marin => relabel_marin(ranked, select_pivot(ranked)?, &cfg.marin)?,
            Method::CronWest | Method::Papastamoulis => {
                let pivot = select_pivot(ranked)?;
                let reference = match &pivot.allocation {
                    Some(z) => z.clone(),
                    None => derive_allocation(
                        pivot,
                        data.ok_or(Error::MissingAllocation { iter: pivot.iter })?,
                    )?,
                };
                if method == Method::CronWest {
                    relabel_cron_west(ranked, &reference, data)?
                } else {
                    relabel_papastamoulis(ranked, &reference, data)?
                }
            }
            Method::MinVar => relabel_minvar(ranked, cfg.m)?,
        };
        if !trace.has_log_posterior() {
            // the ranking values are not posterior values; do not pass them on
            let keep = retained(trace.len(), &result.excluded);
            let perms: Vec<Permutation> =
                keep.iter().map(|&i| result.permutations[i].clone()).collect();
            result.relabelled = trace.subset(&keep).relabelled(&perms)?;
        }
        result.notes.extend(note);
        Ok(result)
    });
    if let Ok(r) = result.as_mut() {
        r.wall_time = elapsed;
    }
    result
}

pub(crate) fn retained(m: usize, excluded: &[usize]) -> Vec<usize> {
    let mut keep = vec![true; m];
    for &i in excluded {
        keep[i] = false;
    }
    (0..m).filter(|&i| keep[i]).collect()
}

/// Index of the cheapest permutation, where `cost[h * k + j]` is the cost of
/// putting input block `j` in output position `h`. Ties keep the earliest.
pub(crate) fn exhaustive_argmin(perms: &[Permutation], k: usize, cost: &[f64]) -> usize {
    let mut best = 0;
    let mut best_cost = f64::INFINITY;
    for (idx, p) in perms.iter().enumerate() {
        let mut total = 0.0;
        for (h, &j) in p.as_slice().iter().enumerate() {
            total += cost[h * k + j];
        }
        if total < best_cost {
            best_cost = total;
            best = idx;
        }
    }
    best
}

pub(crate) fn require_exhaustive(k: usize, method: Method) -> Result<Vec<Permutation>> {
    if k > EXHAUSTIVE_LIMIT {
        return Err(Error::TooManyComponents {
            k,
            limit: EXHAUSTIVE_LIMIT,
            hint: match method {
                Method::Celeux | Method::MinVar => "this method has no assignment fallback",
                _ => "enable the assignment fallback",
            },
        });
    }
    Ok(Permutation::all(k).collect())
}

pub(crate) fn check_m(m: usize, len: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::InvalidConfig(format!("m = {m}; need m >= 2")));
    }
    if m >= len {
        return Err(Error::InvalidConfig(format!(
            "m = {m} must be smaller than the number of draws ({len})"
        )));
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod test_support {
    use crate::model::{Draw, MixtureSpec, Trace};

    /// Univariate trace from `(w, mu, var)` triples per draw.
    pub fn trace_from(draws: &[Vec<(f64, f64, f64)>]) -> Trace {
        let draws = draws
            .iter()
            .enumerate()
            .map(|(i, comps)| {
                let mut d = Draw::new(i as u64 + 1, MixtureSpec::univariate(comps).unwrap());
                d.log_posterior = Some(0.0);
                d
            })
            .collect();
        Trace::new(draws, "test").unwrap()
    }
}
