use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::hungarian::{hungarian, CostMatrix};
use super::{exhaustive_argmin, Method, RelabelResult, EXHAUSTIVE_LIMIT};
use crate::diagnostics::timed;
use crate::error::{Error, Result};
use crate::model::{block_len, Draw, Permutation, Trace};

/// Whether the inner product with the pivot is maximised or minimised.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MarinDirection {
    #[default]
    Max,
    Min,
}

impl fmt::Display for MarinDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MarinDirection::Max => "max",
            MarinDirection::Min => "min",
        })
    }
}

impl FromStr for MarinDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "max" => Ok(MarinDirection::Max),
            "min" => Ok(MarinDirection::Min),
            other => Err(Error::InvalidConfig(format!(
                "marin direction must be 'max' or 'min', got '{other}'"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarinOptions {
    pub direction: MarinDirection,
    /// Solve K > 8 as a linear assignment instead of refusing.
    pub assignment_fallback: bool,
}

impl Default for MarinOptions {
    fn default() -> Self {
        Self {
            direction: MarinDirection::Max,
            assignment_fallback: true,
        }
    }
}

/// Per-draw alignment to a fixed pivot by block inner products.
pub(crate) struct MarinSolver {
    k: usize,
    b: usize,
    sign: f64,
    perms: Option<Vec<Permutation>>,
}

impl MarinSolver {
    pub(crate) fn new(k: usize, d: usize, opts: &MarinOptions) -> Result<Self> {
        let perms = if k <= EXHAUSTIVE_LIMIT {
            Some(Permutation::all(k).collect())
        } else if opts.assignment_fallback {
            None
        } else {
            return Err(Error::TooManyComponents {
                k,
                limit: EXHAUSTIVE_LIMIT,
                hint: "enable the assignment fallback",
            });
        };
        let sign = match opts.direction {
            MarinDirection::Max => -1.0,
            MarinDirection::Min => 1.0,
        };
        Ok(Self {
            k,
            b: block_len(d),
            sign,
            perms,
        })
    }

    /// `cost[h * k + j] = sign * <pivot block h, draw block j>`.
    fn costs(&self, flat: &[f64], pivot: &[f64]) -> Vec<f64> {
        let (k, b) = (self.k, self.b);
        let mut cost = vec![0.0; k * k];
        for h in 0..k {
            let p = &pivot[h * b..(h + 1) * b];
            for j in 0..k {
                let x = &flat[j * b..(j + 1) * b];
                let dot: f64 = p.iter().zip(x).map(|(a, c)| a * c).sum();
                cost[h * k + j] = self.sign * dot;
            }
        }
        cost
    }

    pub(crate) fn best(&self, flat: &[f64], pivot: &[f64]) -> Result<Permutation> {
        let cost = self.costs(flat, pivot);
        match &self.perms {
            Some(perms) => Ok(perms[exhaustive_argmin(perms, self.k, &cost)].clone()),
            None => hungarian(&CostMatrix::from_shifted(self.k, &cost)?),
        }
    }

    #[cfg(test)]
    fn best_by_assignment(&self, flat: &[f64], pivot: &[f64]) -> Result<Permutation> {
        hungarian(&CostMatrix::from_shifted(self.k, &self.costs(flat, pivot))?)
    }
}

/// Aligns every draw to `pivot` by the canonical inner product.
pub fn relabel_marin(trace: &Trace, pivot: &Draw, opts: &MarinOptions) -> Result<RelabelResult> {
    if pivot.spec.k() != trace.k() || pivot.spec.dim() != trace.dim() {
        return Err(Error::InvalidConfig(format!(
            "pivot has K = {}, d = {} but the trace has K = {}, d = {}",
            pivot.spec.k(),
            pivot.spec.dim(),
            trace.k(),
            trace.dim()
        )));
    }
    let (result, elapsed) = timed(|| {
        let solver = MarinSolver::new(trace.k(), trace.dim(), opts)?;
        let reference = pivot.spec.flatten();
        let perms = trace
            .draws()
            .par_iter()
            .map(|d| solver.best(&d.spec.flatten(), &reference))
            .collect::<Result<Vec<_>>>()?;
        let mut r = RelabelResult::new(Method::Marin, trace, perms)?;
        if opts.direction == MarinDirection::Min {
            r.notes.push("inner product minimised (--marin-direction=min)".into());
        }
        Ok(r)
    });
    result.map(|mut r: RelabelResult| {
        r.wall_time = elapsed;
        r
    })
}
