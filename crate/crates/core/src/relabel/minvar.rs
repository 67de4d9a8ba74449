use std::ops::Range;

use rayon::prelude::*;

use super::marin::{MarinOptions, MarinSolver};
use super::moments::RunningMoments;
use super::pivot::{reference_window, ReferenceWindow};
use super::{check_m, exhaustive_argmin, require_exhaustive, Method, RelabelResult};
use crate::diagnostics::timed;
use crate::error::{Error, Result};
use crate::model::{block_len, Permutation, Trace};

/// Streaming state of the minimum-variance relabeller.
///
/// Each step commits the permutation whose relabelled draw adds the least to
/// the total sample variance. Because the `(n-2)/(n-1) var` term does not
/// depend on the permutation, that is the permutation minimising
/// `sum_i (phi_{nu,i} - mean_i)^2`.
#[derive(Clone, Debug)]
pub struct MinVarState {
    k: usize,
    b: usize,
    perms: Vec<Permutation>,
    moments: RunningMoments,
    cost: Vec<f64>,
}

impl MinVarState {
    pub fn new(k: usize, d: usize) -> Result<Self> {
        let b = block_len(d);
        Ok(Self {
            k,
            b,
            perms: require_exhaustive(k, Method::MinVar)?,
            moments: RunningMoments::new(k * b),
            cost: vec![0.0; k * k],
        })
    }

    /// Absorbs an already-labelled reference draw.
    pub fn seed(&mut self, flat: &[f64]) {
        self.moments.push(flat);
    }

    /// Chooses, commits and returns the permutation for the next draw.
    pub fn step(&mut self, flat: &[f64]) -> Permutation {
        let (k, b) = (self.k, self.b);
        let mean = self.moments.mean();
        for h in 0..k {
            for j in 0..k {
                let mut dist = 0.0;
                for t in 0..b {
                    let r = flat[j * b + t] - mean[h * b + t];
                    dist += r * r;
                }
                self.cost[h * k + j] = dist;
            }
        }
        let nu = self.perms[exhaustive_argmin(&self.perms, k, &self.cost)].clone();
        self.moments.push(&nu.permute_blocks(flat, b));
        nu
    }

    pub fn moments(&self) -> &RunningMoments {
        &self.moments
    }
}

/// Minimum-variance relabelling with an automatically chosen reference window.
pub fn relabel_minvar(trace: &Trace, m: usize) -> Result<RelabelResult> {
    check_m(m, trace.len())?;
    let (result, elapsed) = timed(|| {
        let (window, seeds, note) = prepare_reference(trace, m)?;
        let mut r = relabel_minvar_window(trace, window.range, &seeds)?;
        r.notes.extend(note);
        Ok(r)
    });
    result.map(|mut r: RelabelResult| {
        r.wall_time = elapsed;
        r
    })
}

/// Window plus the labels its draws start from.
fn prepare_reference(
    trace: &Trace,
    m: usize,
) -> Result<(ReferenceWindow, Vec<Permutation>, Option<String>)> {
    let window = reference_window(trace, m)?;
    if window.stable {
        return Ok((window, vec![Permutation::identity(trace.k()); m], None));
    }
    let solver = MarinSolver::new(trace.k(), trace.dim(), &MarinOptions::default())?;
    let pivot = trace.draws()[window.best].spec.flatten();
    let seeds = trace.draws()[window.range.clone()]
        .iter()
        .map(|d| solver.best(&d.spec.flatten(), &pivot))
        .collect::<Result<Vec<_>>>()?;
    let note = format!(
        "no switch-free window of {m} draws; draws {}..{} were aligned to draw {} before seeding",
        window.range.start + 1,
        window.range.end,
        window.best + 1
    );
    Ok((window, seeds, Some(note)))
}

/// Minimum-variance relabelling with an explicit reference window.
///
/// Draws in `reference` are relabelled by `seeds` and absorbed first, in
/// order; the remaining draws are then processed in trace order.
pub fn relabel_minvar_window(
    trace: &Trace,
    reference: Range<usize>,
    seeds: &[Permutation],
) -> Result<RelabelResult> {
    let len = trace.len();
    if reference.len() < 2 || reference.end > len {
        return Err(Error::InvalidConfig(format!(
            "reference window {}..{} is not a valid range of at least 2 of the {len} draws",
            reference.start, reference.end
        )));
    }
    if seeds.len() != reference.len() {
        return Err(Error::LengthMismatch {
            what: "reference labels",
            expected: reference.len(),
            actual: seeds.len(),
        });
    }
    let (k, b) = (trace.k(), block_len(trace.dim()));
    if let Some(bad) = seeds.iter().find(|p| p.len() != k) {
        return Err(Error::InvalidPermutation(bad.one_based()));
    }
    let mut state = MinVarState::new(k, trace.dim())?;
    let draws = trace.draws();
    let mut perms = vec![Permutation::identity(k); len];
    for (i, nu) in reference.clone().zip(seeds) {
        state.seed(&nu.permute_blocks(&draws[i].spec.flatten(), b));
        perms[i] = nu.clone();
    }
    for i in (0..reference.start).chain(reference.end..len) {
        perms[i] = state.step(&draws[i].spec.flatten());
    }
    RelabelResult::new(Method::MinVar, trace, perms)
}

/// Relabels several chains so that their labels agree with each other.
///
/// Each chain gets its own reference window. Every window after the first is
/// then permuted as a whole so its mean is closest to the first chain's.
pub fn relabel_minvar_chains(traces: &[Trace], m: usize) -> Result<Vec<RelabelResult>> {
    let first = traces
        .first()
        .ok_or_else(|| Error::InvalidConfig("no chains supplied".into()))?;
    let (k, d) = (first.k(), first.dim());
    if let Some(t) = traces.iter().find(|t| t.k() != k || t.dim() != d) {
        return Err(Error::InvalidTrace(format!(
            "chain with K = {}, d = {} differs from the first chain (K = {k}, d = {d})",
            t.k(),
            t.dim()
        )));
    }
    for t in traces {
        check_m(m, t.len())?;
    }
    let prepared = traces
        .par_iter()
        .map(|t| prepare_reference(t, m))
        .collect::<Result<Vec<_>>>()?;
    let b = block_len(d);
    let window_mean = |t: &Trace, w: &ReferenceWindow, seeds: &[Permutation]| {
        let mut acc = RunningMoments::new(k * b);
        for (i, nu) in w.range.clone().zip(seeds) {
            acc.push(&nu.permute_blocks(&t.draws()[i].spec.flatten(), b));
        }
        acc.mean().to_vec()
    };
    let target = window_mean(first, &prepared[0].0, &prepared[0].1);
    let perms = require_exhaustive(k, Method::MinVar)?;
    traces
        .par_iter()
        .zip(prepared)
        .enumerate()
        .map(|(c, (t, (window, seeds, note)))| {
            let (r, elapsed) = timed(|| {
                let seeds = if c == 0 {
                    seeds
                } else {
                    let mean = window_mean(t, &window, &seeds);
                    let mut cost = vec![0.0; k * k];
                    for h in 0..k {
                        for j in 0..k {
                            cost[h * k + j] = (0..b)
                                .map(|s| (mean[j * b + s] - target[h * b + s]).powi(2))
                                .sum();
                        }
                    }
                    let align = &perms[exhaustive_argmin(&perms, k, &cost)];
                    seeds.iter().map(|s| align.after(s)).collect()
                };
                let mut r = relabel_minvar_window(t, window.range.clone(), &seeds)?;
                r.notes.extend(note);
                Ok(r)
            });
            r.map(|mut r: RelabelResult| {
                r.wall_time = elapsed;
                r
            })
        })
        .collect()
}
