use super::{random_permutation, rng_from_seed};
use crate::error::Result;
use crate::model::{apply_permutation, Permutation, Trace};

/// A trace whose draws were relabelled at random, with the permutations used.
#[derive(Clone, Debug)]
pub struct SwitchedTrace {
    pub trace: Trace,
    /// `injected[j]` was applied to draw `j` of the input.
    pub injected: Vec<Permutation>,
}

/// Relabels every draw independently with a uniformly random permutation.
pub fn inject_label_switching(trace: &Trace, seed: u64) -> Result<SwitchedTrace> {
    let mut rng = rng_from_seed(seed);
    let k = trace.k();
    let mut draws = Vec::with_capacity(trace.len());
    let mut injected = Vec::with_capacity(trace.len());
    for draw in trace.draws() {
        let nu = random_permutation(&mut rng, k);
        draws.push(apply_permutation(draw, &nu)?);
        injected.push(nu);
    }
    Ok(SwitchedTrace {
        trace: Trace::new(draws, trace.dataset_id())?,
        injected,
    })
}
