use rayon::prelude::*;

use super::hungarian::{hungarian, CostMatrix};
use super::pivot::allocation_of;
use super::{Method, RelabelResult};
use crate::diagnostics::timed;
use crate::error::{Error, Result};
use crate::model::{Dataset, Permutation, Trace};

/// `N[h * k + j] = #{i : reference_i = h and z_i = j}`.
pub fn match_counts(reference: &[usize], z: &[usize], k: usize) -> Result<Vec<f64>> {
    if reference.len() != z.len() {
        return Err(Error::LengthMismatch {
            what: "allocation",
            expected: reference.len(),
            actual: z.len(),
        });
    }
    let mut n = vec![0.0; k * k];
    for (&h, &j) in reference.iter().zip(z) {
        if h >= k || j >= k {
            return Err(Error::InvalidTrace(format!(
                "allocation label {} outside 1..{k}",
                h.max(j) + 1
            )));
        }
        n[h * k + j] += 1.0;
    }
    Ok(n)
}

/// `C[h * k + j] = #{i : reference_i = h and z_i != j}`.
pub fn misclassification_cost(reference: &[usize], z: &[usize], k: usize) -> Result<Vec<f64>> {
    let n = match_counts(reference, z, k)?;
    let mut c = vec![0.0; k * k];
    for h in 0..k {
        let row: f64 = n[h * k..(h + 1) * k].iter().sum();
        for j in 0..k {
            c[h * k + j] = row - n[h * k + j];
        }
    }
    Ok(c)
}

/// Per draw, the permutation minimising the trace of the misclassification
/// cost matrix against `reference_allocation`.
pub fn relabel_cron_west(
    trace: &Trace,
    reference_allocation: &[usize],
    data: Option<&Dataset>,
) -> Result<RelabelResult> {
    per_draw(Method::CronWest, trace, reference_allocation, data, |r, z, k| {
        CostMatrix::from_row_major(k, misclassification_cost(r, z, k)?)
    })
}

/// Per draw, the permutation making the allocation agree with
/// `pivot_allocation` at as many observations as possible.
pub fn relabel_papastamoulis(
    trace: &Trace,
    pivot_allocation: &[usize],
    data: Option<&Dataset>,
) -> Result<RelabelResult> {
    per_draw(Method::Papastamoulis, trace, pivot_allocation, data, |r, z, k| {
        CostMatrix::from_scores(k, &match_counts(r, z, k)?)
    })
}

fn per_draw(
    method: Method,
    trace: &Trace,
    reference: &[usize],
    data: Option<&Dataset>,
    cost: impl Fn(&[usize], &[usize], usize) -> Result<CostMatrix> + Sync,
) -> Result<RelabelResult> {
    let k = trace.k();
    if let Some(data) = data {
        if reference.len() != data.n() {
            return Err(Error::LengthMismatch {
                what: "reference allocation",
                expected: data.n(),
                actual: reference.len(),
            });
        }
    }
    let (result, elapsed) = timed(|| {
        let perms = trace
            .draws()
            .par_iter()
            .map(|d| {
                let z = allocation_of(d, data)?;
                hungarian(&cost(reference, &z, k)?)
            })
            .collect::<Result<Vec<Permutation>>>()?;
        RelabelResult::new(method, trace, perms)
    });
    result.map(|mut r| {
        r.wall_time = elapsed;
        r
    })
}
