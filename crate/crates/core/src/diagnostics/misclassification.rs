use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Dataset, Trace};
use crate::relabel::{derive_allocation, hungarian, CostMatrix, RelabelResult};

/// Confusion counts after aligning inferred labels to the true ones.
#[derive(Clone, Debug, PartialEq)]
pub struct Misclassification {
    /// `counts[i][j]`: points of true component `i` classified as (aligned) component `j`.
    pub counts: Vec<Vec<usize>>,
    /// `alignment[j]` is the inferred label shown in column `j`.
    pub alignment: Vec<usize>,
    pub rate: f64,
}

impl Misclassification {
    pub fn n(&self) -> usize {
        self.counts.iter().flatten().sum()
    }
}

/// Per-observation majority vote of the relabelled allocations, lowest
/// label on ties. Draws without allocations are classified from `data`.
pub fn majority_allocation(trace: &Trace, data: &Dataset) -> Result<Vec<usize>> {
    let k = trace.k();
    let votes = trace
        .draws()
        .par_iter()
        .map(|d| -> Result<Vec<u32>> {
            let derived;
            let z = match &d.allocation {
                Some(z) => z,
                None => {
                    derived = derive_allocation(d, data)?;
                    &derived
                }
            };
            if z.len() != data.n() {
                return Err(Error::LengthMismatch {
                    what: "allocation",
                    expected: data.n(),
                    actual: z.len(),
                });
            }
            let mut v = vec![0u32; data.n() * k];
            for (i, &c) in z.iter().enumerate() {
                v[i * k + c] += 1;
            }
            Ok(v)
        })
        .try_reduce(
            || vec![0u32; data.n() * k],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    Ok(votes
        .chunks(k)
        .map(|row| {
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect())
}

/// Misclassification matrix of a relabelled trace against the true allocation.
pub fn misclassification(result: &RelabelResult, data: &Dataset) -> Result<Misclassification> {
    let truth = data.true_allocation().ok_or(Error::MissingTruth)?;
    if result.relabelled.is_empty() {
        return Err(Error::InvalidTrace("no retained draws to classify".into()));
    }
    let inferred = majority_allocation(&result.relabelled, data)?;
    let k_true = data
        .true_k()
        .unwrap_or_else(|| truth.iter().max().map_or(0, |m| m + 1));
    confusion(truth, &inferred, k_true, result.relabelled.k())
}

pub(crate) fn confusion(
    truth: &[usize],
    inferred: &[usize],
    k_true: usize,
    k: usize,
) -> Result<Misclassification> {
    let size = k_true.max(k);
    let mut raw = vec![0.0; size * size];
    for (&t, &c) in truth.iter().zip(inferred) {
        raw[t * size + c] += 1.0;
    }
    let nu = hungarian(&CostMatrix::from_scores(size, &raw)?)?;
    let alignment: Vec<usize> = nu.as_slice().iter().copied().filter(|&c| c < k).collect();
    let counts: Vec<Vec<usize>> = (0..k_true)
        .map(|t| alignment.iter().map(|&c| raw[t * size + c] as usize).collect())
        .collect();
    let matched: f64 = (0..k_true)
        .filter(|&t| nu.get(t) < k)
        .map(|t| raw[t * size + nu.get(t)])
        .sum();
    let n = truth.len() as f64;
    Ok(Misclassification {
        counts,
        alignment,
        rate: 1.0 - matched / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_recovery_is_diagonal() {
        let truth = vec![0, 0, 1, 2, 2];
        let m = confusion(&truth, &[2, 2, 0, 1, 1], 3, 3).unwrap();
        assert_eq!(m.counts, vec![vec![2, 0, 0], vec![0, 1, 0], vec![0, 0, 2]]);
        assert_eq!(m.rate, 0.0);
        assert_eq!(m.alignment, vec![2, 0, 1]);
    }

    #[test]
    fn rate_ignores_global_relabelling() {
        let truth = vec![0, 0, 0, 1, 1, 2, 2, 2];
        let inferred = vec![0, 1, 0, 1, 2, 2, 2, 0];
        let a = confusion(&truth, &inferred, 3, 3).unwrap();
        let shifted: Vec<usize> = inferred.iter().map(|c| (c + 1) % 3).collect();
        let b = confusion(&truth, &shifted, 3, 3).unwrap();
        assert_eq!(a.rate, b.rate);
        assert_eq!(a.counts, b.counts);
        assert!((0.0..=1.0).contains(&a.rate));
        assert_eq!(a.n(), truth.len());
    }

    #[test]
    fn rows_sum_to_true_counts() {
        let truth = vec![0, 1, 1, 1];
        let m = confusion(&truth, &[1, 1, 1, 1], 2, 2).unwrap();
        assert_eq!(m.counts[0].iter().sum::<usize>(), 1);
        assert_eq!(m.counts[1].iter().sum::<usize>(), 3);
        assert_eq!(m.rate, 0.25);
    }
}
