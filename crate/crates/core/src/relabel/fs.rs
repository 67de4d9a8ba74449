use rayon::prelude::*;

use super::pivot::select_pivot;
use super::{Method, RelabelResult};
use crate::diagnostics::timed;
use crate::error::{Error, Result};
use crate::model::{block_len, Draw, Permutation, Trace};

const MAX_LLOYD_ITERATIONS: usize = 500;

/// Outcome of Lloyd's algorithm.
#[derive(Clone, Debug, PartialEq)]
pub struct KMeans {
    /// `k` centroids of width `dim`, row-major.
    pub centroids: Vec<f64>,
    pub labels: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
}

/// Lloyd's algorithm on row-major `points` of width `dim`, started at `init`.
///
/// Points go to the nearest centroid, lowest index on ties. A centroid left
/// without points moves to the point farthest from its own centroid.
pub fn kmeans(points: &[f64], dim: usize, init: &[f64], max_iter: usize) -> KMeans {
    assert!(dim > 0 && points.len().is_multiple_of(dim) && init.len().is_multiple_of(dim));
    let k = init.len() / dim;
    let n = points.len() / dim;
    let mut centroids = init.to_vec();
    let mut labels = vec![usize::MAX; n];
    let mut dist = vec![0.0; n];
    for iteration in 1..=max_iter {
        let assigned: Vec<(usize, f64)> = points
            .par_chunks(dim)
            .map(|p| nearest(p, &centroids, dim))
            .collect();
        let mut changed = false;
        for (i, (c, dd)) in assigned.into_iter().enumerate() {
            changed |= labels[i] != c;
            labels[i] = c;
            dist[i] = dd;
        }
        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for (i, p) in points.chunks(dim).enumerate() {
            counts[labels[i]] += 1;
            for (s, v) in sums[labels[i] * dim..(labels[i] + 1) * dim].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut reseeded = false;
        let mut taken = vec![false; n];
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .filter(|&i| !taken[i])
                    .fold(None, |best: Option<usize>, i| match best {
                        Some(b) if dist[b] >= dist[i] => Some(b),
                        _ => Some(i),
                    });
                if let Some(i) = far {
                    taken[i] = true;
                    centroids[c * dim..(c + 1) * dim].copy_from_slice(&points[i * dim..(i + 1) * dim]);
                    reseeded = true;
                }
            } else {
                for t in 0..dim {
                    centroids[c * dim + t] = sums[c * dim + t] / counts[c] as f64;
                }
            }
        }
        if !changed && !reseeded {
            return KMeans {
                centroids,
                labels,
                iterations: iteration,
                converged: true,
            };
        }
    }
    KMeans {
        centroids,
        labels,
        iterations: max_iter,
        converged: false,
    }
}

fn nearest(p: &[f64], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centre) in centroids.chunks(dim).enumerate() {
        let d: f64 = p.iter().zip(centre).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means clustering of all component blocks, started at the pivot draw.
pub fn relabel_fs(trace: &Trace) -> Result<RelabelResult> {
    let pivot = select_pivot(trace)?;
    relabel_fs_with_pivot(trace, pivot)
}

/// Clusters the `M * K` standardised component blocks into `K` groups.
///
/// A draw whose blocks land in `K` distinct clusters is relabelled so that
/// block `k` comes from cluster `k`; any other draw is excluded.
pub fn relabel_fs_with_pivot(trace: &Trace, pivot: &Draw) -> Result<RelabelResult> {
    if pivot.spec.k() != trace.k() || pivot.spec.dim() != trace.dim() {
        return Err(Error::InvalidConfig("pivot is not compatible with the trace".into()));
    }
    let (result, elapsed) = timed(|| {
        let (k, b) = (trace.k(), block_len(trace.dim()));
        let mut pool: Vec<f64> = Vec::with_capacity(trace.len() * k * b);
        for d in trace.draws() {
            pool.extend(d.spec.flatten());
        }
        let rows = pool.len() / b;
        let mut centre = vec![0.0; b];
        let mut spread = vec![0.0; b];
        for p in pool.chunks(b) {
            for t in 0..b {
                centre[t] += p[t];
            }
        }
        centre.iter_mut().for_each(|c| *c /= rows as f64);
        for p in pool.chunks(b) {
            for t in 0..b {
                spread[t] += (p[t] - centre[t]).powi(2);
            }
        }
        for s in spread.iter_mut() {
            let sd = (*s / rows as f64).sqrt();
            *s = if sd > 0.0 { sd } else { 1.0 };
        }
        let standardise = |v: &mut [f64]| {
            for (i, x) in v.iter_mut().enumerate() {
                *x = (*x - centre[i % b]) / spread[i % b];
            }
        };
        standardise(&mut pool);
        let mut init = pivot.spec.flatten();
        standardise(&mut init);
        let fit = kmeans(&pool, b, &init, MAX_LLOYD_ITERATIONS);

        let mut perms = Vec::with_capacity(trace.len());
        let mut excluded = Vec::new();
        for (i, classes) in fit.labels.chunks(k).enumerate() {
            match Permutation::new(classes.to_vec()) {
                // block j went to cluster classes[j], so output block c is input block classes^{-1}(c)
                Ok(c) => perms.push(c.inverse()),
                Err(_) => {
                    excluded.push(i);
                    perms.push(Permutation::identity(k));
                }
            }
        }
        let keep = super::retained(trace.len(), &excluded);
        let kept: Vec<Permutation> = keep.iter().map(|&i| perms[i].clone()).collect();
        let relabelled = trace.subset(&keep).relabelled(&kept)?;
        let mut notes = Vec::new();
        if !fit.converged {
            notes.push(format!("k-means stopped after {} iterations", fit.iterations));
        }
        if !excluded.is_empty() {
            notes.push(format!(
                "{} of {} draws excluded ({:.1}%)",
                excluded.len(),
                trace.len(),
                100.0 * excluded.len() as f64 / trace.len() as f64
            ));
        }
        Ok(RelabelResult {
            method: Method::FruhwirthSchnatter,
            permutations: perms,
            relabelled,
            excluded,
            wall_time: 0.0,
            notes,
            scale_floor_hits: 0,
        })
    });
    result.map(|mut r: RelabelResult| {
        r.wall_time = elapsed;
        r
    })
}
