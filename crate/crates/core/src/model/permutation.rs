use std::fmt;

use crate::error::{Error, Result};

/// A bijection on component indices.
///
/// Stored zero-based; `map[k]` names the input component that lands in
/// output position `k` when the permutation is applied to a draw.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let k = map.len();
        let mut seen = vec![false; k];
        for &v in &map {
            if v >= k || seen[v] {
                return Err(Error::InvalidPermutation(map.iter().map(|v| v + 1).collect()));
            }
            seen[v] = true;
        }
        Ok(Self { map })
    }

    /// Builds a permutation from one-based labels, as written in files.
    pub fn from_one_based(labels: &[usize]) -> Result<Self> {
        if labels.contains(&0) {
            return Err(Error::InvalidPermutation(labels.to_vec()));
        }
        Self::new(labels.iter().map(|v| v - 1).collect())
    }

    pub fn identity(k: usize) -> Self {
        Self {
            map: (0..k).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn get(&self, k: usize) -> usize {
        self.map[k]
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.map.iter().map(|v| v + 1).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(k, &v)| k == v)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (k, &v) in self.map.iter().enumerate() {
            inv[v] = k;
        }
        Self { map: inv }
    }

    /// The permutation equivalent to applying `first` and then `self`.
    ///
    /// `apply(apply(d, first), self) == apply(d, self.after(first))`.
    pub fn after(&self, first: &Permutation) -> Self {
        assert_eq!(self.len(), first.len(), "permutation lengths differ");
        Self {
            map: self.map.iter().map(|&r| first.map[r]).collect(),
        }
    }

    /// Reorders `blocks` so that output position `k` holds `blocks[map[k]]`.
    pub fn permute<T: Clone>(&self, blocks: &[T]) -> Vec<T> {
        self.map.iter().map(|&src| blocks[src].clone()).collect()
    }

    /// Same as [`permute`](Self::permute) on a flat vector of `len()` blocks of width `b`.
    pub fn permute_blocks(&self, flat: &[f64], b: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(flat.len());
        for &src in &self.map {
            out.extend_from_slice(&flat[src * b..(src + 1) * b]);
        }
        out
    }

    /// All `k!` permutations in lexicographic order, identity first.
    pub fn all(k: usize) -> LexicographicPermutations {
        LexicographicPermutations {
            next: Some((0..k).collect()),
        }
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.map.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{}", v + 1)?;
        }
        write!(f, ")")
    }
}

pub struct LexicographicPermutations {
    next: Option<Vec<usize>>,
}

impl Iterator for LexicographicPermutations {
    type Item = Permutation;

    fn next(&mut self) -> Option<Permutation> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        if next_permutation(&mut succ) {
            self.next = Some(succ);
        }
        Some(Permutation { map: current })
    }
}

/// Advances `v` to its lexicographic successor; returns false at the last one.
fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}
