use rand::Rng;

use super::{rng_from_seed, sample_log_categorical, PottsConfig};
use crate::error::{Error, Result};

/// Labels on a 3-D lattice, stored with the first axis fastest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PottsLattice {
    pub dims: [usize; 3],
    pub labels: Vec<usize>,
}

impl PottsLattice {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

pub(crate) fn lattice_index(dims: [usize; 3], i: usize, j: usize, l: usize) -> usize {
    i + dims[0] * (j + dims[1] * l)
}

/// The (up to six) face neighbours of every site.
pub(crate) fn neighbour_table(dims: [usize; 3]) -> Vec<Vec<usize>> {
    let [n1, n2, n3] = dims;
    let mut table = Vec::with_capacity(n1 * n2 * n3);
    for l in 0..n3 {
        for j in 0..n2 {
            for i in 0..n1 {
                let mut nb = Vec::with_capacity(6);
                if i > 0 {
                    nb.push(lattice_index(dims, i - 1, j, l));
                }
                if i + 1 < n1 {
                    nb.push(lattice_index(dims, i + 1, j, l));
                }
                if j > 0 {
                    nb.push(lattice_index(dims, i, j - 1, l));
                }
                if j + 1 < n2 {
                    nb.push(lattice_index(dims, i, j + 1, l));
                }
                if l > 0 {
                    nb.push(lattice_index(dims, i, j, l - 1));
                }
                if l + 1 < n3 {
                    nb.push(lattice_index(dims, i, j, l + 1));
                }
                table.push(nb);
            }
        }
    }
    table
}

/// Single-site Gibbs sweeps targeting `P(z) ∝ exp(kappa · #agreeing neighbour pairs)`
/// on the 6-neighbour lattice, started from iid uniform labels.
pub fn simulate_potts_allocation(cfg: &PottsConfig) -> Result<PottsLattice> {
    if cfg.dims.contains(&0) {
        return Err(Error::InvalidConfig(format!("lattice dims must be >= 1, got {:?}", cfg.dims)));
    }
    if cfg.k == 0 {
        return Err(Error::InvalidConfig("Potts model needs K >= 1".into()));
    }
    if !(cfg.kappa >= 0.0 && cfg.kappa.is_finite()) {
        return Err(Error::InvalidConfig(format!("kappa must be >= 0, got {}", cfg.kappa)));
    }
    let mut rng = rng_from_seed(cfg.seed);
    let n: usize = cfg.dims.iter().product();
    let mut labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..cfg.k)).collect();
    let table = neighbour_table(cfg.dims);
    let mut logw = vec![0.0; cfg.k];
    let mut scratch = vec![0.0; cfg.k];
    for _ in 0..cfg.sweeps {
        for site in 0..n {
            logw.iter_mut().for_each(|v| *v = 0.0);
            for &nb in &table[site] {
                logw[labels[nb]] += cfg.kappa;
            }
            labels[site] = sample_log_categorical(&mut rng, &logw, &mut scratch);
        }
    }
    Ok(PottsLattice {
        dims: cfg.dims,
        labels,
    })
}

/// Fraction of neighbouring site pairs that carry the same label.
pub fn neighbour_agreement(lattice: &PottsLattice) -> f64 {
    let table = neighbour_table(lattice.dims);
    let (mut same, mut pairs) = (0usize, 0usize);
    for (site, nbs) in table.iter().enumerate() {
        for &nb in nbs.iter().filter(|&&nb| nb > site) {
            pairs += 1;
            if lattice.labels[nb] == lattice.labels[site] {
                same += 1;
            }
        }
    }
    if pairs == 0 {
        return f64::NAN;
    }
    same as f64 / pairs as f64
}
