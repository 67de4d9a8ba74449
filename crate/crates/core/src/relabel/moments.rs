/// Streaming per-coordinate mean and sample variance.
///
/// Uses the recurrences
/// `mean_n = ((n-1) mean_{n-1} + x) / n` and
/// `var_n = (n-2)/(n-1) var_{n-1} + (x - mean_{n-1})^2 / n`,
/// with the mean update evaluated as `mean_{n-1} + (x - mean_{n-1}) / n`
/// so that a constant sequence stays exactly constant.
#[derive(Clone, Debug, PartialEq)]
pub struct RunningMoments {
    count: usize,
    mean: Vec<f64>,
    var: Vec<f64>,
}

impl RunningMoments {
    pub fn new(q: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; q],
            var: vec![0.0; q],
        }
    }

    pub fn from_rows<'a>(q: usize, rows: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let mut m = Self::new(q);
        for r in rows {
            m.push(r);
        }
        m
    }

    pub fn push(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.mean.len(), "row length differs from q");
        self.count += 1;
        let n = self.count as f64;
        if self.count == 1 {
            self.mean.copy_from_slice(x);
            self.var.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        let shrink = (n - 2.0) / (n - 1.0);
        for ((m, v), &xi) in self.mean.iter_mut().zip(self.var.iter_mut()).zip(x) {
            let dev = xi - *m;
            *v = shrink * *v + dev * dev / n;
            *m += dev / n;
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn q(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Sample variance (divisor `n - 1`); zero while fewer than two rows.
    pub fn variance(&self) -> &[f64] {
        &self.var
    }

    /// Variance with divisor `n`.
    pub fn population_variance(&self) -> Vec<f64> {
        if self.count == 0 {
            return vec![0.0; self.q()];
        }
        let f = (self.count as f64 - 1.0) / self.count as f64;
        self.var.iter().map(|v| v * f).collect()
    }

    pub fn total_variance(&self) -> f64 {
        self.var.iter().sum()
    }
}

/// Two-pass mean and sample variance, used as an oracle and for reporting.
pub fn batch_moments(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let q = rows.first().map_or(0, Vec::len);
    let n = rows.len() as f64;
    let mut mean = vec![0.0; q];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; q];
    if rows.len() > 1 {
        for r in rows {
            for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        var.iter_mut().for_each(|v| *v /= n - 1.0);
    }
    (mean, var)
}
