//! CSV rendering of diagnostics reports.

use std::path::Path;

use super::files::{fmt_f64, write_table};
use crate::diagnostics::DiagnosticsReport;
use crate::error::Result;
use crate::model::{mixture_pdf, MixtureSpec, Scale};

pub const NA: &str = "NA";
/// Grid nodes per coordinate in the density-curve file.
pub const CURVE_POINTS: usize = 2001;

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), fmt_f64)
}

/// One row per method: KL, misclassification rate, total variance, draw counts.
pub fn write_summary(path: &Path, reports: &[DiagnosticsReport]) -> Result<()> {
    let header: Vec<String> = [
        "method",
        "kl",
        "misclassification_rate",
        "total_variance",
        "retained",
        "excluded",
    ]
    .map(String::from)
    .to_vec();
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.method.name().to_string(),
                opt(r.kl),
                opt(r.misclassification_rate()),
                fmt_f64(r.total_variance()),
                r.retained.to_string(),
                r.excluded.to_string(),
            ]
        })
        .collect();
    write_table(path, &header, &rows)
}

/// Wall-clock seconds per method, kept apart from the deterministic outputs.
pub fn write_timings(path: &Path, timings: &[(String, Option<f64>)]) -> Result<()> {
    let rows: Vec<Vec<String>> = timings
        .iter()
        .map(|(m, t)| vec![m.clone(), opt(*t)])
        .collect();
    write_table(path, &["method".into(), "time_seconds".into()], &rows)
}

/// Rows `method, true_component, inferred_1..inferred_K`; `NA` without truth.
pub fn write_misclassification(path: &Path, reports: &[DiagnosticsReport]) -> Result<()> {
    let k = reports.iter().map(|r| r.summary.k).max().unwrap_or(0);
    let mut header = vec!["method".to_string(), "true_component".to_string()];
    header.extend((1..=k).map(|c| format!("inferred_{c}")));
    let mut rows = Vec::new();
    for r in reports {
        match &r.misclassification {
            Some(m) => {
                for (t, counts) in m.counts.iter().enumerate() {
                    let mut row = vec![r.method.name().to_string(), (t + 1).to_string()];
                    row.extend(counts.iter().map(usize::to_string));
                    row.resize(header.len(), NA.to_string());
                    rows.push(row);
                }
            }
            None => {
                let mut row = vec![r.method.name().to_string()];
                row.resize(header.len(), NA.to_string());
                rows.push(row);
            }
        }
    }
    write_table(path, &header, &rows)
}

/// Posterior mean and variance of every coordinate, per method.
pub fn write_parameters(path: &Path, reports: &[DiagnosticsReport]) -> Result<()> {
    let header: Vec<String> = ["method", "parameter", "mean", "variance"].map(String::from).to_vec();
    let mut rows = Vec::new();
    for r in reports {
        let s = &r.summary;
        for ((name, m), v) in s.names.iter().zip(&s.mean).zip(&s.variance) {
            rows.push(vec![r.method.name().to_string(), name.clone(), fmt_f64(*m), fmt_f64(*v)]);
        }
    }
    write_table(path, &header, &rows)
}

/// Univariate marginal of coordinate `i`.
pub fn marginal(spec: &MixtureSpec, i: usize) -> Result<MixtureSpec> {
    let params: Vec<(f64, f64, f64)> = spec
        .weights()
        .iter()
        .zip(spec.components())
        .map(|(w, c)| {
            let v = match c.scale() {
                Scale::Variance(v) => *v,
                Scale::Covariance(m) => m[(i, i)],
            };
            (*w, c.mean()[i], v)
        })
        .collect();
    MixtureSpec::univariate(&params)
}

fn support(spec: &MixtureSpec) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in spec.components() {
        let sd = match c.scale() {
            Scale::Variance(v) => v.sqrt(),
            Scale::Covariance(m) => m[(0, 0)].sqrt(),
        };
        lo = lo.min(c.mean()[0] - 8.0 * sd);
        hi = hi.max(c.mean()[0] + 8.0 * sd);
    }
    (lo, hi)
}

/// Plot-ready marginal density curves: `coordinate, x, reference, <method>...`.
///
/// The grid of each coordinate spans eight standard deviations beyond every
/// component of every curve, so each column integrates to one.
pub fn write_density_curves(
    path: &Path,
    reference: Option<&MixtureSpec>,
    curves: &[(String, MixtureSpec)],
) -> Result<()> {
    let d = reference
        .map(MixtureSpec::dim)
        .or_else(|| curves.first().map(|c| c.1.dim()))
        .unwrap_or(1);
    let mut header = vec!["coordinate".to_string(), "x".to_string(), "reference".to_string()];
    header.extend(curves.iter().map(|c| c.0.clone()));
    let mut rows = Vec::new();
    for i in 0..d {
        let reference = reference.map(|r| marginal(r, i)).transpose()?;
        let margins = curves
            .iter()
            .map(|(_, s)| marginal(s, i))
            .collect::<Result<Vec<_>>>()?;
        let (lo, hi) = reference
            .iter()
            .chain(&margins)
            .map(support)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |a, b| (a.0.min(b.0), a.1.max(b.1)));
        let h = (hi - lo) / (CURVE_POINTS - 1) as f64;
        for g in 0..CURVE_POINTS {
            let x = lo + h * g as f64;
            let mut row = vec![(i + 1).to_string(), fmt_f64(x)];
            row.push(match &reference {
                Some(r) => fmt_f64(mixture_pdf(r, &[x])?),
                None => NA.to_string(),
            });
            for m in &margins {
                row.push(fmt_f64(mixture_pdf(m, &[x])?));
            }
            rows.push(row);
        }
    }
    write_table(path, &header, &rows)
}
