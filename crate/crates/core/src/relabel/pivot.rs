use std::borrow::Cow;
use std::ops::Range;

use rayon::prelude::*;

use super::marin::{MarinDirection, MarinOptions, MarinSolver};
use crate::error::{Error, Result};
use crate::model::{Dataset, Draw, Trace};

/// Modal allocation `z_i = argmax_k p(k | x_i)`, lowest `k` on ties.
pub fn derive_allocation(draw: &Draw, data: &Dataset) -> Result<Vec<usize>> {
    if data.dim() != draw.spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: draw.spec.dim(),
            actual: data.dim(),
        });
    }
    let mix = draw.spec.prepared()?;
    let mut scratch = vec![0.0; mix.k()];
    Ok(data
        .points()
        .iter()
        .map(|x| mix.modal_component(x, &mut scratch))
        .collect())
}

/// Stored allocation, or the modal one derived from `data`.
pub(crate) fn allocation_of<'a>(draw: &'a Draw, data: Option<&Dataset>) -> Result<Cow<'a, [usize]>> {
    match (&draw.allocation, data) {
        (Some(z), _) => Ok(Cow::Borrowed(z)),
        (None, Some(data)) => Ok(Cow::Owned(derive_allocation(draw, data)?)),
        (None, None) => Err(Error::MissingAllocation { iter: draw.iter }),
    }
}

/// The draw with the highest log posterior; the earliest one on ties.
pub fn select_pivot(trace: &Trace) -> Result<&Draw> {
    Ok(&trace.draws()[pivot_index(trace.draws())?])
}

pub(crate) fn pivot_index(draws: &[Draw]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, d) in draws.iter().enumerate() {
        let lp = d
            .log_posterior
            .ok_or(Error::MissingLogPosterior { iter: d.iter })?;
        if best.is_none_or(|(_, b)| lp > b) {
            best = Some((i, lp));
        }
    }
    best.map(|(i, _)| i)
        .ok_or_else(|| Error::InvalidTrace("trace has no draws".into()))
}

/// Makes sure every draw can be ranked.
///
/// A trace without log posteriors gets each draw's log-likelihood on `data`
/// instead, and a note saying so.
pub fn ensure_log_posterior<'a>(
    trace: &'a Trace,
    data: Option<&Dataset>,
) -> Result<(Cow<'a, Trace>, Option<String>)> {
    if trace.has_log_posterior() {
        return Ok((Cow::Borrowed(trace), None));
    }
    let missing = trace
        .draws()
        .iter()
        .find(|d| d.log_posterior.is_none())
        .map_or(0, |d| d.iter);
    let data = data.ok_or(Error::MissingLogPosterior { iter: missing })?;
    let draws = trace
        .draws()
        .par_iter()
        .map(|d| {
            let mix = d.spec.prepared()?;
            let mut ll = 0.0;
            for x in data.points() {
                ll += mix.log_pdf(x)?;
            }
            let mut d = d.clone();
            d.log_posterior = Some(ll);
            Ok(d)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((
        Cow::Owned(Trace::new(draws, trace.dataset_id())?),
        Some("log_posterior absent; draws ranked by log-likelihood".into()),
    ))
}

/// A run of draws presumed free of label switching.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReferenceWindow {
    pub range: Range<usize>,
    /// Index of the highest log posterior draw inside the window.
    pub best: usize,
    /// Whether every draw in the window aligns with `best` unpermuted.
    pub stable: bool,
}

/// Picks the length-`m` window with the highest mean log posterior among
/// those whose draws all align with the window's best draw as they stand.
/// Without such a window, the top window is returned with `stable = false`.
pub fn reference_window(trace: &Trace, m: usize) -> Result<ReferenceWindow> {
    let draws = trace.draws();
    if m == 0 || m > draws.len() {
        return Err(Error::InvalidConfig(format!(
            "reference window of {m} draws does not fit in a trace of {}",
            draws.len()
        )));
    }
    let lp: Vec<f64> = draws
        .iter()
        .map(|d| d.log_posterior.ok_or(Error::MissingLogPosterior { iter: d.iter }))
        .collect::<Result<_>>()?;
    let mut prefix = Vec::with_capacity(lp.len() + 1);
    prefix.push(0.0);
    for v in &lp {
        prefix.push(prefix.last().unwrap() + v);
    }
    let mut starts: Vec<(usize, f64)> = (0..=lp.len() - m)
        .map(|s| (s, (prefix[s + m] - prefix[s]) / m as f64))
        .collect();
    starts.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let solver = MarinSolver::new(
        trace.k(),
        trace.dim(),
        &MarinOptions {
            direction: MarinDirection::Max,
            assignment_fallback: true,
        },
    )?;
    let flat: Vec<Vec<f64>> = draws.iter().map(|d| d.spec.flatten()).collect();
    let best_in = |s: usize| {
        let mut b = s;
        for i in s..s + m {
            if lp[i] > lp[b] {
                b = i;
            }
        }
        b
    };
    for &(s, _) in &starts {
        let best = best_in(s);
        let mut stable = true;
        for i in s..s + m {
            if i != best && !solver.best(&flat[i], &flat[best])?.is_identity() {
                stable = false;
                break;
            }
        }
        if stable {
            return Ok(ReferenceWindow {
                range: s..s + m,
                best,
                stable: true,
            });
        }
    }
    let s = starts[0].0;
    log::warn!("no switch-free reference window of {m} draws; using the top window");
    Ok(ReferenceWindow {
        range: s..s + m,
        best: best_in(s),
        stable: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Dataset, MixtureSpec};
    use crate::relabel::test_support::trace_from;
    use crate::sampler::inject_label_switching;

    #[test]
    fn allocation_examples() {
        let spec = MixtureSpec::univariate(&[(0.5, 0.0, 1.0), (0.5, 10.0, 1.0)]).unwrap();
        let data = Dataset::new(vec![vec![0.0], vec![10.0], vec![5.0]], None, None).unwrap();
        let z = derive_allocation(&Draw::new(1, spec), &data).unwrap();
        assert_eq!(z, vec![0, 1, 0]);

        let same = MixtureSpec::univariate(&[(0.5, 0.0, 1.0), (0.5, 0.0, 1.0)]).unwrap();
        let z = derive_allocation(&Draw::new(1, same), &data).unwrap();
        assert_eq!(z, vec![0, 0, 0]);

        let bad = Dataset::new(vec![vec![0.0, 1.0]], None, None).unwrap();
        let spec = MixtureSpec::univariate(&[(1.0, 0.0, 1.0)]).unwrap();
        assert!(derive_allocation(&Draw::new(1, spec), &bad).is_err());
    }

    fn with_lp(trace: Trace, lp: impl Fn(usize) -> f64) -> Trace {
        let draws = trace
            .into_draws()
            .into_iter()
            .enumerate()
            .map(|(i, mut d)| {
                d.log_posterior = Some(lp(i));
                d
            })
            .collect();
        Trace::new(draws, "t").unwrap()
    }

    #[test]
    fn pivot_examples() {
        let base = vec![(0.5, -5.0, 1.0), (0.5, 5.0, 1.0)];
        let t = with_lp(trace_from(&vec![base.clone(); 5]), |i| i as f64);
        assert_eq!(select_pivot(&t).unwrap().iter, 5);

        let one = with_lp(trace_from(std::slice::from_ref(&base)), |_| -3.0);
        assert_eq!(select_pivot(&one).unwrap().iter, 1);

        let flat = with_lp(trace_from(&vec![base.clone(); 6]), |_| 1.0);
        let switched = inject_label_switching(&flat, 9).unwrap().trace;
        assert_eq!(select_pivot(&switched).unwrap().iter, 1);

        let mut draws = flat.into_draws();
        draws[2].log_posterior = None;
        let t = Trace::new(draws, "t").unwrap();
        assert!(matches!(
            select_pivot(&t),
            Err(Error::MissingLogPosterior { iter: 3 })
        ));
    }

    #[test]
    fn log_likelihood_fallback() {
        let base = vec![(0.5, -5.0, 1.0), (0.5, 5.0, 1.0)];
        let mut draws = trace_from(&vec![base; 3]).into_draws();
        for d in &mut draws {
            d.log_posterior = None;
        }
        let t = Trace::new(draws, "t").unwrap();
        assert!(ensure_log_posterior(&t, None).is_err());
        let data = Dataset::new(vec![vec![1.0]], None, None).unwrap();
        let (ranked, note) = ensure_log_posterior(&t, Some(&data)).unwrap();
        assert!(ranked.has_log_posterior());
        assert!(note.is_some());
    }

    #[test]
    fn window_on_switch_free_trace() {
        let draws: Vec<Vec<(f64, f64, f64)>> = (0..40)
            .map(|i| vec![(0.5, -5.0 + 0.01 * i as f64, 1.0), (0.5, 5.0, 1.0)])
            .collect();
        let t = with_lp(trace_from(&draws), |i| -((i as f64) - 20.0).powi(2));
        let w = reference_window(&t, 10).unwrap();
        assert!(w.stable);
        assert_eq!(w.range, 15..25);
        assert_eq!(w.best, 20);

        let whole = reference_window(&t, 40).unwrap();
        assert_eq!(whole.range, 0..40);
        assert!(whole.stable);
        assert!(reference_window(&t, 41).is_err());
    }

    #[test]
    fn window_falls_back_when_every_window_switches() {
        let draws: Vec<Vec<(f64, f64, f64)>> = (0..40)
            .map(|i| {
                if i % 2 == 0 {
                    vec![(0.3, -5.0, 1.0), (0.7, 5.0, 1.0)]
                } else {
                    vec![(0.7, 5.0, 1.0), (0.3, -5.0, 1.0)]
                }
            })
            .collect();
        let t = with_lp(trace_from(&draws), |i| i as f64);
        let w = reference_window(&t, 4).unwrap();
        assert!(!w.stable);
        assert_eq!(w.range, 36..40);

        let whole = reference_window(&t, 40).unwrap();
        assert!(!whole.stable);
    }
}
