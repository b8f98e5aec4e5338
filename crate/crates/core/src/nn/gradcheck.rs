//! Central finite-difference checks for tape gradients.

use super::params::{Grads, ParamStore};
use crate::error::Result;

/// Worst disagreement found in one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    /// Tensor-level error `max|a - n| / max(max|a|, max|n|, 1e-8)`.
    pub rel_error: f64,
    pub max_abs_error: f64,
    /// Largest entrywise `|a - n| / max(|a|, |n|, 1e-8)`; dominated by
    /// round-off for entries near zero, so informational only.
    pub max_entry_rel_error: f64,
    /// Flat index of the entry with the largest absolute error.
    pub worst_index: usize,
}

pub const REL_FLOOR: f64 = 1e-8;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Perturbs every parameter entry by `±step` and compares `(f(+) - f(-)) / 2step`
/// against `analytic`. Parameters are restored afterwards.
pub fn check_gradients<F>(
    params: &mut ParamStore,
    analytic: &Grads,
    step: f64,
    mut loss: F,
) -> Result<Vec<ParamCheck>>
where
    F: FnMut(&ParamStore) -> Result<f64>,
{
    let ids: Vec<_> = params.ids().collect();
    let mut report = Vec::with_capacity(ids.len());
    for id in ids {
        let n = params.get(id).len();
        let mut check = ParamCheck {
            name: params.name(id).to_string(),
            rel_error: 0.0,
            max_abs_error: 0.0,
            max_entry_rel_error: 0.0,
            worst_index: 0,
        };
        let (mut max_a, mut max_n) = (0.0f64, 0.0f64);
        for i in 0..n {
            let original = params.get(id).as_slice().expect("standard layout")[i];
            params.get_mut(id).as_slice_mut().expect("standard layout")[i] = original + step;
            let plus = loss(params)?;
            params.get_mut(id).as_slice_mut().expect("standard layout")[i] = original - step;
            let minus = loss(params)?;
            params.get_mut(id).as_slice_mut().expect("standard layout")[i] = original;
            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic.get(id).as_slice().expect("standard layout")[i];
            max_a = max_a.max(a.abs());
            max_n = max_n.max(numeric.abs());
            check.max_entry_rel_error = check.max_entry_rel_error.max(relative_error(a, numeric));
            if (a - numeric).abs() > check.max_abs_error {
                check.max_abs_error = (a - numeric).abs();
                check.worst_index = i;
            }
        }
        check.rel_error = check.max_abs_error / max_a.max(max_n).max(REL_FLOOR);
        report.push(check);
    }
    Ok(report)
}
