//! Central finite differences, used as an independent gradient oracle.

use crate::error::{Error, Result};
use crate::numkit::Scalar;

/// Estimates `∇f(params)` coordinate-wise as `(f(p+h·eᵢ) − f(p−h·eᵢ)) / 2h`.
pub fn finite_diff_grad<T, F>(mut loss_fn: F, params: &[T], h: T) -> Result<Vec<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> T,
{
    let two = T::one() + T::one();
    let mut probe = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = loss_fn(&probe);
        probe[i] = orig - h;
        let down = loss_fn(&probe);
        probe[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::Numeric(format!(
                "loss is not finite around coordinate {i}"
            )));
        }
        out.push((up - down) / (two * h));
    }
    Ok(out)
}

/// Largest relative discrepancy `|a − n| / max(|a|, |n|, floor)` over all coordinates.
pub fn max_relative_error<T: Scalar>(analytic: &[T], numeric: &[T], floor: T) -> T {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(T::zero(), T::max)
}
