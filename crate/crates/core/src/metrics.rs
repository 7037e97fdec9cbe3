//! Error norms used across the experiment tables.

use crate::error::{Error, Result};
use crate::scalar::Real;

fn check_lengths<T>(a: &[T], b: &[T]) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InvalidArgument(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    Ok(())
}

pub fn l2_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |s, x| s + *x * *x).sqrt()
}

fn diff_norm<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (x, y)| s + (*x - *y) * (*x - *y)).sqrt()
}

/// `‖approx − exact‖₂ / ‖exact‖₂`.
pub fn rel_l2_error<T: Real>(approx: &[T], exact: &[T]) -> Result<T> {
    check_lengths(approx, exact)?;
    let den = l2_norm(exact);
    if den.is_zero() {
        return Err(Error::ZeroDenominator);
    }
    Ok(diff_norm(approx, exact) / den)
}

/// Relative L2 error divided by `n + 1`, the sample count of an `n`-step run.
pub fn avg_rel_error<T: Real>(approx: &[T], exact: &[T], n: usize) -> Result<T> {
    Ok(rel_l2_error(approx, exact)? / T::from_usize(n + 1))
}

/// `‖approx − exact‖₂ / (‖approx‖₂ · len)`: normalized by the approximation
/// and the number of samples, as used for the adaptive integrator.
pub fn avg_rel_error_by_approx<T: Real>(approx: &[T], exact: &[T]) -> Result<T> {
    check_lengths(approx, exact)?;
    let den = l2_norm(approx);
    if den.is_zero() {
        return Err(Error::ZeroDenominator);
    }
    Ok(diff_norm(approx, exact) / (den * T::from_usize(approx.len())))
}
