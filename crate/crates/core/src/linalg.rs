//! Small dense matrices stored row-major in `Vec<f64>`, plus index helpers
//! for flat tensor storage.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Condition number above which a metric is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

#[inline]
pub fn ix2(n: usize, a: usize, b: usize) -> usize {
    a * n + b
}

#[inline]
pub fn ix3(n: usize, a: usize, b: usize, c: usize) -> usize {
    (a * n + b) * n + c
}

#[inline]
pub fn ix4(n: usize, a: usize, b: usize, c: usize, d: usize) -> usize {
    ((a * n + b) * n + c) * n + d
}

fn to_matrix(n: usize, a: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, a)
}

/// 2-norm condition number.
pub fn condition(n: usize, a: &[f64]) -> f64 {
    let sv = to_matrix(n, a).singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse of a well-conditioned matrix, with its condition number.
pub fn invert(n: usize, a: &[f64]) -> Result<(Vec<f64>, f64)> {
    let cond = condition(n, a);
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(Error::SingularMetric { condition: cond });
    }
    let inv = to_matrix(n, a)
        .lu()
        .try_inverse()
        .ok_or(Error::SingularMetric { condition: cond })?;
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[ix2(n, i, j)] = inv[(i, j)];
        }
    }
    Ok((out, cond))
}

/// Singular values of a `rows x cols` row-major matrix.
pub fn singular_values(rows: usize, cols: usize, a: &[f64]) -> Vec<f64> {
    DMatrix::from_row_slice(rows, cols, a).singular_values().iter().copied().collect()
}

/// `‖a - b‖∞ / max(‖a‖∞, ‖b‖∞, 1)`, the relative deviation used by all
/// comparisons between two computations of the same quantity.
pub fn relative_deviation(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = a.iter().chain(b).map(|x| x.abs()).fold(1.0, f64::max);
    diff / scale
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_small_matrix() {
        let a = [2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0];
        let (inv, cond) = invert(3, &a).unwrap();
        assert!(cond > 1.0);
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| a[ix2(3, i, k)] * inv[ix2(3, k, j)]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = [1.0, 2.0, 2.0, 4.0];
        assert!(matches!(invert(2, &a), Err(Error::SingularMetric { .. })));
        let b = [1.0, 0.0, 0.0, 1e-13];
        assert!(matches!(invert(2, &b), Err(Error::SingularMetric { .. })));
    }

    #[test]
    fn relative_deviation_floors_scale_at_one() {
        assert_eq!(relative_deviation(&[1e-3], &[2e-3]), 1e-3);
        assert_eq!(relative_deviation(&[100.0], &[101.0]), 1.0 / 101.0);
    }
}
