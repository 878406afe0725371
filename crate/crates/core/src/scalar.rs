//! Scalar abstraction for the numeric kernel.
//!
//! Everything that does arithmetic (embeddings, priors, message passing,
//! the disambiguation model) is generic over [`Scalar`] so the same code
//! runs in `f32` or `f64`. The pipeline itself is instantiated with
//! [`crate::Real`].

use serde::{de::DeserializeOwned, Serialize};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar: `f32` or `f64`.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::NumAssign
    + Sum
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant, panicking only for values outside the
    /// target type's range (never the case for the constants used here).
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("literal representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("scalar convertible to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Dot product of two equal-length slices.
pub fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// `out += c * v`.
pub fn axpy<F: Scalar>(out: &mut [F], c: F, v: &[F]) {
    debug_assert_eq!(out.len(), v.len());
    for (o, &x) in out.iter_mut().zip(v) {
        *o += c * x;
    }
}

/// Numerically stable softmax over `logits`, written into a fresh vector.
/// An empty input yields an empty output.
pub fn softmax<F: Scalar>(logits: &[F]) -> Vec<F> {
    if logits.is_empty() {
        return Vec::new();
    }
    let max = logits.iter().cloned().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: F = exps.iter().cloned().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Backprop through a softmax: given outputs `p` and upstream `dp`,
/// returns the gradient with respect to the logits.
pub fn softmax_backward<F: Scalar>(p: &[F], dp: &[F]) -> Vec<F> {
    let inner: F = p.iter().zip(dp).map(|(&pi, &di)| pi * di).sum();
    p.iter().zip(dp).map(|(&pi, &di)| pi * (di - inner)).collect()
}

/// Row-major matrix times vector: `m` is `rows x cols`, `x` has `cols`
/// entries, output has `rows`.
pub fn matvec<F: Scalar>(rows: usize, cols: usize, m: &[F], x: &[F]) -> Vec<F> {
    debug_assert_eq!(m.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    (0..rows).map(|r| dot(&m[r * cols..(r + 1) * cols], x)).collect()
}

/// Index of the maximum value; ties resolve to the lowest index.
/// Returns `None` on an empty slice.
pub fn argmax<F: Scalar>(values: &[F]) -> Option<usize> {
    let mut best: Option<(usize, F)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn softmax_sums_to_one_f32_and_f64() {
        let p32 = softmax::<f32>(&[0.3, -1.0, 2.5]);
        let p64 = softmax::<f64>(&[0.3, -1.0, 2.5]);
        assert_relative_eq!(p32.iter().sum::<f32>(), 1.0, epsilon = 1e-6);
        assert_relative_eq!(p64.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn softmax_shift_invariant() {
        let a = softmax::<f64>(&[1.0, 2.0, 3.0]);
        let b = softmax::<f64>(&[101.0, 102.0, 103.0]);
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax::<f64>(&[1.0, 3.0, 3.0]), Some(1));
        assert_eq!(argmax::<f64>(&[]), None);
    }
}
