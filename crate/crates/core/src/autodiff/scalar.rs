use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::tape::{sigmoid, Var};

/// Arithmetic shared by plain `f64` evaluation and taped [`Var`]s.
///
/// Geometry, rendering and losses are written once against this trait. The
/// `f64` implementation is the reference: every `Var` operation computes its
/// value with the same floating-point expression, so branch decisions taken
/// on values agree between the two paths.
pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn value(self) -> f64;
    /// A constant living alongside `self`.
    fn lift(self, c: f64) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tanh(self) -> Self;
    fn sigmoid(self) -> Self;
    fn abs(self) -> Self;
    fn powf(self, e: f64) -> Self;
    fn max(self, other: Self) -> Self;
    fn min(self, other: Self) -> Self;
    fn atan2(self, x: Self) -> Self;

    /// `sum(w[i] * x[i]) + bias`, recorded as one node on a tape.
    fn affine(weights: &[Self], inputs: &[Self], bias: Self) -> Self;

    #[inline]
    fn square(self) -> Self {
        self * self
    }

    /// `max(self, 0)`.
    #[inline]
    fn relu(self) -> Self {
        self.max(self.lift(0.0))
    }

    /// Sum with a single fused node on a tape.
    fn sum(items: &[Self]) -> Self;

    /// A node with a precomputed `value` and local partial derivatives with
    /// respect to `parents`. Plain `f64` just returns `value`.
    fn fused(value: f64, parents: &[Self], partials: &[f64]) -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn lift(self, c: f64) -> Self {
        c
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn sigmoid(self) -> Self {
        sigmoid(self)
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
    #[inline]
    fn powf(self, e: f64) -> Self {
        f64::powf(self, e)
    }
    #[inline]
    fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }
    #[inline]
    fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }
    #[inline]
    fn atan2(self, x: Self) -> Self {
        f64::atan2(self, x)
    }
    #[inline]
    fn affine(weights: &[Self], inputs: &[Self], bias: Self) -> Self {
        debug_assert_eq!(weights.len(), inputs.len());
        let mut acc = 0.0;
        for (w, x) in weights.iter().zip(inputs) {
            acc += w * x;
        }
        acc + bias
    }
    #[inline]
    fn sum(items: &[Self]) -> Self {
        let mut acc = 0.0;
        for x in items {
            acc += x;
        }
        acc
    }
    #[inline]
    fn fused(value: f64, _parents: &[Self], _partials: &[f64]) -> Self {
        value
    }
}

impl<'t> Scalar for Var<'t> {
    #[inline]
    fn value(self) -> f64 {
        Var::value(self)
    }
    #[inline]
    fn lift(self, c: f64) -> Self {
        self.tape().constant(c)
    }
    #[inline]
    fn exp(self) -> Self {
        Var::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        Var::ln(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        Var::sqrt(self)
    }
    #[inline]
    fn sin(self) -> Self {
        Var::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        Var::cos(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        Var::tanh(self)
    }
    #[inline]
    fn sigmoid(self) -> Self {
        Var::sigmoid(self)
    }
    #[inline]
    fn abs(self) -> Self {
        Var::abs(self)
    }
    #[inline]
    fn powf(self, e: f64) -> Self {
        Var::powf(self, e)
    }
    #[inline]
    fn max(self, other: Self) -> Self {
        Var::max(self, other)
    }
    #[inline]
    fn min(self, other: Self) -> Self {
        Var::min(self, other)
    }
    #[inline]
    fn atan2(self, x: Self) -> Self {
        Var::atan2(self, x)
    }

    fn affine(weights: &[Self], inputs: &[Self], bias: Self) -> Self {
        bias.tape().affine(weights, inputs, bias)
    }

    fn sum(items: &[Self]) -> Self {
        let first = items.first().expect("sum of an empty slice of Vars");
        let mut acc = 0.0;
        for x in items {
            acc += x.value();
        }
        let ones = vec![1.0; items.len()];
        first.tape().fused(acc, items, &ones)
    }

    fn fused(value: f64, parents: &[Self], partials: &[f64]) -> Self {
        let first = parents.first().expect("fused node without parents");
        first.tape().fused(value, parents, partials)
    }
}
