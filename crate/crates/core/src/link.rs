//! Intensity link functions with first and second derivatives.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Floor applied to any intensity entering a logarithm, and to the
/// caller-facing intensity under the linear link (which can go negative).
pub const EPS_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkSpec {
    /// `phi(x) = x`.
    Linear,
    /// `phi(x) = max(0, x)`; derivative taken as the subgradient `1(x > 0)`.
    Rectifier,
    /// `phi(x) = e^x / (1 + e^x)`.
    Sigmoid,
}

impl LinkSpec {
    #[inline]
    pub fn eval<S: Scalar>(&self, x: S) -> S {
        match self {
            LinkSpec::Linear => x,
            LinkSpec::Rectifier => x.max(S::zero()),
            LinkSpec::Sigmoid => sigmoid(x),
        }
    }

    #[inline]
    pub fn d1<S: Scalar>(&self, x: S) -> S {
        match self {
            LinkSpec::Linear => S::one(),
            LinkSpec::Rectifier => {
                if x > S::zero() {
                    S::one()
                } else {
                    S::zero()
                }
            }
            LinkSpec::Sigmoid => {
                let s = sigmoid(x);
                s * (S::one() - s)
            }
        }
    }

    #[inline]
    pub fn d2<S: Scalar>(&self, x: S) -> S {
        match self {
            LinkSpec::Linear | LinkSpec::Rectifier => S::zero(),
            LinkSpec::Sigmoid => {
                let s = sigmoid(x);
                s * (S::one() - s) * (S::one() - (S::one() + S::one()) * s)
            }
        }
    }
}

#[inline]
fn sigmoid<S: Scalar>(x: S) -> S {
    // Two-branch form avoids overflow for large |x|.
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_values() {
        assert!((LinkSpec::Sigmoid.eval(0.0f64) - 0.5).abs() < 1e-15);
        assert!(LinkSpec::Sigmoid.eval(40.0f64) <= 1.0);
        assert!(LinkSpec::Sigmoid.eval(-40.0f64) >= 0.0);
        assert!(LinkSpec::Sigmoid.eval(-800.0f64).is_finite());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-6;
        for link in [LinkSpec::Linear, LinkSpec::Sigmoid] {
            for x in [-2.0, -0.3, 0.0, 0.7, 3.0f64] {
                let d1 = link.d1(x);
                let fd1 = (link.eval(x + h) - link.eval(x - h)) / (2.0 * h);
                assert!((d1 - fd1).abs() < 1e-6, "{link:?} d1 at {x}");
                let d2 = link.d2(x);
                let fd2 = (link.d1(x + h) - link.d1(x - h)) / (2.0 * h);
                assert!((d2 - fd2).abs() < 1e-5, "{link:?} d2 at {x}");
            }
        }
    }

    #[test]
    fn rectifier_subgradient() {
        assert_eq!(LinkSpec::Rectifier.eval(-1.0f64), 0.0);
        assert_eq!(LinkSpec::Rectifier.d1(-1.0f64), 0.0);
        assert_eq!(LinkSpec::Rectifier.d1(1.0f64), 1.0);
    }
}
