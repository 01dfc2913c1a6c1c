//! Transferring basis functions.
//!
//! All three kinds are nonnegative on `[0, inf)` and nonincreasing between
//! consecutive breakpoints, which is what the thinning bound in the response
//! simulator relies on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A parameterized basis function evaluable at any lag `t >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BasisSpec<S> {
    /// `leading * exp(-rate * t)`.
    ExpDecay { rate: S, leading: S },
    /// `height * 1(t <= cutoff)`.
    Indicator { height: S, cutoff: S },
    /// `log(1 + horizon - t)` for `t <= horizon`, zero beyond.
    LogDecay { horizon: S },
}

impl<S: Scalar> BasisSpec<S> {
    pub fn exp_decay(rate: S, leading: S) -> Result<Self> {
        if !(rate > S::zero()) {
            return Err(Error::InvalidConfig(format!("exp_decay rate must be > 0, got {rate}")));
        }
        if !(leading > S::zero()) {
            return Err(Error::InvalidConfig(format!(
                "exp_decay leading constant must be > 0, got {leading}"
            )));
        }
        Ok(BasisSpec::ExpDecay { rate, leading })
    }

    pub fn indicator(height: S, cutoff: S) -> Result<Self> {
        if !(height > S::zero() && cutoff > S::zero()) {
            return Err(Error::InvalidConfig(format!(
                "indicator needs height > 0 and cutoff > 0, got ({height}, {cutoff})"
            )));
        }
        Ok(BasisSpec::Indicator { height, cutoff })
    }

    pub fn log_decay(horizon: S) -> Result<Self> {
        if !(horizon > S::zero()) {
            return Err(Error::InvalidConfig(format!(
                "log_decay horizon must be > 0, got {horizon}"
            )));
        }
        Ok(BasisSpec::LogDecay { horizon })
    }

    /// Validate deserialized parameters (serde bypasses the constructors).
    pub fn validate(&self) -> Result<()> {
        match *self {
            BasisSpec::ExpDecay { rate, leading } => Self::exp_decay(rate, leading).map(|_| ()),
            BasisSpec::Indicator { height, cutoff } => Self::indicator(height, cutoff).map(|_| ()),
            BasisSpec::LogDecay { horizon } => Self::log_decay(horizon).map(|_| ()),
        }
    }

    /// Evaluate at lag `t >= 0`.
    pub fn eval(&self, t: S) -> Result<S> {
        if t < S::zero() {
            return Err(Error::Domain(format!("basis evaluated at negative lag {t}")));
        }
        Ok(self.eval_unchecked(t))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, t: S) -> S {
        match *self {
            BasisSpec::ExpDecay { rate, leading } => leading * (-rate * t).exp(),
            BasisSpec::Indicator { height, cutoff } => {
                if t <= cutoff {
                    height
                } else {
                    S::zero()
                }
            }
            BasisSpec::LogDecay { horizon } => {
                if t <= horizon {
                    (S::one() + horizon - t).ln()
                } else {
                    S::zero()
                }
            }
        }
    }

    /// `int_0^s g(u) du` in closed form; `None` for kinds the analytic
    /// likelihood path does not cover.
    pub fn integral_to(&self, s: S) -> Option<S> {
        if s <= S::zero() {
            return Some(S::zero());
        }
        match *self {
            BasisSpec::ExpDecay { rate, leading } => {
                Some(leading / rate * (S::one() - (-rate * s).exp()))
            }
            BasisSpec::Indicator { height, cutoff } => Some(height * s.min(cutoff)),
            BasisSpec::LogDecay { .. } => None,
        }
    }

    /// `int_0^inf g(u) du` where finite in the sense used by the first-order
    /// moment relation; `None` for LogDecay.
    pub fn total_integral(&self) -> Option<S> {
        match *self {
            BasisSpec::ExpDecay { rate, leading } => Some(leading / rate),
            BasisSpec::Indicator { height, cutoff } => Some(height * cutoff),
            BasisSpec::LogDecay { .. } => None,
        }
    }

    /// Lag beyond which the basis is exactly zero, if any.
    pub fn support_end(&self) -> Option<S> {
        match *self {
            BasisSpec::ExpDecay { .. } => None,
            BasisSpec::Indicator { cutoff, .. } => Some(cutoff),
            BasisSpec::LogDecay { horizon } => Some(horizon),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_decay_at_zero_is_leading() {
        let g = BasisSpec::exp_decay(5.0, 1.0).unwrap();
        assert_eq!(g.eval(0.0).unwrap(), 1.0);
    }

    #[test]
    fn exp_decay_closed_form() {
        let g = BasisSpec::exp_decay(5.0, 1.0).unwrap();
        let v = g.eval(0.2).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-12);
        assert!((v - 0.3678794).abs() < 1e-6);
    }

    #[test]
    fn indicator_step() {
        let g = BasisSpec::indicator(0.2, 0.1).unwrap();
        assert_eq!(g.eval(0.05).unwrap(), 0.2);
        assert_eq!(g.eval(0.1).unwrap(), 0.2); // boundary included
        assert_eq!(g.eval(0.2).unwrap(), 0.0);
    }

    #[test]
    fn negative_lag_is_domain_error() {
        let g = BasisSpec::indicator(0.2, 0.1).unwrap();
        assert!(g.eval(-0.01).is_err());
    }

    #[test]
    fn log_decay_zero_beyond_horizon() {
        let g = BasisSpec::log_decay(10.0).unwrap();
        assert!((g.eval(0.0).unwrap() - 11.0f64.ln()).abs() < 1e-12);
        assert_eq!(g.eval(10.0).unwrap(), 0.0); // log(1) = 0
        assert_eq!(g.eval(12.0).unwrap(), 0.0);
    }

    #[test]
    fn integrals_match_numeric_quadrature() {
        let bases = [
            BasisSpec::exp_decay(5.0, 1.0).unwrap(),
            BasisSpec::indicator(0.2, 0.1).unwrap(),
        ];
        for g in bases {
            for s in [0.05, 0.1, 0.5, 3.0] {
                let exact = g.integral_to(s).unwrap();
                // trapezoid oracle
                let n = 200_000;
                let h = s / n as f64;
                let mut acc = 0.5 * (g.eval(0.0).unwrap() + g.eval(s).unwrap());
                for i in 1..n {
                    acc += g.eval(i as f64 * h).unwrap();
                }
                let approx = acc * h;
                assert!((exact - approx).abs() < 1e-5, "{g:?} at {s}: {exact} vs {approx}");
            }
        }
    }

    #[test]
    fn total_integrals() {
        assert!((BasisSpec::exp_decay(5.0f64, 1.0).unwrap().total_integral().unwrap() - 0.2).abs() < 1e-15);
        assert!((BasisSpec::indicator(0.2f64, 0.1).unwrap().total_integral().unwrap() - 0.02).abs() < 1e-15);
        assert!(BasisSpec::log_decay(5.0f64).unwrap().total_integral().is_none());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(BasisSpec::exp_decay(0.0, 1.0).is_err());
        assert!(BasisSpec::indicator(0.2, 0.0).is_err());
        assert!(BasisSpec::log_decay(-1.0).is_err());
    }
}
