//! Conditional intensity of one response process.

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::link::{LinkSpec, EPS_FLOOR};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// Linear predictor `mu_i + <G, B[i,.,.]>`.
#[inline]
pub fn linear_predictor<S: Scalar>(mu_i: S, slice: &Matrix<S>, g: &Matrix<S>) -> S {
    debug_assert_eq!((slice.rows(), slice.cols()), (g.rows(), g.cols()));
    let dot = slice
        .as_slice()
        .iter()
        .zip(g.as_slice())
        .map(|(&b, &x)| b * x)
        .sum::<S>();
    mu_i + dot
}

/// Caller-facing intensity `phi(mu_i + <G, B[i,.,.]>)`, floored at
/// [`EPS_FLOOR`] so it is safe inside logarithms even under the linear link.
pub fn intensity<S: Scalar>(
    mu_i: S,
    slice: &Matrix<S>,
    g: &FeatureMatrix<S>,
    link: LinkSpec,
) -> Result<S> {
    if (slice.rows(), slice.cols()) != (g.values.rows(), g.values.cols()) {
        return Err(Error::DimMismatch(format!(
            "coefficient slice {}x{} vs features {}x{}",
            slice.rows(),
            slice.cols(),
            g.values.rows(),
            g.values.cols()
        )));
    }
    let u = linear_predictor(mu_i, slice, &g.values);
    Ok(link.eval(u).max(S::from_f64_lossy(EPS_FLOOR)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{CounterRng, RngSeed};

    fn fm(values: Matrix<f64>) -> FeatureMatrix<f64> {
        FeatureMatrix { values }
    }

    #[test]
    fn zero_features_linear_gives_background() {
        let g = fm(Matrix::zeros(3, 2));
        let b = Matrix::zeros(3, 2);
        let v = intensity(0.01, &b, &g, LinkSpec::Linear).unwrap();
        assert!((v - 0.01).abs() < 1e-15);
    }

    #[test]
    fn zero_features_sigmoid_gives_half() {
        let g = fm(Matrix::zeros(2, 2));
        let b = Matrix::zeros(2, 2);
        let v = intensity(0.0, &b, &g, LinkSpec::Sigmoid).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn matches_double_loop_oracle() {
        let mut rng = CounterRng::new(RngSeed::new(2, 0));
        let g = fm(Matrix::from_fn(4, 3, |_, _| rng.uniform()));
        let b = Matrix::from_fn(4, 3, |_, _| rng.standard_normal());
        let mut expect = 0.3;
        for j in 0..4 {
            for k in 0..3 {
                expect += b.get(j, k) * g.values.get(j, k);
            }
        }
        let v = intensity(0.3, &b, &g, LinkSpec::Linear).unwrap();
        assert!((v - expect.max(crate::link::EPS_FLOOR)).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_in_unit_interval_and_rectifier_nonnegative() {
        let mut rng = CounterRng::new(RngSeed::new(8, 0));
        for _ in 0..200 {
            let g = fm(Matrix::from_fn(2, 2, |_, _| rng.uniform() * 3.0));
            let b = Matrix::from_fn(2, 2, |_, _| rng.standard_normal() * 2.0);
            let mu = rng.standard_normal();
            let s = intensity(mu, &b, &g, LinkSpec::Sigmoid).unwrap();
            assert!(s > 0.0 && s < 1.0);
            let r = intensity(mu, &b, &g, LinkSpec::Rectifier).unwrap();
            assert!(r >= 0.0);
        }
    }

    #[test]
    fn dim_mismatch_rejected() {
        let g = fm(Matrix::zeros(2, 2));
        let b = Matrix::zeros(3, 2);
        assert!(intensity(0.0, &b, &g, LinkSpec::Linear).is_err());
    }
}
