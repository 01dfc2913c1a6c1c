//! Multivariate temporal point process regression.
//!
//! A response point process is modeled through conditional intensities
//! `lambda_i(t) = phi(mu_i + sum_jk beta_ijk (g_k * dX_j)(t))` driven by a
//! predictor point process through basis convolutions. The transferring
//! coefficients form an `m x p x K` tensor estimated under a low-rank CP
//! structure with group-sparsity and response-subgroup fusion penalties,
//! fitted by ADMM and tuned by BIC.
//!
//! All numeric code is generic over the scalar type (`f32`/`f64`) through
//! [`scalar::Scalar`]; the `*64` aliases at the crate root fix `f64` for
//! ordinary use.

pub mod admm;
pub mod basis;
pub mod cp;
pub mod error;
pub mod eval;
pub mod events;
pub mod features;
pub mod intensity;
pub mod likelihood;
pub mod link;
pub mod rng;
pub mod scalar;
pub mod simulate;
pub mod tensor;
pub mod tuning;

pub use basis::BasisSpec;
pub use cp::{cp_compose, cp_init, CpFactors};
pub use error::{Error, Result};
pub use events::{EventSeries, MultiProcess};
pub use features::{convolve_features, FeatureMatrix};
pub use intensity::intensity;
pub use link::{LinkSpec, EPS_FLOOR};
pub use rng::{CounterRng, RngSeed};
pub use scalar::Scalar;
pub use tensor::{fold, khatri_rao, matricize, CoefTensor, Matrix};

/// Concrete `f64` aliases for the main domain types.
pub type EventSeries64 = EventSeries<f64>;
pub type MultiProcess64 = MultiProcess<f64>;
pub type BasisSpec64 = BasisSpec<f64>;
pub type CoefTensor64 = CoefTensor<f64>;
pub type CpFactors64 = CpFactors<f64>;
pub type Matrix64 = Matrix<f64>;
