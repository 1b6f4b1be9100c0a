//! Matrix-free randomized estimation of norms and traces with rank-one
//! (Kronecker-structured) probes.
//!
//! A probe `x = x̃ ⊗ x̂` costs `n̂ + ñ` random numbers instead of `n̂ñ`, and
//! operators with Kronecker structure can apply it without forming `x`.
//! Estimates come with closed-form failure probabilities ([`bounds`]) that
//! [`estimators::certify`] turns into error factors.
//!
//! ```
//! use kronprobe::{trace_estimator, DenseMatrix, Distribution, LinearOperator, ProbeShape};
//!
//! let ones = DenseMatrix::new(16, 1, vec![1.0; 16]).unwrap();
//! let shape = ProbeShape::new(4, 4).unwrap();
//! let a = LinearOperator::low_rank(ones.clone(), ones, shape).unwrap();
//! let est = trace_estimator(&a, 8, Distribution::RankOneGaussian, 1).unwrap();
//! assert!(est.value > 0.0);
//! ```

pub mod bounds;
pub mod error;
pub mod estimators;
pub mod frechet;
pub mod harness;
pub mod linalg;
pub mod operators;
pub mod probes;

pub use bounds::{failure_probability, BoundKind, BoundParams};
pub use error::{Error, Result};
pub use estimators::{
    certify, max_estimator, one_sample_norm, trace_estimator, Certificate, EstimateReport, Target,
};
pub use frechet::{
    arnoldi_frechet_rank_one, frechet_norm_max_estimator, frechet_norm_power_method,
    ArnoldiOptions, MatrixFunction,
};
pub use linalg::DenseMatrix;
pub use operators::{LinearOperator, SparseCsr};
pub use probes::{draw_probe, Distribution, Probe, ProbeShape};
