//! Matérn random fields driven by generalized asymmetric Laplace noise.
//!
//! The crate covers the finite-element SPDE discretization of the field, exact
//! and Monte Carlo tools for its law, and maximum-likelihood estimation with an
//! expectation/conditional-maximization (ECM) scheme. All numerical code is
//! generic over [`Real`]; `f64` aliases are provided at the crate root.

pub mod ecm;
pub mod error;
pub mod fem;
pub mod linalg;
pub mod matern;
pub mod noise;
pub mod optimize;
pub mod quadrature;
pub mod rng;
pub mod sampler;
pub mod scalar;
pub mod specfun;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Real;

pub type MaternParamsF64 = matern::MaternParams<f64>;
pub type MaternParamsF32 = matern::MaternParams<f32>;
pub type LaplaceParamsF64 = noise::LaplaceParams<f64>;
pub type LaplaceParamsF32 = noise::LaplaceParams<f32>;
pub type MeshF64 = fem::Mesh<f64>;
pub type MeshF32 = fem::Mesh<f32>;
pub type FemDiscretizationF64 = fem::FemDiscretization<f64>;
pub type FemDiscretizationF32 = fem::FemDiscretization<f32>;
pub type CsrMatrixF64 = linalg::CsrMatrix<f64>;
pub type NoiseRealizationF64 = noise::NoiseRealization<f64>;
pub type FieldSampleF64 = sampler::FieldSample<f64>;
pub type ThetaF64 = ecm::Theta<f64>;
pub type EcmConfigF64 = ecm::EcmConfig<f64>;
pub type EcmFitF64 = ecm::EcmFit<f64>;
