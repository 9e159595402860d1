//! Mean-risk two-stage stochastic programs.
//!
//! A law-invariant risk functional is applied to the image of
//! `delta_x (x) nu` under a recourse value function `f(x, z)`. The crate
//! provides the measures, the risk functionals, the recourse models and
//! their solvers, probability metrics on finitely supported measures, and
//! an experiment harness that perturbs `nu` and records how the optimal
//! value and the optimal set react.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the `*F64`
//! and `*F32` aliases below name the common instantiations.

pub mod demo;
pub mod error;
mod linalg;
pub mod meanrisk;
pub mod measure;
pub mod metrics;
pub mod optim;
pub mod recourse;
pub mod risk;
pub mod sampler;
pub mod scalar;
pub mod stability;

pub use error::{Error, Result};
pub use meanrisk::{DecisionSet, Evaluator, MeanRiskModel};
pub use measure::{empirical, Atom, DiscreteMeasure, ScalarDistribution, ValueFunction};
pub use recourse::{GrowthCertificate, ParamMap, RecourseModel};
pub use risk::RiskSpec;
pub use sampler::{PointSampler, Sampler};
pub use scalar::Scalar;
pub use stability::{PerturbationScheme, StabilityReport};

pub type DiscreteMeasureF64 = DiscreteMeasure<f64>;
pub type DiscreteMeasureF32 = DiscreteMeasure<f32>;
pub type ScalarDistributionF64 = ScalarDistribution<f64>;
pub type ScalarDistributionF32 = ScalarDistribution<f32>;
pub type RiskSpecF64 = RiskSpec<f64>;
pub type RiskSpecF32 = RiskSpec<f32>;
pub type RecourseModelF64 = RecourseModel<f64>;
pub type MeanRiskModelF64 = MeanRiskModel<f64>;
pub type PerturbationSchemeF64 = PerturbationScheme<f64>;
pub type StabilityReportF64 = StabilityReport<f64>;
pub type SamplerF64 = Sampler<f64>;
