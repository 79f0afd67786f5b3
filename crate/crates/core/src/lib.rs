//! Ray-based inverse analysis of biofilm interfaces.
//!
//! A forward model maps a parameter vector to an interface curve. Observed
//! interfaces are sampled along fixed measurement rays, and a bounded
//! Levenberg-Marquardt solver adjusts the parameters until the signed ray
//! distances vanish.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod fem;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod lmsolver;
pub mod models;
pub mod synth;
pub mod scalar;

pub use scalar::Scalar;

pub type Point = geometry::Point2<f64>;
pub type Curve = geometry::InterfaceCurve<f64>;
pub type Ray = geometry::MeasurementRay<f64>;
pub type Spec = lmsolver::ParameterSpec<f64>;
pub type Config = lmsolver::LmConfig<f64>;
pub type LmOutcome = lmsolver::LmResult<f64>;
