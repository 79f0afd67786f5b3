//! Forward models: parameter vector in, interface curve out.

pub mod bump;
pub mod diffusion;
pub mod growth;
pub mod offset;

use crate::geometry::{normal_rays, GeometryError, InterfaceCurve, MeasurementRay, RayOrientation};
use crate::lmsolver::ModelFailure;
use crate::scalar::Scalar;

pub use bump::BumpModel;
pub use diffusion::{monod_rate, solve_flux, DiffusionProfile, FluxSolution, Kinetics, MonodParams};
pub use growth::{growth_displacement, growth_model_evaluate, GrowthModel, GrowthParams, SurfaceLoadSample};
pub use offset::OffsetModel;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("mapped segment {segment} is shorter than 1e-9 mm")]
    MapDegenerate { segment: usize },
    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },
    #[error("element {element} inverted (det F = {det:e})")]
    ElementInverted { element: usize, det: f64 },
    #[error("linear solve failed: {0}")]
    LinearSolve(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl From<ModelError> for ModelFailure {
    fn from(e: ModelError) -> Self {
        ModelFailure::new(e.to_string())
    }
}

/// Maps a parameter vector to a predicted interface.
///
/// Evaluation must be deterministic and re-entrant; a model that cannot be
/// evaluated reports an error instead of returning a curve.
pub trait ForwardModel<F: Scalar>: Sync {
    fn id(&self) -> &str;

    fn parameter_names(&self) -> Vec<String>;

    fn evaluate(&self, params: &[F]) -> Result<InterfaceCurve<F>, ModelError>;

    /// Rays at `vertices` of an observed interface. Defaults to vertex
    /// normals pointing into the biofilm.
    fn measurement_rays(
        &self,
        observed: &InterfaceCurve<F>,
        vertices: &[usize],
        max_length: F,
    ) -> Result<Vec<MeasurementRay<F>>, GeometryError> {
        normal_rays(observed, vertices, RayOrientation::IntoBiofilm, max_length)
    }
}

impl<F: Scalar, M: ForwardModel<F> + ?Sized> ForwardModel<F> for &M {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn parameter_names(&self) -> Vec<String> {
        (**self).parameter_names()
    }

    fn evaluate(&self, params: &[F]) -> Result<InterfaceCurve<F>, ModelError> {
        (**self).evaluate(params)
    }

    fn measurement_rays(
        &self,
        observed: &InterfaceCurve<F>,
        vertices: &[usize],
        max_length: F,
    ) -> Result<Vec<MeasurementRay<F>>, GeometryError> {
        (**self).measurement_rays(observed, vertices, max_length)
    }
}

impl<F: Scalar> ForwardModel<F> for Box<dyn ForwardModel<F> + Send> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn parameter_names(&self) -> Vec<String> {
        (**self).parameter_names()
    }

    fn evaluate(&self, params: &[F]) -> Result<InterfaceCurve<F>, ModelError> {
        (**self).evaluate(params)
    }

    fn measurement_rays(
        &self,
        observed: &InterfaceCurve<F>,
        vertices: &[usize],
        max_length: F,
    ) -> Result<Vec<MeasurementRay<F>>, GeometryError> {
        (**self).measurement_rays(observed, vertices, max_length)
    }
}

/// Rejects curves with a segment shorter than 1e-9 mm.
pub(crate) fn check_segments<F: Scalar>(curve: &InterfaceCurve<F>) -> Result<(), ModelError> {
    let min = F::of(1e-9);
    match curve.segments().position(|(a, b)| b.sub(a).norm() < min) {
        Some(segment) => Err(ModelError::MapDegenerate { segment }),
        None => Ok(()),
    }
}

pub(crate) fn expect_len<F>(params: &[F], n: usize, model: &str) -> Result<(), ModelError> {
    if params.len() == n {
        Ok(())
    } else {
        Err(ModelError::InvalidParameters(format!(
            "{model} expects {n} parameters, got {}",
            params.len()
        )))
    }
}
