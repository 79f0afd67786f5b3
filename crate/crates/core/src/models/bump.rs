//! Analytic two-parameter deformation of a semicircular bump.
//!
//! The reference interface is a semicircle of radius `R` standing on the
//! substratum `y = 0`, traversed from `(-R, 0)` over the apex to `(R, 0)` so
//! that the biofilm lies on the right. Each point maps as
//!
//! ```text
//! (X, Y) ↦ (X + p1·Y², Y·(1 + p2·X))
//! ```
//!
//! `p1` shears the crest downstream, `p2` tilts the height profile. Both act
//! on overlapping parts of the surface, so they partially compensate each
//! other the way stiffness and lateral contraction do in a loaded solid.

use serde::{Deserialize, Serialize};

use super::{check_segments, expect_len, ForwardModel, ModelError};
use crate::geometry::{BiofilmSide, InterfaceCurve, Point2};
use crate::lmsolver::ParameterSpec;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpModel<F> {
    pub radius: F,
    pub n_vertices: usize,
}

impl<F: Scalar> Default for BumpModel<F> {
    fn default() -> Self {
        Self {
            radius: F::of(0.3),
            n_vertices: 181,
        }
    }
}

impl<F: Scalar> BumpModel<F> {
    pub fn new(radius: F, n_vertices: usize) -> Result<Self, ModelError> {
        if !(radius > F::zero()) || !radius.is_finite() {
            return Err(ModelError::InvalidParameters("bump radius must be positive".into()));
        }
        if n_vertices < 3 {
            return Err(ModelError::InvalidParameters("bump needs at least 3 vertices".into()));
        }
        Ok(Self { radius, n_vertices })
    }

    /// Largest admissible `|p1|`, `|p2|`: `2/R`.
    pub fn injectivity_bound(&self) -> F {
        F::of(2.0) / self.radius
    }

    /// `p1`, `p2` bounded by the injectivity limit.
    pub fn parameter_spec(&self) -> ParameterSpec<F> {
        let b = self.injectivity_bound();
        ParameterSpec::unitless(&["p1", "p2"], vec![-b, -b], vec![b, b]).expect("symmetric bounds are valid")
    }

    pub fn reference_curve(&self) -> InterfaceCurve<F> {
        let last = F::from_usize(self.n_vertices - 1).expect("vertex count fits scalar");
        let pi = F::from_f64(std::f64::consts::PI).expect("pi");
        let vertices = (0..self.n_vertices)
            .map(|k| {
                let theta = pi * (F::one() - F::from_usize(k).expect("index fits scalar") / last);
                Point2::new(self.radius * theta.cos(), self.radius * theta.sin())
            })
            .collect();
        InterfaceCurve::new(vertices, false, BiofilmSide::Right).expect("semicircle is a valid curve")
    }

    pub fn map_point(p: Point2<F>, p1: F, p2: F) -> Point2<F> {
        Point2::new(p.x + p1 * p.y * p.y, p.y * (F::one() + p2 * p.x))
    }
}

impl<F: Scalar> ForwardModel<F> for BumpModel<F> {
    fn id(&self) -> &str {
        "bump"
    }

    fn parameter_names(&self) -> Vec<String> {
        vec!["p1".into(), "p2".into()]
    }

    fn evaluate(&self, params: &[F]) -> Result<InterfaceCurve<F>, ModelError> {
        expect_len(params, 2, "bump")?;
        let bound = self.injectivity_bound();
        for (name, v) in ["p1", "p2"].iter().zip(params) {
            if !v.is_finite() || v.abs() > bound {
                return Err(ModelError::InvalidParameters(format!(
                    "{name} = {v} violates the injectivity bound |{name}| <= 2/R = {bound}"
                )));
            }
        }
        let (p1, p2) = (params[0], params[1]);
        let reference = self.reference_curve();
        let mapped: Vec<_> = reference
            .vertices()
            .iter()
            .map(|v| Self::map_point(*v, p1, p2))
            .collect();
        // validate lengths before the curve constructor rejects exact duplicates
        let curve = InterfaceCurve::new(mapped, false, BiofilmSide::Right).map_err(|e| match e {
            crate::geometry::GeometryError::ZeroLengthSegment(segment) => ModelError::MapDegenerate { segment },
            other => other.into(),
        })?;
        check_segments(&curve)?;
        Ok(curve)
    }
}
