//! Flat interface lifted by a single parameter; the smallest possible
//! forward model, used for bound-handling checks.

use serde::{Deserialize, Serialize};

use super::{expect_len, ForwardModel, ModelError};
use crate::geometry::{BiofilmSide, InterfaceCurve, Point2};
use crate::scalar::Scalar;

/// Horizontal interface `y = h` over `[x_min, x_max]`, biofilm below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetModel<F> {
    pub x_min: F,
    pub x_max: F,
    pub n_vertices: usize,
}

impl<F: Scalar> Default for OffsetModel<F> {
    fn default() -> Self {
        Self {
            x_min: F::of(-1.0),
            x_max: F::one(),
            n_vertices: 11,
        }
    }
}

impl<F: Scalar> ForwardModel<F> for OffsetModel<F> {
    fn id(&self) -> &str {
        "offset"
    }

    fn parameter_names(&self) -> Vec<String> {
        vec!["h".into()]
    }

    fn evaluate(&self, params: &[F]) -> Result<InterfaceCurve<F>, ModelError> {
        expect_len(params, 1, "offset")?;
        if self.n_vertices < 2 || !(self.x_max > self.x_min) {
            return Err(ModelError::InvalidParameters("offset model needs x_max > x_min and 2+ vertices".into()));
        }
        let h = params[0];
        let span = self.x_max - self.x_min;
        let last = F::from_usize(self.n_vertices - 1).expect("count fits scalar");
        let vertices = (0..self.n_vertices)
            .map(|k| Point2::new(self.x_min + span * F::from_usize(k).expect("index") / last, h))
            .collect();
        Ok(InterfaceCurve::new(vertices, false, BiofilmSide::Right)?)
    }
}
