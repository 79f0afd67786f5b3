//! Surface growth law driven by nutrient flux and inhibited by tractions.
//!
//! Each interface point moves along its outward normal by
//!
//! ```text
//! u_g = Δt_g · (K1g·h − K2g·|σ_nn| − K3g·|σ_nt|) · n
//! ```
//!
//! In 2D the tangential traction reduces to one in-plane component. The
//! displacement is linear in `(K1g, K2g, K3g)`.

use serde::{Deserialize, Serialize};

use super::diffusion::{solve_flux, DiffusionProfile, MonodParams};
use super::{check_segments, expect_len, ForwardModel, ModelError};
use crate::geometry::{BiofilmSide, GeometryError, InterfaceCurve, MeasurementRay, Point2};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthParams<F> {
    /// Growth per unit nutrient flux [mm³/mol].
    pub k1g: F,
    /// Erosion per unit normal traction [mm²·s/g].
    pub k2g: F,
    /// Erosion per unit tangential traction [mm²·s/g].
    pub k3g: F,
    /// Growth timespan [s].
    pub dt_g: F,
}

/// Loads acting at one interface point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceLoadSample<F> {
    pub position: Point2<F>,
    /// Outward unit normal (biofilm to fluid).
    pub normal: Point2<F>,
    /// Nutrient flux into the biofilm `h^S`.
    pub flux_h: F,
    pub sigma_nn: F,
    pub sigma_nt: F,
}

impl<F: Scalar> SurfaceLoadSample<F> {
    pub fn validate(&self) -> Result<(), ModelError> {
        let tol = F::of(1e-12).max(F::epsilon() * F::of(8.0));
        if (self.normal.norm() - F::one()).abs() > tol {
            return Err(ModelError::InvalidParameters("load sample normal must have unit length".into()));
        }
        Ok(())
    }
}

/// Growth displacement of a single surface point.
pub fn growth_displacement<F: Scalar>(sample: &SurfaceLoadSample<F>, params: &GrowthParams<F>) -> Point2<F> {
    let speed = params.k1g * sample.flux_h - params.k2g * sample.sigma_nn.abs() - params.k3g * sample.sigma_nt.abs();
    sample.normal.scale(params.dt_g * speed)
}

/// Moves every vertex of `base` by the growth displacement of its sample.
pub fn growth_model_evaluate<F: Scalar>(
    base: &InterfaceCurve<F>,
    samples: &[SurfaceLoadSample<F>],
    params: &GrowthParams<F>,
) -> Result<InterfaceCurve<F>, ModelError> {
    if samples.len() != base.len() {
        return Err(ModelError::InvalidParameters(format!(
            "{} load samples for {} curve vertices",
            samples.len(),
            base.len()
        )));
    }
    if !(params.dt_g > F::zero()) {
        return Err(ModelError::InvalidParameters("growth timespan must be positive".into()));
    }
    let grown: Vec<_> = base
        .vertices()
        .iter()
        .zip(samples)
        .map(|(v, s)| v.add(growth_displacement(s, params)))
        .collect();
    let curve = InterfaceCurve::new(grown, base.is_closed(), base.biofilm_side()).map_err(|e| match e {
        GeometryError::ZeroLengthSegment(segment) => ModelError::MapDegenerate { segment },
        other => other.into(),
    })?;
    check_segments(&curve)?;
    Ok(curve)
}

/// Growth forward model over a fixed geometry and fixed loads; the
/// parameters are `(K1g, K2g, K3g)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthModel<F> {
    base: InterfaceCurve<F>,
    samples: Vec<SurfaceLoadSample<F>>,
    dt_g: F,
}

impl<F: Scalar> GrowthModel<F> {
    pub fn new(base: InterfaceCurve<F>, samples: Vec<SurfaceLoadSample<F>>, dt_g: F) -> Result<Self, ModelError> {
        if samples.len() != base.len() {
            return Err(ModelError::InvalidParameters("one load sample per vertex required".into()));
        }
        for s in &samples {
            s.validate()?;
        }
        if !(dt_g > F::zero()) {
            return Err(ModelError::InvalidParameters("growth timespan must be positive".into()));
        }
        Ok(Self { base, samples, dt_g })
    }

    pub fn base(&self) -> &InterfaceCurve<F> {
        &self.base
    }

    pub fn samples(&self) -> &[SurfaceLoadSample<F>] {
        &self.samples
    }

    pub fn dt_g(&self) -> F {
        self.dt_g
    }

    fn params(&self, k: &[F]) -> GrowthParams<F> {
        GrowthParams {
            k1g: k[0],
            k2g: k[1],
            k3g: k[2],
            dt_g: self.dt_g,
        }
    }

    /// Per-vertex growth speed coefficients `Δt·(h, −|σ_nn|, −|σ_nt|)`; the
    /// normal displacement of vertex `i` is the dot product with `(K1g, K2g, K3g)`.
    pub fn design_rows(&self) -> Vec<[F; 3]> {
        self.samples
            .iter()
            .map(|s| {
                [
                    self.dt_g * s.flux_h,
                    -self.dt_g * s.sigma_nn.abs(),
                    -self.dt_g * s.sigma_nt.abs(),
                ]
            })
            .collect()
    }
}

impl<F: Scalar> ForwardModel<F> for GrowthModel<F> {
    fn id(&self) -> &str {
        "growth"
    }

    fn parameter_names(&self) -> Vec<String> {
        vec!["K1g".into(), "K2g".into(), "K3g".into()]
    }

    fn evaluate(&self, params: &[F]) -> Result<InterfaceCurve<F>, ModelError> {
        expect_len(params, 3, "growth")?;
        growth_model_evaluate(&self.base, &self.samples, &self.params(params))
    }

    /// Rays point against the growth normal of each vertex, so every model
    /// vertex moves along its own ray and distances stay linear in the
    /// parameters.
    fn measurement_rays(
        &self,
        observed: &InterfaceCurve<F>,
        vertices: &[usize],
        max_length: F,
    ) -> Result<Vec<MeasurementRay<F>>, GeometryError> {
        vertices
            .iter()
            .map(|&i| {
                let sample = self.samples.get(i).ok_or(GeometryError::IndexOutOfRange {
                    index: i,
                    len: self.samples.len(),
                })?;
                let origin = *observed
                    .vertices()
                    .get(i)
                    .ok_or(GeometryError::IndexOutOfRange { index: i, len: observed.len() })?;
                MeasurementRay::new(origin, sample.normal.scale(-F::one()), max_length)
            })
            .collect()
    }
}

/// Geometry and load constants of the synthetic finger-shaped biofilm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FingerScenario<F> {
    /// Finger width [mm].
    pub width: F,
    /// Total height including the semicircular tip [mm].
    pub height: F,
    /// Target spacing of interface vertices [mm].
    pub spacing: F,
    pub profile: DiffusionProfile<F>,
    pub monod: MonodParams<F>,
    /// Reference normal traction [g/(mm·s²)].
    pub sigma_nn: F,
    /// Reference tangential traction [g/(mm·s²)].
    pub sigma_nt: F,
    /// Growth timespan [s].
    pub dt_g: F,
}

impl<F: Scalar> Default for FingerScenario<F> {
    fn default() -> Self {
        Self {
            width: F::of(0.04),
            height: F::of(0.1),
            spacing: F::of(0.002),
            profile: DiffusionProfile {
                l_fluid: F::of(0.05),
                l_solid: F::of(0.02),
                d_fluid: F::of(2.5e-3),
                d_solid: F::of(2.5e-3),
                phi_in: F::of(2.5e-11),
                grid_n: 128,
            },
            monod: MonodParams {
                k1r: F::of(3.0e-11),
                k2r: F::of(3.0e-12),
            },
            sigma_nn: F::of(5e-7),
            sigma_nt: F::of(3e-7),
            dt_g: F::of(86400.0),
        }
    }
}

impl<F: Scalar> FingerScenario<F> {
    /// Finger interface: up the upstream wall, over the tip, down the
    /// downstream wall (biofilm on the right).
    pub fn base_curve(&self) -> Result<InterfaceCurve<F>, ModelError> {
        let r = self.width * F::of(0.5);
        let wall = self.height - r;
        if !(wall > F::zero()) || !(self.spacing > F::zero()) {
            return Err(ModelError::InvalidParameters("finger needs height > width/2 and positive spacing".into()));
        }
        let count = |len: F| (len / self.spacing).ceil().to_usize().unwrap_or(1).max(1);
        let n_wall = count(wall);
        let pi = F::from_f64(std::f64::consts::PI).expect("pi");
        let n_tip = count(pi * r);
        let mut v = Vec::new();
        for k in 0..n_wall {
            let y = wall * F::from_usize(k).expect("idx") / F::from_usize(n_wall).expect("n");
            v.push(Point2::new(-r, y));
        }
        for k in 0..n_tip {
            let a = pi * (F::one() - F::from_usize(k).expect("idx") / F::from_usize(n_tip).expect("n"));
            v.push(Point2::new(r * a.cos(), wall + r * a.sin()));
        }
        for k in 0..=n_wall {
            let y = wall * (F::one() - F::from_usize(k).expect("idx") / F::from_usize(n_wall).expect("n"));
            v.push(Point2::new(r, y));
        }
        Ok(InterfaceCurve::new(v, false, BiofilmSide::Right)?)
    }

    /// Builds the growth model: the flux level comes from the 1D transport
    /// solve and is modulated along the surface, higher upstream; normal
    /// traction peaks upstream and tangential traction over the tip.
    pub fn build(&self) -> Result<GrowthModel<F>, ModelError> {
        let base = self.base_curve()?;
        let h0 = solve_flux(&self.profile, &self.monod)?;
        let mut samples = Vec::with_capacity(base.len());
        for i in 0..base.len() {
            let inward = base.vertex_normal(i)?;
            let normal = inward.scale(-F::one());
            let p = base.vertices()[i];
            let height = p.y / self.height;
            let flux_h = h0 * (F::one() - F::of(0.3) * normal.x);
            let sigma_nn = self.sigma_nn * (F::one() - F::of(0.8) * normal.x) * (F::of(0.5) + height);
            let sigma_nt = self.sigma_nt * (F::of(0.2) + normal.y.max(F::zero()) * F::of(1.5));
            samples.push(SurfaceLoadSample {
                position: p,
                normal,
                flux_h,
                sigma_nn,
                sigma_nt,
            });
        }
        GrowthModel::new(base, samples, self.dt_g)
    }
}
