//! Planar interface curves, measurement rays and signed ray distances.
//!
//! Every residual component is the signed distance from an observed
//! measurement point to the model interface, measured along a fixed ray.
//! Rays are searched in both directions up to `max_length`, so an interface
//! that lies on the fluid side of the observation produces a negative value.
//!
//! When a ray meets the curve several times the candidate with the smallest
//! magnitude wins; magnitude ties go to the negative candidate. Hits at a
//! vertex shared by two segments are counted once.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("curve needs at least 2 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("curve vertex {0} is not finite")]
    NonFiniteVertex(usize),
    #[error("curve segment starting at vertex {0} has zero length")]
    ZeroLengthSegment(usize),
    #[error("ray direction must have unit length (|d| = {0})")]
    NonUnitDirection(f64),
    #[error("ray max_length must be positive and finite (got {0})")]
    InvalidMaxLength(f64),
    #[error("ray origin is not finite")]
    NonFiniteOrigin,
    #[error("ray {0} does not intersect the model interface within its max_length")]
    NoIntersection(usize),
    #[error("vertex normal at {0} is undefined (adjacent segments are antiparallel)")]
    DegenerateNormal(usize),
    #[error("vertex index {index} out of range for curve with {len} vertices")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("ray list is empty")]
    NoRays,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2<F> {
    pub x: F,
    pub y: F,
}

impl<F: Scalar> Point2<F> {
    #[inline]
    pub fn new(x: F, y: F) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }

    #[inline]
    pub fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }

    #[inline]
    pub fn scale(self, s: F) -> Self {
        Self::new(self.x * s, self.y * s)
    }

    #[inline]
    pub fn dot(self, o: Self) -> F {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    #[inline]
    pub fn cross(self, o: Self) -> F {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm(self) -> F {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Rotated by -90°: the right-hand normal of a tangent.
    #[inline]
    pub fn right_perp(self) -> Self {
        Self::new(self.y, -self.x)
    }
}

/// Which side of the traversal direction the biofilm occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiofilmSide {
    #[default]
    Right,
    Left,
}

/// Ordered planar polyline representing a fluid-biofilm interface.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceCurve<F> {
    vertices: Vec<Point2<F>>,
    closed: bool,
    side: BiofilmSide,
}

impl<F: Scalar> InterfaceCurve<F> {
    pub fn new(vertices: Vec<Point2<F>>, closed: bool, side: BiofilmSide) -> Result<Self, GeometryError> {
        if vertices.len() < 2 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        if let Some(i) = vertices.iter().position(|p| !p.is_finite()) {
            return Err(GeometryError::NonFiniteVertex(i));
        }
        let curve = Self {
            vertices,
            closed,
            side,
        };
        for (i, (a, b)) in curve.segments().enumerate() {
            if a == b {
                return Err(GeometryError::ZeroLengthSegment(i));
            }
        }
        Ok(curve)
    }

    /// Open curve with the biofilm on the right of traversal.
    pub fn open(vertices: Vec<Point2<F>>) -> Result<Self, GeometryError> {
        Self::new(vertices, false, BiofilmSide::Right)
    }

    pub fn vertices(&self) -> &[Point2<F>] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn biofilm_side(&self) -> BiofilmSide {
        self.side
    }

    pub fn segment_count(&self) -> usize {
        if self.closed {
            self.vertices.len()
        } else {
            self.vertices.len() - 1
        }
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point2<F>, Point2<F>)> + '_ {
        let n = self.vertices.len();
        (0..self.segment_count()).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Returns a copy with every vertex moved by `f`.
    pub fn map_vertices(&self, f: impl FnMut(Point2<F>) -> Point2<F>) -> Result<Self, GeometryError> {
        Self::new(self.vertices.iter().copied().map(f).collect(), self.closed, self.side)
    }

    pub fn translated(&self, delta: Point2<F>) -> Self {
        Self {
            vertices: self.vertices.iter().map(|p| p.add(delta)).collect(),
            closed: self.closed,
            side: self.side,
        }
    }

    /// `(min, max)` corners of the axis-aligned bounding box.
    pub fn bounding_box(&self) -> (Point2<F>, Point2<F>) {
        let first = self.vertices[0];
        self.vertices.iter().fold((first, first), |(lo, hi), p| {
            (
                Point2::new(lo.x.min(p.x), lo.y.min(p.y)),
                Point2::new(hi.x.max(p.x), hi.y.max(p.y)),
            )
        })
    }

    /// Default ray search length: the bounding-box diagonal.
    pub fn diagonal(&self) -> F {
        let (lo, hi) = self.bounding_box();
        hi.sub(lo).norm()
    }

    /// Unit normal of segment `i` pointing into the biofilm.
    fn segment_normal(&self, i: usize) -> Point2<F> {
        let n = self.vertices.len();
        let a = self.vertices[i];
        let b = self.vertices[(i + 1) % n];
        let t = b.sub(a);
        let t = t.scale(F::one() / t.norm());
        match self.side {
            BiofilmSide::Right => t.right_perp(),
            BiofilmSide::Left => t.right_perp().scale(-F::one()),
        }
    }

    /// Unit vertex normal pointing into the biofilm: the re-normalized mean
    /// of the adjacent segment normals.
    pub fn vertex_normal(&self, index: usize) -> Result<Point2<F>, GeometryError> {
        let n = self.vertices.len();
        if index >= n {
            return Err(GeometryError::IndexOutOfRange { index, len: n });
        }
        let before = if index > 0 {
            Some(index - 1)
        } else if self.closed {
            Some(n - 1)
        } else {
            None
        };
        let after = if self.closed || index + 1 < n {
            Some(index)
        } else {
            None
        };
        let sum = [before, after]
            .into_iter()
            .flatten()
            .map(|s| self.segment_normal(s))
            .fold(Point2::new(F::zero(), F::zero()), Point2::add);
        let len = sum.norm();
        if len <= F::of(1e-12).max(F::epsilon() * F::of(8.0)) {
            return Err(GeometryError::DegenerateNormal(index));
        }
        Ok(sum.scale(F::one() / len))
    }
}

/// Observed point plus the direction in which the model interface is sought.
///
/// `direction` points toward the biofilm side of the observed interface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRay<F> {
    pub origin: Point2<F>,
    pub direction: Point2<F>,
    pub max_length: F,
}

impl<F: Scalar> MeasurementRay<F> {
    pub fn new(origin: Point2<F>, direction: Point2<F>, max_length: F) -> Result<Self, GeometryError> {
        let ray = Self {
            origin,
            direction,
            max_length,
        };
        ray.validate()?;
        Ok(ray)
    }

    /// Normalizes `direction` before validating.
    pub fn towards(origin: Point2<F>, direction: Point2<F>, max_length: F) -> Result<Self, GeometryError> {
        let len = direction.norm();
        if !(len > F::zero()) || !len.is_finite() {
            return Err(GeometryError::NonUnitDirection(len.to_f64_lossy()));
        }
        Self::new(origin, direction.scale(F::one() / len), max_length)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !self.origin.is_finite() {
            return Err(GeometryError::NonFiniteOrigin);
        }
        let len = self.direction.norm();
        let tol = F::of(1e-12).max(F::epsilon() * F::of(8.0));
        if !len.is_finite() || (len - F::one()).abs() > tol {
            return Err(GeometryError::NonUnitDirection(len.to_f64_lossy()));
        }
        if !(self.max_length > F::zero()) || !self.max_length.is_finite() {
            return Err(GeometryError::InvalidMaxLength(self.max_length.to_f64_lossy()));
        }
        Ok(())
    }

    pub fn point_at(&self, t: F) -> Point2<F> {
        self.origin.add(self.direction.scale(t))
    }

    pub fn reversed(&self) -> Self {
        Self {
            direction: self.direction.scale(-F::one()),
            ..*self
        }
    }
}

/// Two ray parameters closer than this are one intersection.
fn dedupe_tolerance<F: Scalar>(max_length: F) -> F {
    F::of(1e-12).max(F::epsilon() * F::of(64.0) * max_length)
}

/// All signed ray parameters `t`, `|t| ≤ max_length`, at which the line
/// through the ray meets the curve. Sorted ascending, shared-vertex hits
/// deduplicated.
pub fn intersect_ray_curve<F: Scalar>(ray: &MeasurementRay<F>, curve: &InterfaceCurve<F>) -> Vec<F> {
    let d = ray.direction;
    let limit = ray.max_length;
    let s_tol = F::epsilon() * F::of(64.0);
    let mut hits = Vec::new();
    let mut push = |t: F| {
        if t.abs() <= limit {
            hits.push(t);
        }
    };

    for (p, q) in curve.segments() {
        let e = q.sub(p);
        let w = p.sub(ray.origin);
        let denom = d.cross(e);
        let e_len = e.norm();
        if denom.abs() <= F::epsilon() * e_len {
            // parallel: only collinear segments intersect
            if w.cross(d).abs() <= s_tol * e_len.max(w.norm()) {
                let (ta, tb) = (w.dot(d), q.sub(ray.origin).dot(d));
                push(ta);
                push(tb);
                if ta.min(tb) <= F::zero() && ta.max(tb) >= F::zero() {
                    push(F::zero());
                }
            }
            continue;
        }
        let t = w.cross(e) / denom;
        let s = w.cross(d) / denom;
        if s >= -s_tol && s <= F::one() + s_tol {
            push(t);
        }
    }

    hits.sort_by(|a, b| a.partial_cmp(b).expect("finite ray parameters"));
    let tol = dedupe_tolerance(limit);
    hits.dedup_by(|b, a| (*b - *a).abs() <= tol);
    hits
}

/// Picks the smallest-magnitude parameter, preferring the negative one on a
/// magnitude tie.
pub fn select_nearest<F: Scalar>(hits: &[F], tie_tolerance: F) -> Option<F> {
    let mut it = hits.iter().copied();
    let mut best = it.next()?;
    for t in it {
        let (mt, mb) = (t.abs(), best.abs());
        if mt < mb - tie_tolerance || ((mt - mb).abs() <= tie_tolerance && t < best) {
            best = t;
        }
    }
    Some(best)
}

/// Signed punctual distance `d_mp` from the ray origin to the curve.
pub fn signed_distance<F: Scalar>(ray: &MeasurementRay<F>, curve: &InterfaceCurve<F>) -> Result<F, GeometryError> {
    let hits = intersect_ray_curve(ray, curve);
    select_nearest(&hits, dedupe_tolerance(ray.max_length)).ok_or(GeometryError::NoIntersection(0))
}

/// Residual vector of signed distances, one per ray.
pub fn measure<F: Scalar>(rays: &[MeasurementRay<F>], curve: &InterfaceCurve<F>) -> Result<Vec<F>, GeometryError> {
    if rays.is_empty() {
        return Err(GeometryError::NoRays);
    }
    rays.iter()
        .enumerate()
        .map(|(i, ray)| signed_distance(ray, curve).map_err(|_| GeometryError::NoIntersection(i)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RayOrientation {
    #[default]
    IntoBiofilm,
    IntoFluid,
}

/// Rays at the selected vertices along the vertex normals.
pub fn normal_rays<F: Scalar>(
    curve: &InterfaceCurve<F>,
    vertex_indices: &[usize],
    orientation: RayOrientation,
    max_length: F,
) -> Result<Vec<MeasurementRay<F>>, GeometryError> {
    vertex_indices
        .iter()
        .map(|&i| {
            let n = curve.vertex_normal(i)?;
            let dir = match orientation {
                RayOrientation::IntoBiofilm => n,
                RayOrientation::IntoFluid => n.scale(-F::one()),
            };
            MeasurementRay::new(curve.vertices()[i], dir, max_length)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(x: f64, y: f64) -> Point2<f64> {
        Point2::new(x, y)
    }

    fn xray(max_length: f64) -> MeasurementRay<f64> {
        MeasurementRay::new(p(0.0, 0.0), p(1.0, 0.0), max_length).unwrap()
    }

    #[test]
    fn axis_aligned_crossing() {
        let curve = InterfaceCurve::open(vec![p(2.0, -1.0), p(2.0, 1.0)]).unwrap();
        assert_eq!(intersect_ray_curve(&xray(10.0), &curve), vec![2.0]);
    }

    #[test]
    fn bidirectional_search() {
        // two vertical walls joined far away, so only the walls cross y = 0
        let curve =
            InterfaceCurve::open(vec![p(2.0, -1.0), p(2.0, 1.0), p(-3.0, 1.0), p(-3.0, -1.0)]).unwrap();
        let mut hits = intersect_ray_curve(&xray(10.0), &curve);
        hits.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert_eq!(hits, vec![2.0, -3.0]);
    }

    #[test]
    fn max_length_clips_hits() {
        let curve = InterfaceCurve::open(vec![p(2.0, -1.0), p(2.0, 1.0)]).unwrap();
        assert!(intersect_ray_curve(&xray(1.5), &curve).is_empty());
        assert!(matches!(
            signed_distance(&xray(1.5), &curve),
            Err(GeometryError::NoIntersection(_))
        ));
    }

    #[test]
    fn shared_vertex_counted_once() {
        let curve = InterfaceCurve::open(vec![p(2.0, -1.0), p(2.0, 0.0), p(2.5, 1.0)]).unwrap();
        assert_eq!(intersect_ray_curve(&xray(10.0), &curve), vec![2.0]);
    }

    #[test]
    fn nearest_selection_rules() {
        assert_eq!(select_nearest(&[0.2], 1e-12), Some(0.2));
        assert_eq!(select_nearest(&[-0.1, 0.3], 1e-12), Some(-0.1));
        assert_eq!(select_nearest(&[-0.2, 0.2], 1e-12), Some(-0.2));
        assert_eq!(select_nearest(&[0.2, -0.2], 1e-12), Some(-0.2));
        assert_eq!(select_nearest::<f64>(&[], 1e-12), None);
    }

    #[test]
    fn symmetric_tie_resolves_negative() {
        let curve =
            InterfaceCurve::open(vec![p(0.2, -1.0), p(0.2, 1.0), p(-0.2, 1.0), p(-0.2, -1.0)]).unwrap();
        assert_eq!(signed_distance(&xray(10.0), &curve).unwrap(), -0.2);
    }

    #[test]
    fn measure_identity_is_zero() {
        let verts: Vec<_> = (0..20).map(|i| p(i as f64 * 0.1, (i as f64 * 0.4).sin() * 0.2)).collect();
        let curve = InterfaceCurve::open(verts).unwrap();
        let idx: Vec<usize> = (0..20).collect();
        let rays = normal_rays(&curve, &idx, RayOrientation::IntoBiofilm, curve.diagonal()).unwrap();
        let r = measure(&rays, &curve).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-14), "{r:?}");
    }

    #[test]
    fn rigid_offset_along_rays() {
        let verts: Vec<_> = (0..12).map(|i| p(i as f64 * 0.1, 0.05 * (i as f64 * 0.3).cos())).collect();
        let curve = InterfaceCurve::open(verts).unwrap();
        let dir = p(0.0, 1.0);
        let rays: Vec<_> = (2..10)
            .map(|i| MeasurementRay::new(curve.vertices()[i], dir, 1.0).unwrap())
            .collect();
        let moved = curve.translated(dir.scale(0.05));
        let r = measure(&rays, &moved).unwrap();
        assert_eq!(r.len(), 8);
        for v in r {
            assert!((v - 0.05).abs() < 1e-15);
        }
    }

    #[test]
    fn measure_reports_failing_ray() {
        let curve = InterfaceCurve::open(vec![p(2.0, -1.0), p(2.0, 1.0)]).unwrap();
        let miss = MeasurementRay::new(p(0.0, 5.0), p(1.0, 0.0), 10.0).unwrap();
        assert_eq!(measure(&[xray(10.0), miss], &curve), Err(GeometryError::NoIntersection(1)));
        assert_eq!(measure::<f64>(&[], &curve), Err(GeometryError::NoRays));
    }

    #[test]
    fn horizontal_chain_biofilm_below() {
        let curve = InterfaceCurve::open(vec![p(0.0, 0.0), p(1.0, 0.0), p(2.0, 0.0), p(3.0, 0.0)]).unwrap();
        let rays = normal_rays(&curve, &[0, 1, 2, 3], RayOrientation::IntoBiofilm, 1.0).unwrap();
        for r in rays {
            assert_eq!(r.direction, p(0.0, -1.0));
        }
    }

    #[test]
    fn semicircle_normals_point_to_center() {
        // traversed over the top from (-1, 0) to (1, 0): interior on the right
        let verts: Vec<_> = [180.0f64, 90.0, 0.0]
            .iter()
            .map(|deg| p(deg.to_radians().cos(), deg.to_radians().sin()))
            .collect();
        let curve = InterfaceCurve::open(verts.clone()).unwrap();
        let rays = normal_rays(&curve, &[1], RayOrientation::IntoBiofilm, 2.0).unwrap();
        assert!((rays[0].direction.x).abs() < 1e-12 && (rays[0].direction.y + 1.0).abs() < 1e-12);
        // denser sampling: interior vertex normals approach -position
        let fine: Vec<_> = (0..=180)
            .rev()
            .map(|k| {
                let a = (k as f64).to_radians();
                p(a.cos(), a.sin())
            })
            .collect();
        let curve = InterfaceCurve::open(fine.clone()).unwrap();
        for i in 1..180 {
            let n = curve.vertex_normal(i).unwrap();
            let exact = fine[i].scale(-1.0);
            assert!(n.sub(exact).norm() < 1e-6);
        }
        let out = normal_rays(&curve, &[90], RayOrientation::IntoFluid, 2.0).unwrap();
        assert!((out[0].direction.y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normal_errors() {
        let curve = InterfaceCurve::open(vec![p(0.0, 0.0), p(1.0, 0.0), p(0.0, 0.0)]).unwrap();
        assert_eq!(curve.vertex_normal(1), Err(GeometryError::DegenerateNormal(1)));
        assert_eq!(
            normal_rays(&curve, &[3], RayOrientation::IntoBiofilm, 1.0),
            Err(GeometryError::IndexOutOfRange { index: 3, len: 3 })
        );
    }

    #[test]
    fn closed_curve_wraps() {
        let sq = vec![p(0.0, 0.0), p(0.0, 1.0), p(1.0, 1.0), p(1.0, 0.0)];
        let curve = InterfaceCurve::new(sq, true, BiofilmSide::Right).unwrap();
        assert_eq!(curve.segment_count(), 4);
        let n = curve.vertex_normal(0).unwrap();
        let h = 0.5f64.sqrt();
        assert!((n.x - h).abs() < 1e-12 && (n.y - h).abs() < 1e-12);
        let ray = MeasurementRay::new(p(0.5, 0.5), p(1.0, 0.0), 2.0).unwrap();
        assert_eq!(intersect_ray_curve(&ray, &curve), vec![-0.5, 0.5]);
        assert_eq!(signed_distance(&ray, &curve).unwrap(), -0.5);
    }

    #[test]
    fn invalid_inputs() {
        assert_eq!(InterfaceCurve::open(vec![p(0.0, 0.0)]), Err(GeometryError::TooFewVertices(1)));
        assert_eq!(
            InterfaceCurve::open(vec![p(0.0, 0.0), p(0.0, 0.0)]),
            Err(GeometryError::ZeroLengthSegment(0))
        );
        assert!(MeasurementRay::new(p(0.0, 0.0), p(1.0, 1.0), 1.0).is_err());
        assert!(MeasurementRay::new(p(0.0, 0.0), p(1.0, 0.0), 0.0).is_err());
        assert!(MeasurementRay::towards(p(0.0, 0.0), p(3.0, 4.0), 1.0).is_ok());
    }

    #[test]
    fn collinear_segment_through_origin() {
        let curve = InterfaceCurve::open(vec![p(-1.0, 0.0), p(1.0, 0.0), p(1.0, 1.0)]).unwrap();
        assert_eq!(signed_distance(&xray(5.0), &curve).unwrap(), 0.0);
    }

    #[test]
    fn single_precision_path() {
        let curve = InterfaceCurve::<f32>::open(vec![Point2::new(2.0, -1.0), Point2::new(2.0, 1.0)]).unwrap();
        let ray = MeasurementRay::new(Point2::new(0.0f32, 0.0), Point2::new(1.0, 0.0), 10.0).unwrap();
        assert_eq!(signed_distance(&ray, &curve).unwrap(), 2.0f32);
    }

    proptest! {
        #[test]
        fn reversing_direction_negates_hit_set(
            ox in -1.0f64..1.0, oy in -1.0f64..1.0, ang in 0.0f64..std::f64::consts::TAU,
            ys in proptest::collection::vec(-1.0f64..1.0, 3..8),
        ) {
            let verts: Vec<_> = ys.iter().enumerate().map(|(i, y)| p(i as f64 * 0.5 - 1.5, *y)).collect();
            let curve = InterfaceCurve::open(verts).unwrap();
            let ray = MeasurementRay::new(p(ox, oy), p(ang.cos(), ang.sin()), 10.0).unwrap();
            let fwd = intersect_ray_curve(&ray, &curve);
            let mut back: Vec<f64> = intersect_ray_curve(&ray.reversed(), &curve).iter().map(|t| -t).collect();
            back.sort_by(|a, b| a.partial_cmp(b).unwrap());
            prop_assert_eq!(fwd.len(), back.len());
            for (a, b) in fwd.iter().zip(&back) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            if let Ok(d) = signed_distance(&ray.reversed(), &curve) {
                prop_assert_eq!(Some(d), select_nearest(&intersect_ray_curve(&ray.reversed(), &curve), 1e-12));
            }
        }

        #[test]
        fn translation_along_ray_shifts_distance(
            ys in proptest::collection::vec(-0.05f64..0.05, 4..10),
            k in 1usize..3, delta in -0.05f64..0.05,
        ) {
            let verts: Vec<_> = ys.iter().enumerate().map(|(i, y)| p(i as f64 * 0.3, *y)).collect();
            let curve = InterfaceCurve::open(verts).unwrap();
            let ray = normal_rays(&curve, &[k], RayOrientation::IntoBiofilm, 10.0).unwrap()[0];
            let before = signed_distance(&ray, &curve).unwrap();
            let after = signed_distance(&ray, &curve.translated(ray.direction.scale(delta))).unwrap();
            prop_assert!(before.abs() < 1e-14);
            prop_assert!((after - before - delta).abs() < 1e-12);
        }
    }
}
