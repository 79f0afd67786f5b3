//! Bilinear quadrilateral, total-Lagrangian Saint-Venant-Kirchhoff kernel.

use crate::geometry::Point2;
use crate::scalar::Scalar;

use super::Material;

/// Reference-square corner coordinates, counter-clockwise.
const CORNERS: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];

pub(crate) fn gauss_points<F: Scalar>() -> [(F, F); 4] {
    let g = F::one() / F::of(3.0).sqrt();
    [(-g, -g), (g, -g), (g, g), (-g, g)]
}

/// Shape function derivatives with respect to `(ξ, η)`.
pub(crate) fn shape_derivatives<F: Scalar>(xi: F, eta: F) -> [[F; 2]; 4] {
    let q = F::of(0.25);
    CORNERS.map(|(a, b)| {
        let (a, b) = (F::of(a), F::of(b));
        [q * a * (F::one() + b * eta), q * b * (F::one() + a * xi)]
    })
}

pub(crate) fn shape_values<F: Scalar>(xi: F, eta: F) -> [F; 4] {
    let q = F::of(0.25);
    CORNERS.map(|(a, b)| q * (F::one() + F::of(a) * xi) * (F::one() + F::of(b) * eta))
}

/// Kinematics and stress at one Gauss point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussState<F> {
    /// Reference position of the Gauss point.
    pub position: Point2<F>,
    /// Deformation gradient `F[i][J]`.
    pub deformation_gradient: [[F; 2]; 2],
    /// Green-Lagrange strain.
    pub strain: [[F; 2]; 2],
    /// Second Piola-Kirchhoff stress (in-plane part).
    pub stress: [[F; 2]; 2],
    /// Reference-volume weight `det J₀ · w`.
    pub weight: F,
    /// Shape function gradients in the reference configuration.
    pub(crate) grads: [[F; 2]; 4],
}

impl<F: Scalar> GaussState<F> {
    pub fn det_f(&self) -> F {
        let f = self.deformation_gradient;
        f[0][0] * f[1][1] - f[0][1] * f[1][0]
    }

    /// Cauchy stress `σ = F S Fᵀ / det F` (in-plane part).
    pub fn cauchy_stress(&self) -> [[F; 2]; 2] {
        let f = self.deformation_gradient;
        let s = self.stress;
        let j = self.det_f();
        let mut fs = [[F::zero(); 2]; 2];
        for i in 0..2 {
            for k in 0..2 {
                fs[i][k] = f[i][0] * s[0][k] + f[i][1] * s[1][k];
            }
        }
        let mut out = [[F::zero(); 2]; 2];
        for i in 0..2 {
            for k in 0..2 {
                out[i][k] = (fs[i][0] * f[k][0] + fs[i][1] * f[k][1]) / j;
            }
        }
        out
    }
}

pub(crate) enum KinematicsError<F> {
    /// Reference Jacobian not positive.
    BadReference(F),
    Inverted(F),
}

/// Evaluates the Gauss point states of one element.
pub(crate) fn gauss_states<F: Scalar>(
    x: &[Point2<F>; 4],
    u: &[[F; 2]; 4],
    material: &Material<F>,
) -> Result<[GaussState<F>; 4], KinematicsError<F>> {
    let (lambda, mu) = material.lame();
    let two = F::of(2.0);
    let half = F::of(0.5);
    let gps = gauss_points::<F>();
    let mut out = [GaussState {
        position: Point2::default(),
        deformation_gradient: [[F::zero(); 2]; 2],
        strain: [[F::zero(); 2]; 2],
        stress: [[F::zero(); 2]; 2],
        weight: F::zero(),
        grads: [[F::zero(); 2]; 4],
    }; 4];
    for (g, (xi, eta)) in gps.iter().enumerate() {
        let dn = shape_derivatives(*xi, *eta);
        let nv = shape_values(*xi, *eta);
        let mut j0 = [[F::zero(); 2]; 2];
        let mut pos = Point2::new(F::zero(), F::zero());
        for a in 0..4 {
            let xa = [x[a].x, x[a].y];
            for i in 0..2 {
                for k in 0..2 {
                    j0[i][k] += xa[i] * dn[a][k];
                }
            }
            pos = pos.add(x[a].scale(nv[a]));
        }
        let det = j0[0][0] * j0[1][1] - j0[0][1] * j0[1][0];
        if !(det > F::zero()) {
            return Err(KinematicsError::BadReference(det));
        }
        // inverse of J0: dξ_j/dX_k
        let inv = [
            [j0[1][1] / det, -j0[0][1] / det],
            [-j0[1][0] / det, j0[0][0] / det],
        ];
        let mut grads = [[F::zero(); 2]; 4];
        for a in 0..4 {
            for k in 0..2 {
                grads[a][k] = dn[a][0] * inv[0][k] + dn[a][1] * inv[1][k];
            }
        }
        let mut h = [[F::zero(); 2]; 2];
        for a in 0..4 {
            for i in 0..2 {
                for k in 0..2 {
                    h[i][k] += u[a][i] * grads[a][k];
                }
            }
        }
        let f = [[F::one() + h[0][0], h[0][1]], [h[1][0], F::one() + h[1][1]]];
        let det_f = f[0][0] * f[1][1] - f[0][1] * f[1][0];
        if !(det_f > F::zero()) {
            return Err(KinematicsError::Inverted(det_f));
        }
        // E = (H + Hᵀ + HᵀH) / 2, free of the cancellation in FᵀF − I
        let mut e = [[F::zero(); 2]; 2];
        for i in 0..2 {
            for k in 0..2 {
                let hh = h[0][i] * h[0][k] + h[1][i] * h[1][k];
                e[i][k] = half * (h[i][k] + h[k][i] + hh);
            }
        }
        let tr = e[0][0] + e[1][1];
        let s = [
            [lambda * tr + two * mu * e[0][0], two * mu * e[0][1]],
            [two * mu * e[1][0], lambda * tr + two * mu * e[1][1]],
        ];
        out[g] = GaussState {
            position: pos,
            deformation_gradient: f,
            strain: e,
            stress: s,
            weight: det,
            grads,
        };
    }
    Ok(out)
}

/// Strain-displacement rows for node `a`: Voigt `(E11, E22, 2E12)` by `(u_x, u_y)`.
#[inline]
fn b_matrix<F: Scalar>(f: &[[F; 2]; 2], g: &[F; 2]) -> [[F; 2]; 3] {
    [
        [f[0][0] * g[0], f[1][0] * g[0]],
        [f[0][1] * g[1], f[1][1] * g[1]],
        [f[0][0] * g[1] + f[0][1] * g[0], f[1][0] * g[1] + f[1][1] * g[0]],
    ]
}

/// Element internal force (8) and consistent tangent (8×8).
pub(crate) fn element_force_tangent<F: Scalar>(
    states: &[GaussState<F>; 4],
    material: &Material<F>,
) -> ([F; 8], [[F; 8]; 8]) {
    let (lambda, mu) = material.lame();
    let two = F::of(2.0);
    let d = [
        [lambda + two * mu, lambda, F::zero()],
        [lambda, lambda + two * mu, F::zero()],
        [F::zero(), F::zero(), mu],
    ];
    let mut fe = [F::zero(); 8];
    let mut ke = [[F::zero(); 8]; 8];
    for st in states {
        let w = st.weight;
        let sv = [st.stress[0][0], st.stress[1][1], st.stress[0][1]];
        let bs: [[[F; 2]; 3]; 4] = std::array::from_fn(|a| b_matrix(&st.deformation_gradient, &st.grads[a]));
        for a in 0..4 {
            for i in 0..2 {
                let mut acc = F::zero();
                for r in 0..3 {
                    acc += bs[a][r][i] * sv[r];
                }
                fe[2 * a + i] += acc * w;
            }
        }
        for a in 0..4 {
            // D·B_a
            let mut db = [[F::zero(); 2]; 3];
            for r in 0..3 {
                for i in 0..2 {
                    for c in 0..3 {
                        db[r][i] += d[r][c] * bs[a][c][i];
                    }
                }
            }
            for b in 0..4 {
                let ga = st.grads[a];
                let gb = st.grads[b];
                let geo = ga[0] * (st.stress[0][0] * gb[0] + st.stress[0][1] * gb[1])
                    + ga[1] * (st.stress[1][0] * gb[0] + st.stress[1][1] * gb[1]);
                for i in 0..2 {
                    for k in 0..2 {
                        let mut mat = F::zero();
                        for r in 0..3 {
                            mat += bs[b][r][k] * db[r][i];
                        }
                        let g = if i == k { geo } else { F::zero() };
                        ke[2 * b + k][2 * a + i] += (mat + g) * w;
                    }
                }
            }
        }
    }
    (fe, ke)
}

/// Stored strain energy of the element.
pub(crate) fn element_energy<F: Scalar>(states: &[GaussState<F>; 4], material: &Material<F>) -> F {
    let (lambda, mu) = material.lame();
    let half = F::of(0.5);
    states
        .iter()
        .map(|st| {
            let e = st.strain;
            let tr = e[0][0] + e[1][1];
            let ee = e[0][0] * e[0][0] + e[1][1] * e[1][1] + F::of(2.0) * e[0][1] * e[0][1];
            (half * lambda * tr * tr + mu * ee) * st.weight
        })
        .sum()
}
