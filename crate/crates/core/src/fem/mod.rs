//! Static plane-strain Saint-Venant-Kirchhoff solver on bilinear quads.
//!
//! Loads are dead tractions on boundary edges, ramped in cosine increments
//! and equilibrated by Newton's method with a banded Cholesky solve.

mod element;
pub mod mesh;
pub mod scenario;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::geometry::Point2;
use crate::linalg::{norm2, Matrix, SymBand};
use crate::models::ModelError;
use crate::scalar::Scalar;

pub use element::GaussState;
pub use mesh::{bump_mesh, rectangle_mesh, BumpMeshSpec, Mesh2D, MeshError, MeshFile};
pub use scenario::{FemModel, ParamRef, Scenario, ScenarioError, SubdomainSpec, TractionSegment};

use element::{element_energy, element_force_tangent, gauss_states, KinematicsError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material<F> {
    #[serde(rename = "E")]
    pub e: F,
    pub nu: F,
}

impl<F: Scalar> Material<F> {
    pub fn new(e: F, nu: F) -> Result<Self, ModelError> {
        let m = Self { e, nu };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.e > F::zero()) || !self.e.is_finite() {
            return Err(ModelError::InvalidParameters(format!("E must be positive, got {}", self.e)));
        }
        if !(self.nu > -F::one() && self.nu < F::of(0.5)) {
            return Err(ModelError::InvalidParameters(format!(
                "nu must lie in (-1, 0.5), got {}",
                self.nu
            )));
        }
        Ok(())
    }

    /// Plane-strain Lamé constants `(λ, μ)`.
    pub fn lame(&self) -> (F, F) {
        let one = F::one();
        let two = F::of(2.0);
        let lambda = self.e * self.nu / ((one + self.nu) * (one - two * self.nu));
        let mu = self.e / (two * (one + self.nu));
        (lambda, mu)
    }
}

/// One loaded boundary edge. Local edge `k` joins element nodes `k` and `k + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeTraction<F> {
    pub element: usize,
    pub local_edge: usize,
    /// Traction per unit reference length [Pa].
    pub traction: Point2<F>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TractionLoad<F> {
    pub edges: Vec<EdgeTraction<F>>,
}

/// Prescribed displacement of one node component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constraint<F> {
    pub node: usize,
    pub component: usize,
    pub value: F,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings<F> {
    pub increments: usize,
    pub newton_tol: F,
    pub max_newton: usize,
}

impl<F: Scalar> Default for SolverSettings<F> {
    fn default() -> Self {
        Self {
            increments: 5,
            newton_tol: F::of(1e-10),
            max_newton: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolidState<F> {
    /// Nodal displacements, interleaved `(u_x, u_y)`.
    pub displacement: Vec<F>,
    pub converged: bool,
    pub newton_iterations: usize,
}

impl<F: Scalar> SolidState<F> {
    pub fn node_displacement(&self, node: usize) -> Point2<F> {
        Point2::new(self.displacement[2 * node], self.displacement[2 * node + 1])
    }
}

fn kinematics_error<F: Scalar>(element: usize, e: KinematicsError<F>) -> ModelError {
    match e {
        KinematicsError::Inverted(det) => ModelError::ElementInverted {
            element,
            det: det.to_f64_lossy(),
        },
        KinematicsError::BadReference(det) => {
            ModelError::InvalidParameters(format!("element {element} has reference Jacobian {det}"))
        }
    }
}

fn element_data<F: Scalar>(mesh: &Mesh2D<F>, e: usize, u: &[F]) -> ([Point2<F>; 4], [[F; 2]; 4]) {
    let conn = mesh.elems()[e];
    let x = conn.map(|n| mesh.nodes()[n]);
    let ue = conn.map(|n| [u[2 * n], u[2 * n + 1]]);
    (x, ue)
}

fn material_of<'a, F: Scalar>(mesh: &Mesh2D<F>, materials: &'a [Material<F>], e: usize) -> Result<&'a Material<F>, ModelError> {
    let id = mesh.elem_material()[e];
    materials
        .get(id)
        .ok_or_else(|| ModelError::InvalidParameters(format!("no material for id {id}")))
}

/// Gauss point states of element `e` under displacement `u`.
pub fn gauss_point_states<F: Scalar>(
    mesh: &Mesh2D<F>,
    materials: &[Material<F>],
    u: &[F],
    e: usize,
) -> Result<[GaussState<F>; 4], ModelError> {
    let mat = material_of(mesh, materials, e)?;
    let (x, ue) = element_data(mesh, e, u);
    gauss_states(&x, &ue, mat).map_err(|k| kinematics_error(e, k))
}

/// Total stored energy.
pub fn strain_energy<F: Scalar>(mesh: &Mesh2D<F>, materials: &[Material<F>], u: &[F]) -> Result<F, ModelError> {
    let mut w = F::zero();
    for e in 0..mesh.elems().len() {
        let st = gauss_point_states(mesh, materials, u, e)?;
        w += element_energy(&st, material_of(mesh, materials, e)?);
    }
    Ok(w)
}

fn check_inputs<F: Scalar>(mesh: &Mesh2D<F>, materials: &[Material<F>], u: &[F]) -> Result<(), ModelError> {
    if u.len() != 2 * mesh.nodes().len() {
        return Err(ModelError::InvalidParameters(format!(
            "displacement has {} entries, mesh needs {}",
            u.len(),
            2 * mesh.nodes().len()
        )));
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::InvalidParameters("displacement is not finite".into()));
    }
    for m in materials {
        m.validate()?;
    }
    Ok(())
}

fn assemble_band<F: Scalar>(
    mesh: &Mesh2D<F>,
    materials: &[Material<F>],
    u: &[F],
) -> Result<(Vec<F>, SymBand<F>), ModelError> {
    check_inputs(mesh, materials, u)?;
    let ndof = 2 * mesh.nodes().len();
    let mut f = vec![F::zero(); ndof];
    let mut k = SymBand::zeros(ndof, mesh.dof_half_bandwidth());
    for e in 0..mesh.elems().len() {
        let mat = material_of(mesh, materials, e)?;
        let st = gauss_point_states(mesh, materials, u, e)?;
        let (fe, ke) = element_force_tangent(&st, mat);
        let conn = mesh.elems()[e];
        let dofs: [usize; 8] = std::array::from_fn(|r| 2 * conn[r / 2] + r % 2);
        for r in 0..8 {
            f[dofs[r]] += fe[r];
            for c in 0..8 {
                if dofs[c] <= dofs[r] {
                    k.add(dofs[r], dofs[c], ke[r][c]);
                }
            }
        }
    }
    Ok((f, k))
}

/// Internal force vector and consistent tangent (dense copy).
pub fn assemble_internal_forces<F: Scalar>(
    mesh: &Mesh2D<F>,
    materials: &[Material<F>],
    u: &[F],
) -> Result<(Vec<F>, Matrix<F>), ModelError> {
    let (f, band) = assemble_band(mesh, materials, u)?;
    let n = band.dim();
    let mut dense = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            dense[(i, j)] = band.get(i, j);
        }
    }
    Ok((f, dense))
}

/// Consistent nodal forces of a dead traction load.
pub fn external_forces<F: Scalar>(mesh: &Mesh2D<F>, load: &TractionLoad<F>) -> Result<Vec<F>, ModelError> {
    let mut f = vec![F::zero(); 2 * mesh.nodes().len()];
    let boundary = mesh.boundary_edges();
    let half = F::of(0.5);
    for edge in &load.edges {
        if !boundary.contains(&(edge.element, edge.local_edge)) {
            return Err(ModelError::InvalidParameters(format!(
                "edge {} of element {} is not on the boundary",
                edge.local_edge, edge.element
            )));
        }
        let (a, b) = mesh.edge_nodes(edge.element, edge.local_edge);
        let len = mesh.nodes()[b].sub(mesh.nodes()[a]).norm();
        for n in [a, b] {
            f[2 * n] += edge.traction.x * len * half;
            f[2 * n + 1] += edge.traction.y * len * half;
        }
    }
    Ok(f)
}

fn ramp<F: Scalar>(i: usize, n: usize) -> F {
    let t = F::of(i as f64) / F::of(n as f64);
    F::of(0.5) * (F::one() - (F::of(std::f64::consts::PI) * t).cos())
}

/// Quasi-static equilibrium under ramped traction and prescribed displacements.
pub fn solve_static<F: Scalar>(
    mesh: &Mesh2D<F>,
    materials: &[Material<F>],
    load: &TractionLoad<F>,
    constraints: &[Constraint<F>],
    settings: &SolverSettings<F>,
) -> Result<SolidState<F>, ModelError> {
    if constraints.is_empty() {
        return Err(ModelError::InvalidParameters("no Dirichlet constraints".into()));
    }
    if settings.increments == 0 || settings.max_newton == 0 || !(settings.newton_tol > F::zero()) {
        return Err(ModelError::InvalidParameters("invalid solver settings".into()));
    }
    let ndof = 2 * mesh.nodes().len();
    let mut fixed = vec![false; ndof];
    for c in constraints {
        if c.node >= mesh.nodes().len() || c.component > 1 || !c.value.is_finite() {
            return Err(ModelError::InvalidParameters(format!("invalid constraint {c:?}")));
        }
        fixed[2 * c.node + c.component] = true;
    }
    let f_ext = external_forces(mesh, load)?;
    let free_norm = |v: &[F]| -> F {
        let masked: Vec<F> = v.iter().zip(&fixed).map(|(x, &d)| if d { F::zero() } else { *x }).collect();
        norm2(&masked)
    };
    let ext_norm = free_norm(&f_ext);
    let mut u = vec![F::zero(); ndof];
    if ext_norm == F::zero() && constraints.iter().all(|c| c.value == F::zero()) {
        check_inputs(mesh, materials, &u)?;
        return Ok(SolidState {
            displacement: u,
            converged: true,
            newton_iterations: 0,
        });
    }
    let mut total_iterations = 0;
    for inc in 1..=settings.increments {
        let lf: F = ramp(inc, settings.increments);
        for c in constraints {
            u[2 * c.node + c.component] = lf * c.value;
        }
        let mut reference = ext_norm;
        let mut converged = false;
        let mut last = F::infinity();
        for it in 0..=settings.max_newton {
            let (f_int, mut k) = assemble_band(mesh, materials, &u)?;
            let mut r: Vec<F> = f_ext.iter().zip(&f_int).map(|(fe, fi)| lf * *fe - *fi).collect();
            for (ri, &d) in r.iter_mut().zip(&fixed) {
                if d {
                    *ri = F::zero();
                }
            }
            let rn = norm2(&r);
            if it == 0 && reference == F::zero() {
                reference = rn;
            }
            last = rn;
            if rn <= settings.newton_tol * reference {
                converged = true;
                break;
            }
            if it == settings.max_newton {
                break;
            }
            let hbw = k.half_bandwidth();
            for (dof, &d) in fixed.iter().enumerate() {
                if d {
                    let lo = dof.saturating_sub(hbw);
                    let hi = (dof + hbw).min(ndof - 1);
                    for j in lo..=hi {
                        k.set(dof, j, F::zero());
                    }
                    k.set(dof, dof, F::one());
                }
            }
            let du = k
                .cholesky_solve(&r)
                .map_err(|e| ModelError::LinearSolve(e.to_string()))?;
            for (ui, di) in u.iter_mut().zip(&du) {
                *ui += *di;
            }
            total_iterations += 1;
        }
        if !converged {
            return Err(ModelError::NewtonDivergence {
                iterations: settings.max_newton,
                residual: last.to_f64_lossy(),
            });
        }
    }
    Ok(SolidState {
        displacement: u,
        converged: true,
        newton_iterations: total_iterations,
    })
}

/// Distinct node ids referenced by a load.
pub fn loaded_nodes<F: Scalar>(mesh: &Mesh2D<F>, load: &TractionLoad<F>) -> BTreeSet<usize> {
    load.edges
        .iter()
        .flat_map(|e| {
            let (a, b) = mesh.edge_nodes(e.element, e.local_edge);
            [a, b]
        })
        .collect()
}
