//! Quadrilateral meshes, the JSON mesh format and structured generators.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::geometry::Point2;
use crate::scalar::Scalar;

use super::element::{gauss_points, shape_derivatives};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeshError {
    #[error("mesh has no elements")]
    Empty,
    #[error("node {0} is not finite")]
    NonFiniteNode(usize),
    #[error("element {element} references node {node}, mesh has {len} nodes")]
    BadConnectivity { element: usize, node: usize, len: usize },
    #[error("elem_material has {got} entries for {expected} elements")]
    MaterialCount { got: usize, expected: usize },
    #[error("element {element} has non-positive reference Jacobian {det:e}")]
    NegativeJacobian { element: usize, det: f64 },
    #[error("node set {set:?} references node {node} outside the mesh")]
    BadNodeSet { set: String, node: usize },
    #[error("unknown node set {0:?}")]
    UnknownSet(String),
    #[error("invalid generator input: {0}")]
    Generator(String),
}

/// Serialized mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshFile {
    pub nodes: Vec<[f64; 2]>,
    pub elems: Vec<[usize; 4]>,
    pub elem_material: Vec<usize>,
    #[serde(default)]
    pub node_sets: BTreeMap<String, Vec<usize>>,
}

/// Validated quadrilateral mesh. Element nodes are counter-clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh2D<F> {
    nodes: Vec<Point2<F>>,
    elems: Vec<[usize; 4]>,
    elem_material: Vec<usize>,
    node_sets: BTreeMap<String, Vec<usize>>,
    hbw: usize,
}

impl<F: Scalar> Mesh2D<F> {
    pub fn new(
        nodes: Vec<Point2<F>>,
        elems: Vec<[usize; 4]>,
        elem_material: Vec<usize>,
        node_sets: BTreeMap<String, Vec<usize>>,
    ) -> Result<Self, MeshError> {
        if elems.is_empty() {
            return Err(MeshError::Empty);
        }
        if let Some(i) = nodes.iter().position(|p| !p.is_finite()) {
            return Err(MeshError::NonFiniteNode(i));
        }
        if elem_material.len() != elems.len() {
            return Err(MeshError::MaterialCount {
                got: elem_material.len(),
                expected: elems.len(),
            });
        }
        let mut hbw = 0;
        for (e, conn) in elems.iter().enumerate() {
            if let Some(&node) = conn.iter().find(|&&n| n >= nodes.len()) {
                return Err(MeshError::BadConnectivity {
                    element: e,
                    node,
                    len: nodes.len(),
                });
            }
            let lo = *conn.iter().min().unwrap();
            let hi = *conn.iter().max().unwrap();
            hbw = hbw.max(2 * (hi - lo) + 1);
            for (xi, eta) in gauss_points::<F>() {
                let dn = shape_derivatives(xi, eta);
                let mut j = [[F::zero(); 2]; 2];
                for a in 0..4 {
                    let p = nodes[conn[a]];
                    for k in 0..2 {
                        j[0][k] += p.x * dn[a][k];
                        j[1][k] += p.y * dn[a][k];
                    }
                }
                let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                if !(det > F::zero()) {
                    return Err(MeshError::NegativeJacobian {
                        element: e,
                        det: det.to_f64_lossy(),
                    });
                }
            }
        }
        for (name, set) in &node_sets {
            if let Some(&node) = set.iter().find(|&&n| n >= nodes.len()) {
                return Err(MeshError::BadNodeSet { set: name.clone(), node });
            }
        }
        Ok(Self {
            nodes,
            elems,
            elem_material,
            node_sets,
            hbw,
        })
    }

    pub fn from_file(file: &MeshFile) -> Result<Self, MeshError> {
        let nodes = file.nodes.iter().map(|[x, y]| Point2::new(F::of(*x), F::of(*y))).collect();
        Self::new(nodes, file.elems.clone(), file.elem_material.clone(), file.node_sets.clone())
    }

    pub fn to_file(&self) -> MeshFile {
        MeshFile {
            nodes: self.nodes.iter().map(|p| [p.x.to_f64_lossy(), p.y.to_f64_lossy()]).collect(),
            elems: self.elems.clone(),
            elem_material: self.elem_material.clone(),
            node_sets: self.node_sets.clone(),
        }
    }

    pub fn nodes(&self) -> &[Point2<F>] {
        &self.nodes
    }

    pub fn elems(&self) -> &[[usize; 4]] {
        &self.elems
    }

    pub fn elem_material(&self) -> &[usize] {
        &self.elem_material
    }

    pub fn node_sets(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.node_sets
    }

    pub fn node_set(&self, name: &str) -> Result<&[usize], MeshError> {
        self.node_sets
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| MeshError::UnknownSet(name.to_string()))
    }

    /// Half bandwidth of the assembled stiffness in DOF numbering.
    pub fn dof_half_bandwidth(&self) -> usize {
        self.hbw
    }

    /// Node ids of local edge `k` (`k` to `k + 1`, counter-clockwise).
    pub fn edge_nodes(&self, element: usize, local_edge: usize) -> (usize, usize) {
        let c = self.elems[element];
        (c[local_edge % 4], c[(local_edge + 1) % 4])
    }

    /// Element edges not shared with another element.
    pub fn boundary_edges(&self) -> BTreeSet<(usize, usize)> {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for e in 0..self.elems.len() {
            for k in 0..4 {
                let (a, b) = self.edge_nodes(e, k);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let mut out = BTreeSet::new();
        for e in 0..self.elems.len() {
            for k in 0..4 {
                let (a, b) = self.edge_nodes(e, k);
                if count[&(a.min(b), a.max(b))] == 1 {
                    out.insert((e, k));
                }
            }
        }
        out
    }

    /// Boundary edges whose two nodes both belong to `set`.
    pub fn boundary_edges_in(&self, set: &str) -> Result<Vec<(usize, usize)>, MeshError> {
        let nodes: BTreeSet<usize> = self.node_set(set)?.iter().copied().collect();
        Ok(self
            .boundary_edges()
            .into_iter()
            .filter(|&(e, k)| {
                let (a, b) = self.edge_nodes(e, k);
                nodes.contains(&a) && nodes.contains(&b)
            })
            .collect())
    }
}

fn structured<F: Scalar>(
    nx: usize,
    ny: usize,
    pos: impl Fn(usize, usize) -> Point2<F>,
    material: impl Fn(usize, usize) -> usize,
) -> (Vec<Point2<F>>, Vec<[usize; 4]>, Vec<usize>) {
    let id = |i: usize, j: usize| i * (ny + 1) + j;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for i in 0..=nx {
        for j in 0..=ny {
            nodes.push(pos(i, j));
        }
    }
    let mut elems = Vec::with_capacity(nx * ny);
    let mut mats = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            elems.push([id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            mats.push(material(i, j));
        }
    }
    (nodes, elems, mats)
}

/// Rectangle `[0, lx] × [0, ly]` with sets `left`, `right`, `bottom`, `top`.
pub fn rectangle_mesh<F: Scalar>(nx: usize, ny: usize, lx: F, ly: F) -> Result<Mesh2D<F>, MeshError> {
    if nx == 0 || ny == 0 || !(lx > F::zero()) || !(ly > F::zero()) {
        return Err(MeshError::Generator("rectangle needs nx, ny ≥ 1 and positive sides".into()));
    }
    let dx = lx / F::of(nx as f64);
    let dy = ly / F::of(ny as f64);
    let (nodes, elems, mats) = structured(
        nx,
        ny,
        |i, j| Point2::new(dx * F::of(i as f64), dy * F::of(j as f64)),
        |_, _| 0,
    );
    let id = |i: usize, j: usize| i * (ny + 1) + j;
    let mut sets = BTreeMap::new();
    sets.insert("left".into(), (0..=ny).map(|j| id(0, j)).collect());
    sets.insert("right".into(), (0..=ny).map(|j| id(nx, j)).collect());
    sets.insert("bottom".into(), (0..=nx).map(|i| id(i, 0)).collect());
    sets.insert("top".into(), (0..=nx).map(|i| id(i, ny)).collect());
    Mesh2D::new(nodes, elems, mats, sets)
}

/// Structured mound on a flat substratum.
///
/// The top boundary follows `y = H (s + (1 - s) sin(πξ))` for `ξ ∈ [0, 1]`
/// across the width, where `s` is the shoulder fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BumpMeshSpec {
    pub nx: usize,
    pub ny: usize,
    pub width: f64,
    pub height: f64,
    pub shoulder: f64,
    /// Bottom element rows assigned to the footing subdomain. Zero gives a
    /// single material id.
    pub footing_rows: usize,
}

impl Default for BumpMeshSpec {
    fn default() -> Self {
        Self {
            nx: 16,
            ny: 8,
            width: 0.6,
            height: 0.3,
            shoulder: 0.4,
            footing_rows: 0,
        }
    }
}

/// Mound mesh with node sets:
///
/// - `base`: substratum nodes, left to right
/// - `interface`: up the left wall, across the top, down the right wall
/// - `upstream_face`, `downstream_face`: side walls, bottom to top
/// - `crest_upstream`, `crest_downstream`: top nodes left and right of the apex
///
/// With `footing_rows > 0` material ids are 0 for the upstream half, 1 for the
/// downstream half and 2 for the footing.
pub fn bump_mesh<F: Scalar>(spec: &BumpMeshSpec) -> Result<Mesh2D<F>, MeshError> {
    let BumpMeshSpec {
        nx,
        ny,
        width,
        height,
        shoulder,
        footing_rows,
    } = *spec;
    if nx < 2 || ny == 0 || !(width > 0.0) || !(height > 0.0) || !(shoulder > 0.0 && shoulder <= 1.0) {
        return Err(MeshError::Generator(format!("{spec:?}")));
    }
    if footing_rows >= ny {
        return Err(MeshError::Generator("footing_rows must be below ny".into()));
    }
    let (nodes, elems, mats) = structured(
        nx,
        ny,
        |i, j| {
            let xi = i as f64 / nx as f64;
            let eta = j as f64 / ny as f64;
            let top = height * (shoulder + (1.0 - shoulder) * (std::f64::consts::PI * xi).sin());
            Point2::new(F::of(-0.5 * width + xi * width), F::of(eta * top))
        },
        |i, j| {
            if footing_rows == 0 {
                0
            } else if j < footing_rows {
                2
            } else if 2 * i < nx {
                0
            } else {
                1
            }
        },
    );
    let id = |i: usize, j: usize| i * (ny + 1) + j;
    let mut sets = BTreeMap::new();
    sets.insert("base".into(), (0..=nx).map(|i| id(i, 0)).collect());
    let mut interface: Vec<usize> = (0..=ny).map(|j| id(0, j)).collect();
    interface.extend((1..=nx).map(|i| id(i, ny)));
    interface.extend((0..ny).rev().map(|j| id(nx, j)));
    sets.insert("interface".into(), interface);
    sets.insert("upstream_face".into(), (0..=ny).map(|j| id(0, j)).collect());
    sets.insert("downstream_face".into(), (0..=ny).map(|j| id(nx, j)).collect());
    sets.insert("crest_upstream".into(), (0..=nx / 2).map(|i| id(i, ny)).collect());
    sets.insert("crest_downstream".into(), (nx / 2..=nx).map(|i| id(i, ny)).collect());
    Mesh2D::new(nodes, elems, mats, sets)
}
