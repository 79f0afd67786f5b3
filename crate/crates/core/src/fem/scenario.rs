//! Identification scenarios: mesh, subdomain parameters, supports and loads.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::geometry::{InterfaceCurve, Point2};
use crate::models::{check_segments, ForwardModel, ModelError};
use crate::scalar::Scalar;

use super::mesh::{bump_mesh, BumpMeshSpec, Mesh2D, MeshError, MeshFile};
use super::{solve_static, Constraint, EdgeTraction, Material, SolidState, SolverSettings, TractionLoad};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("{0}")]
    Invalid(String),
}

/// Material value: a named parameter or a fixed number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamRef {
    Fixed(f64),
    Param(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubdomainSpec {
    pub id: usize,
    #[serde(rename = "E")]
    pub e: ParamRef,
    pub nu: ParamRef,
}

/// Prescribed displacement of a node set; absent components are free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletSpec {
    pub set: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
}

/// Constant traction on every boundary edge of a node set.
///
/// `pressure` acts against the outward normal, `shear` along the interface
/// traversal direction, and `traction` is added as a fixed vector. All in Pa,
/// evaluated on the reference edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TractionSegment {
    pub set: String,
    #[serde(default)]
    pub pressure: f64,
    #[serde(default)]
    pub shear: f64,
    #[serde(default)]
    pub traction: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeshSource {
    Path(PathBuf),
    Inline(MeshFile),
    Generated { generate: BumpMeshSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub mesh: MeshSource,
    /// Parameter order; inferred from the subdomains when empty.
    #[serde(default)]
    pub parameters: Vec<String>,
    pub subdomains: Vec<SubdomainSpec>,
    pub dirichlet: Vec<DirichletSpec>,
    pub tractions: Vec<TractionSegment>,
    #[serde(default = "default_interface_set")]
    pub interface_set: String,
    #[serde(default = "default_increments")]
    pub increments: usize,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_max_newton")]
    pub max_newton: usize,
}

fn default_interface_set() -> String {
    "interface".into()
}
fn default_increments() -> usize {
    5
}
fn default_newton_tol() -> f64 {
    1e-10
}
fn default_max_newton() -> usize {
    25
}

fn flow_profile() -> Vec<TractionSegment> {
    let seg = |set: &str, pressure: f64, shear: f64| TractionSegment {
        set: set.into(),
        pressure,
        shear,
        traction: [0.0, 0.0],
    };
    vec![
        seg("upstream_face", 4.0, 0.5),
        seg("crest_upstream", 2.0, 2.0),
        seg("crest_downstream", -1.0, 1.5),
        seg("downstream_face", -0.5, 0.3),
    ]
}

fn clamped_base() -> Vec<DirichletSpec> {
    vec![DirichletSpec {
        set: "base".into(),
        x: Some(0.0),
        y: Some(0.0),
    }]
}

impl Scenario {
    /// Single-material mound with parameters `E` and `nu`.
    pub fn homogeneous_bump(mesh: BumpMeshSpec) -> Self {
        Self {
            mesh: MeshSource::Generated {
                generate: BumpMeshSpec { footing_rows: 0, ..mesh },
            },
            parameters: vec!["E".into(), "nu".into()],
            subdomains: vec![SubdomainSpec {
                id: 0,
                e: ParamRef::Param("E".into()),
                nu: ParamRef::Param("nu".into()),
            }],
            dirichlet: clamped_base(),
            tractions: flow_profile(),
            interface_set: default_interface_set(),
            increments: default_increments(),
            newton_tol: default_newton_tol(),
            max_newton: default_max_newton(),
        }
    }

    /// Three subdomains (upstream, downstream, footing). With `fixed_nu`
    /// the Poisson ratios are pinned and only `E1..E3` are parameters.
    pub fn heterogeneous_bump(mesh: BumpMeshSpec, fixed_nu: Option<[f64; 3]>) -> Self {
        let footing_rows = if mesh.footing_rows == 0 { 2.min(mesh.ny - 1).max(1) } else { mesh.footing_rows };
        let mut parameters = Vec::new();
        let subdomains = (0..3)
            .map(|i| {
                let e = format!("E{}", i + 1);
                parameters.push(e.clone());
                let nu = match fixed_nu {
                    Some(v) => ParamRef::Fixed(v[i]),
                    None => {
                        let n = format!("nu{}", i + 1);
                        parameters.push(n.clone());
                        ParamRef::Param(n)
                    }
                };
                SubdomainSpec {
                    id: i,
                    e: ParamRef::Param(e),
                    nu,
                }
            })
            .collect();
        Self {
            mesh: MeshSource::Generated {
                generate: BumpMeshSpec { footing_rows, ..mesh },
            },
            parameters,
            subdomains,
            dirichlet: clamped_base(),
            tractions: flow_profile(),
            interface_set: default_interface_set(),
            increments: default_increments(),
            newton_tol: default_newton_tol(),
            max_newton: default_max_newton(),
        }
    }

    /// Reads a scenario; a relative mesh path resolves against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut s: Scenario = serde_json::from_str(&text).map_err(|source| ScenarioError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        if let MeshSource::Path(p) = &s.mesh {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    s.mesh = MeshSource::Path(dir.join(p));
                }
            }
        }
        Ok(s)
    }

    pub fn parameter_names(&self) -> Vec<String> {
        if !self.parameters.is_empty() {
            return self.parameters.clone();
        }
        let mut out: Vec<String> = Vec::new();
        for s in &self.subdomains {
            for r in [&s.e, &s.nu] {
                if let ParamRef::Param(n) = r {
                    if !out.contains(n) {
                        out.push(n.clone());
                    }
                }
            }
        }
        out
    }

    fn mesh_file(&self) -> Result<Option<MeshFile>, ScenarioError> {
        match &self.mesh {
            MeshSource::Path(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ScenarioError::Io {
                    path: p.clone(),
                    source,
                })?;
                let file = serde_json::from_str(&text).map_err(|source| ScenarioError::Parse {
                    path: p.clone(),
                    source,
                })?;
                Ok(Some(file))
            }
            MeshSource::Inline(f) => Ok(Some(f.clone())),
            MeshSource::Generated { .. } => Ok(None),
        }
    }

    pub fn build_mesh<F: Scalar>(&self) -> Result<Mesh2D<F>, ScenarioError> {
        match self.mesh_file()? {
            Some(f) => Ok(Mesh2D::from_file(&f)?),
            None => match &self.mesh {
                MeshSource::Generated { generate } => Ok(bump_mesh(generate)?),
                _ => unreachable!(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Slot<F> {
    Fixed(F),
    Param(usize),
}

/// Forward model mapping subdomain `(E, ν)` values to the deformed interface.
#[derive(Debug, Clone)]
pub struct FemModel<F> {
    mesh: Mesh2D<F>,
    names: Vec<String>,
    slots: Vec<(Slot<F>, Slot<F>)>,
    load: TractionLoad<F>,
    constraints: Vec<Constraint<F>>,
    interface: Vec<usize>,
    settings: SolverSettings<F>,
}

impl<F: Scalar> FemModel<F> {
    pub fn new(scenario: &Scenario) -> Result<Self, ScenarioError> {
        let mesh = scenario.build_mesh::<F>()?;
        Self::with_mesh(scenario, mesh)
    }

    pub fn with_mesh(scenario: &Scenario, mesh: Mesh2D<F>) -> Result<Self, ScenarioError> {
        let names = scenario.parameter_names();
        if names.is_empty() {
            return Err(ScenarioError::Invalid("scenario has no free parameters".into()));
        }
        let n_mat = mesh.elem_material().iter().max().map_or(0, |m| m + 1);
        let mut slots = vec![None; n_mat];
        let slot = |r: &ParamRef| -> Result<Slot<F>, ScenarioError> {
            match r {
                ParamRef::Fixed(v) => Ok(Slot::Fixed(F::of(*v))),
                ParamRef::Param(n) => names
                    .iter()
                    .position(|m| m == n)
                    .map(Slot::Param)
                    .ok_or_else(|| ScenarioError::Invalid(format!("parameter {n:?} is not listed"))),
            }
        };
        for s in &scenario.subdomains {
            if s.id >= n_mat {
                return Err(ScenarioError::Invalid(format!("subdomain {} has no elements", s.id)));
            }
            slots[s.id] = Some((slot(&s.e)?, slot(&s.nu)?));
        }
        let slots = slots
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.ok_or_else(|| ScenarioError::Invalid(format!("material id {i} has no subdomain entry"))))
            .collect::<Result<Vec<_>, _>>()?;
        let used: Vec<bool> = (0..names.len())
            .map(|p| {
                slots
                    .iter()
                    .any(|(a, b)| *a == Slot::Param(p) || *b == Slot::Param(p))
            })
            .collect();
        if let Some(p) = used.iter().position(|u| !u) {
            return Err(ScenarioError::Invalid(format!("parameter {:?} is not used", names[p])));
        }

        let mut constraints = Vec::new();
        for d in &scenario.dirichlet {
            for &node in mesh.node_set(&d.set)? {
                for (component, v) in [(0, d.x), (1, d.y)] {
                    if let Some(v) = v {
                        constraints.push(Constraint {
                            node,
                            component,
                            value: F::of(v),
                        });
                    }
                }
            }
        }
        if constraints.is_empty() {
            return Err(ScenarioError::Invalid("scenario has no Dirichlet constraints".into()));
        }

        let mut edges = Vec::new();
        for seg in &scenario.tractions {
            for (element, local_edge) in mesh.boundary_edges_in(&seg.set)? {
                let (a, b) = mesh.edge_nodes(element, local_edge);
                let d = mesh.nodes()[b].sub(mesh.nodes()[a]);
                let d = d.scale(F::one() / d.norm());
                let outward = d.right_perp();
                let along = d.scale(-F::one());
                let t = outward
                    .scale(-F::of(seg.pressure))
                    .add(along.scale(F::of(seg.shear)))
                    .add(Point2::new(F::of(seg.traction[0]), F::of(seg.traction[1])));
                edges.push(EdgeTraction {
                    element,
                    local_edge,
                    traction: t,
                });
            }
        }
        let interface = mesh.node_set(&scenario.interface_set)?.to_vec();
        if interface.len() < 2 {
            return Err(ScenarioError::Invalid("interface set needs at least 2 nodes".into()));
        }
        let settings = SolverSettings {
            increments: scenario.increments,
            newton_tol: F::of(scenario.newton_tol),
            max_newton: scenario.max_newton,
        };
        if settings.increments == 0 || settings.max_newton == 0 || !(scenario.newton_tol > 0.0) {
            return Err(ScenarioError::Invalid("invalid solver settings".into()));
        }
        Ok(Self {
            mesh,
            names,
            slots,
            load: TractionLoad { edges },
            constraints,
            interface,
            settings,
        })
    }

    pub fn mesh(&self) -> &Mesh2D<F> {
        &self.mesh
    }

    pub fn load(&self) -> &TractionLoad<F> {
        &self.load
    }

    pub fn constraints(&self) -> &[Constraint<F>] {
        &self.constraints
    }

    pub fn interface_nodes(&self) -> &[usize] {
        &self.interface
    }

    pub fn settings(&self) -> &SolverSettings<F> {
        &self.settings
    }

    pub fn materials(&self, params: &[F]) -> Result<Vec<Material<F>>, ModelError> {
        crate::models::expect_len(params, self.names.len(), "fem")?;
        if params.iter().any(|p| !p.is_finite()) {
            return Err(ModelError::InvalidParameters("parameters must be finite".into()));
        }
        let get = |s: Slot<F>| match s {
            Slot::Fixed(v) => v,
            Slot::Param(i) => params[i],
        };
        self.slots.iter().map(|&(e, nu)| Material::new(get(e), get(nu))).collect()
    }

    pub fn solve(&self, params: &[F]) -> Result<SolidState<F>, ModelError> {
        let materials = self.materials(params)?;
        solve_static(&self.mesh, &materials, &self.load, &self.constraints, &self.settings)
    }

    /// Interface nodes in deformed position.
    pub fn interface_curve(&self, state: &SolidState<F>) -> Result<InterfaceCurve<F>, ModelError> {
        let pts = self
            .interface
            .iter()
            .map(|&n| self.mesh.nodes()[n].add(state.node_displacement(n)))
            .collect();
        let curve = InterfaceCurve::open(pts)?;
        check_segments(&curve)?;
        Ok(curve)
    }

    /// Reference interface.
    pub fn reference_curve(&self) -> Result<InterfaceCurve<F>, ModelError> {
        let pts = self.interface.iter().map(|&n| self.mesh.nodes()[n]).collect();
        Ok(InterfaceCurve::open(pts)?)
    }
}

impl<F: Scalar> ForwardModel<F> for FemModel<F> {
    fn id(&self) -> &str {
        "fem"
    }

    fn parameter_names(&self) -> Vec<String> {
        self.names.clone()
    }

    fn evaluate(&self, params: &[F]) -> Result<InterfaceCurve<F>, ModelError> {
        let state = self.solve(params)?;
        self.interface_curve(&state)
    }
}

/// Parameter map helper for reporting.
pub fn named_parameters<F: Scalar>(names: &[String], values: &[F]) -> BTreeMap<String, f64> {
    names
        .iter()
        .cloned()
        .zip(values.iter().map(|v| v.to_f64_lossy()))
        .collect()
}
