//! Run configuration files.

use std::fs;
use std::path::{Path, PathBuf};

use bioinverse_core::fem::{FemModel, Scenario};
use bioinverse_core::io::read_rays_csv;
use bioinverse_core::lmsolver::{LmConfig, ParameterSpec};
use bioinverse_core::models::growth::FingerScenario;
use bioinverse_core::models::{BumpModel, ForwardModel, OffsetModel};
use bioinverse_core::synth::RaySpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Forward model and its constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Bump {
        radius: f64,
        n_vertices: usize,
    },
    Offset {
        x_min: f64,
        x_max: f64,
        n_vertices: usize,
    },
    Growth {
        #[serde(default)]
        scenario: FingerScenario<f64>,
    },
    /// Scenario file, relative to the config file.
    Fem {
        scenario: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterBound {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RaysConfig {
    Vertices { indices: Vec<usize>, max_length: f64 },
    /// Every `step`-th vertex from `start` to `end` inclusive.
    Range {
        start: usize,
        end: usize,
        #[serde(default = "one")]
        step: usize,
        max_length: f64,
    },
    /// Ray CSV, relative to the config file.
    File(PathBuf),
}

fn one() -> usize {
    1
}

fn default_sigmas() -> Vec<f64> {
    vec![0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    /// Defaults to the model's own parameters and bounds.
    #[serde(default)]
    pub parameters: Option<Vec<ParameterBound>>,
    #[serde(default)]
    pub solver: LmConfig<f64>,
    #[serde(default)]
    pub rays: Option<RaysConfig>,
    #[serde(default)]
    pub theta_true: Option<Vec<f64>>,
    #[serde(default = "default_sigmas")]
    pub sigmas: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub initial_guesses: Vec<Vec<f64>>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

/// A parsed config together with everything it references.
pub struct Loaded {
    pub config: RunConfig,
    pub base_dir: PathBuf,
    pub model: Box<dyn ForwardModel<f64> + Send>,
    pub spec: ParameterSpec<f64>,
    /// SHA-256 over the canonical config and referenced file contents.
    pub hash: String,
    referenced: Vec<u8>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

fn read_referenced(path: &Path, what: &str) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Config(format!("{what} {}: {e}", path.display())))
}

impl Loaded {
    pub fn new(config: RunConfig, base_dir: &Path) -> Result<Self, CliError> {
        let mut referenced = Vec::new();
        let model: Box<dyn ForwardModel<f64> + Send> = match &config.model {
            ModelConfig::Bump { radius, n_vertices } => Box::new(
                BumpModel::new(*radius, *n_vertices).map_err(|e| CliError::Config(e.to_string()))?,
            ),
            ModelConfig::Offset { x_min, x_max, n_vertices } => Box::new(OffsetModel {
                x_min: *x_min,
                x_max: *x_max,
                n_vertices: *n_vertices,
            }),
            ModelConfig::Growth { scenario } => {
                Box::new(scenario.build().map_err(|e| CliError::Config(e.to_string()))?)
            }
            ModelConfig::Fem { scenario } => {
                let path = base_dir.join(scenario);
                referenced.extend(read_referenced(&path, "scenario")?);
                let s = Scenario::load(&path).map_err(|e| CliError::Config(e.to_string()))?;
                Box::new(FemModel::<f64>::new(&s).map_err(|e| CliError::Config(e.to_string()))?)
            }
        };
        let spec = match &config.parameters {
            Some(p) => ParameterSpec::new(
                p.iter().map(|b| b.name.clone()).collect(),
                p.iter().map(|b| b.lower).collect(),
                p.iter().map(|b| b.upper).collect(),
                p.iter().map(|b| b.unit.clone()).collect(),
            )
            .map_err(|e| CliError::Config(e.to_string()))?,
            None => default_spec(&config.model, &model.parameter_names()),
        };
        if spec.names() != model.parameter_names().as_slice() {
            return Err(CliError::Config(format!(
                "parameters {:?} do not match the model's {:?}",
                spec.names(),
                model.parameter_names()
            )));
        }
        config.solver.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(s) = config.sigmas.iter().find(|s| s.is_nan() || **s < 0.0 || !s.is_finite()) {
            return Err(CliError::Config(format!("sigma {s} must be a finite non-negative number")));
        }
        if let Some(RaysConfig::File(p)) = &config.rays {
            referenced.extend(read_referenced(&base_dir.join(p), "ray file")?);
        }
        let mut loaded = Self {
            config,
            base_dir: base_dir.to_path_buf(),
            model,
            spec,
            hash: String::new(),
            referenced,
        };
        loaded.rehash();
        Ok(loaded)
    }

    /// Recomputes the hash after a command-line override.
    pub fn rehash(&mut self) {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.config).expect("config serializes"));
        h.update(&self.referenced);
        self.hash = hex::encode(h.finalize());
    }

    pub fn ray_spec(&self) -> Result<RaySpec<f64>, CliError> {
        match &self.config.rays {
            None => Err(CliError::Config("no `rays` section".into())),
            Some(RaysConfig::Vertices { indices, max_length }) => Ok(RaySpec::Vertices {
                indices: indices.clone(),
                max_length: *max_length,
            }),
            Some(RaysConfig::Range { start, end, step, max_length }) => {
                if *step == 0 || start > end {
                    return Err(CliError::Config("ray range needs start <= end and step >= 1".into()));
                }
                Ok(RaySpec::Vertices {
                    indices: (*start..=*end).step_by(*step).collect(),
                    max_length: *max_length,
                })
            }
            Some(RaysConfig::File(p)) => {
                let rays = read_rays_csv(&self.base_dir.join(p)).map_err(|e| CliError::Config(e.to_string()))?;
                Ok(RaySpec::Explicit(rays))
            }
        }
    }

    pub fn theta_true(&self) -> Result<Vec<f64>, CliError> {
        let t = self.config.theta_true.clone().ok_or_else(|| CliError::Config("no `theta_true`".into()))?;
        self.check_theta(&t, "theta_true")?;
        Ok(t)
    }

    /// Rejects vectors of the wrong length or outside the open bounds.
    pub fn check_theta(&self, theta: &[f64], what: &str) -> Result<(), CliError> {
        if theta.len() != self.spec.len() {
            return Err(CliError::Config(format!(
                "{what} has {} values, the model has {} parameters",
                theta.len(),
                self.spec.len()
            )));
        }
        if let Some(i) = self.spec.first_violation(theta) {
            return Err(CliError::Config(format!(
                "{what}: {} = {} is outside the admissible range ({}, {})",
                self.spec.names()[i],
                theta[i],
                self.spec.lower()[i],
                self.spec.upper()[i]
            )));
        }
        Ok(())
    }

    pub fn initial_guesses(&self) -> Result<Vec<Vec<f64>>, CliError> {
        if self.config.initial_guesses.is_empty() {
            return Err(CliError::Config("no `initial_guesses`".into()));
        }
        for (i, g) in self.config.initial_guesses.iter().enumerate() {
            self.check_theta(g, &format!("initial guess {i}"))?;
        }
        Ok(self.config.initial_guesses.clone())
    }
}

fn default_spec(model: &ModelConfig, names: &[String]) -> ParameterSpec<f64> {
    let (lower, upper, units): (Vec<f64>, Vec<f64>, Vec<String>) = match model {
        ModelConfig::Bump { radius, .. } => {
            let b = 2.0 / radius;
            (vec![-b; 2], vec![b; 2], vec![String::new(); 2])
        }
        ModelConfig::Offset { .. } => (vec![-1e3], vec![1e3], vec!["mm".into()]),
        ModelConfig::Growth { .. } => (
            vec![0.0; 3],
            vec![1e7, 10.0, 10.0],
            vec!["mm^3/mol".into(), "mm^2 s/g".into(), "mm^2 s/g".into()],
        ),
        ModelConfig::Fem { .. } => {
            let mut lo = Vec::new();
            let mut hi = Vec::new();
            let mut un = Vec::new();
            for n in names {
                if n.starts_with("nu") {
                    lo.push(-0.99);
                    hi.push(0.499);
                    un.push("-".into());
                } else {
                    lo.push(1.0);
                    hi.push(1e5);
                    un.push("Pa".into());
                }
            }
            (lo, hi, un)
        }
    };
    ParameterSpec::new(names.to_vec(), lower, upper, units).expect("default bounds are valid")
}
