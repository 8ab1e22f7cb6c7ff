//! Scenario configuration documents (TOML).
//!
//! Vertices are numbered by their position in `sheaf.vertices`. Every
//! restriction map is either an explicit matrix (row-major, one array per row)
//! or a named generator sized from the vertex stalk:
//!
//! ```toml
//! [[sheaf.edges]]
//! between = [0, 3]
//! maps = ["identity", { projection = [0, 1] }]
//! ```

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub sheaf: SheafConfig,
    pub partition: PartitionConfig,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formation: Option<FormationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_formation: Option<TargetFormationConfig>,
    pub initial: InitialConfig,
    pub gains: GainsConfig,
    pub integration: IntegrationConfig,
    #[serde(default)]
    pub outputs: OutputsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SheafConfig {
    /// Stalk dimension of each vertex.
    pub vertices: Vec<usize>,
    #[serde(default)]
    pub edges: Vec<EdgeConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeConfig {
    pub between: [usize; 2],
    /// Edge stalk dimension; checked against the maps when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Restriction maps of `between[0]` and `between[1]`.
    pub maps: [MapConfig; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MapConfig {
    /// Identity on the vertex stalk (the constant-sheaf generator).
    Identity,
    /// `w I` on the vertex stalk.
    Scaled(f64),
    /// Selected coordinates of the vertex stalk, in order.
    Projection(Vec<usize>),
    /// Planar rotation by an angle in radians (2-dimensional stalks only).
    Rotation(f64),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    pub agents: Vec<usize>,
    pub targets: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    /// Core radius of the point and vortex singularities.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Rows `(p_x, p_y, p_z, alpha)`.
    #[serde(default)]
    pub singularities: Vec<[f64; 4]>,
    /// Rows `(q_x, q_y, q_z, a_x, a_y, a_z, gamma)`.
    #[serde(default)]
    pub vortices: Vec<[f64; 7]>,
    #[serde(default)]
    pub gaussians: Vec<GaussianConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lissajous: Option<LissajousConfig>,
    /// Agent models; agents not listed are single integrators.
    #[serde(default)]
    pub agents: Vec<ModelConfig>,
    /// Target models; targets not listed are stationary.
    #[serde(default)]
    pub targets: Vec<ModelConfig>,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig {
            epsilon: default_epsilon(),
            singularities: Vec::new(),
            vortices: Vec::new(),
            gaussians: Vec::new(),
            lissajous: None,
            agents: Vec::new(),
            targets: Vec::new(),
        }
    }
}

fn default_epsilon() -> f64 {
    sheaftrack::dynamics::DEFAULT_EPSILON
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianConfig {
    pub center: [f64; 3],
    pub direction: [f64; 3],
    pub strength: f64,
    pub width: f64,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LissajousConfig {
    /// `(A, B, C)`.
    pub amplitude: [f64; 3],
    /// `(a, b, c)` in rad/s.
    pub frequency: [f64; 3],
    #[serde(default)]
    pub phase_x: f64,
    #[serde(default)]
    pub phase_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub vertices: Vec<usize>,
    #[serde(default)]
    pub drift: Vec<DriftConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effectiveness: Option<EffectivenessConfig>,
    #[serde(default)]
    pub disturbance: DisturbanceConfig,
    /// Declared bound on the disturbance norm; defaults to the disturbance's
    /// own sup-norm and may not be smaller.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disturbance_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftConfig {
    /// The background flow field (planar stalks sample it at `z = 0`).
    Field,
    /// The Lissajous reference velocity (3-dimensional stalks).
    Lissajous,
    /// `A x + b`.
    Affine { a: Vec<Vec<f64>>, b: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EffectivenessConfig {
    Identity,
    Matrix(Vec<Vec<f64>>),
    /// `(1 + depth sin(omega t)) base`.
    Modulated {
        base: Vec<Vec<f64>>,
        depth: f64,
        omega: f64,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DisturbanceConfig {
    #[default]
    None,
    Constant(Vec<f64>),
    /// Componentwise `a_j sin(w_j t + phi_j)`.
    Sinusoid {
        amplitude: Vec<f64>,
        frequency: Vec<f64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        phase: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormationConfig {
    /// Commanded configuration, one block per vertex. Only its differences
    /// across edges matter.
    pub template: Vec<Vec<f64>>,
    /// Agent groups formed about one target, used for the residual report.
    #[serde(default)]
    pub groups: Vec<GroupConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub target: usize,
    pub agents: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetFormationConfig {
    pub gain: f64,
    /// Pairs of target vertices.
    pub edges: Vec<[usize; 2]>,
    /// One block per target (in partition order). Defaults to the target
    /// blocks of `formation.template`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    /// One block per agent, in partition order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agents: Option<Vec<Vec<f64>>>,
    /// Draw agent states uniformly from `[lo, hi]` per coordinate instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_box: Option<[f64; 2]>,
    /// One block per target, in partition order.
    pub targets: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsConfig {
    pub k1: f64,
    pub lambda_v: f64,
    #[serde(default)]
    pub rho0: f64,
    #[serde(default)]
    pub rho1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_bar: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationConfig {
    pub h: f64,
    pub horizon: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub stride: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsConfig {
    #[serde(default = "yes")]
    pub plots: bool,
    #[serde(default = "default_trajectory")]
    pub trajectory: String,
    #[serde(default = "default_summary")]
    pub summary: String,
}

impl Default for OutputsConfig {
    fn default() -> Self {
        OutputsConfig {
            plots: true,
            trajectory: default_trajectory(),
            summary: default_summary(),
        }
    }
}

fn yes() -> bool {
    true
}

fn default_trajectory() -> String {
    "trajectory.csv".into()
}

fn default_summary() -> String {
    "summary.txt".into()
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Serializes with every default made explicit.
    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

/// `serialize(parse(text))`.
pub fn normalize(text: &str) -> Result<String> {
    ScenarioConfig::parse(text)?.to_toml()
}
