//! Turning a [`ScenarioConfig`] into a runnable [`Scenario`].

use std::sync::Arc;

use anyhow::{anyhow, bail, ensure, Context, Result};
use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sheaftrack::dynamics::{
    AffineDrift, ConstantDisturbance, ConstantEffectiveness, FieldDrift, LissajousDrift,
    ModulatedEffectiveness, SinusoidalDisturbance, SumDrift, ZeroDisturbance, ZeroDrift,
};
use sheaftrack::{
    AgentModel, BoundParams, Cochain, ControllerGains, Degree, Disturbance, Drift, Effectiveness,
    FlowField, Integration, Lissajous, OffsetConsensus, Scenario, SheafBuilder, TargetModel,
    TrackingProblem, VertexSubset,
};

use crate::config::{
    DisturbanceConfig, DriftConfig, DynamicsConfig, EffectivenessConfig, MapConfig, ModelConfig,
    ScenarioConfig,
};

/// A loaded scenario with the bookkeeping needed for reports.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ScenarioConfig,
    pub scenario: Scenario<f64>,
    pub groups: Vec<Group>,
    /// Commanded target configuration (one block per target), if any.
    pub target_template: Option<Vec<DVector<f64>>>,
    /// Formation scale used to normalize residuals.
    pub scale: Option<f64>,
}

/// Agents formed about one target, with their commanded offsets from it
/// (compared on the coordinates the two stalks share).
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub target: usize,
    pub agents: Vec<usize>,
    pub offsets: Vec<DVector<f64>>,
}

/// Overrides applied on top of a configuration.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub h: Option<f64>,
    pub horizon: Option<f64>,
    pub seed: Option<u64>,
    pub no_plots: bool,
}

impl Overrides {
    pub fn apply(&self, config: &mut ScenarioConfig) {
        if let Some(h) = self.h {
            config.integration.h = h;
        }
        if let Some(t) = self.horizon {
            config.integration.horizon = t;
        }
        if let Some(s) = self.seed {
            config.integration.seed = s;
        }
        if self.no_plots {
            config.outputs.plots = false;
        }
    }
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let Some(first) = rows.first() else {
        bail!("{what}: matrix has no rows");
    };
    for (r, row) in rows.iter().enumerate() {
        ensure!(
            row.len() == first.len(),
            "{what}: row {r} has {} entries, expected {}",
            row.len(),
            first.len()
        );
    }
    ensure!(!first.is_empty(), "{what}: matrix has no columns");
    Ok(DMatrix::from_fn(rows.len(), first.len(), |r, c| rows[r][c]))
}

fn restriction(map: &MapConfig, dim: usize, what: &str) -> Result<DMatrix<f64>> {
    let m = match map {
        MapConfig::Identity => DMatrix::identity(dim, dim),
        MapConfig::Scaled(w) => DMatrix::identity(dim, dim) * *w,
        MapConfig::Projection(coords) => {
            ensure!(!coords.is_empty(), "{what}: empty projection");
            for &c in coords {
                ensure!(
                    c < dim,
                    "{what}: projection coordinate {c} out of range for a {dim}-dimensional stalk"
                );
            }
            DMatrix::from_fn(
                coords.len(),
                dim,
                |r, c| if coords[r] == c { 1.0 } else { 0.0 },
            )
        }
        MapConfig::Rotation(theta) => {
            ensure!(
                dim == 2,
                "{what}: rotation needs a 2-dimensional stalk, vertex has {dim}"
            );
            let (s, c) = theta.sin_cos();
            DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
        }
        MapConfig::Matrix(rows) => {
            let m = matrix(rows, what)?;
            ensure!(
                m.ncols() == dim,
                "{what}: matrix has {} columns but the vertex stalk has dimension {dim}",
                m.ncols()
            );
            m
        }
    };
    Ok(m)
}

fn block(values: &[f64], dim: usize, what: &str) -> Result<DVector<f64>> {
    ensure!(
        values.len() == dim,
        "{what}: expected {dim} entries, got {}",
        values.len()
    );
    Ok(DVector::from_column_slice(values))
}

fn field(d: &DynamicsConfig) -> Result<FlowField<f64>> {
    let mut f = FlowField::new(d.epsilon)?;
    for row in &d.singularities {
        f = f.with_singularity(*row);
    }
    for (k, row) in d.vortices.iter().enumerate() {
        f = f
            .with_vortex(*row)
            .with_context(|| format!("vortex row {k}"))?;
    }
    for (k, g) in d.gaussians.iter().enumerate() {
        f = f
            .with_gaussian(
                Vector3::from(g.center),
                Vector3::from(g.direction),
                g.strength,
                g.width,
                g.length,
            )
            .with_context(|| format!("gaussian component {k}"))?;
    }
    Ok(f)
}

struct ModelParts {
    drift: Arc<dyn Drift<f64>>,
    effectiveness: Option<Arc<dyn Effectiveness<f64>>>,
    disturbance: Arc<dyn Disturbance<f64>>,
    bound: f64,
}

fn model_parts(
    m: &ModelConfig,
    dim: usize,
    what: &str,
    field: &Arc<FlowField<f64>>,
    lissajous: Option<&Lissajous<f64>>,
) -> Result<ModelParts> {
    let mut terms: Vec<Arc<dyn Drift<f64>>> = Vec::new();
    for d in &m.drift {
        terms.push(match d {
            DriftConfig::Field => {
                ensure!(
                    dim == 2 || dim == 3,
                    "{what}: field drift needs a 2- or 3-dimensional stalk, got {dim}"
                );
                Arc::new(FieldDrift::new(field.clone()))
            }
            DriftConfig::Lissajous => {
                let l = lissajous
                    .ok_or_else(|| anyhow!("{what}: lissajous drift without dynamics.lissajous"))?;
                Arc::new(LissajousDrift(*l))
            }
            DriftConfig::Affine { a, b } => {
                let a = matrix(a, &format!("{what}: affine drift"))?;
                ensure!(
                    a.shape() == (dim, dim),
                    "{what}: affine drift matrix must be {dim}x{dim}"
                );
                Arc::new(AffineDrift {
                    a,
                    b: block(b, dim, &format!("{what}: affine drift offset"))?,
                })
            }
        });
    }
    let drift: Arc<dyn Drift<f64>> = match terms.len() {
        0 => Arc::new(ZeroDrift),
        1 => terms.pop().expect("one term"),
        _ => Arc::new(SumDrift { terms }),
    };
    let effectiveness: Option<Arc<dyn Effectiveness<f64>>> = match &m.effectiveness {
        None => None,
        Some(EffectivenessConfig::Identity) => Some(Arc::new(ConstantEffectiveness::identity(dim))),
        Some(EffectivenessConfig::Matrix(rows)) => {
            let g = matrix(rows, &format!("{what}: effectiveness"))?;
            ensure!(
                g.nrows() == dim,
                "{what}: effectiveness must have {dim} rows"
            );
            Some(Arc::new(ConstantEffectiveness(g)))
        }
        Some(EffectivenessConfig::Modulated { base, depth, omega }) => {
            let g = matrix(base, &format!("{what}: effectiveness"))?;
            ensure!(
                g.nrows() == dim,
                "{what}: effectiveness must have {dim} rows"
            );
            ensure!(
                depth.abs() < 1.0,
                "{what}: modulation depth must be below 1 in magnitude"
            );
            Some(Arc::new(ModulatedEffectiveness {
                base: g,
                depth: *depth,
                omega: *omega,
            }))
        }
    };
    let disturbance: Arc<dyn Disturbance<f64>> = match &m.disturbance {
        DisturbanceConfig::None => Arc::new(ZeroDisturbance(dim)),
        DisturbanceConfig::Constant(v) => Arc::new(ConstantDisturbance(block(
            v,
            dim,
            &format!("{what}: disturbance"),
        )?)),
        DisturbanceConfig::Sinusoid {
            amplitude,
            frequency,
            phase,
        } => {
            let phase = if phase.is_empty() {
                vec![0.0; dim]
            } else {
                phase.clone()
            };
            Arc::new(SinusoidalDisturbance {
                amplitude: block(amplitude, dim, &format!("{what}: disturbance amplitude"))?,
                frequency: block(frequency, dim, &format!("{what}: disturbance frequency"))?,
                phase: block(&phase, dim, &format!("{what}: disturbance phase"))?,
            })
        }
    };
    let own = disturbance.bound();
    let bound = match m.disturbance_bound {
        Some(b) => {
            ensure!(
                b >= own,
                "{what}: declared disturbance bound {b} is below the disturbance sup-norm {own}"
            );
            b
        }
        None => own,
    };
    Ok(ModelParts {
        drift,
        effectiveness,
        disturbance,
        bound,
    })
}

/// Index of the model covering each vertex in `members`.
fn assign(models: &[ModelConfig], members: &[usize], role: &str) -> Result<Vec<Option<usize>>> {
    let mut out = vec![None; members.len()];
    for (k, m) in models.iter().enumerate() {
        for &v in &m.vertices {
            let pos = members.iter().position(|&x| x == v).ok_or_else(|| {
                anyhow!("dynamics.{role}[{k}]: vertex {v} is not one of the {role}")
            })?;
            ensure!(
                out[pos].is_none(),
                "dynamics.{role}: vertex {v} is listed twice"
            );
            out[pos] = Some(k);
        }
    }
    Ok(out)
}

/// Builds the sheaf, problem and dynamics. Infeasible problems load
/// successfully; [`crate::check`] reports the obstruction.
pub fn load_scenario(config: &ScenarioConfig) -> Result<Loaded> {
    let dims = &config.sheaf.vertices;
    ensure!(!dims.is_empty(), "sheaf.vertices is empty");
    for (v, &d) in dims.iter().enumerate() {
        ensure!(
            d > 0,
            "sheaf.vertices[{v}]: stalk dimension must be positive"
        );
    }
    let mut builder = SheafBuilder::new(dims.clone());
    for e in &config.sheaf.edges {
        let [a, b] = e.between;
        let what = format!("edge ({a}, {b})");
        ensure!(
            a < dims.len() && b < dims.len(),
            "{what}: vertex out of range"
        );
        ensure!(a != b, "{what}: self-loop");
        let fa = restriction(&e.maps[0], dims[a], &format!("{what}, map of vertex {a}"))?;
        let fb = restriction(&e.maps[1], dims[b], &format!("{what}, map of vertex {b}"))?;
        ensure!(
            fa.nrows() == fb.nrows(),
            "{what}: maps land in stalks of different dimension ({} and {})",
            fa.nrows(),
            fb.nrows()
        );
        if let Some(m) = e.dim {
            ensure!(
                fa.nrows() == m,
                "{what}: maps have {} rows but the edge stalk has dimension {m}",
                fa.nrows()
            );
        }
        builder.add_edge(a, b, fa, fb);
    }
    let sheaf = builder.build().context("building the sheaf")?;
    let graph = sheaf.graph().clone();
    let agents = VertexSubset::new(&graph, config.partition.agents.iter().copied())
        .context("partition.agents")?;
    let targets = VertexSubset::new(&graph, config.partition.targets.iter().copied())
        .context("partition.targets")?;
    let mut problem = TrackingProblem::assemble(sheaf, agents, targets).context("partition")?;
    let agent_ids = problem.agents().members().to_vec();
    let target_ids = problem.targets().members().to_vec();

    let mut groups = Vec::new();
    let mut scale = None;
    let mut template_blocks = None;
    if let Some(f) = &config.formation {
        ensure!(
            f.template.len() == dims.len(),
            "formation.template: expected {} blocks (one per vertex), got {}",
            dims.len(),
            f.template.len()
        );
        let blocks: Vec<DVector<f64>> = f
            .template
            .iter()
            .enumerate()
            .map(|(v, x)| block(x, dims[v], &format!("formation.template[{v}]")))
            .collect::<Result<_>>()?;
        let cochain = Cochain::from_blocks(problem.sheaf(), Degree::Zero, &blocks)?;
        problem = problem.with_template(&cochain)?;
        for (k, g) in f.groups.iter().enumerate() {
            let t = target_ids
                .iter()
                .position(|&x| x == g.target)
                .ok_or_else(|| {
                    anyhow!("formation.groups[{k}]: vertex {} is not a target", g.target)
                })?;
            let mut idx = Vec::new();
            let mut offsets = Vec::new();
            for &v in &g.agents {
                let a = agent_ids
                    .iter()
                    .position(|&x| x == v)
                    .ok_or_else(|| anyhow!("formation.groups[{k}]: vertex {v} is not an agent"))?;
                let n = dims[v].min(dims[g.target]);
                idx.push(a);
                offsets.push(blocks[v].rows(0, n) - blocks[g.target].rows(0, n));
            }
            groups.push(Group {
                target: t,
                agents: idx,
                offsets,
            });
        }
        scale = f.scale;
        template_blocks = Some(blocks);
    }

    let d = &config.dynamics;
    let field = Arc::new(field(d)?);
    let lissajous = d.lissajous.as_ref().map(|l| Lissajous {
        amplitude: l.amplitude,
        frequency: l.frequency,
        phase_x: l.phase_x,
        phase_z: l.phase_z,
    });
    let agent_models = assign(&d.agents, &agent_ids, "agents")?;
    let mut agents = Vec::new();
    for (a, &v) in agent_ids.iter().enumerate() {
        agents.push(match agent_models[a] {
            None => AgentModel::single_integrator(dims[v]),
            Some(k) => {
                let p = model_parts(
                    &d.agents[k],
                    dims[v],
                    &format!("agent {v}"),
                    &field,
                    lissajous.as_ref(),
                )?;
                AgentModel {
                    state_dim: dims[v],
                    drift: p.drift,
                    effectiveness: p
                        .effectiveness
                        .unwrap_or_else(|| Arc::new(ConstantEffectiveness::identity(dims[v]))),
                    disturbance: p.disturbance,
                    disturbance_bound: p.bound,
                }
            }
        });
    }
    let target_models = assign(&d.targets, &target_ids, "targets")?;
    let mut targets = Vec::new();
    for (t, &v) in target_ids.iter().enumerate() {
        targets.push(match target_models[t] {
            None => TargetModel::stationary(dims[v]),
            Some(k) => {
                let p = model_parts(
                    &d.targets[k],
                    dims[v],
                    &format!("target {v}"),
                    &field,
                    lissajous.as_ref(),
                )?;
                ensure!(
                    p.effectiveness.is_none(),
                    "target {v}: targets take no control effectiveness"
                );
                TargetModel {
                    state_dim: dims[v],
                    drift: p.drift,
                    disturbance: p.disturbance,
                    disturbance_bound: p.bound,
                }
            }
        });
    }

    let mut target_template = None;
    let coupling = match &config.target_formation {
        None => None,
        Some(tf) => {
            let template: Vec<DVector<f64>> = match (&tf.template, &template_blocks) {
                (Some(rows), _) => {
                    ensure!(
                        rows.len() == target_ids.len(),
                        "target_formation.template: expected {} blocks, got {}",
                        target_ids.len(),
                        rows.len()
                    );
                    rows.iter()
                        .zip(&target_ids)
                        .map(|(x, &v)| {
                            block(
                                x,
                                dims[v],
                                &format!("target_formation.template for vertex {v}"),
                            )
                        })
                        .collect::<Result<_>>()?
                }
                (None, Some(blocks)) => target_ids.iter().map(|&v| blocks[v].clone()).collect(),
                (None, None) => bail!("target_formation needs a template or a formation.template"),
            };
            let mut edges = Vec::new();
            for &[a, b] in &tf.edges {
                let pa = target_ids.iter().position(|&x| x == a);
                let pb = target_ids.iter().position(|&x| x == b);
                match (pa, pb) {
                    (Some(pa), Some(pb)) if pa != pb => edges.push((pa, pb)),
                    _ => bail!("target_formation edge ({a}, {b}) must join two distinct targets"),
                }
            }
            ensure!(tf.gain >= 0.0, "target_formation.gain must be nonnegative");
            target_template = Some(template.clone());
            Some(OffsetConsensus {
                gain: tf.gain,
                edges,
                template,
            })
        }
    };

    let init = &config.initial;
    ensure!(
        init.targets.len() == target_ids.len(),
        "initial.targets: expected {} blocks, got {}",
        target_ids.len(),
        init.targets.len()
    );
    let mut p0 = Vec::new();
    for (x, &v) in init.targets.iter().zip(&target_ids) {
        p0.extend_from_slice(
            block(x, dims[v], &format!("initial state of target {v}"))?.as_slice(),
        );
    }
    let mut q0 = Vec::new();
    match (&init.agents, init.agent_box) {
        (Some(rows), None) => {
            ensure!(
                rows.len() == agent_ids.len(),
                "initial.agents: expected {} blocks, got {}",
                agent_ids.len(),
                rows.len()
            );
            for (x, &v) in rows.iter().zip(&agent_ids) {
                q0.extend_from_slice(
                    block(x, dims[v], &format!("initial state of agent {v}"))?.as_slice(),
                );
            }
        }
        (None, Some([lo, hi])) => {
            ensure!(
                lo < hi,
                "initial.agent_box must be an interval [lo, hi] with lo < hi"
            );
            let mut rng = ChaCha8Rng::seed_from_u64(config.integration.seed);
            for &v in &agent_ids {
                q0.extend((0..dims[v]).map(|_| rng.random_range(lo..hi)));
            }
        }
        _ => bail!("initial: give exactly one of `agents` or `agent_box`"),
    }

    let g = &config.gains;
    let it = &config.integration;
    let scenario = Scenario {
        problem,
        agents,
        targets,
        coupling,
        gains: ControllerGains::new(g.k1).context("gains.k1")?,
        bound: BoundParams {
            lambda_v: g.lambda_v,
            rho0: g.rho0,
            rho1: g.rho1,
            f_bar: g.f_bar,
        },
        q0: DVector::from_vec(q0),
        p0: DVector::from_vec(p0),
        integration: Integration {
            t0: 0.0,
            h: it.h,
            horizon: it.horizon,
            stride: it.stride,
        },
        seed: it.seed,
    };
    if scenario.problem.is_feasible() {
        scenario.validate()?;
    }
    Ok(Loaded {
        config: config.clone(),
        scenario,
        groups,
        target_template,
        scale,
    })
}
