//! `check`, `run` and `sweep`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use nalgebra::DVector;
use rayon::prelude::*;
use sheaftrack::{verify_bound, BoundConstants, BoundReport, TrajectoryLog};

use crate::build::{load_scenario, Loaded, Overrides};
use crate::config::ScenarioConfig;
use crate::output::{key_values, Table};
use crate::plot::emit_plots;

/// Feasibility and spectra, available before integrating.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub agents: usize,
    pub targets: usize,
    pub dim_q: usize,
    pub dim_p: usize,
    pub feasible: bool,
    /// `dim H^0(G, G_p)`; zero exactly when the extension is unique.
    pub obstruction_dimension: usize,
    pub rank_tolerance: f64,
    pub lambda_min_h: f64,
    pub lambda_max_h: f64,
    pub sigma_max_b: f64,
    pub spectrally_positive_definite: bool,
    pub k_min: f64,
}

impl CheckReport {
    pub fn key_values(&self) -> Vec<(String, String)> {
        vec![
            kv("name", &self.name),
            kv("agents", self.agents),
            kv("targets", self.targets),
            kv("dim_q", self.dim_q),
            kv("dim_p", self.dim_p),
            kv("feasible", self.feasible),
            kv("relative_h0_dimension", self.obstruction_dimension),
            kv("rank_tolerance", self.rank_tolerance),
            kv("lambda_min_h", self.lambda_min_h),
            kv("lambda_max_h", self.lambda_max_h),
            kv("sigma_max_b", self.sigma_max_b),
            kv("h_positive_definite", self.spectrally_positive_definite),
            kv("k_min", self.k_min),
        ]
    }
}

fn kv(k: &str, v: impl ToString) -> (String, String) {
    (k.to_string(), v.to_string())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

pub fn check(loaded: &Loaded) -> CheckReport {
    let pr = &loaded.scenario.problem;
    let f = pr.feasibility();
    CheckReport {
        name: loaded.config.name.clone(),
        agents: pr.agents().len(),
        targets: pr.targets().len(),
        dim_q: pr.agent_layout().total(),
        dim_p: pr.target_layout().total(),
        feasible: f.feasible,
        obstruction_dimension: f.report.dimension,
        rank_tolerance: f.report.rank_tolerance,
        lambda_min_h: pr.lambda_min_h(),
        lambda_max_h: pr.lambda_max_h(),
        sigma_max_b: pr.sigma_max_b(),
        spectrally_positive_definite: pr.spectrally_positive_definite(),
        k_min: loaded.scenario.gains.k1() * pr.lambda_min_h() / 2.0,
    }
}

/// Deviations from the commanded formation at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormationResiduals {
    pub scale: f64,
    /// Largest deviation of an agent from its commanded offset, both taken
    /// relative to the centroid of its group.
    pub shape: f64,
    /// Largest deviation of an agent from its commanded offset relative to
    /// the group's target.
    pub target_relative: f64,
    /// Largest deviation of a target from the commanded target
    /// configuration, both taken relative to their centroids.
    pub target_shape: Option<f64>,
}

fn centroid(xs: &[DVector<f64>]) -> DVector<f64> {
    let mut c = DVector::zeros(xs[0].len());
    for x in xs {
        c += x;
    }
    c / xs.len() as f64
}

fn centered_deviation(actual: &[DVector<f64>], commanded: &[DVector<f64>]) -> f64 {
    let (ca, cc) = (centroid(actual), centroid(commanded));
    actual
        .iter()
        .zip(commanded)
        .map(|(a, c)| ((a - &ca) - (c - &cc)).norm())
        .fold(0.0, f64::max)
}

/// Formation residuals of stacked states `q`, `p`, or `None` without groups.
pub fn formation_residuals(
    loaded: &Loaded,
    q: &DVector<f64>,
    p: &DVector<f64>,
) -> Option<FormationResiduals> {
    if loaded.groups.is_empty() {
        return None;
    }
    let pr = &loaded.scenario.problem;
    let (ql, pl) = (pr.agent_layout(), pr.target_layout());
    let mut shape: f64 = 0.0;
    let mut target_relative: f64 = 0.0;
    for g in &loaded.groups {
        let target = p.rows(pl.offset(g.target), pl.size(g.target));
        let mut actual = Vec::new();
        for (&a, o) in g.agents.iter().zip(&g.offsets) {
            let n = o.len();
            let qa = q.rows(ql.offset(a), n).into_owned();
            target_relative = target_relative.max((&qa - target.rows(0, n) - o).norm());
            actual.push(qa);
        }
        shape = shape.max(centered_deviation(&actual, &g.offsets));
    }
    let target_shape = loaded.target_template.as_ref().map(|tmpl| {
        let actual: Vec<DVector<f64>> = (0..pl.len())
            .map(|k| p.rows(pl.offset(k), pl.size(k)).into_owned())
            .collect();
        centered_deviation(&actual, tmpl)
    });
    Some(FormationResiduals {
        scale: loaded.scale.unwrap_or(1.0),
        shape,
        target_relative,
        target_shape,
    })
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub check: CheckReport,
    pub report: BoundReport<f64>,
    pub steps: usize,
    pub records: usize,
    pub h: f64,
    pub horizon: f64,
    pub seed: u64,
    pub formation: Option<FormationResiduals>,
    pub wall_clock_s: f64,
    pub outputs: Vec<PathBuf>,
}

impl RunSummary {
    pub fn constants(&self) -> &BoundConstants<f64> {
        &self.report.constants
    }

    pub fn violations(&self) -> usize {
        self.report.violations.len()
    }

    /// No bound violation where the bound is claimed to hold.
    pub fn ok(&self) -> bool {
        !self.report.applicable || self.report.violations.is_empty()
    }

    pub fn key_values(&self) -> Vec<(String, String)> {
        let c = self.constants();
        let r = &self.report;
        let mut out = self.check.key_values();
        out.extend([
            kv("k1", c.k1),
            kv("lambda_v", c.lambda_v),
            kv("rho0", c.rho0),
            kv("rho1", c.rho1),
            kv("f_bar", c.f_bar),
            kv("f_bar_samples", c.f_bar_samples),
            kv("omega_bar", c.omega_bar),
            kv("mu", c.mu),
            kv("chi", c.chi),
            kv("radius_u", c.radius_u),
            kv("radius_s", c.radius_s),
            kv("gain_condition", c.gain_condition),
            kv("sets_nested", c.sets_nested()),
            kv("e0_norm", r.e0_norm),
            kv("e0_in_s", r.e0_in_s),
            kv("bound_applicable", r.applicable),
            kv("terminal_e_norm", r.terminal_e_norm),
            ("entered_u_at".into(), opt(r.entered_u_at)),
            kv("violations", r.violations.len()),
            kv("outside_domain", r.outside_domain.len()),
            kv("h", self.h),
            kv("horizon", self.horizon),
            kv("steps", self.steps),
            kv("records", self.records),
            kv("seed", self.seed),
        ]);
        if let Some(f) = &self.formation {
            out.extend([
                kv("formation_scale", f.scale),
                kv("formation_shape_residual", f.shape),
                kv("formation_target_residual", f.target_relative),
                ("target_shape_residual".into(), opt(f.target_shape)),
            ]);
        }
        out.push(kv("ok", self.ok()));
        out.push(kv("wall_clock_s", self.wall_clock_s));
        out
    }
}

/// Loads a configuration file or a bundled scenario name.
pub fn load_config(spec: &str) -> Result<ScenarioConfig> {
    let path = Path::new(spec);
    if path.exists() {
        return ScenarioConfig::from_path(path);
    }
    match crate::bundled::get(spec) {
        Some(text) => {
            ScenarioConfig::parse(text).with_context(|| format!("bundled scenario {spec}"))
        }
        None => anyhow::bail!(
            "{spec}: no such file or bundled scenario (bundled: {})",
            crate::bundled::names().join(", ")
        ),
    }
}

/// Integrates without writing anything.
pub fn simulate(loaded: &Loaded) -> Result<TrajectoryLog<f64>> {
    let s = &loaded.scenario;
    if !s.problem.is_feasible() {
        return Err(s
            .problem
            .feasibility()
            .obstruction_error(s.problem.agents())
            .into());
    }
    Ok(s.integrate()?)
}

/// Integrates, checks the bound and writes the trajectory table, the summary
/// and (if enabled) the plots into `out`.
pub fn run(loaded: &Loaded, out: &Path) -> Result<(RunSummary, TrajectoryLog<f64>)> {
    let start = Instant::now();
    let log = simulate(loaded).with_context(|| format!("integrating {}", loaded.config.name))?;
    let constants = log
        .constants
        .expect("integration fills the bound constants");
    let report = verify_bound(&log, &constants);
    let s = &loaded.scenario;
    let formation = formation_residuals(
        loaded,
        log.q.last().expect("nonempty"),
        log.p.last().expect("nonempty"),
    );

    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let table = Table::from_log(&s.problem, &log)?;
    let mut outputs = Vec::new();
    let trajectory = out.join(&loaded.config.outputs.trajectory);
    table.write_csv(&trajectory)?;
    outputs.push(trajectory);
    if loaded.config.outputs.plots {
        outputs.extend(emit_plots(&table, out)?);
    }
    let mut summary = RunSummary {
        check: check(loaded),
        report,
        steps: s.integration.steps(),
        records: log.len(),
        h: s.integration.h,
        horizon: s.integration.horizon,
        seed: s.seed,
        formation,
        wall_clock_s: 0.0,
        outputs,
    };
    summary.wall_clock_s = start.elapsed().as_secs_f64();
    let path = out.join(&loaded.config.outputs.summary);
    std::fs::write(&path, key_values(&summary.key_values()))
        .with_context(|| format!("writing {}", path.display()))?;
    summary.outputs.push(path);
    Ok((summary, log))
}

/// Runs independent scenarios in parallel, each into `out/<name>`.
pub fn sweep(
    configs: Vec<ScenarioConfig>,
    overrides: Overrides,
    out: &Path,
) -> Vec<(String, Result<RunSummary>)> {
    configs
        .into_par_iter()
        .map(|mut c| {
            overrides.apply(&mut c);
            let name = c.name.clone();
            let result = load_scenario(&c).and_then(|l| run(&l, &out.join(&name)).map(|(s, _)| s));
            (name, result)
        })
        .collect()
}
