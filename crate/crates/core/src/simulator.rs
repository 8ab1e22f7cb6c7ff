//! Closed-loop integration and verification of the ultimate tracking bound.
//!
//! The state is the stacked pair `(q, p)`. Each classical RK4 stage evaluates
//! the decentralized controller at the stage state, so the discrete
//! trajectory approximates the continuous closed loop.
//!
//! With `lambda = lambda_min(H)` the bound constants are
//!
//! * `k_min = k1 lambda / 2`,
//! * `w = (1 + sigma_max(B) / lambda) sqrt(P) max_i w_i`,
//! * `mu = (f_bar + w)^2 / (2 k1 lambda)`,
//! * `chi = (k_min - lambda_V - rho0) / rho1` for `rho(s) = rho0 + rho1 s`,
//!
//! and the guaranteed estimate is
//! `||e(t)|| <= sqrt(exp(-2 lambda_V dt) ||e0||^2 + (mu / lambda_V)(1 - exp(-2 lambda_V dt)))`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::controller::{decentralized_control, ControllerGains};
use crate::dynamics::{AgentModel, OffsetConsensus, TargetModel};
use crate::error::{Error, Result};
use crate::harmonic::TrackingProblem;
use crate::scalar::Real;

/// Parameters of the Lyapunov estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams<T: Real> {
    pub lambda_v: T,
    /// `rho(0)`, a local Lipschitz estimate of the agent drift.
    pub rho0: T,
    /// Slope of `rho`; zero for drifts that are globally Lipschitz.
    pub rho1: T,
    /// Bound on `f_B`. Estimated by sampling when absent.
    pub f_bar: Option<T>,
}

impl<T: Real> BoundParams<T> {
    pub fn linear(lambda_v: T) -> Self {
        Self {
            lambda_v,
            rho0: T::zero(),
            rho1: T::zero(),
            f_bar: None,
        }
    }
}

/// Fixed-step settings. Every `stride`-th step is logged, plus the last one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integration<T: Real> {
    pub t0: T,
    pub h: T,
    pub horizon: T,
    pub stride: usize,
}

impl<T: Real> Integration<T> {
    pub fn new(h: T, horizon: T) -> Self {
        Self {
            t0: T::zero(),
            h,
            horizon,
            stride: 1,
        }
    }

    /// Number of steps, `round(horizon / h)`.
    pub fn steps(&self) -> usize {
        (self.horizon / self.h).round().to_f64_lossy() as usize
    }
}

/// Everything needed to integrate one closed loop.
#[derive(Debug, Clone)]
pub struct Scenario<T: Real> {
    pub problem: TrackingProblem<T>,
    pub agents: Vec<AgentModel<T>>,
    pub targets: Vec<TargetModel<T>>,
    pub coupling: Option<OffsetConsensus<T>>,
    pub gains: ControllerGains<T>,
    pub bound: BoundParams<T>,
    pub q0: DVector<T>,
    pub p0: DVector<T>,
    pub integration: Integration<T>,
    /// Seed for the sampling estimators.
    pub seed: u64,
}

fn mismatch(context: impl Into<String>, expected: usize, actual: usize) -> Error {
    Error::DimensionMismatch {
        context: context.into(),
        expected,
        actual,
    }
}

impl<T: Real> Scenario<T> {
    /// Checks dimensions, parameters and feasibility.
    pub fn validate(&self) -> Result<()> {
        let pr = &self.problem;
        if !pr.is_feasible() {
            return Err(pr.feasibility().obstruction_error(pr.agents()));
        }
        if self.agents.len() != pr.agents().len() {
            return Err(mismatch(
                "number of agent models",
                pr.agents().len(),
                self.agents.len(),
            ));
        }
        if self.targets.len() != pr.targets().len() {
            return Err(mismatch(
                "number of target models",
                pr.targets().len(),
                self.targets.len(),
            ));
        }
        for (a, m) in self.agents.iter().enumerate() {
            if m.state_dim != pr.agent_layout().size(a) {
                return Err(mismatch(
                    format!("state dimension of agent {}", pr.agents().members()[a]),
                    pr.agent_layout().size(a),
                    m.state_dim,
                ));
            }
        }
        for (k, m) in self.targets.iter().enumerate() {
            if m.state_dim != pr.target_layout().size(k) {
                return Err(mismatch(
                    format!("state dimension of target {}", pr.targets().members()[k]),
                    pr.target_layout().size(k),
                    m.state_dim,
                ));
            }
        }
        if self.q0.len() != pr.agent_layout().total() {
            return Err(mismatch(
                "initial agent state",
                pr.agent_layout().total(),
                self.q0.len(),
            ));
        }
        if self.p0.len() != pr.target_layout().total() {
            return Err(mismatch(
                "initial target state",
                pr.target_layout().total(),
                self.p0.len(),
            ));
        }
        if let Some(c) = &self.coupling {
            if c.template.len() != self.targets.len() {
                return Err(mismatch(
                    "target formation template",
                    self.targets.len(),
                    c.template.len(),
                ));
            }
            for (k, t) in c.template.iter().enumerate() {
                if t.len() != pr.target_layout().size(k) {
                    return Err(mismatch(
                        format!("template of target {k}"),
                        pr.target_layout().size(k),
                        t.len(),
                    ));
                }
            }
            if c.edges
                .iter()
                .any(|&(a, b)| a >= self.targets.len() || b >= self.targets.len() || a == b)
            {
                return Err(Error::InvalidParameter(
                    "target coupling edge out of range".into(),
                ));
            }
        }
        let it = &self.integration;
        if !(it.h > T::zero()) || !(it.horizon > T::zero()) || it.stride == 0 {
            return Err(Error::InvalidParameter(
                "step, horizon and stride must be positive".into(),
            ));
        }
        if !(self.bound.lambda_v > T::zero())
            || self.bound.rho0 < T::zero()
            || self.bound.rho1 < T::zero()
        {
            return Err(Error::InvalidParameter(
                "lambda_V must be positive and rho coefficients nonnegative".into(),
            ));
        }
        if self.bound.f_bar.is_some_and(|f| f < T::zero()) {
            return Err(Error::InvalidParameter("f_bar must be nonnegative".into()));
        }
        Ok(())
    }

    fn agent_block<'a>(&self, q: &'a DVector<T>, a: usize) -> nalgebra::DVectorView<'a, T> {
        let l = self.problem.agent_layout();
        q.rows(l.offset(a), l.size(a))
    }

    fn target_blocks(&self, p: &DVector<T>) -> Vec<DVector<T>> {
        let l = self.problem.target_layout();
        (0..l.len())
            .map(|k| p.rows(l.offset(k), l.size(k)).into_owned())
            .collect()
    }

    /// Stacked agent drift `f_q(q, t)`.
    pub fn agent_drift(&self, q: &DVector<T>, t: T) -> DVector<T> {
        let mut out = DVector::zeros(q.len());
        let l = self.problem.agent_layout();
        for (a, m) in self.agents.iter().enumerate() {
            let v = m.drift.velocity(&self.agent_block(q, a).into_owned(), t);
            out.rows_mut(l.offset(a), l.size(a)).copy_from(&v);
        }
        out
    }

    /// Stacked target drift `f_p(p, t)`, including target coupling.
    pub fn target_drift(&self, p: &DVector<T>, t: T) -> DVector<T> {
        let l = self.problem.target_layout();
        let blocks = self.target_blocks(p);
        let mut out = DVector::zeros(p.len());
        for (k, m) in self.targets.iter().enumerate() {
            let v = m.drift.velocity(&blocks[k], t);
            out.rows_mut(l.offset(k), l.size(k)).copy_from(&v);
        }
        if let Some(c) = &self.coupling {
            for (k, v) in c.velocity(&blocks).iter().enumerate() {
                let mut r = out.rows_mut(l.offset(k), l.size(k));
                r += v;
            }
        }
        out
    }

    pub fn agent_disturbance(&self, t: T) -> DVector<T> {
        let l = self.problem.agent_layout();
        let mut out = DVector::zeros(l.total());
        for (a, m) in self.agents.iter().enumerate() {
            out.rows_mut(l.offset(a), l.size(a))
                .copy_from(&m.disturbance.sample(t));
        }
        out
    }

    pub fn target_disturbance(&self, t: T) -> DVector<T> {
        let l = self.problem.target_layout();
        let mut out = DVector::zeros(l.total());
        for (k, m) in self.targets.iter().enumerate() {
            out.rows_mut(l.offset(k), l.size(k))
                .copy_from(&m.disturbance.sample(t));
        }
        out
    }

    /// Input maps `g_i(q_i, t)` for every agent; rank failures name the agent and time.
    pub fn input_maps(&self, q: &DVector<T>, t: T) -> Result<Vec<DMatrix<T>>> {
        self.agents
            .iter()
            .enumerate()
            .map(|(a, m)| {
                let g = m
                    .effectiveness
                    .matrix(&self.agent_block(q, a).into_owned(), t);
                crate::dynamics::pseudoinverse(&g).map_err(|source| Error::Agent {
                    agent: self.problem.agents().members()[a],
                    time: t.to_f64_lossy(),
                    source: Box::new(source),
                })?;
                Ok(g)
            })
            .collect()
    }

    /// Decentralized controls and the applied velocity `g u`, both stacked.
    pub fn controls(
        &self,
        q: &DVector<T>,
        p: &DVector<T>,
        t: T,
    ) -> Result<(DVector<T>, DVector<T>)> {
        let g = self.input_maps(q, t)?;
        let u = decentralized_control(&self.problem, q, p, &g, &self.gains)?;
        let l = self.problem.agent_layout();
        let mut gu = DVector::zeros(l.total());
        for (a, (gi, ui)) in g.iter().zip(&u).enumerate() {
            gu.rows_mut(l.offset(a), l.size(a)).copy_from(&(gi * ui));
        }
        let flat: Vec<T> = u.iter().flat_map(|b| b.iter().copied()).collect();
        Ok((DVector::from_vec(flat), gu))
    }

    /// Closed-loop vector field `(q', p')`.
    pub fn rhs(&self, q: &DVector<T>, p: &DVector<T>, t: T) -> Result<(DVector<T>, DVector<T>)> {
        let (_, gu) = self.controls(q, p, t)?;
        let dq = self.agent_drift(q, t) + gu + self.agent_disturbance(t);
        let dp = self.target_drift(p, t) + self.target_disturbance(t);
        Ok((dq, dp))
    }

    /// `f_B(p, t) = H^{-1} B f_p(p, t) - f_q(q*(p), t)`.
    pub fn f_b(&self, p: &DVector<T>, t: T) -> Result<DVector<T>> {
        let q_star = self.problem.harmonic_extension(p)?;
        let fp = self.target_drift(p, t);
        Ok(self.problem.solve(&(self.problem.b() * fp))? - self.agent_drift(&q_star, t))
    }

    /// `max(w_i)` over agents and targets.
    pub fn max_disturbance_bound(&self) -> T {
        self.agents
            .iter()
            .map(|a| a.disturbance_bound)
            .chain(self.targets.iter().map(|k| k.disturbance_bound))
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Bound constants for a given `f_bar`.
    pub fn bound_constants(&self, f_bar: T, f_bar_samples: usize) -> BoundConstants<T> {
        let pr = &self.problem;
        let lambda = pr.lambda_min_h();
        let k1 = self.gains.k1();
        let two = T::lit(2.0);
        let p_count = T::from_usize_lossy(pr.p_count());
        let omega_bar =
            (T::one() + pr.sigma_max_b() / lambda) * p_count.sqrt() * self.max_disturbance_bound();
        let mu = (f_bar + omega_bar).powi(2) / (two * k1 * lambda);
        let k_min = k1 * lambda / two;
        let BoundParams {
            lambda_v,
            rho0,
            rho1,
            ..
        } = self.bound;
        let numerator = k_min - lambda_v - rho0;
        let chi = if rho1 > T::zero() {
            numerator / rho1
        } else if numerator > T::zero() {
            T::infinity()
        } else {
            T::zero()
        };
        let radius_u = (mu / lambda_v).sqrt();
        BoundConstants {
            lambda_min_h: lambda,
            sigma_max_b: pr.sigma_max_b(),
            k1,
            lambda_v,
            rho0,
            rho1,
            f_bar,
            f_bar_samples,
            omega_bar,
            mu,
            k_min,
            chi,
            radius_u,
            radius_s: chi - radius_u,
            gain_condition: k_min > rho0 + rho1 * two * radius_u + lambda_v,
        }
    }

    /// Estimates `f_bar` as the largest `||f_B||` over the recorded target
    /// states and `samples` seeded random points of their bounding box
    /// (at random times in the horizon). Returns the estimate and the number of evaluations.
    pub fn estimate_f_bar(
        &self,
        time: &[T],
        p: &[DVector<T>],
        samples: usize,
    ) -> Result<(T, usize)> {
        let mut best = T::zero();
        let mut count = 0;
        for (t, pk) in time.iter().zip(p) {
            best = best.max(self.f_b(pk, *t)?.norm());
            count += 1;
        }
        let Some(first) = p.first() else {
            return Ok((best, count));
        };
        let mut lo = first.clone();
        let mut hi = first.clone();
        for pk in p {
            lo = lo.inf(pk);
            hi = hi.sup(pk);
        }
        let (t_lo, t_hi) = (
            time.first().copied().unwrap_or_else(T::zero).to_f64_lossy(),
            time.last().copied().unwrap_or_else(T::zero).to_f64_lossy(),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        for _ in 0..samples {
            let x = DVector::from_fn(lo.len(), |k, _| {
                let (a, b) = (lo[k].to_f64_lossy(), hi[k].to_f64_lossy());
                T::lit(if b > a { rng.random_range(a..=b) } else { a })
            });
            let t = T::lit(if t_hi > t_lo {
                rng.random_range(t_lo..=t_hi)
            } else {
                t_lo
            });
            best = best.max(self.f_b(&x, t)?.norm());
            count += 1;
        }
        Ok((best, count))
    }

    /// Samples `||f_q(q*) - f_q(q)|| / ||e||` for perturbations of norm at
    /// most `radius` around recorded harmonic extensions; the maximum is an
    /// estimate of `rho0`. Returns the estimate and the number of samples.
    pub fn estimate_rho0(&self, log: &TrajectoryLog<T>, radius: T, samples: usize) -> (T, usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5eed);
        let mut best = T::zero();
        if log.is_empty() {
            return (best, 0);
        }
        for _ in 0..samples {
            let k = rng.random_range(0..log.len());
            let (t, q_star) = (log.time[k], &log.q_star[k]);
            let dir = DVector::from_fn(q_star.len(), |_, _| T::lit(rng.random_range(-1.0..1.0)));
            let n = dir.norm();
            if !(n > T::zero()) {
                continue;
            }
            let e = dir * (radius * T::lit(rng.random_range(1e-3..1.0)) / n);
            let diff = self.agent_drift(q_star, t) - self.agent_drift(&(q_star - &e), t);
            best = best.max(diff.norm() / e.norm());
        }
        (best, samples)
    }

    /// Integrates the closed loop with classical RK4 and fills the bound column.
    pub fn integrate(&self) -> Result<TrajectoryLog<T>> {
        self.validate()?;
        let it = self.integration;
        let steps = it.steps();
        let h = it.h;
        let half = T::lit(0.5);
        let sixth = T::one() / T::lit(6.0);
        let mut q = self.q0.clone();
        let mut p = self.p0.clone();
        let mut log = TrajectoryLog {
            spacing: h * T::from_usize_lossy(it.stride),
            ..TrajectoryLog::default()
        };
        self.record(&mut log, it.t0, &q, &p)?;
        for step in 1..=steps {
            let t = it.t0 + h * T::from_usize_lossy(step - 1);
            let (k1q, k1p) = self.rhs(&q, &p, t)?;
            let (k2q, k2p) = self.rhs(
                &(&q + &k1q * (h * half)),
                &(&p + &k1p * (h * half)),
                t + h * half,
            )?;
            let (k3q, k3p) = self.rhs(
                &(&q + &k2q * (h * half)),
                &(&p + &k2p * (h * half)),
                t + h * half,
            )?;
            let (k4q, k4p) = self.rhs(&(&q + &k3q * h), &(&p + &k3p * h), t + h)?;
            q += (k1q + (k2q + k3q) * T::lit(2.0) + k4q) * (h * sixth);
            p += (k1p + (k2p + k3p) * T::lit(2.0) + k4p) * (h * sixth);
            let t_next = it.t0 + h * T::from_usize_lossy(step);
            if !q.iter().chain(p.iter()).all(|x| x.is_finite_value()) {
                return Err(Error::NonFinite {
                    step,
                    time: t_next.to_f64_lossy(),
                });
            }
            if step % it.stride == 0 || step == steps {
                self.record(&mut log, t_next, &q, &p)?;
            }
        }
        let (f_bar, samples) = match self.bound.f_bar {
            Some(f) => (f, 0),
            None => self.estimate_f_bar(&log.time, &log.p, F_BAR_SAMPLES)?,
        };
        log.constants = Some(self.bound_constants(f_bar, samples));
        log.fill_bound();
        Ok(log)
    }

    fn record(
        &self,
        log: &mut TrajectoryLog<T>,
        t: T,
        q: &DVector<T>,
        p: &DVector<T>,
    ) -> Result<()> {
        let q_star = self.problem.harmonic_extension(p)?;
        let e = &q_star - q;
        let (u, gu) = self.controls(q, p, t)?;
        log.time.push(t);
        log.e_norm.push(e.norm());
        log.energy.push(self.problem.energy(q, p)?);
        log.eta.push(self.problem.disagreement(q, p)?);
        log.q.push(q.clone());
        log.p.push(p.clone());
        log.q_star.push(q_star);
        log.e.push(e);
        log.u.push(u);
        log.gu.push(gu);
        Ok(())
    }
}

/// Random evaluations added to the recorded states when estimating `f_bar`.
pub const F_BAR_SAMPLES: usize = 2000;

/// Constants of the ultimate bound for one scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants<T: Real> {
    pub lambda_min_h: T,
    pub sigma_max_b: T,
    pub k1: T,
    pub lambda_v: T,
    pub rho0: T,
    pub rho1: T,
    pub f_bar: T,
    /// Evaluations behind `f_bar`; zero when it was declared.
    pub f_bar_samples: usize,
    pub omega_bar: T,
    pub mu: T,
    pub k_min: T,
    /// Radius of the domain `D`; infinite when `rho1 = 0`.
    pub chi: T,
    /// `sqrt(mu / lambda_V)`, radius of the ultimate set `U`.
    pub radius_u: T,
    /// `chi - radius_u`, radius of the admissible initial set `S`.
    pub radius_s: T,
    /// `k_min > rho(2 radius_u) + lambda_V`.
    pub gain_condition: bool,
}

impl<T: Real> BoundConstants<T> {
    /// `U ⊂ S ⊂ D` as radii.
    pub fn sets_nested(&self) -> bool {
        self.radius_u < self.radius_s && self.radius_s <= self.chi
    }
}

/// `sqrt(exp(-2 lambda_V dt) e0^2 + (mu / lambda_V)(1 - exp(-2 lambda_V dt)))`.
pub fn theorem_bound<T: Real>(c: &BoundConstants<T>, e0_norm: T, dt: T) -> T {
    let decay = (-T::lit(2.0) * c.lambda_v * dt).exp();
    (decay * e0_norm * e0_norm + c.mu / c.lambda_v * (T::one() - decay)).sqrt()
}

/// Time-indexed record of one integration. `u` holds the raw controls
/// (stacked per agent); `gu` the applied velocities `g_i u_i`.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryLog<T: Real> {
    pub time: Vec<T>,
    pub q: Vec<DVector<T>>,
    pub p: Vec<DVector<T>>,
    pub q_star: Vec<DVector<T>>,
    pub e: Vec<DVector<T>>,
    pub eta: Vec<DVector<T>>,
    pub u: Vec<DVector<T>>,
    pub gu: Vec<DVector<T>>,
    pub e_norm: Vec<T>,
    pub bound: Vec<T>,
    pub energy: Vec<T>,
    /// Nominal time between records.
    pub spacing: T,
    pub constants: Option<BoundConstants<T>>,
}

impl<T: Real> TrajectoryLog<T> {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    fn fill_bound(&mut self) {
        self.bound.clear();
        if let (Some(c), Some(&t0), Some(&e0)) =
            (self.constants, self.time.first(), self.e_norm.first())
        {
            self.bound = self
                .time
                .iter()
                .map(|&t| theorem_bound(&c, e0, t - t0))
                .collect();
        }
    }
}

/// Outcome of checking a log against the bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport<T: Real> {
    pub constants: BoundConstants<T>,
    pub e0_norm: T,
    pub e0_in_s: bool,
    /// Gain condition holds and `e0` lies in `S`.
    pub applicable: bool,
    /// `(t, ||e||, bound)` where the error exceeds the bound.
    pub violations: Vec<(T, T, T)>,
    /// Recorded times with `||e|| > chi`.
    pub outside_domain: Vec<T>,
    /// First recorded time from which `||e||` stays within `U`.
    pub entered_u_at: Option<T>,
    pub terminal_e_norm: T,
}

/// Relative slack for comparing the recorded error with the bound.
pub const BOUND_RTOL: f64 = 64.0 * f64::EPSILON;

/// Pointwise check of `||e(t)|| <= bound(t)`, containment in `D` and entry into `U`.
pub fn verify_bound<T: Real>(
    log: &TrajectoryLog<T>,
    constants: &BoundConstants<T>,
) -> BoundReport<T> {
    let e0 = log.e_norm.first().copied().unwrap_or_else(T::zero);
    let t0 = log.time.first().copied().unwrap_or_else(T::zero);
    let rtol = T::lit(BOUND_RTOL);
    let mut violations = Vec::new();
    let mut outside_domain = Vec::new();
    let mut entered_u_at = None;
    for (k, (&t, &e)) in log.time.iter().zip(&log.e_norm).enumerate() {
        let b = theorem_bound(constants, e0, t - t0);
        if e > b * (T::one() + rtol) + rtol {
            violations.push((t, e, b));
        }
        if e > constants.chi {
            outside_domain.push(t);
        }
        let inside_u = e <= constants.radius_u * (T::one() + rtol) + rtol;
        match (inside_u, entered_u_at) {
            (true, None) => entered_u_at = Some((k, t)),
            (false, Some(_)) => entered_u_at = None,
            _ => {}
        }
    }
    let e0_in_s = e0 <= constants.radius_s;
    BoundReport {
        constants: *constants,
        e0_norm: e0,
        e0_in_s,
        applicable: e0_in_s && constants.gain_condition,
        violations,
        outside_domain,
        entered_u_at: entered_u_at.map(|(_, t)| t),
        terminal_e_norm: log.e_norm.last().copied().unwrap_or_else(T::zero),
    }
}

/// Largest discrepancy between the central-difference derivative of the
/// recorded error and `-k1 H e + f_B + f~ + Delta` at interior records.
pub fn error_dynamics_residual<T: Real>(
    scenario: &Scenario<T>,
    log: &TrajectoryLog<T>,
) -> Result<T> {
    let pr = &scenario.problem;
    let k1 = scenario.gains.k1();
    let mut worst = T::zero();
    for k in 1..log.len().saturating_sub(1) {
        let (ta, tb) = (log.time[k - 1], log.time[k + 1]);
        let t = log.time[k];
        if ((tb - t) - (t - ta)).abs() > T::lit(1e-6) * (tb - ta) {
            continue;
        }
        let fd = (&log.e[k + 1] - &log.e[k - 1]) / (tb - ta);
        let (q, p, e) = (&log.q[k], &log.p[k], &log.e[k]);
        let q_star = &log.q_star[k];
        let f_b = scenario.f_b(p, t)?;
        let f_tilde = scenario.agent_drift(q_star, t) - scenario.agent_drift(q, t);
        let delta =
            pr.solve(&(pr.b() * scenario.target_disturbance(t)))? - scenario.agent_disturbance(t);
        let analytic = pr.h() * e * (-k1) + f_b + f_tilde + delta;
        worst = worst.max((fd - analytic).norm());
    }
    Ok(worst)
}
