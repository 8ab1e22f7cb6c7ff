//! Agent and target models: drifts, control effectiveness, bounded
//! disturbances, the background flow field and the Lissajous reference.

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Vector3};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;

/// State-dependent velocity `f(x, t)`.
pub trait Drift<T: Real>: Debug + Send + Sync {
    fn velocity(&self, x: &DVector<T>, t: T) -> DVector<T>;
}

/// Control effectiveness `g(x, t)`, an `n x s` matrix.
pub trait Effectiveness<T: Real>: Debug + Send + Sync {
    fn matrix(&self, x: &DVector<T>, t: T) -> DMatrix<T>;
    fn control_dim(&self) -> usize;
}

/// Bounded deterministic disturbance `omega(t)`.
pub trait Disturbance<T: Real>: Debug + Send + Sync {
    fn sample(&self, t: T) -> DVector<T>;
    /// A constant `w` with `||omega(t)|| <= w` for all `t`.
    fn bound(&self) -> T;
}

/// Moore-Penrose right inverse `g^T (g g^T)^{-1}` of a full-row-rank matrix.
pub fn pseudoinverse<T: Real>(g: &DMatrix<T>) -> Result<DMatrix<T>> {
    let (n, s) = g.shape();
    if n == 0 {
        return Ok(DMatrix::zeros(s, 0));
    }
    let sv = linalg::singular_values(g);
    let tol = linalg::rank_threshold(n, s, sv.first().copied().unwrap_or_else(T::zero));
    let rank = sv.iter().filter(|&&x| x > tol).count();
    if rank < n || s < n {
        return Err(Error::RankDeficient { rank, rows: n });
    }
    let gram = g * g.transpose();
    let chol = gram.cholesky().ok_or(Error::RankDeficient {
        rank: n - 1,
        rows: n,
    })?;
    Ok(g.transpose() * chol.inverse())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSingularity<T: Real> {
    pub position: Vector3<T>,
    /// Positive for a source, negative for a sink.
    pub strength: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vortex<T: Real> {
    pub center: Vector3<T>,
    /// Unit axis; rotation follows the right-hand rule for positive strength.
    pub axis: Vector3<T>,
    pub strength: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianAxial<T: Real> {
    pub center: Vector3<T>,
    /// Unit flow direction.
    pub direction: Vector3<T>,
    pub strength: T,
    pub width: T,
    pub length: T,
}

/// Superposition of regularized point sources/sinks, line vortices and
/// Gaussian axial jets. Time invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField<T: Real> {
    singularities: Vec<PointSingularity<T>>,
    vortices: Vec<Vortex<T>>,
    gaussians: Vec<GaussianAxial<T>>,
    epsilon: T,
}

pub const DEFAULT_EPSILON: f64 = 1e-2;

fn unit<T: Real>(v: Vector3<T>, what: &str) -> Result<Vector3<T>> {
    let n = v.norm();
    if n > T::zero() && n.is_finite_value() {
        Ok(v / n)
    } else {
        Err(Error::InvalidParameter(format!(
            "{what} must be a nonzero finite vector"
        )))
    }
}

impl<T: Real> FlowField<T> {
    pub fn new(epsilon: T) -> Result<Self> {
        if !(epsilon > T::zero()) {
            return Err(Error::InvalidParameter(
                "field regularization must be positive".into(),
            ));
        }
        Ok(Self {
            singularities: Vec::new(),
            vortices: Vec::new(),
            gaussians: Vec::new(),
            epsilon,
        })
    }

    pub fn empty() -> Self {
        Self::new(T::lit(DEFAULT_EPSILON)).expect("default regularization is positive")
    }

    /// Row `(p_x, p_y, p_z, alpha)`.
    pub fn with_singularity(mut self, row: [T; 4]) -> Self {
        self.singularities.push(PointSingularity {
            position: Vector3::new(row[0], row[1], row[2]),
            strength: row[3],
        });
        self
    }

    /// Row `(q_x, q_y, q_z, a_x, a_y, a_z, gamma)`; the axis is normalized.
    pub fn with_vortex(mut self, row: [T; 7]) -> Result<Self> {
        self.vortices.push(Vortex {
            center: Vector3::new(row[0], row[1], row[2]),
            axis: unit(Vector3::new(row[3], row[4], row[5]), "vortex axis")?,
            strength: row[6],
        });
        Ok(self)
    }

    /// The direction is normalized; width and length must be positive.
    pub fn with_gaussian(
        mut self,
        center: Vector3<T>,
        direction: Vector3<T>,
        strength: T,
        width: T,
        length: T,
    ) -> Result<Self> {
        if !(width > T::zero() && length > T::zero()) {
            return Err(Error::InvalidParameter(
                "gaussian width and length must be positive".into(),
            ));
        }
        self.gaussians.push(GaussianAxial {
            center,
            direction: unit(direction, "gaussian direction")?,
            strength,
            width,
            length,
        });
        Ok(self)
    }

    pub fn singularities(&self) -> &[PointSingularity<T>] {
        &self.singularities
    }

    pub fn vortices(&self) -> &[Vortex<T>] {
        &self.vortices
    }

    pub fn gaussians(&self) -> &[GaussianAxial<T>] {
        &self.gaussians
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn singularity_velocity(&self, s: &PointSingularity<T>, x: &Vector3<T>) -> Vector3<T> {
        let r = x - s.position;
        let n = r.norm();
        let eps = self.epsilon;
        r * (s.strength / (n * n * n + eps * eps * eps))
    }

    pub fn vortex_velocity(&self, v: &Vortex<T>, x: &Vector3<T>) -> Vector3<T> {
        let r = x - v.center;
        let r_perp = r - v.axis * v.axis.dot(&r);
        let eps = self.epsilon;
        v.axis.cross(&r_perp) * (v.strength / (r_perp.norm_squared() + eps * eps))
    }

    pub fn gaussian_velocity(&self, g: &GaussianAxial<T>, x: &Vector3<T>) -> Vector3<T> {
        let r = x - g.center;
        let t = r.dot(&g.direction);
        let n = r - g.direction * t;
        let two = T::lit(2.0);
        let lateral = (-n.norm_squared() / (two * g.width * g.width)).exp();
        let axial = (-(t * t) / (two * g.length * g.length)).exp();
        g.direction * (g.strength * lateral * axial)
    }

    /// Total velocity at `x`. `_t` is accepted for signature uniformity.
    pub fn velocity(&self, x: &Vector3<T>, _t: T) -> Vector3<T> {
        let mut v = Vector3::zeros();
        for s in &self.singularities {
            v += self.singularity_velocity(s, x);
        }
        for w in &self.vortices {
            v += self.vortex_velocity(w, x);
        }
        for g in &self.gaussians {
            v += self.gaussian_velocity(g, x);
        }
        v
    }

    /// Samples at `(x, y, 0)` and keeps the planar part.
    pub fn planar_velocity(&self, xy: [T; 2], t: T) -> [T; 2] {
        let v = self.velocity(&Vector3::new(xy[0], xy[1], T::zero()), t);
        [v.x, v.y]
    }
}

/// `x' = A a cos(a t + dx)`, `y' = B b cos(b t)`, `z' = C c cos(c t + dz)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lissajous<T: Real> {
    pub amplitude: [T; 3],
    pub frequency: [T; 3],
    pub phase_x: T,
    pub phase_z: T,
}

impl<T: Real> Lissajous<T> {
    pub fn zero() -> Self {
        Self {
            amplitude: [T::zero(); 3],
            frequency: [T::zero(); 3],
            phase_x: T::zero(),
            phase_z: T::zero(),
        }
    }

    fn phases(&self) -> [T; 3] {
        [self.phase_x, T::zero(), self.phase_z]
    }

    pub fn velocity(&self, t: T) -> Vector3<T> {
        let ph = self.phases();
        Vector3::from_fn(|k, _| {
            self.amplitude[k] * self.frequency[k] * (self.frequency[k] * t + ph[k]).cos()
        })
    }

    /// Antiderivative of [`Self::velocity`] with value `origin` at `t = 0`.
    pub fn displacement(&self, t: T) -> Vector3<T> {
        let ph = self.phases();
        Vector3::from_fn(|k, _| {
            if self.frequency[k] == T::zero() {
                T::zero()
            } else {
                self.amplitude[k] * ((self.frequency[k] * t + ph[k]).sin() - ph[k].sin())
            }
        })
    }

    /// Same curve traversed `factor` times as fast.
    pub fn time_scaled(&self, factor: T) -> Self {
        let mut out = *self;
        for f in &mut out.frequency {
            *f *= factor;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZeroDrift;

impl<T: Real> Drift<T> for ZeroDrift {
    fn velocity(&self, x: &DVector<T>, _t: T) -> DVector<T> {
        DVector::zeros(x.len())
    }
}

/// `f(x) = A x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineDrift<T: Real> {
    pub a: DMatrix<T>,
    pub b: DVector<T>,
}

impl<T: Real> Drift<T> for AffineDrift<T> {
    fn velocity(&self, x: &DVector<T>, _t: T) -> DVector<T> {
        &self.a * x + &self.b
    }
}

/// The flow field sampled at the state, for states in the plane (dimension 2) or in space (dimension 3).
#[derive(Debug, Clone)]
pub struct FieldDrift<T: Real> {
    field: Arc<FlowField<T>>,
}

impl<T: Real> FieldDrift<T> {
    pub fn new(field: Arc<FlowField<T>>) -> Self {
        Self { field }
    }
}

impl<T: Real> Drift<T> for FieldDrift<T> {
    fn velocity(&self, x: &DVector<T>, t: T) -> DVector<T> {
        match x.len() {
            2 => DVector::from_row_slice(&self.field.planar_velocity([x[0], x[1]], t)),
            3 => {
                let v = self.field.velocity(&Vector3::new(x[0], x[1], x[2]), t);
                DVector::from_row_slice(v.as_slice())
            }
            n => panic!("flow field drift needs a 2- or 3-dimensional state, got {n}"),
        }
    }
}

/// Lissajous reference velocity, truncated to the state dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LissajousDrift<T: Real>(pub Lissajous<T>);

impl<T: Real> Drift<T> for LissajousDrift<T> {
    fn velocity(&self, x: &DVector<T>, t: T) -> DVector<T> {
        let v = self.0.velocity(t);
        DVector::from_fn(x.len(), |k, _| if k < 3 { v[k] } else { T::zero() })
    }
}

/// Pointwise sum of drifts.
#[derive(Debug, Clone, Default)]
pub struct SumDrift<T: Real> {
    pub terms: Vec<Arc<dyn Drift<T>>>,
}

impl<T: Real> Drift<T> for SumDrift<T> {
    fn velocity(&self, x: &DVector<T>, t: T) -> DVector<T> {
        let mut v = DVector::zeros(x.len());
        for d in &self.terms {
            v += d.velocity(x, t);
        }
        v
    }
}

/// Constant input matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantEffectiveness<T: Real>(pub DMatrix<T>);

impl<T: Real> ConstantEffectiveness<T> {
    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }
}

impl<T: Real> Effectiveness<T> for ConstantEffectiveness<T> {
    fn matrix(&self, _x: &DVector<T>, _t: T) -> DMatrix<T> {
        self.0.clone()
    }

    fn control_dim(&self) -> usize {
        self.0.ncols()
    }
}

/// `g(t) = (1 + depth * sin(omega t)) g0`; full row rank while `|depth| < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulatedEffectiveness<T: Real> {
    pub base: DMatrix<T>,
    pub depth: T,
    pub omega: T,
}

impl<T: Real> Effectiveness<T> for ModulatedEffectiveness<T> {
    fn matrix(&self, _x: &DVector<T>, t: T) -> DMatrix<T> {
        &self.base * (T::one() + self.depth * (self.omega * t).sin())
    }

    fn control_dim(&self) -> usize {
        self.base.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZeroDisturbance(pub usize);

impl<T: Real> Disturbance<T> for ZeroDisturbance {
    fn sample(&self, _t: T) -> DVector<T> {
        DVector::zeros(self.0)
    }

    fn bound(&self) -> T {
        T::zero()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantDisturbance<T: Real>(pub DVector<T>);

impl<T: Real> Disturbance<T> for ConstantDisturbance<T> {
    fn sample(&self, _t: T) -> DVector<T> {
        self.0.clone()
    }

    fn bound(&self) -> T {
        self.0.norm()
    }
}

/// Componentwise `a_k sin(w_k t + phi_k)`, bounded by `||a||`.
#[derive(Debug, Clone, PartialEq)]
pub struct SinusoidalDisturbance<T: Real> {
    pub amplitude: DVector<T>,
    pub frequency: DVector<T>,
    pub phase: DVector<T>,
}

impl<T: Real> Disturbance<T> for SinusoidalDisturbance<T> {
    fn sample(&self, t: T) -> DVector<T> {
        DVector::from_fn(self.amplitude.len(), |k, _| {
            self.amplitude[k] * (self.frequency[k] * t + self.phase[k]).sin()
        })
    }

    fn bound(&self) -> T {
        self.amplitude.norm()
    }
}

/// `q_i' = f_i(q_i, t) + g_i(q_i, t) u_i + omega_i(t)`.
#[derive(Debug, Clone)]
pub struct AgentModel<T: Real> {
    pub state_dim: usize,
    pub drift: Arc<dyn Drift<T>>,
    pub effectiveness: Arc<dyn Effectiveness<T>>,
    pub disturbance: Arc<dyn Disturbance<T>>,
    pub disturbance_bound: T,
}

impl<T: Real> AgentModel<T> {
    /// Declared disturbance bound taken from the disturbance itself.
    pub fn new(
        state_dim: usize,
        drift: Arc<dyn Drift<T>>,
        effectiveness: Arc<dyn Effectiveness<T>>,
        disturbance: Arc<dyn Disturbance<T>>,
    ) -> Self {
        let disturbance_bound = disturbance.bound();
        Self {
            state_dim,
            drift,
            effectiveness,
            disturbance,
            disturbance_bound,
        }
    }

    /// Fully actuated single integrator with no drift or disturbance.
    pub fn single_integrator(n: usize) -> Self {
        Self::new(
            n,
            Arc::new(ZeroDrift),
            Arc::new(ConstantEffectiveness::identity(n)),
            Arc::new(ZeroDisturbance(n)),
        )
    }

    pub fn control_dim(&self) -> usize {
        self.effectiveness.control_dim()
    }

    /// `g_i` and its right inverse at `(q_i, t)`.
    pub fn input_map(&self, q: &DVector<T>, t: T) -> Result<(DMatrix<T>, DMatrix<T>)> {
        let g = self.effectiveness.matrix(q, t);
        if g.nrows() != self.state_dim {
            return Err(Error::DimensionMismatch {
                context: "control effectiveness rows".into(),
                expected: self.state_dim,
                actual: g.nrows(),
            });
        }
        let pinv = pseudoinverse(&g)?;
        Ok((g, pinv))
    }
}

/// `p_k' = f_k(p_k, t) + omega_k(t)`.
#[derive(Debug, Clone)]
pub struct TargetModel<T: Real> {
    pub state_dim: usize,
    pub drift: Arc<dyn Drift<T>>,
    pub disturbance: Arc<dyn Disturbance<T>>,
    pub disturbance_bound: T,
}

impl<T: Real> TargetModel<T> {
    pub fn new(
        state_dim: usize,
        drift: Arc<dyn Drift<T>>,
        disturbance: Arc<dyn Disturbance<T>>,
    ) -> Self {
        let disturbance_bound = disturbance.bound();
        Self {
            state_dim,
            drift,
            disturbance,
            disturbance_bound,
        }
    }

    pub fn stationary(n: usize) -> Self {
        Self::new(n, Arc::new(ZeroDrift), Arc::new(ZeroDisturbance(n)))
    }
}

/// Offset consensus among targets:
/// `p_k' += gain * sum_{l ~ k} ((p_l + o_kl) - p_k)` with `o_kl = template_k - template_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetConsensus<T: Real> {
    pub gain: T,
    /// Pairs of target indices (positions within the target list).
    pub edges: Vec<(usize, usize)>,
    pub template: Vec<DVector<T>>,
}

impl<T: Real> OffsetConsensus<T> {
    /// Velocity added to each target, stacked in target order.
    pub fn velocity(&self, p: &[DVector<T>]) -> Vec<DVector<T>> {
        let mut out: Vec<DVector<T>> = p.iter().map(|x| DVector::zeros(x.len())).collect();
        for &(k, l) in &self.edges {
            let dev = (&p[l] - &self.template[l]) - (&p[k] - &self.template[k]);
            out[k] += &dev * self.gain;
            out[l] -= &dev * self.gain;
        }
        out
    }
}

/// Checks `||omega(t)|| <= bound` on `samples` evenly spaced times in `[t0, t1]`.
/// Returns the largest observed norm on success.
pub fn check_disturbance_bound<T: Real>(
    disturbance: &dyn Disturbance<T>,
    bound: T,
    t0: T,
    t1: T,
    samples: usize,
) -> Result<T> {
    let slack = T::lit(8.0) * T::EPS * bound.max(T::one());
    let mut worst = T::zero();
    for k in 0..samples.max(1) {
        let s = if samples > 1 {
            T::from_usize_lossy(k) / T::from_usize_lossy(samples - 1)
        } else {
            T::zero()
        };
        let t = t0 + (t1 - t0) * s;
        let n = disturbance.sample(t).norm();
        if n > bound + slack {
            return Err(Error::InvalidParameter(format!(
                "disturbance norm {n} exceeds declared bound {bound} at t = {t}"
            )));
        }
        worst = worst.max(n);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn v3(x: f64, y: f64, z: f64) -> Vector3<f64> {
        Vector3::new(x, y, z)
    }

    #[test]
    fn pseudoinverse_examples() {
        let i = DMatrix::<f64>::identity(3, 3);
        assert_eq!(pseudoinverse(&i).unwrap(), i);
        let g = DMatrix::from_element(1, 1, 2.0);
        assert_eq!(pseudoinverse(&g).unwrap()[(0, 0)], 0.5);
        let wide = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let p = pseudoinverse(&wide).unwrap();
        assert!((&wide * &p - DMatrix::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn pseudoinverse_rejects_rank_deficiency() {
        let g = DMatrix::<f64>::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(
            pseudoinverse(&g),
            Err(Error::RankDeficient { rank: 1, rows: 2 })
        ));
        let tall = DMatrix::<f64>::from_row_slice(2, 1, &[1.0, 1.0]);
        assert!(pseudoinverse(&tall).is_err());
    }

    #[test]
    fn gaussian_center_gives_full_strength() {
        let f = FlowField::empty()
            .with_gaussian(v3(-3.0, 0.0, 0.0), v3(1.0, 0.0, 0.1), 0.9, 0.9, 5.0)
            .unwrap();
        let d = f.gaussians()[0].direction;
        assert!((d.norm() - 1.0).abs() < 1e-15);
        let v = f.velocity(&v3(-3.0, 0.0, 0.0), 0.0);
        assert_eq!(v, d * 0.9);
    }

    #[test]
    fn vortex_is_orthogonal_to_axis_and_radius() {
        let f = FlowField::empty()
            .with_vortex([2.0, 1.3, 0.7, 0.0, 1.0, 0.0, -0.7])
            .unwrap();
        let w = f.vortices()[0];
        for x in [v3(0.3, -1.0, 2.0), v3(5.0, 5.0, 5.0), v3(2.1, 1.3, 0.6)] {
            let v = f.velocity(&x, 0.0);
            let r = x - w.center;
            let r_perp = r - w.axis * w.axis.dot(&r);
            assert!(v.dot(&w.axis).abs() < 1e-12);
            assert!(v.dot(&r_perp).abs() < 1e-12);
        }
        // right-hand rule: positive strength about +z turns +x into +y
        let g = FlowField::empty()
            .with_vortex([0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0])
            .unwrap();
        let v = g.velocity(&v3(1.0, 0.0, 0.0), 0.0);
        assert!(v.y > 0.0 && v.x.abs() < 1e-15);
    }

    #[test]
    fn source_points_outward_and_sink_inward() {
        let f = FlowField::empty().with_singularity([0.0, 0.0, 0.0, 1.0]);
        assert!(f.velocity(&v3(1.0, 0.0, 0.0), 0.0).x > 0.0);
        let g = FlowField::empty().with_singularity([0.0, 0.0, 0.0, -1.0]);
        assert!(g.velocity(&v3(1.0, 0.0, 0.0), 0.0).x < 0.0);
        // regularized at the singular point itself
        assert_eq!(f.velocity(&v3(0.0, 0.0, 0.0), 0.0), Vector3::zeros());
    }

    #[test]
    fn field_decays_far_away() {
        let f = FlowField::empty()
            .with_singularity([-2.0, 1.0, 0.8, 1.2])
            .with_vortex([-1.2, -0.6, 0.0, 0.0, 0.0, 1.0, 0.9])
            .unwrap()
            .with_gaussian(v3(0.0, -2.0, 1.0), v3(0.7, 0.7, 0.0), 0.6, 0.55, 3.2)
            .unwrap();
        let near = f.velocity(&v3(1.0, 1.0, 1.0), 0.0).norm();
        let far = f.velocity(&v3(1e4, -2e4, 3e4), 0.0).norm();
        assert!(far < 1e-4 && far < near);
    }

    #[test]
    fn field_rejects_bad_parameters() {
        assert!(FlowField::<f64>::new(0.0).is_err());
        assert!(FlowField::<f64>::empty().with_vortex([0.0; 7]).is_err());
        assert!(FlowField::<f64>::empty()
            .with_gaussian(v3(0.0, 0.0, 0.0), v3(1.0, 0.0, 0.0), 1.0, 0.0, 1.0)
            .is_err());
    }

    #[test]
    fn planar_sampling_projects() {
        let f = FlowField::empty().with_singularity([0.0, 0.0, 1.0, 1.0]);
        let full = f.velocity(&v3(1.0, 0.0, 0.0), 0.0);
        assert!(full.z < 0.0);
        assert_eq!(f.planar_velocity([1.0, 0.0], 0.0), [full.x, full.y]);
        let d = FieldDrift::new(Arc::new(f));
        assert_eq!(d.velocity(&DVector::from_vec(vec![1.0, 0.0]), 0.0).len(), 2);
    }

    fn reference() -> Lissajous<f64> {
        Lissajous {
            amplitude: [20.0, 10.0, 15.0],
            frequency: [1.0, 2.0, 1.0],
            phase_x: PI / 2.0,
            phase_z: 0.0,
        }
    }

    #[test]
    fn lissajous_initial_velocity() {
        let v = reference().velocity(0.0);
        assert!(v.x.abs() < 1e-14);
        assert_eq!((v.y, v.z), (20.0, 15.0));
        assert_eq!(Lissajous::zero().velocity(3.7), Vector3::zeros());
    }

    #[test]
    fn lissajous_closes_after_a_period() {
        let l = reference();
        let period = 2.0 * PI;
        assert!(l.displacement(period).norm() < 1e-12);
        // trapezoid-free check: midpoint quadrature of the velocity
        let n = 20_000;
        let h = period / n as f64;
        let mut s = Vector3::zeros();
        for k in 0..n {
            s += l.velocity((k as f64 + 0.5) * h) * h;
        }
        assert!(s.norm() < 1e-6);
        let slow = l.time_scaled(0.1);
        assert!((slow.velocity(0.0).y - 2.0).abs() < 1e-14);
    }

    #[test]
    fn displacement_derivative_is_velocity() {
        let l = reference();
        let h = 1e-4;
        for t in [0.0, 0.4, 2.5] {
            let fd = (l.displacement(t + h) - l.displacement(t - h)) / (2.0 * h);
            assert!((fd - l.velocity(t)).norm() < 1e-5);
        }
    }

    #[test]
    fn sinusoid_respects_bound() {
        let d = SinusoidalDisturbance {
            amplitude: DVector::<f64>::from_vec(vec![0.3, -0.4]),
            frequency: DVector::from_vec(vec![1.0, 3.0]),
            phase: DVector::from_vec(vec![0.0, 0.5]),
        };
        assert!((d.bound() - 0.5).abs() < 1e-15);
        let worst = check_disturbance_bound(&d, d.bound(), 0.0, 100.0, 10_000).unwrap();
        assert!(worst <= 0.5);
        assert!(check_disturbance_bound(&d, 0.1, 0.0, 10.0, 100).is_err());
        let c = ConstantDisturbance(DVector::from_vec(vec![3.0, 4.0]));
        assert_eq!(Disturbance::<f64>::bound(&c), 5.0);
    }

    #[test]
    fn offset_consensus_preserves_centroid() {
        let oc = OffsetConsensus {
            gain: 5.0,
            edges: vec![(0, 1), (1, 2), (0, 2)],
            template: vec![
                DVector::from_vec(vec![0.0, 0.0]),
                DVector::from_vec(vec![1.0, 0.0]),
                DVector::from_vec(vec![0.0, 1.0]),
            ],
        };
        let p = vec![
            DVector::from_vec(vec![3.0, -1.0]),
            DVector::from_vec(vec![0.5, 2.0]),
            DVector::from_vec(vec![-2.0, 0.0]),
        ];
        let v = oc.velocity(&p);
        let total: DVector<f64> = v.iter().fold(DVector::zeros(2), |a, b| a + b);
        assert!(total.norm() < 1e-14);
        let at_template = oc.velocity(
            &oc.template
                .iter()
                .map(|t| t.add_scalar(7.0))
                .collect::<Vec<_>>(),
        );
        assert!(at_template.iter().all(|x| x.norm() < 1e-14));
    }

    #[test]
    fn modulated_input_keeps_rank() {
        let m = ModulatedEffectiveness {
            base: DMatrix::<f64>::identity(2, 2),
            depth: 0.5,
            omega: 1.0,
        };
        let a = AgentModel::new(
            2,
            Arc::new(ZeroDrift),
            Arc::new(m),
            Arc::new(ZeroDisturbance(2)),
        );
        let (g, p) = a.input_map(&DVector::zeros(2), 1.0).unwrap();
        assert!((&g * &p - DMatrix::identity(2, 2)).norm() < 1e-14);
        assert_eq!(a.control_dim(), 2);
    }

    #[test]
    fn field_evaluation_is_bit_reproducible() {
        let f = FlowField::empty()
            .with_singularity([1.6, -1.2, -0.5, -1.0])
            .with_vortex([2.0, 1.3, 0.7, 0.0, 1.0, 0.0, -0.7])
            .unwrap();
        let x = v3(0.123, 4.56, -7.89);
        assert_eq!(
            f.velocity(&x, 0.0).map(f64::to_bits),
            f.velocity(&x, 9.0).map(f64::to_bits)
        );
    }
}
