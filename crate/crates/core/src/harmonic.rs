//! Partitioned operators of a tracking problem and the harmonic-extension
//! solve `H q = B p`.
//!
//! With agents `V_q` and targets `V_p` partitioning the vertices:
//!
//! * `D` is block diagonal, `D_i = sum_{k in T_i} F_{i<ik}^T F_{i<ik}`,
//! * `B_{i,k} = F_{i<ik}^T F_{k<ik}` on sensing edges,
//! * `L_Q` is the Laplacian of the sheaf restricted to the agent graph,
//! * `H = L_Q + D`, which equals the agent block of the full Laplacian while
//!   `-B` equals its agent/target block.
//!
//! An optional formation shift `s` (a 1-cochain) replaces the residual
//! `delta x` by `delta x - s`; then `q* = H^{-1}(B p + c)` with
//! `c = delta_q^T s`. Without a shift `c = 0`.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;

use crate::cohomology::{check_feasibility, restricted_coboundary, Feasibility, VertexSubset};
use crate::error::{Error, Result};
use crate::linalg::{self, BlockLayout, Ldlt};
use crate::scalar::Real;
use crate::sheaf::{csr_mul, CellularSheaf, Cochain, Degree, SPARSE_VERTEX_THRESHOLD};

/// How [`TrackingProblem::harmonic_extension_with`] solves `H q = B p + c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    /// Square-root-free Cholesky (`L D L^T`); fails with the obstruction basis when `H` is singular.
    Cholesky,
    /// Minimum-norm least-squares pseudo-solution. Never chosen implicitly.
    LeastSquares,
}

/// A sheaf with an agent/target partition and its cached operators.
#[derive(Debug, Clone)]
pub struct TrackingProblem<T: Real> {
    sheaf: CellularSheaf<T>,
    agents: VertexSubset,
    targets: VertexSubset,
    agent_layout: BlockLayout,
    target_layout: BlockLayout,
    h: DMatrix<T>,
    d: DMatrix<T>,
    b: DMatrix<T>,
    l_q: DMatrix<T>,
    h_sparse: Option<CsrMatrix<T>>,
    shift: Option<DVector<T>>,
    shift_load: DVector<T>,
    feasibility: Feasibility<T>,
    factor: Option<Ldlt<T>>,
    lambda_min_h: T,
    lambda_max_h: T,
    sigma_max_b: T,
}

impl<T: Real> TrackingProblem<T> {
    /// Validates the partition and the communication assumptions, then assembles `H`, `D`, `B`.
    ///
    /// Infeasibility (nontrivial relative cohomology) is recorded, not raised;
    /// solves on an infeasible problem return [`Error::Infeasible`].
    pub fn assemble(
        sheaf: CellularSheaf<T>,
        agents: VertexSubset,
        targets: VertexSubset,
    ) -> Result<Self> {
        let graph = sheaf.graph();
        for &v in agents.members().iter().chain(targets.members()) {
            graph.check_vertex(v)?;
        }
        if agents.is_empty() {
            return Err(Error::InvalidPartition("no agents".into()));
        }
        if targets.is_empty() {
            return Err(Error::InvalidPartition("no targets".into()));
        }
        if !agents.is_disjoint(&targets) {
            return Err(Error::InvalidPartition("agents and targets overlap".into()));
        }
        if agents.len() + targets.len() != graph.vertex_count() {
            return Err(Error::InvalidPartition(
                "agents and targets must cover every vertex".into(),
            ));
        }
        if !graph.is_connected_on(agents.members()) {
            return Err(Error::DisconnectedAgents);
        }
        for &k in targets.members() {
            if !graph.neighbors(k).iter().any(|&i| agents.contains(i)) {
                return Err(Error::UnsensedTarget(k));
            }
        }

        let agent_layout =
            BlockLayout::from_sizes(agents.members().iter().map(|&v| sheaf.vertex_dim(v)));
        let target_layout =
            BlockLayout::from_sizes(targets.members().iter().map(|&v| sheaf.vertex_dim(v)));
        let (nq, np) = (agent_layout.total(), target_layout.total());
        let mut l_q = DMatrix::zeros(nq, nq);
        let mut d = DMatrix::zeros(nq, nq);
        let mut b = DMatrix::zeros(nq, np);

        for &(u, v) in graph.edges() {
            let (f_u, f_v) = (sheaf.restriction(u, v)?, sheaf.restriction(v, u)?);
            match (agents.position(u), agents.position(v)) {
                (Some(a), Some(c)) => {
                    let (oa, oc) = (agent_layout.offset(a), agent_layout.offset(c));
                    let mut blk = l_q.view_mut((oa, oa), (f_u.ncols(), f_u.ncols()));
                    blk += f_u.tr_mul(f_u);
                    let mut blk = l_q.view_mut((oc, oc), (f_v.ncols(), f_v.ncols()));
                    blk += f_v.tr_mul(f_v);
                    let off = f_u.tr_mul(f_v);
                    let mut blk = l_q.view_mut((oa, oc), off.shape());
                    blk -= &off;
                    let mut blk = l_q.view_mut((oc, oa), (off.ncols(), off.nrows()));
                    blk -= off.transpose();
                }
                (Some(a), None) | (None, Some(a)) => {
                    let (f_a, f_k, k) = if agents.contains(u) {
                        (f_u, f_v, v)
                    } else {
                        (f_v, f_u, u)
                    };
                    let t = targets.position(k).expect("partition covers every vertex");
                    let oa = agent_layout.offset(a);
                    let mut blk = d.view_mut((oa, oa), (f_a.ncols(), f_a.ncols()));
                    blk += f_a.tr_mul(f_a);
                    let mut blk =
                        b.view_mut((oa, target_layout.offset(t)), (f_a.ncols(), f_k.ncols()));
                    blk += f_a.tr_mul(f_k);
                }
                (None, None) => {}
            }
        }
        let h = &l_q + &d;
        let feasibility = check_feasibility(&sheaf, &targets)?;
        let factor = if feasibility.feasible {
            Ldlt::new(&h)
        } else {
            None
        };
        let (lambda_min_h, lambda_max_h) = linalg::symmetric_extremes(&h);
        let sigma_max_b = linalg::spectral_norm(&b);
        let h_sparse = (sheaf.vertex_count() > SPARSE_VERTEX_THRESHOLD)
            .then(|| nalgebra_sparse::convert::serial::convert_dense_csr(&h));
        Ok(Self {
            shift: None,
            shift_load: DVector::zeros(nq),
            sheaf,
            agents,
            targets,
            agent_layout,
            target_layout,
            h,
            d,
            b,
            l_q,
            h_sparse,
            feasibility,
            factor,
            lambda_min_h,
            lambda_max_h,
            sigma_max_b,
        })
    }

    /// Installs a formation shift `s` (1-cochain): the controlled residual becomes `delta x - s`.
    pub fn with_shift(mut self, shift: &Cochain<T>) -> Result<Self> {
        if shift.degree() != Degree::One {
            return Err(Error::DegreeMismatch {
                expected: 1,
                actual: shift.degree().as_u8(),
            });
        }
        if shift.vector().len() != self.sheaf.c1_dim() {
            return Err(Error::DimensionMismatch {
                context: "formation shift".into(),
                expected: self.sheaf.c1_dim(),
                actual: shift.vector().len(),
            });
        }
        let d_q = restricted_coboundary(&self.sheaf, &self.agents);
        self.shift_load = d_q.tr_mul(shift.vector());
        self.shift = Some(shift.vector().clone());
        Ok(self)
    }

    /// Shift derived from a template configuration: `s = delta(template)`, so the
    /// template (and any section-translate of it) has zero shifted residual.
    pub fn with_template(self, template: &Cochain<T>) -> Result<Self> {
        let s = self.sheaf.coboundary_apply(template)?;
        self.with_shift(&s)
    }

    pub fn sheaf(&self) -> &CellularSheaf<T> {
        &self.sheaf
    }

    pub fn agents(&self) -> &VertexSubset {
        &self.agents
    }

    pub fn targets(&self) -> &VertexSubset {
        &self.targets
    }

    /// Layout of agent cochains (agents in ascending vertex order).
    pub fn agent_layout(&self) -> &BlockLayout {
        &self.agent_layout
    }

    pub fn target_layout(&self) -> &BlockLayout {
        &self.target_layout
    }

    pub fn h(&self) -> &DMatrix<T> {
        &self.h
    }

    pub fn d(&self) -> &DMatrix<T> {
        &self.d
    }

    pub fn b(&self) -> &DMatrix<T> {
        &self.b
    }

    pub fn l_q(&self) -> &DMatrix<T> {
        &self.l_q
    }

    /// Edge shift `s`, if any, flattened in canonical edge order.
    pub fn shift(&self) -> Option<&DVector<T>> {
        self.shift.as_ref()
    }

    /// `c = delta_q^T s` (zero without a shift).
    pub fn shift_load(&self) -> &DVector<T> {
        &self.shift_load
    }

    pub fn feasibility(&self) -> &Feasibility<T> {
        &self.feasibility
    }

    pub fn is_feasible(&self) -> bool {
        self.factor.is_some()
    }

    pub fn lambda_min_h(&self) -> T {
        self.lambda_min_h
    }

    pub fn lambda_max_h(&self) -> T {
        self.lambda_max_h
    }

    pub fn sigma_max_b(&self) -> T {
        self.sigma_max_b
    }

    /// Spectral threshold `dim(H) * lambda_max(H) * RANK_RTOL` for positive definiteness.
    pub fn spectral_tolerance(&self) -> T {
        T::from_usize_lossy(self.h.nrows()) * self.lambda_max_h * T::RANK_RTOL
    }

    /// `lambda_min(H) > spectral_tolerance()`.
    pub fn spectrally_positive_definite(&self) -> bool {
        self.lambda_min_h > self.spectral_tolerance()
    }

    /// `P = max(N, M)`.
    pub fn p_count(&self) -> usize {
        self.agents.len().max(self.targets.len())
    }

    fn check_len(&self, v: &DVector<T>, expected: usize, what: &str) -> Result<()> {
        if v.len() == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                context: what.into(),
                expected,
                actual: v.len(),
            })
        }
    }

    fn rhs(&self, p: &DVector<T>) -> Result<DVector<T>> {
        self.check_len(p, self.target_layout.total(), "target cochain")?;
        Ok(&self.b * p + &self.shift_load)
    }

    /// `q* = H^{-1}(B p + c)` through the cached `L D L^T` factor.
    pub fn harmonic_extension(&self, p: &DVector<T>) -> Result<DVector<T>> {
        self.harmonic_extension_with(p, SolveMode::Cholesky)
    }

    pub fn harmonic_extension_with(&self, p: &DVector<T>, mode: SolveMode) -> Result<DVector<T>> {
        let rhs = self.rhs(p)?;
        match mode {
            SolveMode::Cholesky => match &self.factor {
                Some(f) => Ok(f.solve(&rhs)),
                None => Err(self.feasibility.obstruction_error(&self.agents)),
            },
            SolveMode::LeastSquares => {
                let svd = self.h.clone().svd(true, true);
                let sigma_max = svd
                    .singular_values
                    .iter()
                    .copied()
                    .fold(T::zero(), |a, s| a.max(s));
                let tol = linalg::rank_threshold(self.h.nrows(), self.h.ncols(), sigma_max);
                svd.solve(&rhs, tol)
                    .map_err(|e| Error::Numerical(e.to_string()))
            }
        }
    }

    /// `H^{-1} rhs` through the cached factor.
    pub fn solve(&self, rhs: &DVector<T>) -> Result<DVector<T>> {
        self.check_len(rhs, self.agent_layout.total(), "agent cochain")?;
        match &self.factor {
            Some(f) => Ok(f.solve(rhs)),
            None => Err(self.feasibility.obstruction_error(&self.agents)),
        }
    }

    /// Same solve by conjugate gradients; sparse `H` above the vertex threshold.
    pub fn harmonic_extension_cg(
        &self,
        p: &DVector<T>,
        rtol: T,
        max_iter: usize,
    ) -> Result<DVector<T>> {
        if !self.is_feasible() {
            return Err(self.feasibility.obstruction_error(&self.agents));
        }
        let rhs = self.rhs(p)?;
        let out = match &self.h_sparse {
            Some(hs) => linalg::conjugate_gradient(|x| csr_mul(hs, x), &rhs, rtol, max_iter),
            None => linalg::conjugate_gradient(|x| &self.h * x, &rhs, rtol, max_iter),
        };
        if out.converged {
            Ok(out.solution)
        } else {
            Err(Error::Numerical(format!(
                "conjugate gradients stalled after {} iterations (residual {:e})",
                out.iterations, out.residual_norm
            )))
        }
    }

    /// Ensemble disagreement `eta = H q - B p - c`.
    pub fn disagreement(&self, q: &DVector<T>, p: &DVector<T>) -> Result<DVector<T>> {
        self.check_len(q, self.agent_layout.total(), "agent cochain")?;
        let rhs = self.rhs(p)?;
        Ok(&self.h * q - rhs)
    }

    /// Tracking error `e = q* - q`.
    pub fn tracking_error(&self, q: &DVector<T>, p: &DVector<T>) -> Result<DVector<T>> {
        self.check_len(q, self.agent_layout.total(), "agent cochain")?;
        Ok(self.harmonic_extension(p)? - q)
    }

    /// Interleaves agent and target blocks into a full 0-cochain.
    pub fn stack(&self, q: &DVector<T>, p: &DVector<T>) -> Result<Cochain<T>> {
        self.check_len(q, self.agent_layout.total(), "agent cochain")?;
        self.check_len(p, self.target_layout.total(), "target cochain")?;
        let mut x = Cochain::zeros(&self.sheaf, Degree::Zero);
        for (a, &v) in self.agents.members().iter().enumerate() {
            x.block_mut(v)
                .copy_from(&q.rows(self.agent_layout.offset(a), self.agent_layout.size(a)));
        }
        for (t, &v) in self.targets.members().iter().enumerate() {
            x.block_mut(v)
                .copy_from(&p.rows(self.target_layout.offset(t), self.target_layout.size(t)));
        }
        Ok(x)
    }

    /// Inverse of [`Self::stack`].
    pub fn split(&self, x: &Cochain<T>) -> Result<(DVector<T>, DVector<T>)> {
        x.expect_shape(&self.sheaf, Degree::Zero)?;
        let mut q = DVector::zeros(self.agent_layout.total());
        let mut p = DVector::zeros(self.target_layout.total());
        for (a, &v) in self.agents.members().iter().enumerate() {
            q.rows_mut(self.agent_layout.offset(a), self.agent_layout.size(a))
                .copy_from(&x.block(v));
        }
        for (t, &v) in self.targets.members().iter().enumerate() {
            p.rows_mut(self.target_layout.offset(t), self.target_layout.size(t))
                .copy_from(&x.block(v));
        }
        Ok((q, p))
    }

    /// Shifted Dirichlet energy `1/2 ||delta x - s||^2` of the stacked state.
    pub fn energy(&self, q: &DVector<T>, p: &DVector<T>) -> Result<T> {
        let x = self.stack(q, p)?;
        let mut r = self.sheaf.coboundary_apply(&x)?.into_vector();
        if let Some(s) = &self.shift {
            r -= s;
        }
        Ok(T::lit(0.5) * r.norm_squared())
    }
}

/// Dirichlet energy `1/2 ||delta x||^2`.
pub fn dirichlet_energy<T: Real>(sheaf: &CellularSheaf<T>, x: &Cochain<T>) -> Result<T> {
    let dx = sheaf.coboundary_apply(x)?;
    Ok(T::lit(0.5) * dx.vector().norm_squared())
}
