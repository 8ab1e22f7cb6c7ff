//! Global sections, relative degree-0 cohomology and the tracking
//! feasibility test.
//!
//! Kernels come from the singular decomposition of the (restricted)
//! coboundary, never of the Laplacian, so the condition number is not
//! squared. A singular value counts as zero when it is at most
//! `max(m, n) * sigma_max * RANK_RTOL`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;
use crate::sheaf::{CellularSheaf, Cochain, Degree, Graph};

/// A validated set of vertex ids, kept sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct VertexSubset {
    members: Vec<usize>,
}

impl VertexSubset {
    pub fn new<I: IntoIterator<Item = usize>>(graph: &Graph, ids: I) -> Result<Self> {
        let mut members: Vec<usize> = ids.into_iter().collect();
        for &v in &members {
            graph.check_vertex(v)?;
        }
        members.sort_unstable();
        members.dedup();
        Ok(Self { members })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn all(graph: &Graph) -> Self {
        Self {
            members: (0..graph.vertex_count()).collect(),
        }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.members.binary_search(&v).is_ok()
    }

    /// Position of `v` within the subset.
    pub fn position(&self, v: usize) -> Option<usize> {
        self.members.binary_search(&v).ok()
    }

    pub fn complement(&self, graph: &Graph) -> VertexSubset {
        Self {
            members: (0..graph.vertex_count())
                .filter(|v| !self.contains(*v))
                .collect(),
        }
    }

    pub fn is_disjoint(&self, other: &VertexSubset) -> bool {
        self.members.iter().all(|v| !other.contains(*v))
    }
}

/// Dimension and orthonormal basis of a degree-0 (relative) cohomology space.
#[derive(Debug, Clone)]
pub struct CohomologyReport<T: Real> {
    pub dimension: usize,
    /// Full 0-cochains spanning the kernel; zero on boundary vertices.
    pub basis: Vec<Cochain<T>>,
    pub rank_tolerance: T,
    /// Singular values of the (restricted) coboundary, descending.
    pub singular_values: Vec<T>,
    /// `dim H^1 = dim C^1 - rank(delta)`, reported for the absolute case only.
    pub h1_dimension: Option<usize>,
}

impl<T: Real> CohomologyReport<T> {
    /// Basis as columns of a `dim C^0 x dimension` matrix.
    pub fn basis_matrix(&self) -> DMatrix<T> {
        let rows = self.basis.first().map_or(0, |c| c.vector().len());
        let mut m = DMatrix::zeros(rows, self.basis.len());
        for (k, c) in self.basis.iter().enumerate() {
            m.set_column(k, c.vector());
        }
        m
    }
}

/// Coboundary columns belonging to `interior` vertex blocks, in ascending vertex order.
pub fn restricted_coboundary<T: Real>(
    sheaf: &CellularSheaf<T>,
    interior: &VertexSubset,
) -> DMatrix<T> {
    let full = sheaf.coboundary();
    let layout = sheaf.vertex_layout();
    let cols: usize = interior.members().iter().map(|&v| layout.size(v)).sum();
    let mut out = DMatrix::zeros(full.nrows(), cols);
    let mut c = 0;
    for &v in interior.members() {
        let w = layout.size(v);
        out.columns_mut(c, w)
            .copy_from(&full.columns(layout.offset(v), w));
        c += w;
    }
    out
}

fn kernel_report<T: Real>(
    sheaf: &CellularSheaf<T>,
    interior: &VertexSubset,
    absolute: bool,
) -> CohomologyReport<T> {
    let d = restricted_coboundary(sheaf, interior);
    let k = linalg::kernel(&d);
    let layout = sheaf.vertex_layout();
    let basis = (0..k.basis.ncols())
        .map(|col| {
            let mut x = Cochain::zeros(sheaf, Degree::Zero);
            let mut r = 0;
            for &v in interior.members() {
                let w = layout.size(v);
                x.block_mut(v).copy_from(&k.basis.view((r, col), (w, 1)));
                r += w;
            }
            x
        })
        .collect::<Vec<_>>();
    CohomologyReport {
        dimension: basis.len(),
        basis,
        rank_tolerance: k.tolerance,
        singular_values: k.singular_values,
        h1_dimension: absolute.then(|| sheaf.c1_dim() - k.rank),
    }
}

/// `H^0(G; F) = ker delta`, the space of global sections.
pub fn global_sections<T: Real>(sheaf: &CellularSheaf<T>) -> CohomologyReport<T> {
    kernel_report(sheaf, &VertexSubset::all(sheaf.graph()), true)
}

/// `H^0(G, G'; F)`: kernel of the coboundary on 0-cochains supported off `boundary`.
pub fn relative_cohomology<T: Real>(
    sheaf: &CellularSheaf<T>,
    boundary: &VertexSubset,
) -> Result<CohomologyReport<T>> {
    for &v in boundary.members() {
        sheaf.graph().check_vertex(v)?;
    }
    if boundary.is_empty() {
        return Ok(global_sections(sheaf));
    }
    Ok(kernel_report(
        sheaf,
        &boundary.complement(sheaf.graph()),
        false,
    ))
}

/// Outcome of [`check_feasibility`].
#[derive(Debug, Clone)]
pub struct Feasibility<T: Real> {
    pub feasible: bool,
    /// When infeasible, the basis spans the unconstrained agent directions.
    pub report: CohomologyReport<T>,
}

/// Tracking is well posed iff `H^0(G, G_p; F) = 0`.
pub fn check_feasibility<T: Real>(
    sheaf: &CellularSheaf<T>,
    targets: &VertexSubset,
) -> Result<Feasibility<T>> {
    let report = relative_cohomology(sheaf, targets)?;
    Ok(Feasibility {
        feasible: report.dimension == 0,
        report,
    })
}

impl<T: Real> Feasibility<T> {
    /// Error carrying the obstruction basis, restricted to the given vertices.
    pub fn obstruction_error(&self, agents: &VertexSubset) -> Error {
        let obstruction = self
            .report
            .basis
            .iter()
            .map(|c| {
                agents
                    .members()
                    .iter()
                    .flat_map(|&v| {
                        c.block(v)
                            .iter()
                            .map(|x| x.to_f64_lossy())
                            .collect::<Vec<_>>()
                    })
                    .collect()
            })
            .collect();
        Error::Infeasible {
            dimension: self.report.dimension,
            obstruction,
        }
    }
}
