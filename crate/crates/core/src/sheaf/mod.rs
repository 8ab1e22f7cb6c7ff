//! Weighted cellular sheaves on simple graphs and their coboundary and
//! Laplacian operators.
//!
//! Block ordering is fixed: 0-cochains list vertex stalks by ascending vertex
//! id, 1-cochains list edge stalks in lexicographic `(min, max)` order. The
//! coboundary is oriented low endpoint minus high endpoint,
//! `(dx)_e = F_{lo<e} x_lo - F_{hi<e} x_hi`. Stalk inner products are
//! Euclidean; any edge weighting lives in the restriction maps.

mod cochain;
mod graph;

pub use cochain::{Cochain, Degree};
pub use graph::Graph;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::{Error, Result};
use crate::linalg::BlockLayout;
use crate::scalar::Real;

/// Vertex count above which [`CellularSheaf::laplacian_operator`] goes sparse.
pub const SPARSE_VERTEX_THRESHOLD: usize = 200;

/// A cellular sheaf over an undirected simple graph.
///
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CellularSheaf<T: Real> {
    graph: Graph,
    vertex_dims: Vec<usize>,
    edge_dims: Vec<usize>,
    /// Per canonical edge: (map from low endpoint, map from high endpoint).
    restrictions: Vec<(DMatrix<T>, DMatrix<T>)>,
    vertex_layout: BlockLayout,
    edge_layout: BlockLayout,
}

/// Incremental constructor for [`CellularSheaf`].
#[derive(Debug, Clone)]
pub struct SheafBuilder<T: Real> {
    vertex_dims: Vec<usize>,
    edges: Vec<(usize, usize, DMatrix<T>, DMatrix<T>)>,
}

impl<T: Real> SheafBuilder<T> {
    pub fn new(vertex_dims: Vec<usize>) -> Self {
        Self {
            vertex_dims,
            edges: Vec::new(),
        }
    }

    /// Adds edge `{a, b}` with restriction maps `F_{a<ab}` and `F_{b<ab}`.
    /// The edge stalk dimension is the common row count.
    pub fn edge(mut self, a: usize, b: usize, map_a: DMatrix<T>, map_b: DMatrix<T>) -> Self {
        self.edges.push((a, b, map_a, map_b));
        self
    }

    pub fn add_edge(
        &mut self,
        a: usize,
        b: usize,
        map_a: DMatrix<T>,
        map_b: DMatrix<T>,
    ) -> &mut Self {
        self.edges.push((a, b, map_a, map_b));
        self
    }

    pub fn build(self) -> Result<CellularSheaf<T>> {
        let n = self.vertex_dims.len();
        if let Some(v) = self.vertex_dims.iter().position(|&d| d == 0) {
            return Err(Error::ZeroDimension(format!("vertex {v}")));
        }
        let graph = Graph::new(n, self.edges.iter().map(|e| (e.0, e.1)))?;
        let mut slots: Vec<Option<(DMatrix<T>, DMatrix<T>)>> = vec![None; graph.edge_count()];
        let mut edge_dims = vec![0; graph.edge_count()];
        for (a, b, map_a, map_b) in self.edges {
            let m = map_a.nrows();
            if m == 0 {
                return Err(Error::ZeroDimension(format!("edge ({a}, {b})")));
            }
            for (v, map) in [(a, &map_a), (b, &map_b)] {
                if map.nrows() != m || map.ncols() != self.vertex_dims[v] {
                    return Err(Error::RestrictionShape {
                        vertex: v,
                        a,
                        b,
                        rows: map.nrows(),
                        cols: map.ncols(),
                        expected_rows: m,
                        expected_cols: self.vertex_dims[v],
                    });
                }
            }
            let e = graph.edge_index(a, b).expect("edge registered in graph");
            edge_dims[e] = m;
            slots[e] = Some(if a < b {
                (map_a, map_b)
            } else {
                (map_b, map_a)
            });
        }
        let restrictions = slots
            .into_iter()
            .enumerate()
            .map(|(e, s)| {
                let (a, b) = graph.edges()[e];
                s.ok_or(Error::MissingRestriction(a, b))
            })
            .collect::<Result<Vec<_>>>()?;
        let vertex_layout = BlockLayout::from_sizes(self.vertex_dims.iter().copied());
        let edge_layout = BlockLayout::from_sizes(edge_dims.iter().copied());
        Ok(CellularSheaf {
            graph,
            vertex_dims: self.vertex_dims,
            edge_dims,
            restrictions,
            vertex_layout,
            edge_layout,
        })
    }
}

/// Constant sheaf: every stalk is `R^k`, every restriction the identity.
pub fn constant_sheaf<T: Real>(graph: &Graph, k: usize) -> Result<CellularSheaf<T>> {
    if k == 0 {
        return Err(Error::ZeroDimension("constant sheaf stalk".into()));
    }
    let mut b = SheafBuilder::new(vec![k; graph.vertex_count()]);
    for &(i, j) in graph.edges() {
        b.add_edge(i, j, DMatrix::identity(k, k), DMatrix::identity(k, k));
    }
    b.build()
}

/// Laplacian in the representation chosen by problem size.
#[derive(Debug, Clone)]
pub enum LaplacianOperator<T: Real> {
    Dense(DMatrix<T>),
    Sparse(CsrMatrix<T>),
}

impl<T: Real> LaplacianOperator<T> {
    pub fn apply(&self, x: &DVector<T>) -> DVector<T> {
        match self {
            LaplacianOperator::Dense(m) => m * x,
            LaplacianOperator::Sparse(m) => csr_mul(m, x),
        }
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        match self {
            LaplacianOperator::Dense(m) => m.clone(),
            LaplacianOperator::Sparse(m) => {
                let mut d = DMatrix::zeros(m.nrows(), m.ncols());
                for (i, j, v) in m.triplet_iter() {
                    d[(i, j)] += *v;
                }
                d
            }
        }
    }
}

/// Sparse matrix-vector product.
pub fn csr_mul<T: Real>(m: &CsrMatrix<T>, x: &DVector<T>) -> DVector<T> {
    let mut y = DVector::zeros(m.nrows());
    for (i, row) in m.row_iter().enumerate() {
        let mut acc = T::zero();
        for (&j, &v) in row.col_indices().iter().zip(row.values()) {
            acc += v * x[j];
        }
        y[i] = acc;
    }
    y
}

impl<T: Real> CellularSheaf<T> {
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    pub fn vertex_dim(&self, v: usize) -> usize {
        self.vertex_dims[v]
    }

    pub fn vertex_dims(&self) -> &[usize] {
        &self.vertex_dims
    }

    pub fn edge_dim(&self, e: usize) -> usize {
        self.edge_dims[e]
    }

    pub fn edge_dims(&self) -> &[usize] {
        &self.edge_dims
    }

    /// `dim C^0`.
    pub fn c0_dim(&self) -> usize {
        self.vertex_layout.total()
    }

    /// `dim C^1`.
    pub fn c1_dim(&self) -> usize {
        self.edge_layout.total()
    }

    pub fn vertex_layout(&self) -> &BlockLayout {
        &self.vertex_layout
    }

    pub fn edge_layout(&self) -> &BlockLayout {
        &self.edge_layout
    }

    pub fn layout(&self, degree: Degree) -> &BlockLayout {
        match degree {
            Degree::Zero => &self.vertex_layout,
            Degree::One => &self.edge_layout,
        }
    }

    /// Restriction maps of edge `e` as `(F_{lo<e}, F_{hi<e})`.
    pub fn restriction_pair(&self, e: usize) -> (&DMatrix<T>, &DMatrix<T>) {
        let (lo, hi) = &self.restrictions[e];
        (lo, hi)
    }

    /// `F_{v < ab}` for an edge incident to `v`.
    pub fn restriction(&self, v: usize, other: usize) -> Result<&DMatrix<T>> {
        let e = self
            .graph
            .edge_index(v, other)
            .ok_or(Error::UnknownEdge(v, other))?;
        let (lo, hi) = &self.restrictions[e];
        Ok(if v < other { lo } else { hi })
    }

    /// Dense coboundary matrix, `dim C^1 x dim C^0`.
    pub fn coboundary(&self) -> DMatrix<T> {
        let mut d = DMatrix::zeros(self.c1_dim(), self.c0_dim());
        for (e, &(lo, hi)) in self.graph.edges().iter().enumerate() {
            let (f_lo, f_hi) = &self.restrictions[e];
            let r = self.edge_layout.offset(e);
            d.view_mut((r, self.vertex_layout.offset(lo)), f_lo.shape())
                .copy_from(f_lo);
            d.view_mut((r, self.vertex_layout.offset(hi)), f_hi.shape())
                .copy_from(&(-f_hi));
        }
        d
    }

    /// Applies the coboundary edge by edge.
    pub fn coboundary_apply(&self, x: &Cochain<T>) -> Result<Cochain<T>> {
        x.expect_shape(self, Degree::Zero)?;
        let mut out = Cochain::zeros(self, Degree::One);
        for (e, &(lo, hi)) in self.graph.edges().iter().enumerate() {
            let (f_lo, f_hi) = &self.restrictions[e];
            let v = f_lo * x.block(lo) - f_hi * x.block(hi);
            out.block_mut(e).copy_from(&v);
        }
        Ok(out)
    }

    /// Dense sheaf Laplacian assembled block by block:
    /// diagonal `sum_j F_{i<ij}^T F_{i<ij}`, off-diagonal `-F_{i<ij}^T F_{j<ij}`.
    pub fn laplacian(&self) -> DMatrix<T> {
        let n = self.c0_dim();
        let mut l = DMatrix::zeros(n, n);
        for (e, &(lo, hi)) in self.graph.edges().iter().enumerate() {
            let (f_lo, f_hi) = &self.restrictions[e];
            let (o_lo, o_hi) = (self.vertex_layout.offset(lo), self.vertex_layout.offset(hi));
            let (n_lo, n_hi) = (self.vertex_dims[lo], self.vertex_dims[hi]);
            let mut blk = l.view_mut((o_lo, o_lo), (n_lo, n_lo));
            blk += f_lo.tr_mul(f_lo);
            let mut blk = l.view_mut((o_hi, o_hi), (n_hi, n_hi));
            blk += f_hi.tr_mul(f_hi);
            let off = -f_lo.tr_mul(f_hi);
            let mut blk = l.view_mut((o_lo, o_hi), (n_lo, n_hi));
            blk += &off;
            let mut blk = l.view_mut((o_hi, o_lo), (n_hi, n_lo));
            blk += off.transpose();
        }
        l
    }

    /// Sparse (CSR) sheaf Laplacian with the same entries as [`Self::laplacian`].
    pub fn laplacian_sparse(&self) -> CsrMatrix<T> {
        let n = self.c0_dim();
        let mut coo = CooMatrix::new(n, n);
        let mut push_block = |r0: usize, c0: usize, m: &DMatrix<T>| {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    let v = m[(i, j)];
                    if v != T::zero() {
                        coo.push(r0 + i, c0 + j, v);
                    }
                }
            }
        };
        for (e, &(lo, hi)) in self.graph.edges().iter().enumerate() {
            let (f_lo, f_hi) = &self.restrictions[e];
            let (o_lo, o_hi) = (self.vertex_layout.offset(lo), self.vertex_layout.offset(hi));
            push_block(o_lo, o_lo, &f_lo.tr_mul(f_lo));
            push_block(o_hi, o_hi, &f_hi.tr_mul(f_hi));
            let off = -f_lo.tr_mul(f_hi);
            push_block(o_lo, o_hi, &off);
            push_block(o_hi, o_lo, &off.transpose());
        }
        CsrMatrix::from(&coo)
    }

    /// Dense below [`SPARSE_VERTEX_THRESHOLD`] vertices, CSR above.
    pub fn laplacian_operator(&self) -> LaplacianOperator<T> {
        if self.vertex_count() > SPARSE_VERTEX_THRESHOLD {
            LaplacianOperator::Sparse(self.laplacian_sparse())
        } else {
            LaplacianOperator::Dense(self.laplacian())
        }
    }

    /// `(L x)_i = sum_{j in N_i} F_{i<ij}^T (F_{i<ij} x_i - F_{j<ij} x_j)`, reading only
    /// `x_i` and the neighbors' blocks.
    pub fn laplacian_apply_local(&self, x: &Cochain<T>, i: usize) -> Result<DVector<T>> {
        self.graph.check_vertex(i)?;
        x.expect_shape(self, Degree::Zero)?;
        let mut out = DVector::zeros(self.vertex_dims[i]);
        for &j in self.graph.neighbors(i) {
            let f_i = self.restriction(i, j)?;
            let f_j = self.restriction(j, i)?;
            let r = f_i * x.block(i) - f_j * x.block(j);
            out += f_i.tr_mul(&r);
        }
        Ok(out)
    }

    /// Applies the Laplacian vertex by vertex.
    pub fn laplacian_apply(&self, x: &Cochain<T>) -> Result<Cochain<T>> {
        let mut out = Cochain::zeros(self, Degree::Zero);
        for i in 0..self.vertex_count() {
            let b = self.laplacian_apply_local(x, i)?;
            out.block_mut(i).copy_from(&b);
        }
        Ok(out)
    }

    /// Restriction of the sheaf to the subgraph induced by `subset`.
    ///
    /// Vertices are relabeled `0..subset.len()` in ascending order of their
    /// original ids.
    pub fn induced(&self, subset: &[usize]) -> Result<CellularSheaf<T>> {
        let mut verts = subset.to_vec();
        verts.sort_unstable();
        verts.dedup();
        let mut local = vec![usize::MAX; self.vertex_count()];
        for (k, &v) in verts.iter().enumerate() {
            self.graph.check_vertex(v)?;
            local[v] = k;
        }
        let mut b = SheafBuilder::new(verts.iter().map(|&v| self.vertex_dims[v]).collect());
        for (e, &(lo, hi)) in self.graph.edges().iter().enumerate() {
            if local[lo] != usize::MAX && local[hi] != usize::MAX {
                let (f_lo, f_hi) = &self.restrictions[e];
                b.add_edge(local[lo], local[hi], f_lo.clone(), f_hi.clone());
            }
        }
        b.build()
    }

    /// Copy of the sheaf with both restriction maps of edge `e` replaced.
    pub fn with_edge_maps(
        &self,
        e: usize,
        f_lo: DMatrix<T>,
        f_hi: DMatrix<T>,
    ) -> Result<CellularSheaf<T>> {
        let (lo, hi) = self.graph.edges()[e];
        let mut b = SheafBuilder::new(self.vertex_dims.clone());
        for (k, &(a, c)) in self.graph.edges().iter().enumerate() {
            if k == e {
                b.add_edge(lo, hi, f_lo.clone(), f_hi.clone());
            } else {
                let (m_a, m_c) = &self.restrictions[k];
                b.add_edge(a, c, m_a.clone(), m_c.clone());
            }
        }
        b.build()
    }
}
