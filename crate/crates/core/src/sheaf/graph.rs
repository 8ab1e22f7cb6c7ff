use std::collections::VecDeque;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Static, undirected, simple graph on vertices `0..vertex_count`.
///
/// Edges are stored once, as `(min, max)` pairs sorted lexicographically. That
/// order is the canonical edge order used by every 1-cochain and by the
/// coboundary matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    pub fn new<I>(vertex_count: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if vertex_count == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut canon = Vec::new();
        for (a, b) in edges {
            for v in [a, b] {
                if v >= vertex_count {
                    return Err(Error::UnknownVertex {
                        vertex: v,
                        count: vertex_count,
                    });
                }
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            canon.push((a.min(b), a.max(b)));
        }
        canon.sort_unstable();
        if let Some(w) = canon.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateEdge(w[0].0, w[0].1));
        }
        let mut adjacency = vec![Vec::new(); vertex_count];
        for &(a, b) in &canon {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for n in &mut adjacency {
            n.sort_unstable();
        }
        Ok(Self {
            vertex_count,
            edges: canon,
            adjacency,
        })
    }

    /// Path `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Result<Self> {
        Self::new(n, (1..n).map(|i| (i - 1, i)))
    }

    pub fn cycle(n: usize) -> Result<Self> {
        let mut e: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        if n > 2 {
            e.push((n - 1, 0));
        }
        Self::new(n, e)
    }

    pub fn complete(n: usize) -> Result<Self> {
        Self::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Canonical edge list.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    /// Index of edge `{a, b}` in canonical order.
    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edges.binary_search(&(a.min(b), a.max(b))).ok()
    }

    pub fn contains_edge(&self, a: usize, b: usize) -> bool {
        self.edge_index(a, b).is_some()
    }

    pub fn check_vertex(&self, v: usize) -> Result<()> {
        if v < self.vertex_count {
            Ok(())
        } else {
            Err(Error::UnknownVertex {
                vertex: v,
                count: self.vertex_count,
            })
        }
    }

    /// Whether the subgraph induced by `subset` is connected. Empty subsets are not.
    pub fn is_connected_on(&self, subset: &[usize]) -> bool {
        let Some(&start) = subset.first() else {
            return false;
        };
        let mut inside = vec![false; self.vertex_count];
        for &v in subset {
            inside[v] = true;
        }
        let mut seen = vec![false; self.vertex_count];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut reached = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &self.adjacency[v] {
                if inside[w] && !seen[w] {
                    seen[w] = true;
                    reached += 1;
                    queue.push_back(w);
                }
            }
        }
        let distinct = inside.iter().filter(|&&b| b).count();
        reached == distinct
    }

    pub fn is_connected(&self) -> bool {
        let all: Vec<usize> = (0..self.vertex_count).collect();
        self.is_connected_on(&all)
    }

    /// Connected components as sorted vertex lists, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut label = vec![usize::MAX; self.vertex_count];
        let mut out = Vec::new();
        for s in 0..self.vertex_count {
            if label[s] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut comp = vec![s];
            label[s] = id;
            let mut queue = VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                for &w in &self.adjacency[v] {
                    if label[w] == usize::MAX {
                        label[w] = id;
                        comp.push(w);
                        queue.push_back(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Combinatorial Laplacian `D - A`.
    pub fn laplacian<T: Real>(&self) -> DMatrix<T> {
        let n = self.vertex_count;
        let mut l = DMatrix::zeros(n, n);
        for &(a, b) in &self.edges {
            l[(a, a)] += T::one();
            l[(b, b)] += T::one();
            l[(a, b)] -= T::one();
            l[(b, a)] -= T::one();
        }
        l
    }
}
