#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use sheaftrack::{CellularSheaf, Graph, SheafBuilder, TrackingProblem, VertexSubset};

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_vector<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

/// Random sheaf with up to `max_vertices` vertices, edge probability `density`
/// and stalk dimensions in `1..=max_dim`.
pub fn random_sheaf<R: Rng>(
    rng: &mut R,
    max_vertices: usize,
    max_dim: usize,
    density: f64,
) -> CellularSheaf<f64> {
    let n = rng.random_range(1..=max_vertices);
    let dims: Vec<usize> = (0..n).map(|_| rng.random_range(1..=max_dim)).collect();
    let mut b = SheafBuilder::new(dims.clone());
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(density) {
                let m = rng.random_range(1..=max_dim);
                b.add_edge(
                    i,
                    j,
                    random_matrix(rng, m, dims[i]),
                    random_matrix(rng, m, dims[j]),
                );
            }
        }
    }
    b.build().unwrap()
}

/// Edge list of a random connected graph containing a spanning tree on
/// `agents` and at least one agent neighbor for every target.
pub fn random_tracking_graph<R: Rng>(
    rng: &mut R,
    agents: usize,
    targets: usize,
    extra: f64,
) -> Vec<(usize, usize)> {
    let n = agents + targets;
    let mut order: Vec<usize> = (0..agents).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for k in 1..agents {
        let parent = order[rng.random_range(0..k)];
        edges.push((order[k].min(parent), order[k].max(parent)));
    }
    for t in agents..n {
        let a = rng.random_range(0..agents);
        edges.push((a, t));
    }
    for i in 0..n {
        for j in i + 1..n {
            if !edges.contains(&(i, j)) && rng.random_bool(extra) {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// A random tracking problem; agents are `0..agents`, targets the rest.
pub fn random_problem<R: Rng>(
    rng: &mut R,
    agents: usize,
    targets: usize,
    max_dim: usize,
    edge_dim: impl Fn(&mut R, usize, usize) -> usize,
) -> TrackingProblem<f64> {
    let n = agents + targets;
    let dims: Vec<usize> = (0..n).map(|_| rng.random_range(1..=max_dim)).collect();
    let edges = random_tracking_graph(rng, agents, targets, 0.3);
    let mut b = SheafBuilder::new(dims.clone());
    for (i, j) in edges {
        let m = edge_dim(rng, dims[i], dims[j]);
        b.add_edge(
            i,
            j,
            random_matrix(rng, m, dims[i]),
            random_matrix(rng, m, dims[j]),
        );
    }
    let sheaf = b.build().unwrap();
    let g = sheaf.graph().clone();
    TrackingProblem::assemble(
        sheaf,
        VertexSubset::new(&g, 0..agents).unwrap(),
        VertexSubset::new(&g, agents..n).unwrap(),
    )
    .unwrap()
}

/// Random problem that is feasible with overwhelming probability (edge stalks
/// at least as large as both endpoint stalks).
pub fn random_feasible_problem<R: Rng>(rng: &mut R) -> TrackingProblem<f64> {
    loop {
        let agents = rng.random_range(1..=5);
        let targets = rng.random_range(1..=(8 - agents).min(3));
        let pr = random_problem(rng, agents, targets, 3, |_, a, b| a.max(b));
        if pr.is_feasible() {
            return pr;
        }
    }
}

pub fn random_graph<R: Rng>(rng: &mut R, n: usize, density: f64) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(density) {
                edges.push((i, j));
            }
        }
    }
    Graph::new(n, edges).unwrap()
}

/// Number of connected components, by union-find.
pub fn union_find_components(n: usize, edges: &[(usize, usize)], skip: &[usize]) -> usize {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut x = x;
        while p[x] != r {
            let next = p[x];
            p[x] = r;
            x = next;
        }
        r
    }
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
        }
    }
    let mut roots: Vec<usize> = (0..n)
        .filter(|v| !skip.contains(v))
        .map(|v| find(&mut parent, v))
        .collect();
    roots.sort_unstable();
    roots.dedup();
    roots.len()
}

/// Equality-constrained minimizer of `1/2 ||delta x - s||^2` with the target
/// blocks pinned to `p`, from the full KKT system. Returns the agent blocks.
pub fn kkt_minimizer(problem: &TrackingProblem<f64>, p: &DVector<f64>) -> DVector<f64> {
    let sheaf = problem.sheaf();
    let delta = sheaf.coboundary();
    let n = sheaf.c0_dim();
    let layout = sheaf.vertex_layout();
    let pinned: Vec<usize> = problem
        .targets()
        .members()
        .iter()
        .flat_map(|&v| layout.range(v))
        .collect();
    let m = pinned.len();
    let mut kkt = DMatrix::zeros(n + m, n + m);
    kkt.view_mut((0, 0), (n, n))
        .copy_from(&delta.tr_mul(&delta));
    for (r, &c) in pinned.iter().enumerate() {
        kkt[(n + r, c)] = 1.0;
        kkt[(c, n + r)] = 1.0;
    }
    let mut rhs = DVector::zeros(n + m);
    if let Some(s) = problem.shift() {
        rhs.rows_mut(0, n).copy_from(&delta.tr_mul(s));
    }
    rhs.rows_mut(n, m).copy_from(p);
    let sol = kkt
        .full_piv_lu()
        .solve(&rhs)
        .expect("KKT system of a feasible problem is nonsingular");
    let agent_rows: Vec<usize> = problem
        .agents()
        .members()
        .iter()
        .flat_map(|&v| layout.range(v))
        .collect();
    DVector::from_iterator(agent_rows.len(), agent_rows.iter().map(|&r| sol[r]))
}

/// Agent-block and agent/target-block of the full Laplacian, read off directly.
pub fn laplacian_blocks(problem: &TrackingProblem<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let sheaf = problem.sheaf();
    let l = sheaf.laplacian();
    let layout = sheaf.vertex_layout();
    let qa: Vec<usize> = problem
        .agents()
        .members()
        .iter()
        .flat_map(|&v| layout.range(v))
        .collect();
    let pa: Vec<usize> = problem
        .targets()
        .members()
        .iter()
        .flat_map(|&v| layout.range(v))
        .collect();
    let hq = DMatrix::from_fn(qa.len(), qa.len(), |r, c| l[(qa[r], qa[c])]);
    let lqp = DMatrix::from_fn(qa.len(), pa.len(), |r, c| l[(qa[r], pa[c])]);
    (hq, lqp)
}
