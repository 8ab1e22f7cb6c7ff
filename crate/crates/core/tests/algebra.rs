mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sheaftrack::linalg::{kernel, max_abs};
use sheaftrack::{
    constant_sheaf, global_sections, relative_cohomology, Cochain, Degree, VertexSubset,
};

fn kron_identity(l: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    l.kronecker(&DMatrix::identity(k, k))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn laplacian_is_coboundary_gram(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_sheaf(&mut rng, 8, 4, 0.4);
        let l = s.laplacian();
        let d = s.coboundary();
        let gram = d.tr_mul(&d);
        let scale = max_abs(&l).max(1.0);
        prop_assert!(max_abs(&(&l - &gram)) <= 1e-12 * scale);
        prop_assert!(max_abs(&(&l - l.transpose())) <= 1e-12 * scale);
        for _ in 0..20 {
            let x = random_vector(&mut rng, s.c0_dim());
            prop_assert!(x.dot(&(&l * &x)) >= -1e-10 * x.norm_squared());
        }
    }

    #[test]
    fn local_laplacian_matches_assembled(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_sheaf(&mut rng, 8, 4, 0.5);
        let x = Cochain::from_vector(&s, Degree::Zero, random_vector(&mut rng, s.c0_dim())).unwrap();
        let full = s.laplacian() * x.vector();
        for i in 0..s.vertex_count() {
            let local = s.laplacian_apply_local(&x, i).unwrap();
            let blk = full.rows(s.vertex_layout().offset(i), s.vertex_dim(i));
            prop_assert!((local - blk).amax() <= 1e-12 * (1.0 + full.amax()));
        }
        let applied = s.laplacian_apply(&x).unwrap();
        prop_assert!((applied.vector() - &full).amax() <= 1e-12 * (1.0 + full.amax()));
    }

    #[test]
    fn kernels_of_coboundary_and_laplacian_agree(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // low-rank restriction maps make nontrivial sections common
        let s = random_sheaf(&mut rng, 6, 3, 0.4);
        let l = s.laplacian();
        let d = s.coboundary();
        let sections = global_sections(&s);
        for b in &sections.basis {
            prop_assert!((&l * b.vector()).norm() <= 1e-10);
            prop_assert!((&d * b.vector()).norm() <= 1e-10);
        }
        let kl = kernel(&l);
        prop_assert_eq!(kl.basis.ncols(), sections.dimension);
        for c in kl.basis.column_iter() {
            prop_assert!((&d * c).norm() <= 1e-6);
        }
        let gram = sections.basis_matrix().tr_mul(&sections.basis_matrix());
        prop_assert!(max_abs(&(gram - DMatrix::identity(sections.dimension, sections.dimension))) <= 1e-12);
    }

    #[test]
    fn constant_sheaf_laplacian_is_kronecker(seed in any::<u64>(), k in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 1 + (seed % 8) as usize;
        let g = random_graph(&mut rng, n, 0.5);
        let s = constant_sheaf::<f64>(&g, k).unwrap();
        prop_assert_eq!(s.laplacian(), kron_identity(&g.laplacian(), k));
    }

    #[test]
    fn constant_sheaf_relative_dimension_counts_free_components(seed in any::<u64>(), k in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 2 + (seed % 7) as usize;
        let g = random_graph(&mut rng, n, 0.25);
        let boundary: Vec<usize> = (0..n).filter(|_| rand::Rng::random_bool(&mut rng, 0.3)).collect();
        let s = constant_sheaf::<f64>(&g, k).unwrap();
        let r = relative_cohomology(&s, &VertexSubset::new(&g, boundary.iter().copied()).unwrap()).unwrap();
        // components with no boundary vertex: contract every boundary vertex into one component
        let free = {
            let comps = g.components();
            comps.iter().filter(|c| !c.iter().any(|v| boundary.contains(v))).count()
        };
        let oracle = if boundary.is_empty() {
            union_find_components(n, g.edges(), &[])
        } else {
            let mut edges = g.edges().to_vec();
            for w in boundary.windows(2) {
                edges.push((w[0], w[1]));
            }
            union_find_components(n, &edges, &[]) - 1
        };
        prop_assert_eq!(free, oracle);
        prop_assert_eq!(r.dimension, k * oracle);
    }
}

#[test]
fn sparse_and_dense_laplacians_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let s = random_sheaf(&mut rng, 8, 3, 0.5);
        let dense = s.laplacian();
        let sparse = s.laplacian_sparse();
        let x = random_vector(&mut rng, s.c0_dim());
        let y = sheaftrack::sheaf::csr_mul(&sparse, &x);
        assert!((&dense * &x - y).amax() <= 1e-12 * (1.0 + dense.amax()));
    }
}

#[test]
fn large_graph_switches_to_sparse_operator() {
    let g = sheaftrack::Graph::cycle(250).unwrap();
    let s = constant_sheaf::<f64>(&g, 2).unwrap();
    let op = s.laplacian_operator();
    assert!(matches!(
        op,
        sheaftrack::sheaf::LaplacianOperator::Sparse(_)
    ));
    let x = DVector::from_fn(500, |i, _| (i as f64).sin());
    assert!((op.apply(&x) - s.laplacian() * &x).amax() < 1e-12);
}

#[test]
fn dimension_of_h1_follows_rank_nullity() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..30 {
        let s = random_sheaf(&mut rng, 6, 3, 0.5);
        let r = global_sections(&s);
        let rank = s.c0_dim() - r.dimension;
        assert_eq!(r.h1_dimension, Some(s.c1_dim() - rank));
    }
}
