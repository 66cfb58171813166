#![allow(clippy::needless_range_loop)]

mod support;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use support::{brute_force_cliques, dense_hodge, random_edges};
use tsp_core::complex::*;
use tsp_core::linalg::{symmetric_eigen, SolverOptions};
use tsp_core::sparse::CsrMatrix;

fn lift(n: usize, edges: &[(usize, usize)], k: usize) -> SimplicialComplex {
    let g = SemanticGraph::from_edges(0.0, NodeScope::AllNodes, (0..n).collect(), edges.iter().copied()).unwrap();
    lift_clique_complex(&g, k, DEFAULT_SIMPLEX_BUDGET).unwrap()
}

fn corpus() -> Vec<(usize, support::Pairs, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut out = vec![
        (3, vec![(0, 1), (0, 2), (1, 2)], 2),
        (4, vec![(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)], 2),
        (4, vec![(0, 1), (1, 2), (2, 3), (0, 3)], 2),
        (5, (0..5).flat_map(|a| (a + 1..5).map(move |b| (a, b))).collect(), 4),
    ];
    for _ in 0..30 {
        let n = rng.random_range(3..14);
        let p = rng.random_range(0.2..0.8);
        let k = rng.random_range(1..5);
        out.push((n, random_edges(&mut rng, n, p), k));
    }
    out
}

#[test]
fn matches_brute_force_cliques() {
    for (n, edges, k) in corpus() {
        let c = lift(n, &edges, k);
        let oracle = brute_force_cliques(n, &edges, k);
        for order in 0..=k {
            let got: Vec<Vec<usize>> = c.simplices(order).map(|s| s.to_vec()).collect();
            assert_eq!(got, oracle[order], "order {order} on {edges:?}");
        }
    }
}

#[test]
fn boundary_of_boundary_is_zero_and_columns_alternate() {
    for (n, edges, k) in corpus() {
        let c = lift(n, &edges, k);
        for order in 1..=k {
            let b = c.boundary(order).unwrap();
            assert_eq!((b.nrows(), b.ncols()), (c.count(order - 1), c.count(order)));
            let bt = b.transpose();
            for j in 0..c.count(order) {
                let col: Vec<(usize, i64)> = bt.row(j).collect();
                assert_eq!(col.len(), order + 1);
                // the face dropping position i sits at the row of that face
                let s = c.simplex(order, j).to_vec();
                for i in 0..=order {
                    let mut face = s.clone();
                    face.remove(i);
                    let row = c.index_of(&face).expect("closure");
                    assert_eq!(b.get(row, j), if i % 2 == 0 { 1 } else { -1 });
                }
            }
            if order < k {
                assert!(b.matmul(c.boundary(order + 1).unwrap()).unwrap().is_zero());
            }
        }
    }
}

#[test]
fn graph_laplacian_is_order_zero() {
    for (n, edges, k) in corpus() {
        let c = lift(n, &edges, k);
        let mut t = Vec::new();
        for &(a, b) in &edges {
            t.extend([(a, b, -1i64), (b, a, -1), (a, a, 1), (b, b, 1)]);
        }
        assert_eq!(hodge_laplacian_exact(&c, 0).unwrap(), CsrMatrix::from_triplets(n, n, &t));
    }
}

#[test]
fn laplacians_match_dense_oracle_and_are_psd() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (n, edges, k) in corpus() {
        let c = lift(n, &edges, k);
        let dense = dense_hodge(&brute_force_cliques(n, &edges, k));
        for order in 0..=k {
            let op = hodge_laplacian(&c, order).unwrap();
            assert_eq!(op.matrix.to_dense(), dense[order]);
            assert!(op.matrix.is_symmetric(0.0));
            for _ in 0..10 {
                let x: Vec<f64> = (0..op.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
                assert!(op.matrix.quadratic_form(&x) >= -1e-9);
            }
            if op.dim() > 0 {
                let (values, _) = symmetric_eigen(&dense[order]).unwrap();
                let top = values.last().copied().unwrap();
                assert!(op.spectral_radius >= top / (1.0 + 1e-3) && op.spectral_radius <= top * (1.0 + 1e-9), "{} vs {top} (order {order}, dim {})", op.spectral_radius, op.dim());
            }
        }
    }
}

#[test]
fn lifting_is_deterministic() {
    for (n, edges, k) in corpus() {
        let a = lift(n, &edges, k);
        let mut shuffled = edges.clone();
        shuffled.reverse();
        let b = lift(n, &shuffled, k);
        assert_eq!(a, b);
        assert_eq!(a.content_hash(), b.content_hash());
    }
}

#[test]
fn hodge_decomposition_is_orthogonal_and_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let opts = SolverOptions::default();
    let mut complexes = 0;
    while complexes < 10 {
        let n = rng.random_range(5..12);
        let edges = random_edges(&mut rng, n, 0.5);
        let c = lift(n, &edges, 3);
        if c.count(2) == 0 {
            continue;
        }
        complexes += 1;
        for _ in 0..10 {
            for order in 0..=3 {
                if c.count(order) == 0 {
                    continue;
                }
                let s: Array1<f64> = (0..c.count(order)).map(|_| rng.random_range(-1.0..1.0)).collect();
                let h = hodge_decompose(&c, order, s.view(), &opts).unwrap();
                let scale = s.dot(&s);
                assert!(h.gradient.dot(&h.curl).abs() <= 1e-8 * scale);
                assert!(h.gradient.dot(&h.harmonic).abs() <= 1e-8 * scale);
                assert!(h.curl.dot(&h.harmonic).abs() <= 1e-8 * scale);
                let rebuilt = &h.gradient + &h.curl + &h.harmonic;
                assert!((&rebuilt - &s).iter().all(|v| v.abs() <= 1e-8));
                let op = hodge_laplacian(&c, order).unwrap();
                let mut lh = vec![0.0; op.dim()];
                op.matrix.mul_vec(h.harmonic.as_slice().unwrap(), &mut lh);
                assert!(lh.iter().all(|v| v.abs() <= 1e-8), "L·harmonic = {lh:?}");
            }
        }
    }
}

#[test]
fn gradient_input_has_no_curl_or_harmonic_part() {
    let c = lift(6, &[(0, 1), (0, 2), (1, 2), (2, 3), (3, 4), (2, 4), (4, 5)], 2);
    let y: Array1<f64> = (0..6).map(|v| (v as f64 * 0.7).sin()).collect();
    let b1 = c.boundary(1).unwrap().to_f64();
    let mut s = vec![0.0; c.count(1)];
    b1.transpose().mul_vec(y.as_slice().unwrap(), &mut s);
    let h = hodge_decompose(&c, 1, Array1::from(s).view(), &SolverOptions::default()).unwrap();
    assert!(h.curl.iter().chain(h.harmonic.iter()).all(|v| v.abs() < 1e-9));
}

#[test]
fn power_iteration_on_random_psd_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10 {
        let m = Array2::from_shape_fn((20, 20), |_| rng.random_range(-1.0..1.0));
        let psd = m.t().dot(&m);
        let triplets: Vec<(usize, usize, f64)> = psd.indexed_iter().map(|((r, c), &v)| (r, c, v)).collect();
        let sparse = CsrMatrix::from_triplets(20, 20, &triplets);
        let (values, _) = symmetric_eigen(&psd).unwrap();
        let top = *values.last().unwrap();
        let est = estimate_spectral_radius(&sparse, POWER_MAX_ITERS);
        assert!((est - top).abs() <= 0.005 * top, "{est} vs {top}");
    }
}
