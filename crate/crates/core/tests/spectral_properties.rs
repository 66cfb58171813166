mod support;

use ndarray::{Array1, Array2, Axis};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use support::{random_bipartite_edges, random_matrix};
use tsp_core::backbone::{lightgcn_forward, propagate_layer, EmbeddingMatrix};
use tsp_core::data::{BipartiteGraph, NodeLayout};
use tsp_core::linalg::{symmetric_eigen, SolverOptions};
use tsp_core::spectral::*;

fn graph(users: usize, items: usize, edges: Vec<(usize, usize)>) -> BipartiteGraph {
    BipartiteGraph::from_edges(NodeLayout { num_users: users, num_items: items }, edges).unwrap()
}

fn random_graph(rng: &mut ChaCha8Rng, max_side: usize) -> BipartiteGraph {
    let users = rng.random_range(1..=max_side);
    let items = rng.random_range(1..=max_side);
    let p = rng.random_range(0.05..0.6);
    let edges = random_bipartite_edges(rng, users, items, p);
    graph(users, items, edges)
}

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unit_gradient_step_is_one_propagation_layer(seed in any::<u64>(), mu in 0.0f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, 40);
        let x0 = random_matrix(&mut rng, g.num_nodes(), 5);
        let cfg = EnergyConfig { mu, eta: 1.0, ..EnergyConfig::default() };
        let step = gradient_descent_step(&g, x0.view(), x0.view(), &cfg).unwrap();
        let layer = propagate_layer(&g, &EmbeddingMatrix::new(x0).unwrap()).unwrap();
        prop_assert!(max_abs_diff(&step, &layer.values().to_owned()) < 1e-12);
    }

    #[test]
    fn operators_are_symmetric_and_laplacian_is_psd(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, 30);
        prop_assert!(g.adjacency.is_symmetric(0.0));
        prop_assert!(g.normalized_adjacency.is_symmetric(1e-12));
        for _ in 0..100 {
            let x: Vec<f64> = (0..g.num_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let unit: Vec<f64> = x.iter().map(|v| v / norm).collect();
            prop_assert!(g.normalized_laplacian.quadratic_form(&unit) >= -1e-9);
        }
        for (_, _, v) in g.normalized_adjacency.triplets() {
            prop_assert!(v > 0.0 && v <= 1.0);
        }
    }

    #[test]
    fn local_energies_sum_to_edge_energy(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, 25);
        let x = random_matrix(&mut rng, g.num_nodes(), 3);
        let local: f64 = (0..g.num_nodes()).map(|v| local_dirichlet_energy(&g, x.view(), v).unwrap()).sum();
        let edges = edge_sum_energy(&g, x.view()).unwrap();
        prop_assert!((local - edges).abs() < 1e-9 * edges.max(1.0));
        let isolated: f64 = (0..g.num_nodes())
            .filter(|&v| g.degrees[v] == 0)
            .map(|v| x.row(v).dot(&x.row(v)))
            .sum();
        let trace = graph_dirichlet_energy(&g, x.view()).unwrap();
        prop_assert!((trace - edges - isolated).abs() < 1e-9 * trace.max(1.0));
    }

    #[test]
    fn propagation_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, 20);
        let x = random_matrix(&mut rng, g.num_nodes(), 4);
        let y = random_matrix(&mut rng, g.num_nodes(), 4);
        let combo = EmbeddingMatrix::new(&x * a + &y * b).unwrap();
        let lhs = propagate_layer(&g, &combo).unwrap().into_values();
        let px = propagate_layer(&g, &EmbeddingMatrix::new(x).unwrap()).unwrap().into_values();
        let py = propagate_layer(&g, &EmbeddingMatrix::new(y).unwrap()).unwrap().into_values();
        prop_assert!(max_abs_diff(&lhs, &(px * a + py * b)) < 1e-9);
    }
}

#[test]
fn zero_layer_forward_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = random_graph(&mut rng, 10);
    let x = EmbeddingMatrix::new(random_matrix(&mut rng, g.num_nodes(), 3)).unwrap();
    assert_eq!(lightgcn_forward(&g, &x, 0).unwrap().values(), x.values());
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let g = random_graph(&mut rng, 4);
        let n = g.num_nodes();
        let x0 = random_matrix(&mut rng, n, 2);
        let x = random_matrix(&mut rng, n, 2);
        let mu = rng.random_range(0.1..3.0);
        let cfg = EnergyConfig { mu, ..EnergyConfig::default() };
        let grad = energy_gradient(&g, x.view(), x0.view(), &cfg).unwrap();
        let h = 1e-6;
        for r in 0..n {
            for c in 0..2 {
                let (mut up, mut down) = (x.clone(), x.clone());
                up[[r, c]] += h;
                down[[r, c]] -= h;
                let fd = (energy_objective(&g, up.view(), x0.view(), mu).unwrap()
                    - energy_objective(&g, down.view(), x0.view(), mu).unwrap())
                    / (2.0 * h);
                let exact = grad[[r, c]];
                assert!((fd - exact).abs() <= 1e-5 * exact.abs().max(1.0), "fd {fd} vs {exact}");
            }
        }
    }
}

#[test]
fn resolvent_scales_each_eigenvector() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let g = random_graph(&mut rng, 12);
        let (values, vectors) = symmetric_eigen(&g.normalized_laplacian.to_dense()).unwrap();
        let mu = rng.random_range(0.2..5.0);
        let out = resolvent_apply(&g.normalized_laplacian, mu, vectors.view(), &SolverOptions::default()).unwrap();
        for (j, &lambda) in values.iter().enumerate() {
            let expected = vectors.column(j).to_owned() * (mu / (lambda + mu));
            let dev = (&out.column(j) - &expected).iter().map(|v| v.abs()).fold(0.0, f64::max);
            assert!(dev < 1e-8, "eigenvalue {lambda}: deviation {dev}");
        }
    }
}

#[test]
fn propagation_lowers_energy_on_the_low_band() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let g = random_graph(&mut rng, 15);
        let (values, vectors) = symmetric_eigen(&g.normalized_laplacian.to_dense()).unwrap();
        let low: Vec<usize> = (0..values.len()).filter(|&i| values[i] <= 1.0).collect();
        let basis = vectors.select(Axis(1), &low);
        let raw = random_matrix(&mut rng, g.num_nodes(), 3);
        let x = basis.dot(&basis.t().dot(&raw));
        let before = graph_dirichlet_energy(&g, x.view()).unwrap();
        let after_x = g.normalized_adjacency.mul_dense(x.view()).unwrap();
        let after = graph_dirichlet_energy(&g, after_x.view()).unwrap();
        assert!(after <= before + 1e-12, "{after} > {before}");
    }
}

#[test]
fn update_bound_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..50 {
        let g = random_graph(&mut rng, 30);
        for _ in 0..10 {
            let x = random_matrix(&mut rng, g.num_nodes(), 4);
            let check = verify_update_bound(&g, x.view()).unwrap().summary.update_bound.unwrap();
            assert_eq!(check.violations, 0, "max gap {}", check.max_gap);
        }
    }
}

#[test]
fn corollary_constant_matches_kernel_coefficient() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..10 {
        let g = random_graph(&mut rng, 20);
        let x0 = random_matrix(&mut rng, g.num_nodes(), 4);
        let xs = resolvent_apply(&g.normalized_laplacian, 1.0, x0.view(), &SolverOptions::default()).unwrap();
        let emb = EmbeddingMatrix::new(xs).unwrap().with_initial(x0.clone()).unwrap();
        let diag = degree_norm_report(&g, &emb).unwrap();
        let c = corollary_constant(&g, x0.view()).unwrap();
        let total: f64 = g.degrees.iter().map(|&d| d as f64).sum();
        let sqrt_d = Array1::from_iter(g.degrees.iter().map(|&d| (d as f64).sqrt()));
        let coeff = x0.t().dot(&sqrt_d);
        assert!((c - coeff.dot(&coeff) / (total * total)).abs() < 1e-12);
        assert_eq!(diag.summary.corollary.unwrap().constant, c);
    }
}
