//! Independent reference implementations shared by the integration and
//! acceptance suites. Nothing here calls into the library's numerical code.

#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;

/// Random simple graph on `n` vertices with edge probability `p`, edges as
/// `(a, b)` with `a < b`.
pub fn random_edges<R: Rng>(rng: &mut R, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(p) {
                out.push((a, b));
            }
        }
    }
    out
}

/// Random user–item edge list in node indices (items offset by `users`).
pub fn random_bipartite_edges<R: Rng>(rng: &mut R, users: usize, items: usize, p: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for u in 0..users {
        for i in 0..items {
            if rng.random_bool(p) {
                out.push((u, users + i));
            }
        }
    }
    out
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

fn adjacency_sets(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut adj = vec![vec![false; n]; n];
    for &(a, b) in edges {
        adj[a][b] = true;
        adj[b][a] = true;
    }
    adj
}

/// All cliques with `k + 1` vertices for `k = 0..=max_order`, by testing
/// every ascending tuple. Lexicographic order within each size.
pub fn brute_force_cliques(n: usize, edges: &[(usize, usize)], max_order: usize) -> Vec<Vec<Vec<usize>>> {
    let adj = adjacency_sets(n, edges);
    let mut out = vec![Vec::new(); max_order + 1];
    fn walk(start: usize, n: usize, cur: &mut Vec<usize>, adj: &[Vec<bool>], out: &mut Vec<Vec<Vec<usize>>>, cap: usize) {
        for v in start..n {
            if cur.iter().all(|&u| adj[u][v]) {
                cur.push(v);
                out[cur.len() - 1].push(cur.clone());
                if cur.len() <= cap {
                    walk(v + 1, n, cur, adj, out, cap);
                }
                cur.pop();
            }
        }
    }
    walk(0, n, &mut Vec::new(), &adj, &mut out, max_order);
    for list in &mut out {
        list.sort();
    }
    out
}

/// Dense `B_k` from explicit face lists: the face dropping position `i`
/// carries `(−1)^i`.
pub fn dense_boundary(faces: &[Vec<usize>], cells: &[Vec<usize>]) -> Array2<f64> {
    let mut b = Array2::zeros((faces.len(), cells.len()));
    for (j, cell) in cells.iter().enumerate() {
        for i in 0..cell.len() {
            let face: Vec<usize> = cell.iter().enumerate().filter(|&(p, _)| p != i).map(|(_, &v)| v).collect();
            let row = faces.iter().position(|f| *f == face).expect("closed complex");
            b[[row, j]] = if i % 2 == 0 { 1.0 } else { -1.0 };
        }
    }
    b
}

/// Dense Hodge Laplacians `L_0..=L_K` from brute-force cliques.
pub fn dense_hodge(cliques: &[Vec<Vec<usize>>]) -> Vec<Array2<f64>> {
    let top = cliques.len() - 1;
    let bs: Vec<Array2<f64>> = (1..=top).map(|k| dense_boundary(&cliques[k - 1], &cliques[k])).collect();
    (0..=top)
        .map(|k| {
            let n = cliques[k].len();
            let mut l = Array2::zeros((n, n));
            if k > 0 {
                l += &bs[k - 1].t().dot(&bs[k - 1]);
            }
            if k < top {
                l += &bs[k].dot(&bs[k].t());
            }
            l
        })
        .collect()
}

/// Lifting, `L` filter steps, projection and mean fusion written out with
/// dense matrices.
pub fn straight_line_tsp(
    x0: &Array2<f64>,
    n: usize,
    edges: &[(usize, usize)],
    max_order: usize,
    layers: usize,
    beta: f64,
    signed: bool,
) -> Array2<f64> {
    let cliques = brute_force_cliques(n, edges, max_order);
    let hodge = dense_hodge(&cliques);
    let bs: Vec<Array2<f64>> = (1..=max_order).map(|k| dense_boundary(&cliques[k - 1], &cliques[k])).collect();
    let d = x0.ncols();
    let mut fused = x0.clone();
    for k in 1..=max_order {
        let cells = &cliques[k];
        // lift
        let mut s = if signed {
            let mut cur = x0.clone();
            for b in &bs[..k] {
                cur = b.t().dot(&cur);
            }
            cur
        } else {
            let mut m = Array2::zeros((cells.len(), d));
            for (j, cell) in cells.iter().enumerate() {
                for &v in cell {
                    for c in 0..d {
                        m[[j, c]] += x0[[v, c]] / (k + 1) as f64;
                    }
                }
            }
            m
        };
        // filter
        let eye = Array2::<f64>::eye(cells.len());
        for _ in 0..layers {
            s = (&eye - &(&hodge[k] * beta)).dot(&s);
        }
        // project
        let back = if signed {
            let mut cur = s;
            for b in bs[..k].iter().rev() {
                cur = b.dot(&cur);
            }
            cur
        } else {
            let mut m = Array2::zeros((n, d));
            let mut count = vec![0.0; n];
            for (j, cell) in cells.iter().enumerate() {
                for &v in cell {
                    count[v] += 1.0;
                    for c in 0..d {
                        m[[v, c]] += s[[j, c]];
                    }
                }
            }
            for v in 0..n {
                if count[v] > 0.0 {
                    for c in 0..d {
                        m[[v, c]] /= count[v];
                    }
                }
            }
            m
        };
        fused = fused + &back / max_order as f64;
    }
    fused
}

#[derive(Debug, Clone, Copy)]
pub struct BruteMetrics {
    pub recall: f64,
    pub ndcg: f64,
    pub tail_recall: f64,
    pub tail_ndcg: f64,
    pub users: usize,
    pub tail_users: usize,
}

/// Scores every item for every user, sorts the full list and reads the
/// metrics off it. `train` and `test` are `(user, item)` pairs.
pub fn brute_force_evaluate(
    x: &Array2<f64>,
    users: usize,
    items: usize,
    train: &[(usize, usize)],
    test: &[(usize, usize)],
    k: usize,
    tail_fraction: f64,
) -> BruteMetrics {
    let mut pop = vec![0usize; items];
    for &(_, i) in train {
        pop[i] += 1;
    }
    let mut by_pop: Vec<usize> = (0..items).collect();
    by_pop.sort_by_key(|&i| (pop[i], i));
    let tail: Vec<usize> = by_pop[..(tail_fraction * items as f64).floor() as usize].to_vec();

    let (mut rs, mut ns, mut trs, mut tns) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for u in 0..users {
        let rel: Vec<usize> = test.iter().filter(|p| p.0 == u).map(|p| p.1).collect();
        if rel.is_empty() {
            continue;
        }
        let seen: Vec<usize> = train.iter().filter(|p| p.0 == u).map(|p| p.1).collect();
        let mut cands: Vec<(f64, usize)> = (0..items)
            .filter(|i| !seen.contains(i))
            .map(|i| {
                let s: f64 = (0..x.ncols()).map(|c| x[[u, c]] * x[[users + i, c]]).sum();
                (s, i)
            })
            .collect();
        cands.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let recs: Vec<usize> = cands.iter().take(k).map(|c| c.1).collect();
        let metric = |rel: &[usize]| {
            let hits = recs.iter().filter(|i| rel.contains(i)).count() as f64;
            let dcg: f64 = recs
                .iter()
                .enumerate()
                .filter(|(_, i)| rel.contains(i))
                .map(|(p, _)| 1.0 / ((p + 2) as f64).log2())
                .sum();
            let idcg: f64 = (0..rel.len().min(k)).map(|p| 1.0 / ((p + 2) as f64).log2()).sum();
            (hits / rel.len() as f64, dcg / idcg)
        };
        let (r, n) = metric(&rel);
        rs.push(r);
        ns.push(n);
        let rel_tail: Vec<usize> = rel.iter().copied().filter(|i| tail.contains(i)).collect();
        if !rel_tail.is_empty() {
            let (r, n) = metric(&rel_tail);
            trs.push(r);
            tns.push(n);
        }
    }
    let avg = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    BruteMetrics {
        recall: avg(&rs),
        ndcg: avg(&ns),
        tail_recall: avg(&trs),
        tail_ndcg: avg(&tns),
        users: rs.len(),
        tail_users: trs.len(),
    }
}

pub type Pairs = Vec<(usize, usize)>;

/// Random train/test assignment of a random interaction set.
pub fn random_interactions<R: Rng>(rng: &mut R, users: usize, items: usize, p: f64) -> (Pairs, Pairs) {
    let mut all: Vec<(usize, usize)> = (0..users)
        .flat_map(|u| (0..items).map(move |i| (u, i)))
        .filter(|_| rng.random_bool(p))
        .collect();
    all.shuffle(rng);
    let cut = all.len() * 4 / 5;
    let (mut train, mut test) = (all[..cut].to_vec(), all[cut..].to_vec());
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Projection of `v` off the span of the orthonormal columns of `basis`.
pub fn project_off(basis: &Array2<f64>, v: &Array1<f64>) -> Array1<f64> {
    v - &basis.dot(&basis.t().dot(v))
}
