//! Semantic graphs, clique complexes, boundary matrices and Hodge Laplacians.
//!
//! Every simplex is stored as a strictly ascending vertex tuple and each order
//! keeps its simplices in lexicographic order, so positions are canonical and
//! boundary signs follow from the omission index alone: the face that drops
//! the `i`-th vertex gets `(−1)^i`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{BipartiteGraph, NodeLayout};
use crate::error::{config_err, shape_err, Result, TspError};
use crate::linalg::{conjugate_gradient, kernel_threshold, power_iteration, symmetric_eigen, SolverOptions, DENSE_LIMIT};
use crate::sparse::CsrMatrix;

pub const DEFAULT_MAX_EDGES: usize = 2_000_000;
pub const DEFAULT_SIMPLEX_BUDGET: usize = 1_000_000;
/// Operators up to this order get their harmonic dimension counted densely.
pub const HARMONIC_PROBE_LIMIT: usize = 256;
pub const POWER_REL_TOL: f64 = 1e-3;
pub const POWER_MAX_ITERS: usize = 5_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NodeScope {
    #[default]
    AllNodes,
    ItemsOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SemanticConfig {
    pub theta: f64,
    pub scope: NodeScope,
    /// Threshold cosine similarity instead of raw inner products.
    pub normalize: bool,
    /// Also keep the training interactions as edges of the semantic graph.
    pub union_interactions: bool,
    pub max_edges: usize,
}

impl Default for SemanticConfig {
    fn default() -> Self {
        Self {
            theta: 0.5,
            scope: NodeScope::AllNodes,
            normalize: true,
            union_interactions: false,
            max_edges: DEFAULT_MAX_EDGES,
        }
    }
}

/// Undirected simple graph over a subset of embedding rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticGraph {
    pub theta: f64,
    pub scope: NodeScope,
    /// Embedding row of each vertex, ascending.
    pub vertex_rows: Vec<usize>,
    neighbors: Vec<Vec<usize>>,
}

impl SemanticGraph {
    pub fn from_edges(
        theta: f64,
        scope: NodeScope,
        vertex_rows: Vec<usize>,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let n = vertex_rows.len();
        let mut neighbors = vec![Vec::new(); n];
        for (a, b) in edges {
            if a >= n || b >= n {
                return shape_err(format!("edge ({a}, {b}) outside {n} vertices"));
            }
            if a != b {
                neighbors[a].push(b);
                neighbors[b].push(a);
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self {
            theta,
            scope,
            vertex_rows,
            neighbors,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertex_rows.len()
    }

    pub fn num_edges(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }

    /// Edges as `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.num_edges());
        for (a, list) in self.neighbors.iter().enumerate() {
            out.extend(list.iter().filter(|&&b| b > a).map(|&b| (a, b)));
        }
        out
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn adjacency_matrix(&self) -> CsrMatrix<i64> {
        let triplets: Vec<(usize, usize, i64)> = self
            .neighbors
            .iter()
            .enumerate()
            .flat_map(|(a, list)| list.iter().map(move |&b| (a, b, 1)))
            .collect();
        CsrMatrix::from_triplets(self.num_vertices(), self.num_vertices(), &triplets)
    }

    /// Adds the interaction edges whose endpoints are both vertices here.
    pub fn union_interactions(&mut self, graph: &BipartiteGraph) {
        let mut local = vec![usize::MAX; graph.num_nodes()];
        for (v, &row) in self.vertex_rows.iter().enumerate() {
            if row < local.len() {
                local[row] = v;
            }
        }
        for row in 0..graph.num_nodes() {
            let a = local[row];
            if a == usize::MAX {
                continue;
            }
            for other in graph.neighbors(row) {
                let b = local[other];
                if b != usize::MAX && b != a {
                    self.neighbors[a].push(b);
                }
            }
        }
        for list in &mut self.neighbors {
            list.sort_unstable();
            list.dedup();
        }
    }
}

/// Thresholds pairwise inner products (cosine similarities when
/// `config.normalize`): vertices `i ≠ j` are adjacent iff `x_iᵀx_j ≥ θ`.
pub fn build_semantic_graph(x: ArrayView2<'_, f64>, layout: &NodeLayout, config: &SemanticConfig) -> Result<SemanticGraph> {
    if !config.theta.is_finite() {
        return config_err(format!("theta must be finite, got {}", config.theta));
    }
    if x.nrows() != layout.num_nodes() {
        return shape_err(format!(
            "embedding has {} rows but the layout has {} nodes",
            x.nrows(),
            layout.num_nodes()
        ));
    }
    let vertex_rows: Vec<usize> = match config.scope {
        NodeScope::AllNodes => (0..layout.num_nodes()).collect(),
        NodeScope::ItemsOnly => (layout.num_users..layout.num_nodes()).collect(),
    };
    let rows: Vec<Array1<f64>> = vertex_rows
        .iter()
        .map(|&r| {
            let row = x.row(r).to_owned();
            if config.normalize {
                let norm = row.dot(&row).sqrt();
                if norm > 0.0 {
                    return row / norm;
                }
            }
            row
        })
        .collect();

    let count = AtomicUsize::new(0);
    let cap = config.max_edges;
    let upper: Vec<Vec<usize>> = (0..rows.len())
        .into_par_iter()
        .map(|i| {
            if count.load(Ordering::Relaxed) > cap {
                return Err(());
            }
            let hits: Vec<usize> = (i + 1..rows.len())
                .filter(|&j| rows[i].dot(&rows[j]) >= config.theta)
                .collect();
            if count.fetch_add(hits.len(), Ordering::Relaxed) + hits.len() > cap {
                return Err(());
            }
            Ok(hits)
        })
        .collect::<std::result::Result<_, ()>>()
        .map_err(|_| {
            TspError::Capacity(format!(
                "semantic graph at theta={} exceeds {cap} edges; raise theta",
                config.theta
            ))
        })?;

    let edges = upper.into_iter().enumerate().flat_map(|(i, hits)| hits.into_iter().map(move |j| (i, j)));
    SemanticGraph::from_edges(config.theta, config.scope, vertex_rows, edges)
}

/// The largest threshold that admits at least `edges` vertex pairs, i.e. the
/// `edges`-th largest pairwise similarity under `scope` and `normalize`.
/// Returns `+∞` when `edges` is 0 and the smallest similarity when `edges`
/// exceeds the number of pairs.
pub fn theta_for_edge_count(
    x: ArrayView2<'_, f64>,
    layout: &NodeLayout,
    scope: NodeScope,
    normalize: bool,
    edges: usize,
) -> Result<f64> {
    if x.nrows() != layout.num_nodes() {
        return shape_err(format!(
            "embedding has {} rows but the layout has {} nodes",
            x.nrows(),
            layout.num_nodes()
        ));
    }
    if edges == 0 {
        return Ok(f64::INFINITY);
    }
    let first = match scope {
        NodeScope::AllNodes => 0,
        NodeScope::ItemsOnly => layout.num_users,
    };
    let rows: Vec<Array1<f64>> = (first..layout.num_nodes())
        .map(|r| {
            let row = x.row(r).to_owned();
            let norm = row.dot(&row).sqrt();
            if normalize && norm > 0.0 {
                row / norm
            } else {
                row
            }
        })
        .collect();
    let mut sims: Vec<f64> = (0..rows.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let rows = &rows;
            (i + 1..rows.len()).map(move |j| rows[i].dot(&rows[j]))
        })
        .collect();
    if sims.is_empty() {
        return Ok(f64::INFINITY);
    }
    let at = edges.min(sims.len()) - 1;
    let (_, nth, _) = sims.select_nth_unstable_by(at, |a, b| b.total_cmp(a));
    Ok(*nth)
}

/// Clique complex truncated at order `K`, with its boundary matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplicialComplex {
    max_order: usize,
    /// `simplices[k]` is the flat row-major list of `k`-simplices, `k + 1`
    /// vertices each.
    simplices: Vec<Vec<usize>>,
    /// `boundaries[k - 1]` is `B_k`.
    boundaries: Vec<CsrMatrix<i64>>,
    pub vertex_rows: Vec<usize>,
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexManifest {
    pub max_order: usize,
    pub theta: Option<f64>,
    pub counts: Vec<usize>,
    pub num_vertices: usize,
    pub content_hash: String,
}

impl SimplicialComplex {
    /// Builds a complex from explicit simplices of every order `1..=K`. Faces
    /// missing from the input are an error rather than being added silently.
    pub fn from_simplices(num_vertices: usize, max_order: usize, higher: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        if max_order == 0 {
            return config_err("max_order must be at least 1");
        }
        if higher.len() > max_order {
            return shape_err(format!("{} orders supplied for max_order {max_order}", higher.len()));
        }
        let mut simplices = vec![(0..num_vertices).collect::<Vec<_>>()];
        for k in 1..=max_order {
            let mut list = higher.get(k - 1).cloned().unwrap_or_default();
            for s in &mut list {
                if s.len() != k + 1 {
                    return shape_err(format!("order-{k} simplex {s:?} must have {} vertices", k + 1));
                }
                s.sort_unstable();
                if s.windows(2).any(|w| w[0] == w[1]) || s.iter().any(|&v| v >= num_vertices) {
                    return shape_err(format!("invalid simplex {s:?}"));
                }
            }
            list.sort();
            list.dedup();
            simplices.push(list.into_iter().flatten().collect());
        }
        let complex = Self::assemble(simplices, (0..num_vertices).collect(), None)?;
        Ok(complex)
    }

    fn assemble(simplices: Vec<Vec<usize>>, vertex_rows: Vec<usize>, theta: Option<f64>) -> Result<Self> {
        let max_order = simplices.len() - 1;
        let mut complex = Self {
            max_order,
            simplices,
            boundaries: Vec::new(),
            vertex_rows,
            theta,
        };
        complex.boundaries = (1..=max_order).map(|k| complex.build_boundary(k)).collect::<Result<_>>()?;
        Ok(complex)
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn num_vertices(&self) -> usize {
        self.simplices[0].len()
    }

    /// `N_k`.
    pub fn count(&self, k: usize) -> usize {
        self.simplices.get(k).map_or(0, |flat| flat.len() / (k + 1))
    }

    pub fn counts(&self) -> Vec<usize> {
        (0..=self.max_order).map(|k| self.count(k)).collect()
    }

    /// The `j`-th `k`-simplex.
    pub fn simplex(&self, k: usize, j: usize) -> &[usize] {
        &self.simplices[k][j * (k + 1)..(j + 1) * (k + 1)]
    }

    pub fn simplices(&self, k: usize) -> impl Iterator<Item = &[usize]> + '_ {
        self.simplices[k].chunks_exact(k + 1)
    }

    /// Position of `vertices` (ascending) among the `k`-simplices.
    pub fn index_of(&self, vertices: &[usize]) -> Option<usize> {
        let k = vertices.len().checked_sub(1)?;
        if k > self.max_order {
            return None;
        }
        let (mut lo, mut hi) = (0, self.count(k));
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.simplex(k, mid).cmp(vertices) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    fn build_boundary(&self, k: usize) -> Result<CsrMatrix<i64>> {
        let mut triplets = Vec::with_capacity(self.count(k) * (k + 1));
        let mut face = Vec::with_capacity(k);
        for (j, s) in self.simplices(k).enumerate() {
            for i in 0..=k {
                face.clear();
                face.extend(s.iter().enumerate().filter(|&(p, _)| p != i).map(|(_, &v)| v));
                let row = self
                    .index_of(&face)
                    .ok_or_else(|| TspError::Shape(format!("face {face:?} of {s:?} is not in the complex")))?;
                triplets.push((row, j, if i % 2 == 0 { 1 } else { -1 }));
            }
        }
        Ok(CsrMatrix::from_triplets(self.count(k - 1), self.count(k), &triplets))
    }

    /// `B_k` of shape `N_{k−1} × N_k`.
    pub fn boundary(&self, k: usize) -> Result<&CsrMatrix<i64>> {
        if k == 0 || k > self.max_order {
            return config_err(format!("boundary order {k} outside 1..={}", self.max_order));
        }
        Ok(&self.boundaries[k - 1])
    }

    /// SHA-256 over the order cap, the vertex rows and every simplex.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.max_order as u64).to_le_bytes());
        h.update((self.vertex_rows.len() as u64).to_le_bytes());
        for &r in &self.vertex_rows {
            h.update((r as u64).to_le_bytes());
        }
        for flat in &self.simplices[1..] {
            h.update((flat.len() as u64).to_le_bytes());
            for &v in flat {
                h.update((v as u64).to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    pub fn manifest(&self) -> ComplexManifest {
        ComplexManifest {
            max_order: self.max_order,
            theta: self.theta,
            counts: self.counts(),
            num_vertices: self.num_vertices(),
            content_hash: self.content_hash(),
        }
    }

    /// Writes `B_k` as `row col sign` lines.
    pub fn write_boundary_triplets(&self, k: usize, path: &Path) -> Result<()> {
        let b = self.boundary(k)?;
        let ctx = || format!("writing {}", path.display());
        let file = File::create(path).map_err(|e| TspError::io(ctx(), e))?;
        let mut w = BufWriter::new(file);
        for (r, c, s) in b.triplets() {
            writeln!(w, "{r} {c} {s}").map_err(|e| TspError::io(ctx(), e))?;
        }
        w.flush().map_err(|e| TspError::io(ctx(), e))
    }
}

fn intersect_sorted(a: &[usize], b: &[usize], out: &mut Vec<usize>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
}

struct CliqueWalk<'a> {
    graph: &'a SemanticGraph,
    max_order: usize,
    budget: usize,
    total: usize,
    out: Vec<Vec<usize>>,
}

impl CliqueWalk<'_> {
    fn record(&mut self, clique: &[usize]) -> Result<()> {
        self.total += 1;
        if self.total > self.budget {
            let counts: Vec<usize> = self.out.iter().enumerate().map(|(k, f)| f.len() / (k + 1)).collect();
            return Err(TspError::Capacity(format!(
                "clique complex exceeds {} simplices (counts per order so far {counts:?}); raise theta or lower K",
                self.budget
            )));
        }
        self.out[clique.len() - 1].extend_from_slice(clique);
        Ok(())
    }

    /// Extends `clique` by each candidate in ascending order, depth first, so
    /// every order receives its cliques in lexicographic order.
    fn extend(&mut self, clique: &mut Vec<usize>, candidates: &[usize]) -> Result<()> {
        let mut next = Vec::new();
        for (idx, &w) in candidates.iter().enumerate() {
            clique.push(w);
            self.record(clique)?;
            if clique.len() <= self.max_order {
                intersect_sorted(&candidates[idx + 1..], self.graph.neighbors(w), &mut next);
                if !next.is_empty() {
                    let branch = std::mem::take(&mut next);
                    self.extend(clique, &branch)?;
                    next = branch;
                }
            }
            clique.pop();
        }
        Ok(())
    }
}

/// Every clique of at most `K + 1` vertices becomes a simplex. Fails with a
/// capacity error once more than `budget` simplices (all orders) are found.
pub fn lift_clique_complex(graph: &SemanticGraph, max_order: usize, budget: usize) -> Result<SimplicialComplex> {
    if max_order == 0 {
        return config_err("max_order K must be at least 1");
    }
    let mut walk = CliqueWalk {
        graph,
        max_order,
        budget,
        total: 0,
        out: vec![Vec::new(); max_order + 1],
    };
    let mut clique = Vec::with_capacity(max_order + 1);
    for v in 0..graph.num_vertices() {
        clique.push(v);
        walk.record(&clique)?;
        let higher: Vec<usize> = graph.neighbors(v).iter().copied().filter(|&w| w > v).collect();
        walk.extend(&mut clique, &higher)?;
        clique.pop();
    }
    SimplicialComplex::assemble(walk.out, graph.vertex_rows.clone(), Some(graph.theta))
}

/// `L_k` with its spectral radius estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct HodgeOperator {
    pub order: usize,
    pub matrix: CsrMatrix<f64>,
    pub spectral_radius: f64,
    /// `dim ker L_k`, counted densely for operators up to
    /// [`HARMONIC_PROBE_LIMIT`].
    pub harmonic_dimension: Option<usize>,
}

impl HodgeOperator {
    pub fn from_matrix(order: usize, matrix: CsrMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return shape_err(format!("Hodge operator must be square, got {}x{}", matrix.nrows(), matrix.ncols()));
        }
        let spectral_radius = estimate_spectral_radius(&matrix, POWER_MAX_ITERS);
        let harmonic_dimension = if matrix.nrows() <= HARMONIC_PROBE_LIMIT {
            let (values, _) = symmetric_eigen(&matrix.to_dense())?;
            let cut = kernel_threshold(spectral_radius, order);
            Some(values.iter().filter(|v| v.abs() <= cut).count())
        } else {
            None
        };
        Ok(Self {
            order,
            matrix,
            spectral_radius,
            harmonic_dimension,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Dense eigenpairs, ascending. Limited to [`DENSE_LIMIT`].
    pub fn dense_spectrum(&self) -> Result<(Vec<f64>, Array2<f64>)> {
        symmetric_eigen(&self.matrix.to_dense())
    }

    /// Orthonormal basis of `ker L_k` as columns, from the dense spectrum.
    pub fn harmonic_basis(&self) -> Result<Array2<f64>> {
        let (values, vectors) = self.dense_spectrum()?;
        let cut = kernel_threshold(self.spectral_radius, self.order);
        let keep: Vec<usize> = (0..values.len()).filter(|&i| values[i].abs() <= cut).collect();
        Ok(Array2::from_shape_fn((self.dim(), keep.len()), |(r, c)| vectors[[r, keep[c]]]))
    }
}

/// `L₀ = B₁B₁ᵀ`, `L_k = B_kᵀB_k + B_{k+1}B_{k+1}ᵀ`, `L_K = B_KᵀB_K`, built
/// exactly in integers.
pub fn hodge_laplacian_exact(complex: &SimplicialComplex, k: usize) -> Result<CsrMatrix<i64>> {
    let top = complex.max_order();
    if k > top {
        return config_err(format!("Hodge order {k} outside 0..={top}"));
    }
    let down = if k == 0 {
        None
    } else {
        let b = complex.boundary(k)?;
        Some(b.transpose().matmul(b)?)
    };
    let up = if k == top {
        None
    } else {
        let b = complex.boundary(k + 1)?;
        Some(b.matmul(&b.transpose())?)
    };
    match (down, up) {
        (Some(d), Some(u)) => d.add(&u),
        (Some(m), None) | (None, Some(m)) => Ok(m),
        (None, None) => Ok(CsrMatrix::zeros(complex.count(k), complex.count(k))),
    }
}

pub fn hodge_laplacian(complex: &SimplicialComplex, k: usize) -> Result<HodgeOperator> {
    HodgeOperator::from_matrix(k, hodge_laplacian_exact(complex, k)?.to_f64())
}

/// Largest eigenvalue of a symmetric PSD operator by power iteration to a
/// relative tolerance of [`POWER_REL_TOL`]. A zero matrix gives 0.
pub fn estimate_spectral_radius(matrix: &CsrMatrix<f64>, max_iters: usize) -> f64 {
    power_iteration(matrix, POWER_REL_TOL, max_iters)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HodgeComponents {
    /// In `im B_kᵀ`.
    pub gradient: Array1<f64>,
    /// In `im B_{k+1}`.
    pub curl: Array1<f64>,
    pub harmonic: Array1<f64>,
}

/// Least-squares projection of `b` onto `im M` through the normal equations
/// `(MᵀM)z = Mᵀb`.
fn range_projection(m: &CsrMatrix<f64>, b: ArrayView1<'_, f64>, opts: &SolverOptions) -> Result<Array1<f64>> {
    let mt = m.transpose();
    let gram = mt.matmul(m)?;
    let mut rhs = vec![0.0; m.ncols()];
    mt.mul_vec(b.as_slice().expect("contiguous signal"), &mut rhs);
    let mut z = vec![0.0; m.ncols()];
    conjugate_gradient(&gram, 0.0, &rhs, &mut z, opts)?;
    let mut out = vec![0.0; m.nrows()];
    m.mul_vec(&z, &mut out);
    Ok(Array1::from(out))
}

/// Splits a `k`-signal into gradient, curl and harmonic parts. The harmonic
/// part is the residual; at `k = 0` there is no gradient part and at `k = K`
/// no curl part.
pub fn hodge_decompose(
    complex: &SimplicialComplex,
    k: usize,
    signal: ArrayView1<'_, f64>,
    opts: &SolverOptions,
) -> Result<HodgeComponents> {
    if k > complex.max_order() {
        return config_err(format!("Hodge order {k} outside 0..={}", complex.max_order()));
    }
    if signal.len() != complex.count(k) {
        return shape_err(format!("signal of length {} on {} {k}-simplices", signal.len(), complex.count(k)));
    }
    let signal = signal.as_standard_layout().to_owned();
    let gradient = if k == 0 {
        Array1::zeros(signal.len())
    } else {
        range_projection(&complex.boundary(k)?.transpose().to_f64(), signal.view(), opts)?
    };
    let curl = if k == complex.max_order() {
        Array1::zeros(signal.len())
    } else {
        range_projection(&complex.boundary(k + 1)?.to_f64(), signal.view(), opts)?
    };
    let harmonic = &signal - &gradient - &curl;
    Ok(HodgeComponents { gradient, curl, harmonic })
}

/// Orthogonal projection onto the complement of `ker L_k`, through the dense
/// harmonic basis. Only for operators up to [`DENSE_LIMIT`].
pub fn remove_harmonic(op: &HodgeOperator, v: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    if op.dim() > DENSE_LIMIT {
        return Err(TspError::Capacity(format!(
            "harmonic projection needs a dense spectrum, operator has order {}",
            op.dim()
        )));
    }
    let basis = op.harmonic_basis()?;
    let coeffs = basis.t().dot(&v);
    Ok(&v - &basis.dot(&coeffs))
}
