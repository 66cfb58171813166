//! Test-time simplicial propagation.
//!
//! Node embeddings are lifted onto the `k`-simplices of a clique complex,
//! filtered `L` times with `I − βL_k`, projected back to nodes and averaged
//! over orders `1..=K`: `X_rec = X₀ + (1/K)·Σ_k X_{0←k}`.

use ndarray::{Array1, Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backbone::EmbeddingMatrix;
use crate::complex::{
    hodge_laplacian, ComplexManifest, HodgeOperator, NodeScope, SimplicialComplex, DEFAULT_MAX_EDGES,
    DEFAULT_SIMPLEX_BUDGET,
};
use crate::error::{config_err, shape_err, Result, TspError};
use crate::io::json_hash;
use crate::linalg::{kernel_threshold, SolverOptions, DENSE_LIMIT};
use crate::sparse::CsrMatrix;
use crate::spectral::resolvent_apply;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LiftingMode {
    /// Simplex rows are means of their vertex rows; nodes take the mean over
    /// incident simplices on the way back.
    #[default]
    UnsignedMean,
    /// Products of transposed boundary matrices up, boundary matrices down.
    SignedBoundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TspConfig {
    pub theta: f64,
    pub beta: f64,
    pub layers: usize,
    pub max_order: usize,
    /// Only used by the resolvent checks.
    pub mu: f64,
    pub lifting_mode: LiftingMode,
    pub normalize: bool,
    pub scope: NodeScope,
    pub union_interactions: bool,
    pub max_edges: usize,
    pub simplex_budget: usize,
}

impl Default for TspConfig {
    fn default() -> Self {
        Self {
            theta: 0.5,
            beta: 0.01,
            layers: 2,
            max_order: 3,
            mu: 1.0,
            lifting_mode: LiftingMode::UnsignedMean,
            normalize: true,
            scope: NodeScope::AllNodes,
            union_interactions: false,
            max_edges: DEFAULT_MAX_EDGES,
            simplex_budget: DEFAULT_SIMPLEX_BUDGET,
        }
    }
}

impl TspConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.theta.is_finite() {
            return config_err(format!("theta must be finite, got {}", self.theta));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return config_err(format!("beta must be > 0, got {}", self.beta));
        }
        if self.layers == 0 {
            return config_err("layers must be at least 1");
        }
        if self.max_order == 0 {
            return config_err("max_order must be at least 1");
        }
        if !(self.mu > 0.0) {
            return config_err(format!("mu must be > 0, got {}", self.mu));
        }
        Ok(())
    }

    pub fn semantic(&self) -> crate::complex::SemanticConfig {
        crate::complex::SemanticConfig {
            theta: self.theta,
            scope: self.scope,
            normalize: self.normalize,
            union_interactions: self.union_interactions,
            max_edges: self.max_edges,
        }
    }

    pub fn hash(&self) -> Result<String> {
        json_hash(self)
    }
}

/// Embedding of the `k`-simplices, one row per simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexSignal {
    pub order: usize,
    pub values: Array2<f64>,
}

impl SimplexSignal {
    pub fn new(order: usize, values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return shape_err(format!("order-{order} signal has non-finite entries"));
        }
        Ok(Self { order, values })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn vertex_block(complex: &SimplicialComplex, x0: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let rows = &complex.vertex_rows;
    if let Some(&bad) = rows.iter().find(|&&r| r >= x0.nrows()) {
        return shape_err(format!("complex vertex row {bad} outside an embedding of {} rows", x0.nrows()));
    }
    Ok(Array2::from_shape_fn((rows.len(), x0.ncols()), |(v, c)| x0[[rows[v], c]]))
}

/// Sparse `Y = Mᵀ·X` without materializing the transpose.
fn transpose_mul(m: &CsrMatrix<f64>, x: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = Array2::zeros((m.ncols(), x.ncols()));
    for r in 0..m.nrows() {
        let src = x.row(r);
        for (c, v) in m.row(r) {
            out.row_mut(c).scaled_add(v, &src);
        }
    }
    out
}

/// `X_{σᵏ}` from the node embedding `X₀`.
pub fn lift_embeddings(
    complex: &SimplicialComplex,
    x0: &EmbeddingMatrix,
    k: usize,
    mode: LiftingMode,
) -> Result<SimplexSignal> {
    if k == 0 || k > complex.max_order() {
        return config_err(format!("lift order {k} outside 1..={}", complex.max_order()));
    }
    let base = vertex_block(complex, x0.values())?;
    let values = match mode {
        LiftingMode::UnsignedMean => {
            let scale = 1.0 / (k + 1) as f64;
            let mut out = Array2::zeros((complex.count(k), base.ncols()));
            for (j, s) in complex.simplices(k).enumerate() {
                let mut row = out.row_mut(j);
                for &v in s {
                    row += &base.row(v);
                }
                row *= scale;
            }
            out
        }
        LiftingMode::SignedBoundary => {
            let mut cur = base;
            for i in 1..=k {
                cur = transpose_mul(&complex.boundary(i)?.to_f64(), cur.view());
            }
            cur
        }
    };
    SimplexSignal::new(k, values)
}

/// `(I − βL_k)S`, refusing `β` outside the stable range `β·λ_max < 2`.
pub fn inter_simplex_step(op: &HodgeOperator, beta: f64, signal: &SimplexSignal) -> Result<SimplexSignal> {
    check_stability(op, beta)?;
    if signal.values.nrows() != op.dim() {
        return shape_err(format!(
            "order-{} signal has {} rows but L_{} has order {}",
            signal.order,
            signal.values.nrows(),
            op.order,
            op.dim()
        ));
    }
    let mut out = signal.values.clone();
    out.scaled_add(-beta, &op.matrix.mul_dense(signal.values.view())?);
    SimplexSignal::new(signal.order, out)
}

fn check_stability(op: &HodgeOperator, beta: f64) -> Result<()> {
    if !(beta > 0.0) {
        return config_err(format!("beta must be > 0, got {beta}"));
    }
    if beta * op.spectral_radius >= 2.0 {
        return config_err(format!(
            "beta={beta} is unstable on L_{} with lambda_max={:.6}; admissible beta lies in (0, {:.6})",
            op.order,
            op.spectral_radius,
            2.0 / op.spectral_radius
        ));
    }
    Ok(())
}

/// Largest `β` accepted by every operator, i.e. `min_k 2/λ_max(L_k)`.
pub fn max_stable_beta(ops: &[HodgeOperator]) -> f64 {
    ops.iter()
        .filter(|op| op.spectral_radius > 0.0)
        .map(|op| 2.0 / op.spectral_radius)
        .fold(f64::INFINITY, f64::min)
}

/// `X_{0←k}` over the complex vertices, one row per vertex.
pub fn project_down(complex: &SimplicialComplex, signal: &SimplexSignal, mode: LiftingMode) -> Result<Array2<f64>> {
    let k = signal.order;
    if k == 0 || k > complex.max_order() {
        return config_err(format!("projection order {k} outside 1..={}", complex.max_order()));
    }
    if signal.values.nrows() != complex.count(k) {
        return shape_err(format!(
            "order-{k} signal has {} rows but the complex has {} {k}-simplices",
            signal.values.nrows(),
            complex.count(k)
        ));
    }
    let d = signal.values.ncols();
    match mode {
        LiftingMode::UnsignedMean => {
            let mut out = Array2::zeros((complex.num_vertices(), d));
            let mut incident = vec![0usize; complex.num_vertices()];
            for (j, s) in complex.simplices(k).enumerate() {
                for &v in s {
                    out.row_mut(v).scaled_add(1.0, &signal.values.row(j));
                    incident[v] += 1;
                }
            }
            for (v, &n) in incident.iter().enumerate() {
                if n > 0 {
                    out.row_mut(v).mapv_inplace(|a| a / n as f64);
                }
            }
            Ok(out)
        }
        LiftingMode::SignedBoundary => {
            let mut cur = signal.values.clone();
            for i in (1..=k).rev() {
                cur = complex.boundary(i)?.to_f64().mul_dense(cur.view())?;
            }
            Ok(cur)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderRecord {
    pub order: usize,
    pub count: usize,
    pub spectral_radius: f64,
    pub norm_before: f64,
    pub norm_after: f64,
    /// Frobenius norm of `X_{0←k}`; absent for order 0, which is filtered
    /// but not fused.
    pub projected_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config: TspConfig,
    pub config_hash: String,
    pub complex: ComplexManifest,
    pub orders: Vec<OrderRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedEmbedding {
    pub values: EmbeddingMatrix,
    pub provenance: Provenance,
}

/// Hodge operators `L_0..=L_K` of a complex.
pub fn hodge_operators(complex: &SimplicialComplex) -> Result<Vec<HodgeOperator>> {
    (0..=complex.max_order())
        .into_par_iter()
        .map(|k| hodge_laplacian(complex, k))
        .collect()
}

/// Runs lifting, filtering, projection and fusion. Order 0 is filtered like
/// the others but only orders `1..=K` enter the mean.
pub fn tsp_run(complex: &SimplicialComplex, x0: &EmbeddingMatrix, config: &TspConfig) -> Result<FusedEmbedding> {
    let ops = hodge_operators(complex)?;
    tsp_run_with_operators(complex, &ops, x0, config)
}

pub fn tsp_run_with_operators(
    complex: &SimplicialComplex,
    ops: &[HodgeOperator],
    x0: &EmbeddingMatrix,
    config: &TspConfig,
) -> Result<FusedEmbedding> {
    config.validate()?;
    let top = config.max_order;
    if complex.max_order() != top {
        return config_err(format!(
            "complex was lifted to order {} but the configuration asks for K={top}",
            complex.max_order()
        ));
    }
    if ops.len() != top + 1 || ops.iter().enumerate().any(|(k, op)| op.order != k || op.dim() != complex.count(k)) {
        return shape_err("Hodge operators do not match the complex");
    }
    for op in ops.iter().filter(|op| op.dim() > 0) {
        check_stability(op, config.beta)?;
    }

    let filter = |mut s: SimplexSignal| -> Result<(f64, SimplexSignal)> {
        let before = s.frobenius_norm();
        if s.values.nrows() > 0 {
            for _ in 0..config.layers {
                s = inter_simplex_step(&ops[s.order], config.beta, &s)?;
            }
        }
        Ok((before, s))
    };

    let per_order: Vec<(OrderRecord, Option<Array2<f64>>)> = (0..=top)
        .into_par_iter()
        .map(|k| {
            let lifted = if k == 0 {
                SimplexSignal::new(0, vertex_block(complex, x0.values())?)?
            } else {
                lift_embeddings(complex, x0, k, config.lifting_mode)?
            };
            let (norm_before, filtered) = filter(lifted)?;
            let projected = if k == 0 {
                None
            } else {
                Some(project_down(complex, &filtered, config.lifting_mode)?)
            };
            let record = OrderRecord {
                order: k,
                count: complex.count(k),
                spectral_radius: ops[k].spectral_radius,
                norm_before,
                norm_after: filtered.frobenius_norm(),
                projected_norm: projected.as_ref().map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt()),
            };
            Ok((record, projected))
        })
        .collect::<Result<_>>()?;

    let mut out = x0.values().to_owned();
    let weight = 1.0 / top as f64;
    let mut orders = Vec::with_capacity(per_order.len());
    for (record, projected) in per_order {
        if let Some(p) = projected {
            for (v, &row) in complex.vertex_rows.iter().enumerate() {
                out.row_mut(row).scaled_add(weight, &p.row(v));
            }
        }
        orders.push(record);
    }
    Ok(FusedEmbedding {
        values: EmbeddingMatrix::new(out)?,
        provenance: Provenance {
            config: config.clone(),
            config_hash: config.hash()?,
            complex: complex.manifest(),
            orders,
        },
    })
}

/// `μ(L_k + μI)⁻¹V` under the same solver contract as the graph resolvent.
pub fn simplicial_resolvent_apply(
    op: &HodgeOperator,
    mu: f64,
    v: ArrayView2<'_, f64>,
    opts: &SolverOptions,
) -> Result<Array2<f64>> {
    resolvent_apply(&op.matrix, mu, v, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub order: usize,
    pub mu: f64,
    pub trials: usize,
    /// Smallest positive eigenvalue from the dense spectrum.
    pub lambda_min_positive: f64,
    /// `(μ/(λ_min⁺ + μ))²`.
    pub bound: f64,
    pub worst_ratio: f64,
    /// Samples with `‖R_k v‖² ≥ ‖v‖²`.
    pub non_contracting: usize,
    /// Samples whose ratio exceeds the bound by more than `1e-9`.
    pub bound_violations: usize,
}

impl ContractionReport {
    pub fn holds(&self) -> bool {
        self.non_contracting == 0 && self.bound_violations == 0
    }
}

/// Samples Gaussian signals, removes their harmonic part, and measures
/// `‖R_k v‖²/‖v‖²` against `(μ/(λ_min⁺ + μ))²`.
pub fn verify_norm_contraction(
    op: &HodgeOperator,
    mu: f64,
    trials: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<ContractionReport> {
    if !(mu > 0.0) {
        return config_err(format!("mu must be > 0, got {mu}"));
    }
    if op.dim() > DENSE_LIMIT {
        return Err(TspError::Capacity(format!(
            "contraction check needs a dense spectrum; L_{} has order {} > {DENSE_LIMIT}",
            op.order,
            op.dim()
        )));
    }
    let (values, vectors) = op.dense_spectrum()?;
    let cut = kernel_threshold(op.spectral_radius, op.order);
    let lambda_min_positive = values.iter().copied().filter(|&v| v > cut).fold(f64::INFINITY, f64::min);
    if !lambda_min_positive.is_finite() {
        return Err(TspError::Inapplicable(format!(
            "L_{} has no positive spectrum, every signal is harmonic",
            op.order
        )));
    }
    let kernel: Vec<usize> = (0..values.len()).filter(|&i| values[i].abs() <= cut).collect();
    let basis = Array2::from_shape_fn((op.dim(), kernel.len()), |(r, c)| vectors[[r, kernel[c]]]);
    let bound = (mu / (lambda_min_positive + mu)).powi(2);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Array2::zeros((op.dim(), trials));
    for mut col in samples.columns_mut() {
        let raw: Array1<f64> = (0..op.dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let coeffs = basis.t().dot(&raw);
        col.assign(&(&raw - &basis.dot(&coeffs)));
    }
    let mapped = simplicial_resolvent_apply(op, mu, samples.view(), opts)?;

    let mut worst_ratio: f64 = 0.0;
    let (mut non_contracting, mut bound_violations) = (0, 0);
    for (v, rv) in samples.columns().into_iter().zip(mapped.columns()) {
        let ratio = rv.dot(&rv) / v.dot(&v);
        worst_ratio = worst_ratio.max(ratio);
        if ratio >= 1.0 {
            non_contracting += 1;
        }
        if ratio > bound + 1e-9 {
            bound_violations += 1;
        }
    }
    Ok(ContractionReport {
        order: op.order,
        mu,
        trials,
        lambda_min_positive,
        bound,
        worst_ratio,
        non_contracting,
        bound_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{lift_clique_complex, SemanticGraph};
    use ndarray::array;

    fn complex(n: usize, edges: &[(usize, usize)], k: usize) -> SimplicialComplex {
        let g = SemanticGraph::from_edges(0.0, NodeScope::AllNodes, (0..n).collect(), edges.iter().copied()).unwrap();
        lift_clique_complex(&g, k, 1000).unwrap()
    }

    fn triangle() -> SimplicialComplex {
        complex(3, &[(0, 1), (0, 2), (1, 2)], 2)
    }

    fn hollow_square() -> SimplicialComplex {
        complex(4, &[(0, 1), (1, 2), (2, 3), (0, 3)], 2)
    }

    fn emb(x: Array2<f64>) -> EmbeddingMatrix {
        EmbeddingMatrix::new(x).unwrap()
    }

    #[test]
    fn lift_examples() {
        let c = triangle();
        let x = emb(array![[1.0, 0.0], [3.0, 2.0], [5.0, -4.0]]);
        let mean = lift_embeddings(&c, &x, 1, LiftingMode::UnsignedMean).unwrap();
        assert_eq!(mean.values.row(0), array![2.0, 1.0]);
        let signed = lift_embeddings(&c, &x, 1, LiftingMode::SignedBoundary).unwrap();
        assert_eq!(signed.values.row(0), array![2.0, 2.0]);
        assert!(lift_embeddings(&c, &x, 3, LiftingMode::UnsignedMean).is_err());

        let constant = emb(Array2::from_elem((3, 2), 0.7));
        for k in 1..=2 {
            let m = lift_embeddings(&c, &constant, k, LiftingMode::UnsignedMean).unwrap();
            assert!(m.values.iter().all(|&v| (v - 0.7).abs() < 1e-15));
            let s = lift_embeddings(&c, &constant, k, LiftingMode::SignedBoundary).unwrap();
            assert!(s.values.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn step_examples() {
        let c = triangle();
        let op = hodge_laplacian(&c, 1).unwrap();
        let s = SimplexSignal::new(1, array![[1.0], [2.0], [-3.0]]).unwrap();
        let out = inter_simplex_step(&op, 1.0 / 3.0, &s).unwrap();
        assert!(out.values.iter().all(|v| v.abs() < 1e-15));
        let tiny = inter_simplex_step(&op, 1e-12, &s).unwrap();
        assert!((&tiny.values - &s.values).iter().all(|v| v.abs() < 1e-10));
        assert!(matches!(inter_simplex_step(&op, 0.0, &s), Err(TspError::Config(_))));
        let err = inter_simplex_step(&op, 0.7, &s).unwrap_err();
        assert!(err.to_string().contains("admissible"));
    }

    #[test]
    fn harmonic_signal_is_fixed() {
        let c = hollow_square();
        let op = hodge_laplacian(&c, 1).unwrap();
        let h = op.harmonic_basis().unwrap();
        let s = SimplexSignal::new(1, h.clone()).unwrap();
        let beta = 1.9 / op.spectral_radius;
        let out = inter_simplex_step(&op, beta, &s).unwrap();
        assert!((&out.values - &h).iter().all(|v| v.abs() < 1e-9));
        let r = simplicial_resolvent_apply(&op, 1.0, h.view(), &SolverOptions::default()).unwrap();
        assert!((&r - &h).iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn projection_examples() {
        let c = triangle();
        let x = emb(array![[1.0, 0.5], [3.0, 2.0], [5.0, -4.0]]);
        let lifted = lift_embeddings(&c, &x, 2, LiftingMode::SignedBoundary).unwrap();
        let back = project_down(&c, &lifted, LiftingMode::SignedBoundary).unwrap();
        assert!(back.iter().all(|&v| v == 0.0));

        let edge = complex(2, &[(0, 1)], 1);
        let s = SimplexSignal::new(1, array![[4.0, -1.0]]).unwrap();
        let nodes = project_down(&edge, &s, LiftingMode::UnsignedMean).unwrap();
        assert_eq!(nodes, array![[4.0, -1.0], [4.0, -1.0]]);

        let constant = emb(Array2::from_elem((3, 2), -1.25));
        for k in 1..=2 {
            let up = lift_embeddings(&c, &constant, k, LiftingMode::UnsignedMean).unwrap();
            assert_eq!(project_down(&c, &up, LiftingMode::UnsignedMean).unwrap(), constant.values());
        }
        let bad = SimplexSignal::new(1, array![[1.0]]).unwrap();
        assert!(matches!(project_down(&c, &bad, LiftingMode::UnsignedMean), Err(TspError::Shape(_))));
    }

    #[test]
    fn isolated_vertex_gets_zero_projection() {
        let c = complex(3, &[(0, 1)], 1);
        let s = SimplexSignal::new(1, array![[2.0]]).unwrap();
        assert_eq!(project_down(&c, &s, LiftingMode::UnsignedMean).unwrap(), array![[2.0], [2.0], [0.0]]);
    }

    #[test]
    fn edgeless_complex_returns_input() {
        let c = complex(3, &[], 2);
        let x = emb(array![[1.0], [2.0], [3.0]]);
        let cfg = TspConfig { max_order: 2, ..TspConfig::default() };
        let out = tsp_run(&c, &x, &cfg).unwrap();
        assert_eq!(out.values, x);
        assert_eq!(out.provenance.orders.len(), 3);
    }

    #[test]
    fn signed_triangle_fuses_to_input_at_order_two() {
        // B₁B₂ = 0, so only the edge order contributes
        let c = triangle();
        let x = emb(Array2::from_elem((3, 2), 1.0));
        let cfg = TspConfig { max_order: 2, layers: 1, beta: 0.1, lifting_mode: LiftingMode::SignedBoundary, ..TspConfig::default() };
        assert_eq!(tsp_run(&c, &x, &cfg).unwrap().values, x);
    }

    #[test]
    fn order_mismatch_and_instability_are_rejected() {
        let c = triangle();
        let x = emb(Array2::zeros((3, 1)));
        assert!(tsp_run(&c, &x, &TspConfig { max_order: 3, ..TspConfig::default() }).is_err());
        let err = tsp_run(&c, &x, &TspConfig { max_order: 2, beta: 0.9, ..TspConfig::default() }).unwrap_err();
        assert!(matches!(err, TspError::Config(_)));
    }

    #[test]
    fn order_zero_step_matches_dense_graph_laplacian() {
        let edges = [(0, 1), (1, 2), (2, 3), (0, 2), (3, 4)];
        let c = complex(5, &edges, 2);
        let op = hodge_laplacian(&c, 0).unwrap();
        let x = Array2::from_shape_fn((5, 3), |(i, j)| (i * 3 + j) as f64 * 0.1 - 0.4);
        let mut lap = Array2::<f64>::zeros((5, 5));
        for &(a, b) in &edges {
            lap[[a, b]] -= 1.0;
            lap[[b, a]] -= 1.0;
            lap[[a, a]] += 1.0;
            lap[[b, b]] += 1.0;
        }
        let beta = 0.05;
        let expected = &x - &(lap.dot(&x) * beta);
        let got = inter_simplex_step(&op, beta, &SimplexSignal::new(0, x).unwrap()).unwrap();
        assert!((&got.values - &expected).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn resolvent_on_triangle_eigenvector() {
        let op = hodge_laplacian(&triangle(), 1).unwrap();
        let v = array![[1.0], [-2.0], [0.5]];
        let r = simplicial_resolvent_apply(&op, 1.0, v.view(), &SolverOptions::default()).unwrap();
        assert!((&r - &(&v / 4.0)).iter().all(|a| a.abs() < 1e-9));
        let big = simplicial_resolvent_apply(&op, 1e6, v.view(), &SolverOptions::default()).unwrap();
        assert!((&big - &v).iter().all(|a| a.abs() < 1e-5));
    }

    #[test]
    fn contraction_examples() {
        let opts = SolverOptions::default();
        let tri = hodge_laplacian(&triangle(), 1).unwrap();
        let r = verify_norm_contraction(&tri, 1.0, 20, 7, &opts).unwrap();
        assert!((r.bound - 1.0 / 16.0).abs() < 1e-12);
        assert!((r.worst_ratio - 1.0 / 16.0).abs() < 1e-9);
        assert!(r.holds());

        let sq = hodge_laplacian(&hollow_square(), 1).unwrap();
        let r = verify_norm_contraction(&sq, 1.0, 100, 3, &opts).unwrap();
        assert!(r.holds(), "{r:?}");
        assert!(r.worst_ratio < 1.0);

        let empty = hodge_laplacian(&complex(3, &[], 1), 0).unwrap();
        assert!(matches!(verify_norm_contraction(&empty, 1.0, 5, 1, &opts), Err(TspError::Inapplicable(_))));
    }

    #[test]
    fn max_stable_beta_takes_the_tightest_order() {
        let ops = hodge_operators(&triangle()).unwrap();
        assert!((max_stable_beta(&ops) - 2.0 / 3.0).abs() < 3e-3);
    }

    #[test]
    fn run_is_deterministic_and_leaves_input() {
        let edges: Vec<_> = (0..6).flat_map(|a| (a + 1..6).map(move |b| (a, b))).filter(|&(a, b)| (a + b) % 4 != 0).collect();
        let c = complex(6, &edges, 3);
        let x = emb(Array2::from_shape_fn((6, 4), |(i, j)| ((i * 7 + j * 3) % 5) as f64 - 2.0));
        let copy = x.clone();
        let cfg = TspConfig { max_order: 3, beta: 0.05, ..TspConfig::default() };
        let a = tsp_run(&c, &x, &cfg).unwrap();
        let b = tsp_run(&c, &x, &cfg).unwrap();
        assert_eq!(x, copy);
        assert_eq!(a, b);
        assert_eq!(a.provenance.complex.content_hash, c.content_hash());
    }
}
