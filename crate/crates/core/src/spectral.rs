//! Dirichlet-energy diagnostics for graph message passing.
//!
//! Message passing `X ← ÃX` is one unit gradient step on
//! `J(X) = ½·Tr(XᵀL̃X) + (μ/2)·‖X − X⁽⁰⁾‖²` taken at `X⁽⁰⁾`, and the minimizer of
//! `J` is the resolvent `μ(L̃ + μI)⁻¹X⁽⁰⁾`. The functions here evaluate those
//! quantities and check the degree-related claims that follow from them: the
//! norm lower bound driven by the kernel eigenvector `√d` and the bound of a
//! node's update by its neighbourhood energy.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::backbone::EmbeddingMatrix;
use crate::data::BipartiteGraph;
use crate::error::{config_err, shape_err, Result, TspError};
use crate::linalg::{solve_columns, SolverOptions};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConfig {
    pub mu: f64,
    pub eta: f64,
    pub cg_tolerance: f64,
    pub cg_max_iters: usize,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            mu: 1.0,
            eta: 1.0,
            cg_tolerance: 1e-10,
            cg_max_iters: 10_000,
        }
    }
}

impl EnergyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) {
            return config_err(format!("mu must be > 0, got {}", self.mu));
        }
        if !(self.eta >= 0.0 && self.eta <= 1.0) {
            return config_err(format!("eta must lie in [0, 1], got {}", self.eta));
        }
        if !(self.cg_tolerance > 0.0) {
            return config_err(format!("cg_tolerance must be > 0, got {}", self.cg_tolerance));
        }
        Ok(())
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            tolerance: self.cg_tolerance,
            max_iters: self.cg_max_iters,
        }
    }
}

fn check_rows(graph: &BipartiteGraph, x: ArrayView2<'_, f64>) -> Result<()> {
    if x.nrows() != graph.num_nodes() {
        return shape_err(format!(
            "embedding has {} rows but the graph has {} nodes",
            x.nrows(),
            graph.num_nodes()
        ));
    }
    Ok(())
}

fn inv_sqrt_degree(graph: &BipartiteGraph, v: usize) -> f64 {
    match graph.degrees[v] {
        0 => 0.0,
        d => 1.0 / (d as f64).sqrt(),
    }
}

/// `Tr(XᵀL̃X)`.
pub fn graph_dirichlet_energy(graph: &BipartiteGraph, x: ArrayView2<'_, f64>) -> Result<f64> {
    check_rows(graph, x)?;
    let lx = graph.normalized_laplacian.mul_dense(x)?;
    Ok((&lx * &x).sum())
}

/// `½ Σ_{(i,j)} ‖x_i/√d_i − x_j/√d_j‖²` over ordered adjacent pairs.
///
/// Equals [`graph_dirichlet_energy`] when no node is isolated; an isolated
/// node contributes `‖x_v‖²` to the trace form through its identity row.
pub fn edge_sum_energy(graph: &BipartiteGraph, x: ArrayView2<'_, f64>) -> Result<f64> {
    check_rows(graph, x)?;
    Ok(0.5 * (0..graph.num_nodes()).map(|v| neighbourhood_sum(graph, x, v)).sum::<f64>())
}

/// `Σ_{j∈N(v)} ‖x_v/√d_v − x_j/√d_j‖²`.
fn neighbourhood_sum(graph: &BipartiteGraph, x: ArrayView2<'_, f64>, v: usize) -> f64 {
    let sv = inv_sqrt_degree(graph, v);
    let xv = x.row(v);
    graph
        .neighbors(v)
        .map(|j| {
            let sj = inv_sqrt_degree(graph, j);
            xv.iter()
                .zip(x.row(j))
                .map(|(a, b)| (a * sv - b * sj).powi(2))
                .sum::<f64>()
        })
        .sum()
}

/// `E_v = ½ Σ_{j∈N(v)} ‖x_v/√d_v − x_j/√d_j‖²`; zero for isolated nodes.
pub fn local_dirichlet_energy(graph: &BipartiteGraph, x: ArrayView2<'_, f64>, v: usize) -> Result<f64> {
    check_rows(graph, x)?;
    if v >= graph.num_nodes() {
        return shape_err(format!("node {v} out of range ({} nodes)", graph.num_nodes()));
    }
    Ok(0.5 * neighbourhood_sum(graph, x, v))
}

fn check_pair(graph: &BipartiteGraph, x: ArrayView2<'_, f64>, x0: ArrayView2<'_, f64>) -> Result<()> {
    check_rows(graph, x)?;
    if x.dim() != x0.dim() {
        return shape_err(format!("X is {:?} but X0 is {:?}", x.dim(), x0.dim()));
    }
    Ok(())
}

/// `J(X) = ½·Tr(XᵀL̃X) + (μ/2)·‖X − X⁽⁰⁾‖²`.
pub fn energy_objective(graph: &BipartiteGraph, x: ArrayView2<'_, f64>, x0: ArrayView2<'_, f64>, mu: f64) -> Result<f64> {
    check_pair(graph, x, x0)?;
    let fit: f64 = x.iter().zip(x0.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(0.5 * graph_dirichlet_energy(graph, x)? + 0.5 * mu * fit)
}

/// `∇J = L̃X + μ(X − X⁽⁰⁾)`.
pub fn energy_gradient(
    graph: &BipartiteGraph,
    x: ArrayView2<'_, f64>,
    x0: ArrayView2<'_, f64>,
    config: &EnergyConfig,
) -> Result<Array2<f64>> {
    check_pair(graph, x, x0)?;
    let mut grad = graph.normalized_laplacian.mul_dense(x)?;
    if config.mu != 0.0 {
        grad.scaled_add(config.mu, &x);
        grad.scaled_add(-config.mu, &x0);
    }
    Ok(grad)
}

/// `X − η∇J`. At `X = X⁽⁰⁾` with `η = 1` this is `ÃX⁽⁰⁾`.
pub fn gradient_descent_step(
    graph: &BipartiteGraph,
    x: ArrayView2<'_, f64>,
    x0: ArrayView2<'_, f64>,
    config: &EnergyConfig,
) -> Result<Array2<f64>> {
    let grad = energy_gradient(graph, x, x0, config)?;
    let mut out = x.to_owned();
    out.scaled_add(-config.eta, &grad);
    Ok(out)
}

/// `μ(L + μI)⁻¹V` by conjugate gradients on each column.
///
/// Each column solve stops at `‖(L + μI)y/μ − v‖ ≤ tolerance·‖v‖`, which
/// bounds the whole residual by `tolerance·‖V‖`.
pub fn resolvent_apply(
    laplacian: &CsrMatrix<f64>,
    mu: f64,
    v: ArrayView2<'_, f64>,
    opts: &SolverOptions,
) -> Result<Array2<f64>> {
    if !(mu > 0.0) {
        return config_err(format!("resolvent weight mu must be > 0, got {mu}"));
    }
    // (L + μI)(Y/μ) = V, so solve for Z = Y/μ and rescale.
    let mut z = solve_columns(laplacian, mu, v, opts)?;
    z *= mu;
    Ok(z)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub node: usize,
    pub degree: usize,
    pub norm_sq: f64,
    pub local_energy: f64,
    pub update_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorollaryCheck {
    /// `C = ‖c₁‖²/S²` with `c₁ = √dᵀX⁽⁰⁾` and `S = Σ d_j`, the squared
    /// coefficient of the kernel eigenvector term.
    pub constant: f64,
    pub violations: usize,
    /// Smallest `‖x*_v‖² / (d_v·C)` over nodes with `d_v > 0`.
    pub min_ratio: f64,
    pub checked_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateBoundCheck {
    /// Largest `‖Δx_v‖² − Σ_{j∈N(v)}‖x_v/√d_v − x_j/√d_j‖²`.
    pub max_gap: f64,
    pub violations: usize,
    pub checked_nodes: usize,
    /// Isolated nodes fall outside the bound (their update is `−x_v`).
    pub isolated_skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub degree_norm_spearman: f64,
    pub degree_energy_spearman: f64,
    /// Set when a correlation was undefined (constant input) and reported as 0.
    pub degenerate_correlation: bool,
    pub corollary: Option<CorollaryCheck>,
    pub update_bound: Option<UpdateBoundCheck>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeDiagnostics {
    pub records: Vec<NodeRecord>,
    pub summary: DiagnosticsSummary,
}

impl NodeDiagnostics {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let ctx = || format!("writing {}", path.display());
        let file = File::create(path).map_err(|e| TspError::io(ctx(), e))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "node_id,degree,norm_sq,local_energy,update_sq").map_err(|e| TspError::io(ctx(), e))?;
        for r in &self.records {
            writeln!(w, "{},{},{},{},{}", r.node, r.degree, r.norm_sq, r.local_energy, r.update_sq)
                .map_err(|e| TspError::io(ctx(), e))?;
        }
        w.flush().map_err(|e| TspError::io(ctx(), e))
    }
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end - 1) as f64 / 2.0 + 1.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties. `None` when either
/// input is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len());
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        None
    } else {
        Some(cov / (va * vb).sqrt())
    }
}

fn node_records(graph: &BipartiteGraph, x: ArrayView2<'_, f64>) -> Result<Vec<NodeRecord>> {
    let delta = graph.normalized_adjacency.mul_dense(x)? - x;
    Ok((0..graph.num_nodes())
        .map(|v| {
            let (row, d) = (x.row(v), delta.row(v));
            NodeRecord {
                node: v,
                degree: graph.degrees[v],
                norm_sq: row.dot(&row),
                local_energy: 0.5 * neighbourhood_sum(graph, x, v),
                update_sq: d.dot(&d),
            }
        })
        .collect())
}

fn correlations(records: &[NodeRecord]) -> (f64, f64, bool) {
    let deg: Vec<f64> = records.iter().map(|r| r.degree as f64).collect();
    let norm: Vec<f64> = records.iter().map(|r| r.norm_sq).collect();
    let energy: Vec<f64> = records.iter().map(|r| r.local_energy).collect();
    let (dn, de) = (spearman(&deg, &norm), spearman(&deg, &energy));
    (dn.unwrap_or(0.0), de.unwrap_or(0.0), dn.is_none() || de.is_none())
}

/// `C(L̃, X⁽⁰⁾)`: with the unit kernel vector `u₁ = √d/√S`, the λ = 0 term of
/// the resolvent at node `v` is `u₁[v]·u₁ᵀX⁽⁰⁾`, whose squared norm is `d_v·C`.
pub fn corollary_constant(graph: &BipartiteGraph, x0: ArrayView2<'_, f64>) -> Result<f64> {
    check_rows(graph, x0)?;
    let total: f64 = graph.degrees.iter().map(|&d| d as f64).sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let weights: Vec<f64> = graph.degrees.iter().map(|&d| (d as f64).sqrt()).collect();
    let projection = x0.t().dot(&ndarray::Array1::from(weights));
    Ok(projection.dot(&projection) / (total * total))
}

/// Degree/norm association of a resolvent output and the lower bound
/// `‖x*_v‖² ≥ d_v·C`. `x_star` must carry its `X⁽⁰⁾` snapshot.
pub fn degree_norm_report(graph: &BipartiteGraph, x_star: &EmbeddingMatrix) -> Result<NodeDiagnostics> {
    let xs = x_star.values();
    check_rows(graph, xs)?;
    let x0 = x_star
        .initial()
        .ok_or_else(|| TspError::Config("degree_norm_report needs the X0 snapshot on the resolvent output".into()))?;
    let records = node_records(graph, xs)?;
    let constant = corollary_constant(graph, x0)?;
    let mut violations = 0;
    let mut min_ratio = f64::INFINITY;
    let mut checked = 0;
    for r in &records {
        let floor = r.degree as f64 * constant;
        if floor > 0.0 {
            checked += 1;
            min_ratio = min_ratio.min(r.norm_sq / floor);
        }
        if r.norm_sq < floor * (1.0 - 1e-9) - 1e-15 {
            violations += 1;
        }
    }
    let (dn, de, degenerate) = correlations(&records);
    Ok(NodeDiagnostics {
        records,
        summary: DiagnosticsSummary {
            degree_norm_spearman: dn,
            degree_energy_spearman: de,
            degenerate_correlation: degenerate,
            corollary: Some(CorollaryCheck {
                constant,
                violations,
                min_ratio: if checked == 0 { f64::INFINITY } else { min_ratio },
                checked_nodes: checked,
            }),
            update_bound: None,
        },
    })
}

/// Checks `‖Δx_v‖² ≤ Σ_{j∈N(v)} ‖x_v/√d_v − x_j/√d_j‖²` for one layer
/// `Δ = ÃX − X` at every non-isolated node. The right-hand side is `2·E_v`.
pub fn verify_update_bound(graph: &BipartiteGraph, x: ArrayView2<'_, f64>) -> Result<NodeDiagnostics> {
    check_rows(graph, x)?;
    let records = node_records(graph, x)?;
    let mut max_gap = f64::NEG_INFINITY;
    let (mut violations, mut checked, mut isolated) = (0, 0, 0);
    for r in &records {
        if r.degree == 0 {
            isolated += 1;
            continue;
        }
        checked += 1;
        let gap = r.update_sq - 2.0 * r.local_energy;
        max_gap = max_gap.max(gap);
        if gap > 1e-9 {
            violations += 1;
        }
    }
    let (dn, de, degenerate) = correlations(&records);
    Ok(NodeDiagnostics {
        records,
        summary: DiagnosticsSummary {
            degree_norm_spearman: dn,
            degree_energy_spearman: de,
            degenerate_correlation: degenerate,
            corollary: None,
            update_bound: Some(UpdateBoundCheck {
                max_gap: if checked == 0 { 0.0 } else { max_gap },
                violations,
                checked_nodes: checked,
                isolated_skipped: isolated,
            }),
        },
    })
}

/// Squared row norms of `x`.
pub fn row_norms_sq(x: ArrayView2<'_, f64>) -> Vec<f64> {
    x.axis_iter(Axis(0)).map(|r| r.dot(&r)).collect()
}
