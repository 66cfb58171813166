//! One function per subcommand. Each reads its inputs from the output
//! directory, checks them against `artifacts.json`, and records what it
//! writes. `cmd_pipeline` runs them in order through the same files, so a
//! full run and a sequence of partial runs produce identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::info;
use ndarray::Zip;
use serde::{Deserialize, Serialize};
use tsp_core::backbone::{bpr_train, propagate_layer, EpochRecord};
use tsp_core::complex::{
    build_semantic_graph, lift_clique_complex, theta_for_edge_count, ComplexManifest, SimplicialComplex,
};
use tsp_core::data::{build_bipartite_graph, load_interactions, tail_items, unbiased_split, SplitManifest};
use tsp_core::eval::{evaluate, synthetic_biased_dataset, EvalReport};
use tsp_core::io::{load_embeddings, save_embeddings, EmbeddingFormat};
use tsp_core::propagation::{hodge_operators, tsp_run_with_operators, Provenance, TspConfig};
use tsp_core::spectral::{
    degree_norm_report, gradient_descent_step, resolvent_apply, verify_update_bound, DiagnosticsSummary,
    EnergyConfig,
};
use tsp_core::tuning::{select_beta, BetaSelection};
use tsp_core::{BipartiteGraph, EmbeddingMatrix, InteractionDataset, TspError};

use crate::artifacts::*;
use crate::config::{PipelineConfig, Stage};
use crate::error::{CliError, CliResult};

/// Lemma 1 holds when one unit gradient step and one propagation layer agree
/// to this tolerance.
pub const LEMMA1_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Check {
    pub max_abs_deviation: f64,
    pub tolerance: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaChecks {
    pub config_hash: String,
    pub mu: f64,
    pub gradient_step: Lemma1Check,
    /// Degree against resolvent norm, with the `‖x*_v‖² ≥ d_v·C` floor.
    pub resolvent: DiagnosticsSummary,
    /// One propagation layer against twice the local energy.
    pub update: DiagnosticsSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftRecord {
    pub config_hash: String,
    pub theta: f64,
    pub theta_from_edge_count: Option<usize>,
    pub semantic_edges: usize,
    pub complex: ComplexManifest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagateRecord {
    pub config_hash: String,
    pub provenance: Provenance,
    pub beta_selection: Option<BetaSelection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config_hash: String,
    pub k: usize,
    pub tail_fraction: f64,
    pub num_tail_items: usize,
    pub backbone: EvalReport,
    pub tsp: EvalReport,
}

impl Report {
    /// Metric rows, one column per model.
    pub fn to_csv(&self) -> String {
        let (b, t) = (&self.backbone, &self.tsp);
        let rows: [(&str, f64, f64); 6] = [
            ("overall_recall", b.overall_recall, t.overall_recall),
            ("overall_ndcg", b.overall_ndcg, t.overall_ndcg),
            ("tail_recall", b.tail_recall, t.tail_recall),
            ("tail_ndcg", b.tail_ndcg, t.tail_ndcg),
            ("num_evaluated_users", b.num_evaluated_users as f64, t.num_evaluated_users as f64),
            ("num_tail_users", b.num_tail_users as f64, t.num_tail_users as f64),
        ];
        let mut out = String::from("metric,backbone,tsp\n");
        for (name, x, y) in rows {
            writeln!(out, "{name},{x},{y}").expect("write to String");
        }
        out
    }
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| TspError::io(format!("writing {}", path.display()), e))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| TspError::io(format!("reading {}", path.display()), e))?;
    Ok(serde_json::from_str(&text)?)
}

fn prepare(cfg: &PipelineConfig) -> CliResult<Workspace> {
    cfg.validate()?;
    Workspace::open(&cfg.output)
}

fn load_split(cfg: &PipelineConfig, ws: &Workspace) -> CliResult<(InteractionDataset, BipartiteGraph)> {
    let path = ws.require(SPLIT, Stage::Split, &cfg.stage_hash(Stage::Split)?)?;
    let ds = SplitManifest::read(&path)?.into_dataset()?;
    let graph = build_bipartite_graph(&ds)?;
    Ok((ds, graph))
}

fn load_embedding(ws: &Workspace, name: &str, stage: Stage, hash: &str) -> CliResult<EmbeddingMatrix> {
    let path = ws.require(name, stage, hash)?;
    Ok(load_embeddings(&path, EmbeddingFormat::Binary)?)
}

pub fn cmd_split(cfg: &PipelineConfig) -> CliResult<()> {
    let ws = prepare(cfg)?;
    let hash = cfg.stage_hash(Stage::Split)?;
    let raw = match (&cfg.data.path, &cfg.data.synthetic) {
        (Some(path), _) => load_interactions(path, cfg.interaction_format().expect("path is set"))?,
        (None, Some(s)) => {
            synthetic_biased_dataset(s.users, s.items, s.interactions_per_user, s.popularity_exponent, s.seed)?
        }
        (None, None) => unreachable!("validate requires a data source"),
    };
    let ds = unbiased_split(&raw, cfg.split.train_frac, cfg.split.valid_frac, cfg.split.seed)?;
    let mut manifest = SplitManifest::from_dataset(&ds)?;
    manifest.config_hash = Some(hash.clone());
    manifest.write(&ws.path(SPLIT))?;
    info!(
        "split {} users x {} items: {}/{}/{} interactions",
        ds.num_users,
        ds.num_items,
        manifest.train.len(),
        manifest.valid.len(),
        manifest.test.len()
    );
    ws.record(Stage::Split, &hash, &[SPLIT.into()])
}

fn train_log(history: &[EpochRecord], best: Option<usize>) -> String {
    let mut out = String::from("epoch,bpr_loss,reg_loss,valid_recall,skipped_triples,best\n");
    for r in history {
        let recall = r.valid_recall.map(|v| v.to_string()).unwrap_or_default();
        let best = u8::from(best == Some(r.epoch));
        writeln!(out, "{},{},{},{recall},{},{best}", r.epoch, r.bpr_loss, r.reg_loss, r.skipped_triples)
            .expect("write to String");
    }
    out
}

pub fn cmd_train(cfg: &PipelineConfig) -> CliResult<()> {
    let ws = prepare(cfg)?;
    let (ds, graph) = load_split(cfg, &ws)?;
    let hash = cfg.stage_hash(Stage::Train)?;
    let outcome = bpr_train(&ds, &graph, &cfg.train)?;
    info!(
        "trained {} epochs, best epoch {:?}",
        outcome.history.len(),
        outcome.best_epoch
    );
    let scored = outcome.final_embeddings(&graph, cfg.train.layers)?;
    save_embeddings(&ws.path(BACKBONE), &scored, EmbeddingFormat::Binary)?;
    save_embeddings(&ws.path(BACKBONE_LAYER0), &outcome.embeddings, EmbeddingFormat::Binary)?;
    write_text(&ws.path(TRAIN_LOG), &train_log(&outcome.history, outcome.best_epoch))?;
    ws.record(Stage::Train, &hash, &[BACKBONE.into(), BACKBONE_LAYER0.into(), TRAIN_LOG.into()])
}

pub fn cmd_diagnose(cfg: &PipelineConfig) -> CliResult<()> {
    let ws = prepare(cfg)?;
    let (_, graph) = load_split(cfg, &ws)?;
    let x0 = load_embedding(&ws, BACKBONE_LAYER0, Stage::Train, &cfg.stage_hash(Stage::Train)?)?;
    let hash = cfg.stage_hash(Stage::Diagnose)?;
    let energy = &cfg.diagnose;

    let unit = EnergyConfig { eta: 1.0, ..*energy };
    let step = gradient_descent_step(&graph, x0.values(), x0.values(), &unit)?;
    let layer = propagate_layer(&graph, &x0)?;
    let mut deviation = 0.0f64;
    Zip::from(&step).and(layer.values()).for_each(|a, b| deviation = deviation.max((a - b).abs()));

    let x_star = resolvent_apply(&graph.normalized_laplacian, energy.mu, x0.values(), &energy.solver())?;
    let x_star = EmbeddingMatrix::new(x_star)?.with_initial(x0.values().to_owned())?;
    let resolvent = degree_norm_report(&graph, &x_star)?;
    let update = verify_update_bound(&graph, x0.values())?;
    resolvent.write_csv(&ws.path(RESOLVENT_DIAGNOSTICS))?;
    update.write_csv(&ws.path(UPDATE_DIAGNOSTICS))?;

    let checks = LemmaChecks {
        config_hash: hash.clone(),
        mu: energy.mu,
        gradient_step: Lemma1Check {
            max_abs_deviation: deviation,
            tolerance: LEMMA1_TOLERANCE,
            holds: deviation < LEMMA1_TOLERANCE,
        },
        resolvent: resolvent.summary,
        update: update.summary,
    };
    write_json(&ws.path(LEMMA_CHECKS), &checks)?;
    ws.record(
        Stage::Diagnose,
        &hash,
        &[RESOLVENT_DIAGNOSTICS.into(), UPDATE_DIAGNOSTICS.into(), LEMMA_CHECKS.into()],
    )
}

/// Semantic graph and clique complex of the backbone embeddings, with the
/// threshold that was used and the semantic edge count.
pub fn build_complex(
    cfg: &PipelineConfig,
    graph: &BipartiteGraph,
    x0: &EmbeddingMatrix,
) -> CliResult<(SimplicialComplex, f64, usize)> {
    let mut semantic = cfg.tsp.semantic();
    if let Some(m) = cfg.tuning.theta_edges {
        semantic.theta = theta_for_edge_count(x0.values(), &graph.layout, semantic.scope, semantic.normalize, m)?;
    }
    let mut sg = build_semantic_graph(x0.values(), &graph.layout, &semantic)?;
    if semantic.union_interactions {
        sg.union_interactions(graph);
    }
    let edges = sg.num_edges();
    let complex = lift_clique_complex(&sg, cfg.tsp.max_order, cfg.tsp.simplex_budget)?;
    Ok((complex, semantic.theta, edges))
}

pub fn cmd_lift(cfg: &PipelineConfig) -> CliResult<()> {
    let ws = prepare(cfg)?;
    let (_, graph) = load_split(cfg, &ws)?;
    let x0 = load_embedding(&ws, BACKBONE, Stage::Train, &cfg.stage_hash(Stage::Train)?)?;
    let hash = cfg.stage_hash(Stage::Lift)?;
    let (complex, theta, semantic_edges) = build_complex(cfg, &graph, &x0)?;
    info!("theta {theta}: {semantic_edges} semantic edges, simplices per order {:?}", complex.counts());

    let mut files = vec![COMPLEX.to_string()];
    for k in 1..=complex.max_order() {
        let name = boundary_file(k);
        complex.write_boundary_triplets(k, &ws.path(&name))?;
        files.push(name);
    }
    let record = LiftRecord {
        config_hash: hash.clone(),
        theta,
        theta_from_edge_count: cfg.tuning.theta_edges,
        semantic_edges,
        complex: complex.manifest(),
    };
    write_json(&ws.path(COMPLEX), &record)?;
    ws.record(Stage::Lift, &hash, &files)
}

pub fn cmd_propagate(cfg: &PipelineConfig) -> CliResult<()> {
    let ws = prepare(cfg)?;
    let (ds, graph) = load_split(cfg, &ws)?;
    let x0 = load_embedding(&ws, BACKBONE, Stage::Train, &cfg.stage_hash(Stage::Train)?)?;
    let lift_path = ws.require(COMPLEX, Stage::Lift, &cfg.stage_hash(Stage::Lift)?)?;
    let lifted: LiftRecord = read_json(&lift_path)?;
    let hash = cfg.stage_hash(Stage::Propagate)?;

    // The complex is cheap to rebuild relative to storing every simplex; the
    // content hash ties the rebuild to what `lift` exported.
    let (complex, theta, _) = build_complex(cfg, &graph, &x0)?;
    if complex.content_hash() != lifted.complex.content_hash {
        return Err(CliError::StaleArtifact {
            path: lift_path,
            producer: Stage::Lift.command(),
            reason: "the rebuilt complex does not match its recorded content hash".into(),
        });
    }
    let ops = hodge_operators(&complex)?;
    let base = TspConfig { theta, ..cfg.tsp.clone() };
    let (fused, selection) = if cfg.tuning.beta_fractions.is_empty() {
        (tsp_run_with_operators(&complex, &ops, &x0, &base)?, None)
    } else {
        let (sel, fused) = select_beta(
            &complex,
            &ops,
            &x0,
            &base,
            &ds,
            &cfg.tuning.beta_fractions,
            cfg.eval.k,
            cfg.eval.tail_fraction,
        )?;
        info!("selected beta {} on validation", sel.beta);
        (fused, Some(sel))
    };
    save_embeddings(&ws.path(FUSED), &fused.values, EmbeddingFormat::Binary)?;
    let record = PropagateRecord {
        config_hash: hash.clone(),
        provenance: fused.provenance,
        beta_selection: selection,
    };
    write_json(&ws.path(PROVENANCE), &record)?;
    ws.record(Stage::Propagate, &hash, &[FUSED.into(), PROVENANCE.into()])
}

pub fn cmd_evaluate(cfg: &PipelineConfig) -> CliResult<Report> {
    let ws = prepare(cfg)?;
    let (ds, _) = load_split(cfg, &ws)?;
    let backbone = load_embedding(&ws, BACKBONE, Stage::Train, &cfg.stage_hash(Stage::Train)?)?;
    let fused = load_embedding(&ws, FUSED, Stage::Propagate, &cfg.stage_hash(Stage::Propagate)?)?;
    let hash = cfg.stage_hash(Stage::Evaluate)?;
    let (k, tail) = (cfg.eval.k, cfg.eval.tail_fraction);
    let report = Report {
        config_hash: hash.clone(),
        k,
        tail_fraction: tail,
        num_tail_items: tail_items(&ds, tail)?.len(),
        backbone: evaluate(backbone.values(), &ds, k, tail)?,
        tsp: evaluate(fused.values(), &ds, k, tail)?,
    };
    write_json(&ws.path(REPORT_JSON), &report)?;
    write_text(&ws.path(REPORT_CSV), &report.to_csv())?;
    ws.record(Stage::Evaluate, &hash, &[REPORT_JSON.into(), REPORT_CSV.into()])?;
    Ok(report)
}

pub fn cmd_pipeline(cfg: &PipelineConfig) -> CliResult<Report> {
    cmd_split(cfg)?;
    cmd_train(cfg)?;
    cmd_diagnose(cfg)?;
    cmd_lift(cfg)?;
    cmd_propagate(cfg)?;
    cmd_evaluate(cfg)
}
