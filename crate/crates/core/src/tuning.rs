//! Validation-driven choice of the filter coefficient `β`.

use serde::{Deserialize, Serialize};

use crate::backbone::EmbeddingMatrix;
use crate::complex::{HodgeOperator, SimplicialComplex};
use crate::data::{InteractionDataset, SplitKind};
use crate::error::{config_err, Result};
use crate::eval::{evaluate_split, EvalReport};
use crate::propagation::{max_stable_beta, tsp_run_with_operators, FusedEmbedding, TspConfig};

/// Candidates whose validation recall falls below this share of the
/// backbone's are not eligible.
pub const MAX_RELATIVE_RECALL_DROP: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaCandidate {
    pub fraction: f64,
    pub beta: f64,
    pub valid: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSelection {
    pub beta: f64,
    pub backbone_valid: EvalReport,
    pub candidates: Vec<BetaCandidate>,
    /// False when no candidate kept validation recall within the allowed
    /// drop and the most accurate one was taken instead.
    pub within_recall_budget: bool,
}

/// Tries `β = fraction·min(1, max_stable_beta)` for each fraction in
/// `(0, 1)` and keeps the one with the best validation tail Recall@k among
/// those losing at most [`MAX_RELATIVE_RECALL_DROP`] of the backbone's overall
/// validation Recall@k. Ties go to higher overall recall, then smaller `β`.
#[allow(clippy::too_many_arguments)]
pub fn select_beta(
    complex: &SimplicialComplex,
    ops: &[HodgeOperator],
    x0: &EmbeddingMatrix,
    base: &TspConfig,
    dataset: &InteractionDataset,
    fractions: &[f64],
    k: usize,
    tail_fraction: f64,
) -> Result<(BetaSelection, FusedEmbedding)> {
    if fractions.is_empty() {
        return config_err("beta search needs at least one fraction");
    }
    if let Some(f) = fractions.iter().find(|&&f| !(f > 0.0 && f < 1.0)) {
        return config_err(format!("beta fractions must lie in (0, 1), got {f}"));
    }
    let limit = max_stable_beta(ops).min(1.0);
    let backbone_valid = evaluate_split(x0.values(), dataset, SplitKind::Valid, k, tail_fraction)?;
    let floor = (1.0 - MAX_RELATIVE_RECALL_DROP) * backbone_valid.overall_recall;

    let mut best: Option<(usize, FusedEmbedding, bool)> = None;
    let mut candidates = Vec::with_capacity(fractions.len());
    for &fraction in fractions {
        let cfg = TspConfig { beta: fraction * limit, ..base.clone() };
        let fused = tsp_run_with_operators(complex, ops, x0, &cfg)?;
        let valid = evaluate_split(fused.values.values(), dataset, SplitKind::Valid, k, tail_fraction)?;
        let eligible = valid.overall_recall >= floor;
        let better = match &best {
            None => true,
            Some((idx, _, best_eligible)) => {
                let cur: &BetaCandidate = &candidates[*idx];
                let key = |c: &EvalReport, b: f64| (c.tail_recall, c.overall_recall, -b);
                match (eligible, *best_eligible) {
                    (true, false) => true,
                    (false, true) => false,
                    (true, true) => key(&valid, cfg.beta) > key(&cur.valid, cur.beta),
                    (false, false) => (valid.overall_recall, -cfg.beta) > (cur.valid.overall_recall, -cur.beta),
                }
            }
        };
        candidates.push(BetaCandidate { fraction, beta: cfg.beta, valid });
        if better {
            best = Some((candidates.len() - 1, fused, eligible));
        }
    }
    let (idx, fused, eligible) = best.expect("at least one candidate");
    Ok((
        BetaSelection {
            beta: candidates[idx].beta,
            backbone_valid,
            candidates,
            within_recall_budget: eligible,
        },
        fused,
    ))
}
