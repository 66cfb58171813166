//! Top-k ranking metrics and the synthetic popularity-biased generator.

use std::cmp::Ordering;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use ndarray::{ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{tail_items, InteractionDataset, NodeLayout, SplitKind};
use crate::error::{config_err, shape_err, Result, TspError};

fn ranking_order(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Top-`k` item indices by descending score, skipping `exclude` (sorted).
/// Ties go to the smaller index.
pub fn top_k_from_scores(scores: ArrayView1<'_, f64>, k: usize, exclude: &[usize]) -> Vec<usize> {
    let mut candidates: Vec<(usize, f64)> = scores
        .iter()
        .copied()
        .enumerate()
        .filter(|(i, _)| exclude.binary_search(i).is_err())
        .collect();
    let keep = k.min(candidates.len());
    if keep == 0 {
        return Vec::new();
    }
    if keep < candidates.len() {
        candidates.select_nth_unstable_by(keep - 1, ranking_order);
        candidates.truncate(keep);
    }
    candidates.sort_by(ranking_order);
    candidates.into_iter().map(|(i, _)| i).collect()
}

fn item_block<'a>(x: ArrayView2<'a, f64>, layout: &NodeLayout) -> ArrayView2<'a, f64> {
    x.slice_axis_move(Axis(0), (layout.num_users..layout.num_nodes()).into())
}

/// Ranks the items for `user` by `y_ui = x_uᵀx_i`.
pub fn rank_topk(
    x: ArrayView2<'_, f64>,
    layout: &NodeLayout,
    user: usize,
    k: usize,
    exclude: &[usize],
) -> Result<Vec<usize>> {
    if k == 0 {
        return config_err("k must be >= 1");
    }
    if x.nrows() != layout.num_nodes() {
        return shape_err(format!(
            "embedding has {} rows, layout expects {}",
            x.nrows(),
            layout.num_nodes()
        ));
    }
    if user >= layout.num_users {
        return shape_err(format!("user {user} out of range ({} users)", layout.num_users));
    }
    let scores = item_block(x, layout).dot(&x.row(user));
    Ok(top_k_from_scores(scores.view(), k, exclude))
}

/// `|recommended ∩ relevant| / |relevant|`; `relevant` sorted and non-empty.
pub fn recall_at_k(recommended: &[usize], relevant: &[usize]) -> f64 {
    debug_assert!(!relevant.is_empty());
    let hits = recommended
        .iter()
        .filter(|i| relevant.binary_search(i).is_ok())
        .count();
    hits as f64 / relevant.len() as f64
}

/// Binary-relevance NDCG with gain `1/log₂(position + 1)`; the ideal DCG
/// places `min(k, |relevant|)` hits first, with `k = recommended.len()`.
pub fn ndcg_at_k(recommended: &[usize], relevant: &[usize]) -> f64 {
    debug_assert!(!relevant.is_empty());
    let discount = |pos: usize| 1.0 / ((pos + 2) as f64).log2();
    let dcg: f64 = recommended
        .iter()
        .enumerate()
        .filter(|(_, i)| relevant.binary_search(i).is_ok())
        .map(|(pos, _)| discount(pos))
        .sum();
    let ideal: f64 = (0..recommended.len().min(relevant.len())).map(discount).sum();
    if ideal == 0.0 {
        0.0
    } else {
        dcg / ideal
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k: usize,
    pub overall_recall: f64,
    pub overall_ndcg: f64,
    pub tail_recall: f64,
    pub tail_ndcg: f64,
    pub num_evaluated_users: usize,
    pub num_tail_users: usize,
    pub tail_fraction: f64,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str =
        "k,overall_recall,overall_ndcg,tail_recall,tail_ndcg,num_evaluated_users,num_tail_users,tail_fraction";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.k,
            self.overall_recall,
            self.overall_ndcg,
            self.tail_recall,
            self.tail_ndcg,
            self.num_evaluated_users,
            self.num_tail_users,
            self.tail_fraction
        )
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path).map_err(|e| TspError::io(format!("creating {}", path.display()), e))?;
        writeln!(f, "{}\n{}", Self::CSV_HEADER, self.csv_row())
            .map_err(|e| TspError::io(format!("writing {}", path.display()), e))
    }
}

struct UserMetrics {
    overall: Option<(f64, f64)>,
    tail: Option<(f64, f64)>,
}

/// Mean of `values`, or 0 when empty. Summed in order for reproducibility.
fn mean(values: impl Iterator<Item = f64>) -> (f64, usize) {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        (0.0, 0)
    } else {
        (sum / n as f64, n)
    }
}

/// Recall@k and NDCG@k against one split, overall and restricted to tail
/// relevance. Train items are never recommended. Users without relevant
/// items are skipped.
pub fn evaluate_split(
    x: ArrayView2<'_, f64>,
    dataset: &InteractionDataset,
    split: SplitKind,
    k: usize,
    tail_fraction: f64,
) -> Result<EvalReport> {
    if k == 0 {
        return config_err("k must be >= 1");
    }
    let layout = NodeLayout {
        num_users: dataset.num_users,
        num_items: dataset.num_items,
    };
    if x.nrows() != layout.num_nodes() {
        return shape_err(format!(
            "embedding has {} rows, dataset has {} nodes",
            x.nrows(),
            layout.num_nodes()
        ));
    }
    let tail = tail_items(dataset, tail_fraction)?;
    let relevant = dataset.user_items(split)?;
    let train = dataset.user_items(SplitKind::Train)?;
    let items = item_block(x, &layout);

    let per_user: Vec<UserMetrics> = (0..layout.num_users)
        .into_par_iter()
        .map(|u| {
            let rel = &relevant[u];
            if rel.is_empty() {
                return UserMetrics { overall: None, tail: None };
            }
            let scores = items.dot(&x.row(u));
            let recs = top_k_from_scores(scores.view(), k, &train[u]);
            let rel_tail: Vec<usize> = rel.iter().copied().filter(|i| tail.binary_search(i).is_ok()).collect();
            UserMetrics {
                overall: Some((recall_at_k(&recs, rel), ndcg_at_k(&recs, rel))),
                tail: (!rel_tail.is_empty()).then(|| (recall_at_k(&recs, &rel_tail), ndcg_at_k(&recs, &rel_tail))),
            }
        })
        .collect();

    let (overall_recall, num_evaluated_users) = mean(per_user.iter().filter_map(|m| m.overall.map(|o| o.0)));
    let (overall_ndcg, _) = mean(per_user.iter().filter_map(|m| m.overall.map(|o| o.1)));
    let (tail_recall, num_tail_users) = mean(per_user.iter().filter_map(|m| m.tail.map(|t| t.0)));
    let (tail_ndcg, _) = mean(per_user.iter().filter_map(|m| m.tail.map(|t| t.1)));
    Ok(EvalReport {
        k,
        overall_recall,
        overall_ndcg,
        tail_recall,
        tail_ndcg,
        num_evaluated_users,
        num_tail_users,
        tail_fraction,
    })
}

/// Test-split evaluation.
pub fn evaluate(x: ArrayView2<'_, f64>, dataset: &InteractionDataset, k: usize, tail_fraction: f64) -> Result<EvalReport> {
    evaluate_split(x, dataset, SplitKind::Test, k, tail_fraction)
}

/// Mean Recall@k over users with relevant items, used for early stopping.
pub fn mean_recall(
    x: ArrayView2<'_, f64>,
    layout: &NodeLayout,
    relevant: &[Vec<usize>],
    exclude: &[Vec<usize>],
    k: usize,
) -> Result<f64> {
    if x.nrows() != layout.num_nodes() {
        return shape_err("embedding rows do not match the layout");
    }
    let items = item_block(x, layout);
    let recalls: Vec<Option<f64>> = (0..layout.num_users)
        .into_par_iter()
        .map(|u| {
            if relevant[u].is_empty() {
                return None;
            }
            let scores = items.dot(&x.row(u));
            Some(recall_at_k(&top_k_from_scores(scores.view(), k, &exclude[u]), &relevant[u]))
        })
        .collect();
    Ok(mean(recalls.into_iter().flatten()).0)
}

/// Each user draws `interactions_per_user` distinct items with probability
/// proportional to `(i + 1)^(−popularity_exponent)`. Unsplit.
pub fn synthetic_biased_dataset(
    num_users: usize,
    num_items: usize,
    interactions_per_user: usize,
    popularity_exponent: f64,
    seed: u64,
) -> Result<InteractionDataset> {
    if num_users == 0 || num_items == 0 || interactions_per_user == 0 {
        return config_err("synthetic dataset sizes must be positive");
    }
    if interactions_per_user > num_items {
        return config_err(format!(
            "{interactions_per_user} interactions per user exceed {num_items} items"
        ));
    }
    if !(popularity_exponent >= 0.0) || !popularity_exponent.is_finite() {
        return config_err(format!("popularity exponent must be finite and >= 0, got {popularity_exponent}"));
    }
    let weights: Vec<f64> = (0..num_items)
        .map(|i| ((i + 1) as f64).powf(-popularity_exponent))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(num_users * interactions_per_user);
    for u in 0..num_users {
        let picks = rand::seq::index::sample_weighted(&mut rng, num_items, |i| weights[i], interactions_per_user)
            .map_err(|e| TspError::Config(e.to_string()))?;
        pairs.extend(picks.into_iter().map(|i| (u, i)));
    }
    InteractionDataset::new(num_users, num_items, pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn ranks_by_score() {
        let s = array![0.9, 0.1, 0.5];
        assert_eq!(top_k_from_scores(s.view(), 2, &[]), vec![0, 2]);
        assert_eq!(top_k_from_scores(s.view(), 2, &[0]), vec![2, 1]);
        assert_eq!(top_k_from_scores(s.view(), 10, &[0]), vec![2, 1]);
    }

    #[test]
    fn ties_go_to_smaller_index() {
        let s = array![1.0, 1.0, 1.0, 1.0, 1.0];
        assert_eq!(top_k_from_scores(s.view(), 3, &[]), vec![0, 1, 2]);
    }

    #[test]
    fn rank_topk_through_embeddings() {
        // one user, three items; scores 0.9, 0.1, 0.5
        let x = array![[1.0], [0.9], [0.1], [0.5]];
        let layout = NodeLayout { num_users: 1, num_items: 3 };
        assert_eq!(rank_topk(x.view(), &layout, 0, 2, &[]).unwrap(), vec![0, 2]);
        assert!(rank_topk(x.view(), &layout, 1, 2, &[]).is_err());
        assert!(rank_topk(x.view(), &layout, 0, 0, &[]).is_err());
    }

    #[test]
    fn recall_examples() {
        assert_eq!(recall_at_k(&[0, 2], &[0, 1]), 0.5);
        assert_eq!(recall_at_k(&[1, 0, 5], &[0, 1]), 1.0);
    }

    #[test]
    fn ndcg_examples() {
        assert_eq!(ndcg_at_k(&[0, 1], &[0]), 1.0);
        assert!((ndcg_at_k(&[1, 0], &[0]) - 0.6309).abs() < 1e-4);
        assert!((ndcg_at_k(&[1, 0], &[0]) - 1.0 / 3f64.log2()).abs() < 1e-15);
        assert_eq!(ndcg_at_k(&[0, 1], &[0, 1]), 1.0);
    }

    #[test]
    fn synthetic_is_seeded() {
        let a = synthetic_biased_dataset(20, 30, 5, 1.2, 4).unwrap();
        assert_eq!(a, synthetic_biased_dataset(20, 30, 5, 1.2, 4).unwrap());
        assert_eq!(a.interactions.len(), 100);
        assert!(synthetic_biased_dataset(2, 3, 4, 1.0, 0).is_err());
    }
}
