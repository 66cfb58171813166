//! Node embeddings and the LightGCN-style backbone that produces them.

use std::collections::BTreeSet;

use log::{debug, info};
use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{BipartiteGraph, InteractionDataset, NodeLayout, SplitKind};
use crate::error::{config_err, shape_err, Result, TspError};
use crate::eval;

/// Dense `N × d` node embeddings, users first then items.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    values: Array2<f64>,
    initial: Option<Array2<f64>>,
}

impl EmbeddingMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(TspError::Shape("embedding contains NaN or infinite entries".into()));
        }
        Ok(Self { values, initial: None })
    }

    /// Attaches the pre-propagation snapshot `X⁽⁰⁾`.
    pub fn with_initial(mut self, initial: Array2<f64>) -> Result<Self> {
        if initial.dim() != self.values.dim() {
            return shape_err(format!(
                "initial snapshot {:?} does not match embedding {:?}",
                initial.dim(),
                self.values.dim()
            ));
        }
        self.initial = Some(initial);
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn initial(&self) -> Option<ArrayView2<'_, f64>> {
        self.initial.as_ref().map(|a| a.view())
    }

    pub fn row(&self, v: usize) -> ArrayView1<'_, f64> {
        self.values.row(v)
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }
}

/// I.i.d. zero-mean Gaussian entries with standard deviation `scale`.
pub fn init_embeddings(n: usize, d: usize, seed: u64, scale: f64) -> Result<EmbeddingMatrix> {
    if n == 0 || d == 0 {
        return config_err(format!("embedding shape must be at least 1x1, got {n}x{d}"));
    }
    if !(scale >= 0.0) || !scale.is_finite() {
        return config_err(format!("initialization scale must be finite and >= 0, got {scale}"));
    }
    if scale == 0.0 {
        return EmbeddingMatrix::new(Array2::zeros((n, d)));
    }
    let normal = Normal::new(0.0, scale).map_err(|e| TspError::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = Array2::from_shape_simple_fn((n, d), || normal.sample(&mut rng));
    EmbeddingMatrix::new(values)
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

/// One message-passing layer, `ÃX`.
pub fn propagate_layer(graph: &BipartiteGraph, x: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    check_rows(graph, x.values())?;
    EmbeddingMatrix::new(graph.normalized_adjacency.mul_dense(x.values())?)
}

fn layer_mean(graph: &BipartiteGraph, x0: ArrayView2<'_, f64>, layers: usize) -> Result<Array2<f64>> {
    let mut acc = x0.to_owned();
    let mut current = x0.to_owned();
    for _ in 0..layers {
        current = graph.normalized_adjacency.mul_dense(current.view())?;
        acc += &current;
    }
    acc /= (layers + 1) as f64;
    Ok(acc)
}

/// Mean of `X⁽⁰⁾, ÃX⁽⁰⁾, …, ÃᴸX⁽⁰⁾`. The result carries `X⁽⁰⁾` as its snapshot.
pub fn lightgcn_forward(graph: &BipartiteGraph, x0: &EmbeddingMatrix, layers: usize) -> Result<EmbeddingMatrix> {
    check_rows(graph, x0.values())?;
    EmbeddingMatrix::new(layer_mean(graph, x0.values(), layers)?)?.with_initial(x0.values().to_owned())
}

/// `y_ui = x_uᵀ x_i`.
pub fn score(x: &EmbeddingMatrix, layout: &NodeLayout, user: usize, item: usize) -> Result<f64> {
    if x.rows() != layout.num_nodes() {
        return shape_err(format!(
            "embedding has {} rows, layout expects {}",
            x.rows(),
            layout.num_nodes()
        ));
    }
    if user >= layout.num_users || item >= layout.num_items {
        return shape_err(format!(
            "(user {user}, item {item}) outside {} users x {} items",
            layout.num_users, layout.num_items
        ));
    }
    Ok(x.row(user).dot(&x.row(layout.item_node(item))))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub layers: usize,
    pub dim: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    /// Standard deviation of the Gaussian initialization.
    pub init_scale: f64,
    /// Cutoff of the validation Recall@k used for early stopping.
    pub eval_k: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            layers: 3,
            dim: 64,
            learning_rate: 1e-3,
            weight_decay: 1e-4,
            batch_size: 4096,
            max_epochs: 1000,
            patience: 50,
            seed: 2024,
            init_scale: 0.1,
            eval_k: 20,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return config_err("train.dim must be >= 1");
        }
        if !(self.learning_rate > 0.0) {
            return config_err(format!("train.learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.weight_decay >= 0.0) {
            return config_err(format!("train.weight_decay must be >= 0, got {}", self.weight_decay));
        }
        if self.batch_size == 0 {
            return config_err("train.batch_size must be >= 1");
        }
        if self.eval_k == 0 {
            return config_err("train.eval_k must be >= 1");
        }
        if !(self.init_scale > 0.0) {
            return config_err(format!("train.init_scale must be positive, got {}", self.init_scale));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean `−ln σ(y_ui − y_uj)` over the epoch's triples.
    pub bpr_loss: f64,
    pub reg_loss: f64,
    pub valid_recall: Option<f64>,
    pub skipped_triples: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Trainable (layer-0) embeddings of the best epoch.
    pub embeddings: EmbeddingMatrix,
    pub history: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub skipped_triples: usize,
}

impl TrainOutcome {
    /// The propagated embeddings used for scoring.
    pub fn final_embeddings(&self, graph: &BipartiteGraph, layers: usize) -> Result<EmbeddingMatrix> {
        lightgcn_forward(graph, &self.embeddings, layers)
    }
}

struct Adam {
    m: Array2<f64>,
    v: Array2<f64>,
    step: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(shape: (usize, usize), lr: f64) -> Self {
        Self {
            m: Array2::zeros(shape),
            v: Array2::zeros(shape),
            step: 0,
            lr,
        }
    }

    fn update(&mut self, params: &mut Array2<f64>, grad: &Array2<f64>) {
        self.step += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.step);
        let c2 = 1.0 - Self::BETA2.powi(self.step);
        ndarray::Zip::from(params)
            .and(&mut self.m)
            .and(&mut self.v)
            .and(grad)
            .for_each(|p, m, v, &g| {
                *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
                *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
                *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
            });
    }
}

fn sample_negative(rng: &mut ChaCha8Rng, num_items: usize, positives: &BTreeSet<usize>) -> Option<usize> {
    if positives.len() >= num_items {
        return None;
    }
    for _ in 0..64 {
        let j = rng.random_range(0..num_items);
        if !positives.contains(&j) {
            return Some(j);
        }
    }
    let free: Vec<usize> = (0..num_items).filter(|j| !positives.contains(j)).collect();
    Some(free[rng.random_range(0..free.len())])
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// BPR training of the layer-0 embeddings, scored through [`lightgcn_forward`].
///
/// Each epoch visits every train interaction once in shuffled order and pairs
/// it with one uniformly drawn non-interacted item. Early stopping tracks
/// validation Recall@`eval_k` and the best epoch's embeddings are returned.
pub fn bpr_train(dataset: &InteractionDataset, graph: &BipartiteGraph, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let train = dataset
        .train()
        .ok_or_else(|| TspError::Config("training requires a split dataset".into()))?;
    if train.is_empty() {
        return config_err("train split is empty");
    }
    if graph.num_nodes() != dataset.num_nodes() {
        return shape_err("graph and dataset disagree on the number of nodes");
    }
    let layout = graph.layout;
    let n = graph.num_nodes();
    let init = init_embeddings(n, config.dim, config.seed, config.init_scale)?;
    let mut params = init.values().to_owned();
    let mut best = params.clone();
    let mut best_epoch = None;
    let mut best_recall = f64::NEG_INFINITY;

    let positives: Vec<BTreeSet<usize>> = dataset
        .user_items(SplitKind::Train)?
        .into_iter()
        .map(|v| v.into_iter().collect())
        .collect();
    let train_items = dataset.user_items(SplitKind::Train)?;
    let valid_items = dataset.user_items(SplitKind::Valid)?;
    let has_valid = valid_items.iter().any(|v| !v.is_empty());

    // Separate streams so the negative draws do not depend on the shuffle.
    let mut order_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut neg_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(2));
    let mut adam = Adam::new(params.dim(), config.learning_rate);
    let mut history = Vec::new();
    let mut total_skipped = 0usize;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut since_best = 0usize;

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut order_rng);
        let mut bpr_sum = 0.0;
        let mut reg_sum = 0.0;
        let mut counted = 0usize;
        let mut skipped = 0usize;

        for batch in order.chunks(config.batch_size) {
            let mut triples = Vec::with_capacity(batch.len());
            for &t in batch {
                let (u, i) = train[t];
                match sample_negative(&mut neg_rng, layout.num_items, &positives[u]) {
                    Some(j) => triples.push((u, layout.item_node(i), layout.item_node(j))),
                    None => skipped += 1,
                }
            }
            if triples.is_empty() {
                continue;
            }
            let forward = layer_mean(graph, params.view(), config.layers)?;
            let scale = 1.0 / triples.len() as f64;
            let mut grad_out = Array2::<f64>::zeros(params.dim());
            let mut grad_reg = Array2::<f64>::zeros(params.dim());
            for &(u, i, j) in &triples {
                let fu = forward.row(u);
                let (fi, fj) = (forward.row(i), forward.row(j));
                let margin = fu.dot(&fi) - fu.dot(&fj);
                bpr_sum -= log_sigmoid(margin);
                let coeff = -sigmoid(-margin) * scale;
                let diff = &fi - &fj;
                grad_out.row_mut(u).scaled_add(coeff, &diff);
                grad_out.row_mut(i).scaled_add(coeff, &fu);
                grad_out.row_mut(j).scaled_add(-coeff, &fu);

                for node in [u, i, j] {
                    let e = params.row(node);
                    reg_sum += 0.5 * config.weight_decay * e.dot(&e);
                    grad_reg.row_mut(node).scaled_add(config.weight_decay * scale, &e);
                }
            }
            counted += triples.len();
            // The layer-mean operator is symmetric, so it is its own adjoint.
            let mut grad = layer_mean(graph, grad_out.view(), config.layers)?;
            grad += &grad_reg;
            adam.update(&mut params, &grad);
        }
        total_skipped += skipped;

        let denom = counted.max(1) as f64;
        let valid_recall = if has_valid {
            let final_emb = layer_mean(graph, params.view(), config.layers)?;
            Some(eval::mean_recall(final_emb.view(), &layout, &valid_items, &train_items, config.eval_k)?)
        } else {
            None
        };
        history.push(EpochRecord {
            epoch,
            bpr_loss: bpr_sum / denom,
            reg_loss: reg_sum / denom,
            valid_recall,
            skipped_triples: skipped,
        });
        debug!("epoch {epoch}: bpr {:.5} valid {:?}", bpr_sum / denom, valid_recall);

        match valid_recall {
            Some(r) if r > best_recall => {
                best_recall = r;
                best.assign(&params);
                best_epoch = Some(epoch);
                since_best = 0;
            }
            Some(_) => {
                since_best += 1;
                if since_best >= config.patience {
                    info!("early stop at epoch {epoch}, best epoch {best_epoch:?} recall {best_recall:.4}");
                    break;
                }
            }
            None => {
                best.assign(&params);
                best_epoch = Some(epoch);
            }
        }
    }

    Ok(TrainOutcome {
        embeddings: EmbeddingMatrix::new(best)?,
        history,
        best_epoch,
        skipped_triples: total_skipped,
    })
}

/// Squared row norms, a common diagnostic.
pub fn row_norms_sq(x: ArrayView2<'_, f64>) -> Vec<f64> {
    x.axis_iter(Axis(0)).map(|r| r.dot(&r)).collect()
}
