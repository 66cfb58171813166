//! Test-time simplicial propagation for debiasing graph recommenders.
//!
//! The pipeline loads implicit feedback, trains a LightGCN-style backbone,
//! lifts the trained embeddings onto a clique complex built from a semantic
//! similarity graph, filters them with Hodge Laplacians, and fuses the result
//! back into node space at inference time.

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backbone;
pub mod complex;
pub mod data;
pub mod error;
pub mod eval;
pub mod io;
pub mod linalg;
pub mod propagation;
pub mod sparse;
pub mod spectral;
pub mod tuning;

pub use backbone::{EmbeddingMatrix, TrainConfig};
pub use data::{BipartiteGraph, InteractionDataset, NodeLayout};
pub use error::{Result, TspError};
pub use sparse::CsrMatrix;
