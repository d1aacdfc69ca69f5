//! Word vectors learnt jointly from corpus co-occurrences and a semantic
//! lexicon, plus intrinsic evaluation.
//!
//! Pipeline: [`corpus`] builds a vocabulary and a sparse distance-weighted
//! co-occurrence matrix, [`lexicon`] loads one relation type as directed
//! word pairs, [`trainer`] minimizes the lexicon-regularized weighted least
//! squares objective with AdaGrad, and [`eval`] scores the resulting
//! [`EmbeddingTable`] on similarity and analogy benchmarks.

pub mod cli;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod io_util;
pub mod lexicon;
pub mod trainer;

pub use corpus::{
    build_cooccurrence, build_cooccurrence_parallel, build_vocab, load_cooc, save_cooc, tokenize_line, CoocEntry,
    CoocMatrix, Vocabulary,
};
pub use embedding::EmbeddingTable;
pub use error::{Error, Result};
pub use eval::{
    cosine, eval_analogy, eval_similarity, fisher_significance, solve_analogy, spearman, AnalogyDataset, AnalogyReport,
    EvalReport, SimilarityDataset,
};
pub use lexicon::{load_relations, relation_indicator, symmetrize, RelationSet};
pub use trainer::{
    adagrad_step, compose_embeddings, compute_gradients, objective_total, pair_residual, train, weight_f, Hyperparams,
    Model, Objective, RegSchedule, Trained,
};
