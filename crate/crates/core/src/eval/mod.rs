//! Embedding post-processing and metrics: LDA, cosine trial scoring, EER
//! and top-1 accuracy, plus their text file formats.

mod io;
mod lda;
mod scoring;

pub use io::{
    attach_labels, format_embeddings, format_lda, format_scores, format_trials, parse_embeddings, parse_lda,
    parse_scores, parse_trials, read_embeddings, read_lda, read_scores, read_trials, write_embeddings, write_lda,
    write_scores, write_trials, UNKNOWN_SPEAKER,
};
pub use lda::{cap_lda_dim, default_shrinkage, lda_fit, lda_project, scatter, LdaModel, Scatter};
pub use scoring::{compute_eer, cosine, eer_of_scored, score_trials, top1_accuracy, Embedding, ScoredTrial, Trial};
