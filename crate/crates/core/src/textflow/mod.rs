//! Review-domain pipeline: ingestion, spuriously correlated splits,
//! matched prompt assembly, a pluggable rewriter and a bag-of-words model.

mod bow;
mod pipeline;
mod prompt;
mod review;
mod rewrite;
mod split;
mod synth;

pub use bow::{tokenize, Vocabulary};
pub use pipeline::{
    mean_accuracy_by_mode, run_textflow, write_augmented_reviews, write_rewrite_failures,
    write_textflow_metrics, TextflowConfig, TextflowMetric, TextflowOutcome,
};
pub use prompt::{
    assemble_prompt, match_and_assemble, parse_prompt, AssembleConfig, Assembled, MatchMode,
    RewriteRequest, PROMPT_TEMPLATE_V1,
};
pub use review::{
    binary_label, ingest_reviews, read_reviews, write_reviews, Ratings, Review, SubRating, ASPECTS,
};
pub use rewrite::{
    extract_rewrite, rewrite, HttpRewriter, HttpRewriterConfig, MockRewriter, RewriteFailure,
    RewriteOutcome, Rewriter,
};
pub use split::{
    greedy_cell_targets, label_mention_correlation, make_spurious_split, make_spurious_split_with,
    phi_from_counts, SplitConfig,
};
pub use synth::{generate_synthetic_pool, join_sentences, sentence_aspect, sentences};
