//! Entity-linking difficulty from system disagreement.
//!
//! The pipeline: load a dated [`corpus`], align the output of several
//! entity-linking systems and label each mention EASY, MEDIUM or HARD by
//! their agreement ([`consensus`]), describe mentions with mention,
//! document and temporal [`features`] (the latter drawing on per-period
//! word [`embeddings`]), [`learn`] classifiers that predict difficulty, and
//! [`simulate`] how much routing difficult mentions to a human would help.

pub mod consensus;
pub mod corpus;
pub mod embeddings;
pub mod features;
pub mod learn;
pub mod seed;
pub mod simulate;
pub mod synthetic;
pub mod time;

pub use consensus::{
    AlignPolicy, AlignedMention, DifficultyLabel, LabelledMention, MentionKey, SystemAnnotation,
};
pub use corpus::{Corpus, Document};
pub use embeddings::{EmbeddingModel, EmbeddingParams};
pub use features::{Feature, FeatureSchema, FeatureTable, FeatureVector};
pub use learn::{ClassifierModel, Dataset, EvalReport, Variant};
pub use simulate::{GoldStandard, Strategy};
pub use time::{Span, Window};
