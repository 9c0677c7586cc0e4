//! Caption-derived synset classification.
//!
//! Web captions are reduced to sets of WordNet noun synsets, counted into a
//! pruned class vocabulary and encoded as multi-hot targets for a
//! binary cross-entropy classifier. Downstream label sets are matched to the
//! vocabulary by WordNet path similarity, which both drives the coverage
//! analyses and lets a downstream classifier start from the rows of a
//! pre-trained head.

pub mod benchmark;
pub mod caption;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod experiment;
pub mod labels;
pub mod overlap;
pub mod report;
pub mod stopwords;
pub mod trainer;
pub mod transfer;
pub mod vocab;
pub mod wordnet;

pub use caption::{tokenize, CaptionRecord, Extractor, TaggedToken};
pub use embedding::EmbeddingMatrix;
pub use error::{Error, Result};
pub use labels::{EncodingSummary, LabelEncoder, MultiHotLabel};
pub use overlap::{overlap_sweep, DownstreamLabelSet, OverlapReport};
pub use stopwords::StopWords;
pub use trainer::{evaluate, train_linear, FeatureDataset, LinearHead, TrainConfig};
pub use transfer::{build_transfer_plan, materialize, InitRule, TransferPlan};
pub use vocab::{prune, SynsetCounts, SynsetVocab, VocabClass};
pub use wordnet::{Synset, SynsetId, WordNetDb};
