//! Smoothed generative multinomial text models over sparse data.
//!
//! The crate trains multinomial naive Bayes classifiers (plus a prior-scaled,
//! length-modeled extension) and tied document mixtures, precomputes their
//! smoothed parameters into an inverted index of log-domain deltas, and scores
//! queries against that index with cost proportional to the matched postings.
//! Around that core sit the supporting pieces of a full experimental
//! pipeline: a sparse corpus model with fractional (probabilistic) counts, a
//! generalized TF-IDF transform, VSM and BM25 reference rankers, the usual
//! classification/ranking metrics with paired significance tests, and a
//! seeded Gaussian random search for meta-parameter tuning.
//!
//! Modules:
//! - [`corpus`]: sparse vectors, label sets, corpus ingestion and statistics,
//!   label-powerset encoding, expected counts for weighted sequences.
//! - [`weighting`]: generalized TF-IDF transform and IDF variants.
//! - [`smoothing`]: discount functions, background models, and backoff
//!   weights under one generalized interpolation framework.
//! - [`models`]: estimation of the backoff-tree models (flat multinomial,
//!   prior-scaled/length-modeled extension, tied document mixture).
//! - [`index`]: precomputed log-parameter decomposition housed in an
//!   inverted index; binary serialization.
//! - [`inference`]: sparse posterior/joint/marginal inference over the index,
//!   classification and top-k ranking, and a dense reference scorer.
//! - [`baselines`]: VSM cosine and BM25 scoring.
//! - [`eval`]: Micro/Macro-F1, AP/MAP, NDCG@k, relative measures, and paired
//!   one-tailed t-tests.
//! - [`optimize`]: box-constrained Gaussian random search.

#![forbid(unsafe_code)]
#![warn(missing_docs)]

pub mod baselines;
pub mod corpus;
pub mod eval;
pub mod index;
pub mod inference;
pub mod models;
pub mod optimize;
pub mod smoothing;
pub mod weighting;

pub use corpus::{Collection, Document, LabelSet, PowersetCodec, SparseVector, WeightedSequence};
pub use index::InvertedIndex;
pub use models::GenerativeModel;
pub use smoothing::{BackgroundSpec, DiscountSpec, SmoothingConfig};
pub use weighting::{IdfVariant, TermStats, WeightingConfig, WeightingMode};
