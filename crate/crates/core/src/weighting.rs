//! Generalized TF-IDF feature transform and query-side IDF weighting.
//!
//! The transform maps a raw sparse count vector `w'` to
//!
//! ```text
//! w_n = ln(1 + w'_n / |v|0^phi) / |v|0^(1-phi) · ln(max(1, upsilon + I/I_n))
//! ```
//!
//! with natural logarithms throughout. `phi` moves the length normalizer
//! between "after count damping" (`phi = 0`, the damped counts are divided by
//! `|v|0`) and "before" (`phi = 1`, the counts are divided by `|v|0` first).
//! `upsilon` lifts or lowers the IDF factor inside a `max(1, ·)` floor, so
//! ubiquitous terms get factor `ln 1 = 0` and drop out of the vector.

use thiserror::Error;

use crate::corpus::{Collection, SparseVector};

/// Errors produced by weighting operations.
#[derive(Debug, Error)]
pub enum WeightingError {
    /// IDF was requested for a term no training document contains.
    #[error("term {term} is absent from the collection (document frequency 0)")]
    TermAbsent {
        /// The offending term id.
        term: u32,
    },
    /// A configuration field is not finite.
    #[error("invalid weighting configuration: {0}")]
    InvalidConfig(String),
}

/// The collection statistics the transforms consume: per-term document
/// frequencies `I_n` and the document count `I`. Detachable from a full
/// [`Collection`] so serialized artifacts can weight queries on their own.
#[derive(Debug, Clone, PartialEq)]
pub struct TermStats {
    df: Vec<u32>,
    num_docs: u64,
}

impl TermStats {
    /// Builds statistics from raw parts.
    pub fn new(df: Vec<u32>, num_docs: u64) -> Self {
        Self { df, num_docs }
    }

    /// Extracts the statistics of a collection.
    pub fn from_collection(c: &Collection) -> Self {
        Self {
            df: c.df_slice().to_vec(),
            num_docs: c.num_docs() as u64,
        }
    }

    /// Document frequency of a term (0 outside the dictionary).
    pub fn df(&self, term: u32) -> u32 {
        self.df.get(term as usize).copied().unwrap_or(0)
    }

    /// Per-term document frequencies.
    pub fn df_slice(&self) -> &[u32] {
        &self.df
    }

    /// Number of documents `I`.
    pub fn num_docs(&self) -> u64 {
        self.num_docs
    }
}

impl From<&Collection> for TermStats {
    fn from(c: &Collection) -> Self {
        Self::from_collection(c)
    }
}

/// Which vectors the transform touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightingMode {
    /// Transform every vector (training documents, test documents, queries).
    DocumentAndTrain,
    /// Multiply query weights by the IDF factor; leave documents raw.
    QueryOnly,
    /// Identity: no weighting at all.
    None,
}

/// Named IDF formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdfVariant {
    /// `ln(I / I_n)`.
    RobertsonWalker,
    /// `ln((I - I_n + 0.5) / (I_n + 0.5))`; may go negative for very common
    /// terms, which is acceptable for BM25 scoring only.
    CroftHarperSmoothed,
    /// `ln(max(1, I/I_n - 1))`: the `upsilon = -1` setting of the generalized
    /// transform's IDF factor.
    CroftHarperUnsmoothed,
}

/// What role a vector plays when weighting is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorRole {
    /// A training document.
    TrainDoc,
    /// A test document being scored.
    TestDoc,
    /// A retrieval query.
    Query,
}

/// Parameters of the generalized transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightingConfig {
    /// Length-scaling exponent `phi`.
    pub phi: f64,
    /// IDF lift `upsilon`.
    pub upsilon: f64,
    /// Which vectors get transformed.
    pub mode: WeightingMode,
    /// Named IDF formula for consumers that need one (e.g. baseline rankers).
    pub idf_variant: IdfVariant,
}

impl Default for WeightingConfig {
    fn default() -> Self {
        Self {
            phi: 0.0,
            upsilon: 0.0,
            mode: WeightingMode::None,
            idf_variant: IdfVariant::RobertsonWalker,
        }
    }
}

impl WeightingConfig {
    /// Checks that the numeric fields are finite.
    pub fn validate(&self) -> Result<(), WeightingError> {
        if !self.phi.is_finite() {
            return Err(WeightingError::InvalidConfig(format!(
                "phi must be finite, got {}",
                self.phi
            )));
        }
        if !self.upsilon.is_finite() {
            return Err(WeightingError::InvalidConfig(format!(
                "upsilon must be finite, got {}",
                self.upsilon
            )));
        }
        Ok(())
    }
}

/// The floored IDF factor of the generalized transform,
/// `ln(max(1, upsilon + I/I_n))`.
fn generalized_idf_factor(num_docs: f64, doc_freq: f64, upsilon: f64) -> f64 {
    (upsilon + num_docs / doc_freq).max(1.0).ln()
}

/// Applies the generalized TF-IDF transform to one vector.
///
/// Terms without training statistics (id outside the dictionary or document
/// frequency 0) are dropped before the transform, and `|v|0` is the size of
/// what remains. Entries whose transformed weight is 0 (ubiquitous terms
/// floored by `max(1, ·)`) are removed from the result.
pub fn tfidf_transform(v: &SparseVector, stats: &TermStats, cfg: &WeightingConfig) -> SparseVector {
    let kept: Vec<(u32, f64)> = v.iter().filter(|&(term, _)| stats.df(term) > 0).collect();
    if kept.is_empty() {
        return SparseVector::empty();
    }
    let l0 = kept.len() as f64;
    let num_docs = stats.num_docs() as f64;
    let damp_scale = l0.powf(cfg.phi);
    let length_norm = l0.powf(1.0 - cfg.phi);
    let entries: Vec<(u32, f64)> = kept
        .into_iter()
        .map(|(term, w)| {
            let idf = generalized_idf_factor(num_docs, stats.df(term) as f64, cfg.upsilon);
            let tf = (1.0 + w / damp_scale).ln() / length_norm;
            (term, tf * idf)
        })
        .filter(|&(_, w)| w > 0.0)
        .collect();
    SparseVector::new(entries).expect("transform preserves term order and positivity")
}

/// A named IDF value for one term.
pub fn idf(term: u32, stats: &TermStats, variant: IdfVariant) -> Result<f64, WeightingError> {
    let doc_freq = stats.df(term) as f64;
    if doc_freq == 0.0 {
        return Err(WeightingError::TermAbsent { term });
    }
    let num_docs = stats.num_docs() as f64;
    Ok(match variant {
        IdfVariant::RobertsonWalker => (num_docs / doc_freq).ln(),
        IdfVariant::CroftHarperSmoothed => ((num_docs - doc_freq + 0.5) / (doc_freq + 0.5)).ln(),
        IdfVariant::CroftHarperUnsmoothed => (num_docs / doc_freq - 1.0).max(1.0).ln(),
    })
}

/// Applies the configured weighting to a vector according to its role.
///
/// `DocumentAndTrain` transforms every vector; `QueryOnly` multiplies query
/// weights by the generalized IDF factor (documents stay raw); `None` is the
/// identity. Terms without training statistics are dropped whenever a
/// transform actually runs.
pub fn apply_weighting(
    v: &SparseVector,
    role: VectorRole,
    stats: &TermStats,
    cfg: &WeightingConfig,
) -> SparseVector {
    match (cfg.mode, role) {
        (WeightingMode::None, _) => v.clone(),
        (WeightingMode::DocumentAndTrain, _) => tfidf_transform(v, stats, cfg),
        (WeightingMode::QueryOnly, VectorRole::Query) => {
            let num_docs = stats.num_docs() as f64;
            let entries: Vec<(u32, f64)> = v
                .iter()
                .filter(|&(term, _)| stats.df(term) > 0)
                .map(|(term, w)| {
                    (
                        term,
                        w * generalized_idf_factor(num_docs, stats.df(term) as f64, cfg.upsilon),
                    )
                })
                .filter(|&(_, w)| w > 0.0)
                .collect();
            SparseVector::new(entries).expect("filtering preserves order and positivity")
        }
        (WeightingMode::QueryOnly, _) => v.clone(),
    }
}
