//! Reference rankers: vector-space cosine and BM25.
//!
//! Both treat each label as one pooled pseudo-document (the sum of the
//! label's training vectors) and rank labels against a query, producing the
//! same `(label, score)` output shape as the generative ranker.

use thiserror::Error;

use crate::corpus::{Collection, SparseVector};
use crate::weighting::{idf, IdfVariant, TermStats};

/// Errors from baseline configuration or statistics.
#[derive(Debug, Error)]
pub enum BaselineError {
    /// A parameter fell outside its valid range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// Average document length must be positive.
    #[error("average document length is not positive; cannot score")]
    DegenerateAverageLength,
}

/// BM25 scoring parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    /// Term-frequency saturation.
    pub k1: f64,
    /// Length-normalization strength, in `[0, 1]`.
    pub b: f64,
    /// Query-side saturation.
    pub k3: f64,
    /// Which IDF formula to use.
    pub idf_variant: IdfVariant,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self {
            k1: 1.2,
            b: 0.75,
            k3: 1000.0,
            idf_variant: IdfVariant::CroftHarperSmoothed,
        }
    }
}

impl Bm25Params {
    /// Checks the parameter ranges: `k1 >= 0`, `0 <= b <= 1`, `k3 >= 0`.
    pub fn validate(&self) -> Result<(), BaselineError> {
        if !(self.k1 >= 0.0 && self.k1.is_finite()) {
            return Err(BaselineError::InvalidParameter(format!(
                "k1 must be nonnegative, got {}",
                self.k1
            )));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(BaselineError::InvalidParameter(format!(
                "b must lie in [0, 1], got {}",
                self.b
            )));
        }
        if !(self.k3 >= 0.0 && self.k3.is_finite()) {
            return Err(BaselineError::InvalidParameter(format!(
                "k3 must be nonnegative, got {}",
                self.k3
            )));
        }
        Ok(())
    }
}

/// Corpus statistics BM25 needs: document frequencies, document count, and
/// the average document length `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bm25Stats {
    term_stats: TermStats,
    avg_len: f64,
}

impl Bm25Stats {
    /// Builds statistics over a set of (pseudo-)documents; fails when the
    /// average length is not positive.
    pub fn from_vectors(vectors: &[SparseVector]) -> Result<Self, BaselineError> {
        let num_docs = vectors.len() as u64;
        let total: f64 = vectors.iter().map(SparseVector::l1).sum();
        if num_docs == 0 || total <= 0.0 {
            return Err(BaselineError::DegenerateAverageLength);
        }
        let max_term = vectors
            .iter()
            .filter_map(SparseVector::max_term)
            .max()
            .map_or(0, |t| t + 1);
        let mut df = vec![0u32; max_term as usize];
        for v in vectors {
            for (term, _) in v.iter() {
                df[term as usize] += 1;
            }
        }
        Ok(Self {
            term_stats: TermStats::new(df, num_docs),
            avg_len: total / num_docs as f64,
        })
    }

    /// Statistics over the raw documents of a collection.
    pub fn from_collection(c: &Collection) -> Result<Self, BaselineError> {
        let num_docs = c.num_docs() as u64;
        let total: f64 = c.docs().iter().map(|d| d.vector.l1()).sum();
        if num_docs == 0 || total <= 0.0 {
            return Err(BaselineError::DegenerateAverageLength);
        }
        Ok(Self {
            term_stats: TermStats::from_collection(c),
            avg_len: total / num_docs as f64,
        })
    }

    /// The underlying document frequencies and count.
    pub fn term_stats(&self) -> &TermStats {
        &self.term_stats
    }

    /// Average document length `A`.
    pub fn avg_len(&self) -> f64 {
        self.avg_len
    }
}

/// Cosine similarity of the two vectors after L2 normalization; 0 when
/// either vector has no mass.
pub fn vsm_score(doc: &SparseVector, query: &SparseVector) -> f64 {
    let denom = doc.l2() * query.l2();
    if denom == 0.0 {
        return 0.0;
    }
    dot(doc, query) / denom
}

fn dot(a: &SparseVector, b: &SparseVector) -> f64 {
    let (mut ai, mut bi) = (a.entries().iter().peekable(), b.entries().iter().peekable());
    let mut sum = 0.0;
    while let (Some(&&(ta, wa)), Some(&&(tb, wb))) = (ai.peek(), bi.peek()) {
        match ta.cmp(&tb) {
            std::cmp::Ordering::Less => {
                ai.next();
            }
            std::cmp::Ordering::Greater => {
                bi.next();
            }
            std::cmp::Ordering::Equal => {
                sum += wa * wb;
                ai.next();
                bi.next();
            }
        }
    }
    sum
}

/// The BM25 retrieval score of `doc` for `query`.
///
/// Per shared term: `idf(n) · (k1+1)·w / (LN + w) · (k3+1)·w' / (k3 + w')`
/// with the length normalizer `LN = k1·((1-b) + b·|doc|_1 / A)`. Terms with
/// no document frequency contribute nothing.
pub fn bm25_score(
    doc: &SparseVector,
    query: &SparseVector,
    stats: &Bm25Stats,
    params: &Bm25Params,
) -> f64 {
    let ln = params.k1 * ((1.0 - params.b) + params.b * doc.l1() / stats.avg_len);
    let mut score = 0.0;
    for (term, qw) in query.iter() {
        let Some(dw) = doc.get(term) else { continue };
        let Ok(weight) = idf(term, &stats.term_stats, params.idf_variant) else {
            continue;
        };
        let doc_factor = (params.k1 + 1.0) * dw / (ln + dw);
        let query_factor = (params.k3 + 1.0) * qw / (params.k3 + qw);
        score += weight * doc_factor * query_factor;
    }
    score
}

/// Pools every label's training vectors into one pseudo-document; returns
/// `(label, pooled vector)` pairs in ascending label order. Multi-label
/// documents contribute to each of their labels.
pub fn pool_label_vectors(c: &Collection) -> Vec<(u32, SparseVector)> {
    c.labels()
        .iter()
        .map(|&label| {
            let pooled = SparseVector::accumulate(
                c.docs()
                    .iter()
                    .filter(|d| d.labels.contains(label))
                    .flat_map(|d| d.vector.iter()),
            );
            (label, pooled)
        })
        .collect()
}

fn rank_with(
    pooled: &[(u32, SparseVector)],
    k: usize,
    score: impl Fn(&SparseVector) -> f64,
) -> Vec<(u32, f64)> {
    let mut scored: Vec<(u32, f64)> = pooled
        .iter()
        .map(|(label, vec)| (*label, score(vec)))
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored.truncate(k.min(scored.len()));
    scored
}

/// Ranks pooled label vectors against a query by cosine similarity; same
/// output shape and tie rule as the generative ranker.
pub fn rank_vsm(pooled: &[(u32, SparseVector)], query: &SparseVector, k: usize) -> Vec<(u32, f64)> {
    rank_with(pooled, k, |vec| vsm_score(vec, query))
}

/// Ranks pooled label vectors against a query by BM25.
pub fn rank_bm25(
    pooled: &[(u32, SparseVector)],
    query: &SparseVector,
    k: usize,
    stats: &Bm25Stats,
    params: &Bm25Params,
) -> Vec<(u32, f64)> {
    rank_with(pooled, k, |vec| bm25_score(vec, query, stats, params))
}
