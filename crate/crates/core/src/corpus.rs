//! Sparse data model, corpus ingestion, aggregate statistics, label-powerset
//! encoding, and expected counts for probabilistically weighted sequences.
//!
//! The on-disk corpus format is line oriented and UTF-8: one document per
//! line, `<labels> <term>:<weight> ...`, where `<labels>` is a comma-separated
//! list of non-negative integer label ids (it may be absent for unlabeled
//! query documents), term ids are strictly increasing within a line, and
//! weights are decimal reals > 0. Lines whose first non-blank character is
//! `#` are comments and are skipped.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::BufRead;

use thiserror::Error;

/// Errors produced by corpus construction, parsing, and encoding.
#[derive(Debug, Error)]
pub enum CorpusError {
    /// A line could not be split into the expected fields.
    #[error("parse error at line {line}: {message}")]
    Parse {
        /// 1-based input line number.
        line: usize,
        /// What went wrong.
        message: String,
    },
    /// A line was structurally valid but violated a format rule
    /// (non-increasing term ids, non-positive weight, ...).
    #[error("format error at line {line}: {message}")]
    Format {
        /// 1-based input line number.
        line: usize,
        /// Violated rule.
        message: String,
    },
    /// A sparse vector violated its invariants.
    #[error("invalid sparse vector: {0}")]
    InvalidVector(String),
    /// A weighted sequence violated its invariants.
    #[error("invalid weighted sequence: {0}")]
    InvalidSequence(String),
    /// A document that must carry labels has none.
    #[error("document {doc} has an empty label set")]
    EmptyLabelSet {
        /// 0-based document ordinal.
        doc: usize,
    },
    /// An explicit dictionary size is smaller than an observed term id + 1.
    #[error("dictionary size {given} too small: term ids require at least {required}")]
    DictSizeTooSmall {
        /// Minimum size to hold every observed term.
        required: u32,
        /// Size that was requested.
        given: u32,
    },
    /// Reading the underlying stream failed.
    #[error("i/o error")]
    Io(#[from] std::io::Error),
}

/// An ordered sparse vector of `(term id, weight)` pairs.
///
/// Term ids are strictly increasing and every stored weight is finite and
/// strictly positive; zero-weight entries are never stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    /// The empty vector.
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a vector from entries already sorted by strictly increasing
    /// term id, validating the invariants.
    pub fn new(entries: Vec<(u32, f64)>) -> Result<Self, CorpusError> {
        for window in entries.windows(2) {
            if window[1].0 <= window[0].0 {
                return Err(CorpusError::InvalidVector(format!(
                    "term ids not strictly increasing: {} then {}",
                    window[0].0, window[1].0
                )));
            }
        }
        for &(term, weight) in &entries {
            if !weight.is_finite() || weight <= 0.0 {
                return Err(CorpusError::InvalidVector(format!(
                    "weight for term {term} must be finite and > 0, got {weight}"
                )));
            }
        }
        Ok(Self { entries })
    }

    /// Builds a vector by accumulating possibly repeated, unordered
    /// `(term, weight)` pairs. Entries whose accumulated weight is exactly
    /// zero (or negative, which can only arise from caller-supplied negative
    /// increments) are dropped.
    pub fn accumulate(pairs: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for (term, weight) in pairs {
            *acc.entry(term).or_insert(0.0) += weight;
        }
        Self {
            entries: acc.into_iter().filter(|&(_, w)| w > 0.0).collect(),
        }
    }

    /// Number of stored entries, `|w|_0`.
    pub fn l0(&self) -> usize {
        self.entries.len()
    }

    /// Sum of stored weights, `|w|_1`.
    pub fn l1(&self) -> f64 {
        self.entries.iter().map(|&(_, w)| w).sum()
    }

    /// Euclidean norm of the stored weights, `|w|_2`.
    pub fn l2(&self) -> f64 {
        self.entries.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt()
    }

    /// True when no entries are stored.
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The stored weight for `term`, if any.
    pub fn get(&self, term: u32) -> Option<f64> {
        self.entries
            .binary_search_by_key(&term, |&(t, _)| t)
            .ok()
            .map(|i| self.entries[i].1)
    }

    /// Iterates over `(term, weight)` entries in term order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.entries.iter().copied()
    }

    /// The underlying entries, sorted by term id.
    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    /// Largest stored term id, if the vector is non-empty.
    pub fn max_term(&self) -> Option<u32> {
        self.entries.last().map(|&(t, _)| t)
    }
}

/// A sorted, duplicate-free set of integer label ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct LabelSet {
    labels: Vec<u32>,
}

impl LabelSet {
    /// Builds a label set from arbitrary ids, sorting and deduplicating.
    pub fn new(mut labels: Vec<u32>) -> Self {
        labels.sort_unstable();
        labels.dedup();
        Self { labels }
    }

    /// The empty label set.
    pub fn empty() -> Self {
        Self::default()
    }

    /// A single-label set.
    pub fn singleton(label: u32) -> Self {
        Self {
            labels: vec![label],
        }
    }

    /// True when no labels are present.
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of labels.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    /// Membership test.
    pub fn contains(&self, label: u32) -> bool {
        self.labels.binary_search(&label).is_ok()
    }

    /// Labels in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.labels.iter().copied()
    }

    /// Labels as a sorted slice.
    pub fn as_slice(&self) -> &[u32] {
        &self.labels
    }

    /// Number of labels shared with `other`.
    pub fn intersection_size(&self, other: &LabelSet) -> usize {
        self.labels.iter().filter(|&&l| other.contains(l)).count()
    }
}

/// A word sequence with per-occurrence probabilities: occurrence `j` is word
/// `words[j]` present with probability `weights[j]` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSequence {
    words: Vec<u32>,
    weights: Vec<f64>,
}

impl WeightedSequence {
    /// Validates and wraps a sequence of `(word, probability)` occurrences.
    pub fn new(words: Vec<u32>, weights: Vec<f64>) -> Result<Self, CorpusError> {
        if words.len() != weights.len() {
            return Err(CorpusError::InvalidSequence(format!(
                "{} words but {} weights",
                words.len(),
                weights.len()
            )));
        }
        for (j, &r) in weights.iter().enumerate() {
            if !(0.0..=1.0).contains(&r) {
                return Err(CorpusError::InvalidSequence(format!(
                    "occurrence {j} has weight {r} outside [0, 1]"
                )));
            }
        }
        Ok(Self { words, weights })
    }

    /// Number of occurrences.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    /// True when the sequence has no occurrences.
    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// The word ids in sequence order.
    pub fn words(&self) -> &[u32] {
        &self.words
    }

    /// The occurrence probabilities in sequence order.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Iterates over `(word, probability)` occurrences.
    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.words.iter().copied().zip(self.weights.iter().copied())
    }
}

/// One document: a sparse vector plus its (possibly empty) label set.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    /// Term weights.
    pub vector: SparseVector,
    /// Labels; empty for unlabeled query documents.
    pub labels: LabelSet,
}

/// A set of documents together with the aggregate statistics every later
/// stage consumes: dictionary size `N`, distinct labels, per-term document
/// frequencies `I_n`, joint counts `C(l, n)`, and per-label document counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Collection {
    docs: Vec<Document>,
    n_terms: u32,
    labels: Vec<u32>,
    df: Vec<u32>,
    joint: BTreeMap<(u32, u32), f64>,
    label_doc_count: BTreeMap<u32, f64>,
    count_updates: u64,
}

impl Collection {
    /// Builds a collection and its statistics from documents.
    ///
    /// `dict_size` overrides the dictionary size `N`, which otherwise
    /// defaults to 1 + the largest observed term id; supplying a size too
    /// small for the observed ids is an error.
    pub fn from_docs(docs: Vec<Document>, dict_size: Option<u32>) -> Result<Self, CorpusError> {
        let required = docs
            .iter()
            .filter_map(|d| d.vector.max_term())
            .max()
            .map_or(0, |t| t + 1);
        let n_terms = match dict_size {
            Some(given) if given < required => {
                return Err(CorpusError::DictSizeTooSmall { required, given })
            }
            Some(given) => given,
            None => required,
        };

        let mut df = vec![0u32; n_terms as usize];
        let mut joint: BTreeMap<(u32, u32), f64> = BTreeMap::new();
        let mut label_doc_count: BTreeMap<u32, f64> = BTreeMap::new();
        let mut count_updates = 0u64;
        for doc in &docs {
            for (term, _) in doc.vector.iter() {
                df[term as usize] += 1;
            }
            for label in doc.labels.iter() {
                *label_doc_count.entry(label).or_insert(0.0) += 1.0;
                for (term, weight) in doc.vector.iter() {
                    *joint.entry((label, term)).or_insert(0.0) += weight;
                    count_updates += 1;
                }
            }
        }
        let labels: Vec<u32> = label_doc_count.keys().copied().collect();
        Ok(Self {
            docs,
            n_terms,
            labels,
            df,
            joint,
            label_doc_count,
            count_updates,
        })
    }

    /// The documents in input order.
    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    /// The `i`-th document.
    pub fn doc(&self, i: usize) -> &Document {
        &self.docs[i]
    }

    /// Number of documents, `I`.
    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    /// Dictionary size, `N`.
    pub fn num_terms(&self) -> u32 {
        self.n_terms
    }

    /// Number of distinct observed labels, `L`.
    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    /// Distinct observed labels in ascending order.
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Document frequency `I_n` for a term (0 for ids outside the dictionary).
    pub fn df(&self, term: u32) -> u32 {
        self.df.get(term as usize).copied().unwrap_or(0)
    }

    /// Document frequencies indexed by term id.
    pub fn df_slice(&self) -> &[u32] {
        &self.df
    }

    /// Joint count `C(l, n)`; 0 when the pair was never observed.
    pub fn joint_count(&self, label: u32, term: u32) -> f64 {
        self.joint.get(&(label, term)).copied().unwrap_or(0.0)
    }

    /// The non-zero joint counts of a label, sorted by term id.
    pub fn joint_row(&self, label: u32) -> Vec<(u32, f64)> {
        self.joint
            .range((label, 0)..=(label, u32::MAX))
            .map(|(&(_, term), &c)| (term, c))
            .collect()
    }

    /// All non-zero joint counts in `(label, term)` order.
    pub fn joint_counts(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        self.joint.iter().map(|(&(l, n), &c)| (l, n, c))
    }

    /// Number of documents carrying a label.
    pub fn label_doc_count(&self, label: u32) -> f64 {
        self.label_doc_count.get(&label).copied().unwrap_or(0.0)
    }

    /// Total document-label incidences, `Σ_l C(l)`.
    pub fn total_label_doc_count(&self) -> f64 {
        self.label_doc_count.values().sum()
    }

    /// How many joint-count updates statistics accumulation performed
    /// (one per document-label-term triple).
    pub fn count_updates(&self) -> u64 {
        self.count_updates
    }

    /// Writes the collection back out in the line format accepted by
    /// [`parse_collection`]. Weights are printed with shortest round-trip
    /// formatting, so re-parsing reproduces the documents bit-exactly.
    pub fn write_lines(&self, mut out: impl std::io::Write) -> std::io::Result<()> {
        for doc in &self.docs {
            out.write_all(format_document(doc).as_bytes())?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Formats one document in the corpus line format.
pub fn format_document(doc: &Document) -> String {
    let mut line = String::new();
    let mut first = true;
    for label in doc.labels.iter() {
        if !first {
            line.push(',');
        }
        let _ = write!(line, "{label}");
        first = false;
    }
    for (term, weight) in doc.vector.iter() {
        if !line.is_empty() {
            line.push(' ');
        }
        let _ = write!(line, "{term}:{weight:?}");
    }
    line
}

/// Parses a line-oriented corpus (see the module docs for the format).
///
/// With `expect_labels` set, every document must carry at least one label.
/// Without it, the label field is optional: lines whose first token contains
/// `:` (and blank lines) produce unlabeled documents, while a present label
/// field is still parsed — test corpora keep their reference labels.
pub fn parse_collection(
    reader: impl BufRead,
    expect_labels: bool,
) -> Result<Collection, CorpusError> {
    parse_collection_with_dict_size(reader, expect_labels, None)
}

/// [`parse_collection`] with an explicit dictionary size so that separately
/// parsed splits can share one `N`.
pub fn parse_collection_with_dict_size(
    reader: impl BufRead,
    expect_labels: bool,
    dict_size: Option<u32>,
) -> Result<Collection, CorpusError> {
    let mut docs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim_start().starts_with('#') {
            continue;
        }
        docs.push(parse_document(&line, expect_labels, line_no)?);
    }
    Collection::from_docs(docs, dict_size)
}

fn parse_document(
    line: &str,
    expect_labels: bool,
    line_no: usize,
) -> Result<Document, CorpusError> {
    let mut tokens = line.split_whitespace().peekable();
    let labels = match tokens.peek() {
        None => {
            if expect_labels {
                return Err(CorpusError::Parse {
                    line: line_no,
                    message: "empty line where a labeled document was expected".into(),
                });
            }
            LabelSet::empty()
        }
        Some(first) if first.contains(':') => {
            if expect_labels {
                return Err(CorpusError::Parse {
                    line: line_no,
                    message: format!("missing label field before term pair {first:?}"),
                });
            }
            LabelSet::empty()
        }
        Some(_) => {
            let field = tokens.next().expect("peeked token");
            let mut labels = Vec::new();
            for part in field.split(',') {
                let label: u32 = part.parse().map_err(|_| CorpusError::Parse {
                    line: line_no,
                    message: format!("label {part:?} is not a non-negative integer"),
                })?;
                labels.push(label);
            }
            LabelSet::new(labels)
        }
    };
    if expect_labels && labels.is_empty() {
        return Err(CorpusError::Parse {
            line: line_no,
            message: "document has no labels".into(),
        });
    }

    let mut entries: Vec<(u32, f64)> = Vec::new();
    for token in tokens {
        let (term_str, weight_str) = token.split_once(':').ok_or_else(|| CorpusError::Parse {
            line: line_no,
            message: format!("expected <term>:<weight>, got {token:?}"),
        })?;
        let term: u32 = term_str.parse().map_err(|_| CorpusError::Parse {
            line: line_no,
            message: format!("term id {term_str:?} is not a non-negative integer"),
        })?;
        let weight: f64 = weight_str.parse().map_err(|_| CorpusError::Parse {
            line: line_no,
            message: format!("weight {weight_str:?} is not a number"),
        })?;
        if let Some(&(prev, _)) = entries.last() {
            if term <= prev {
                return Err(CorpusError::Format {
                    line: line_no,
                    message: format!("term ids must be strictly increasing: {prev} then {term}"),
                });
            }
        }
        if !weight.is_finite() || weight <= 0.0 {
            return Err(CorpusError::Format {
                line: line_no,
                message: format!("weight for term {term} must be finite and > 0, got {weight}"),
            });
        }
        entries.push((term, weight));
    }
    Ok(Document {
        vector: SparseVector::new(entries).expect("entries validated during parsing"),
        labels,
    })
}

/// A bijection between the distinct label sets observed in training and the
/// dense class ids 0..K-1 assigned to them in first-occurrence order.
#[derive(Debug, Clone, PartialEq)]
pub struct PowersetCodec {
    classes: Vec<LabelSet>,
    lookup: HashMap<LabelSet, u32>,
}

impl PowersetCodec {
    /// Rebuilds a codec from its class list (class id = position).
    pub fn from_classes(classes: Vec<LabelSet>) -> Self {
        let lookup = classes
            .iter()
            .enumerate()
            .map(|(i, set)| (set.clone(), i as u32))
            .collect();
        Self { classes, lookup }
    }

    /// Number of distinct classes, K.
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// The class id of a label set observed during encoding.
    pub fn encode(&self, labels: &LabelSet) -> Option<u32> {
        self.lookup.get(labels).copied()
    }

    /// The label set behind a class id.
    pub fn decode(&self, class: u32) -> Option<&LabelSet> {
        self.classes.get(class as usize)
    }

    /// The label sets in class-id order.
    pub fn classes(&self) -> &[LabelSet] {
        &self.classes
    }
}

/// Replaces each document's label set with a single class id (label powerset
/// transformation). Class ids are assigned in first-occurrence order, so the
/// encoding is deterministic in the input order; decode∘encode is the
/// identity on every observed label set.
pub fn powerset_encode(
    collection: &Collection,
) -> Result<(Collection, PowersetCodec), CorpusError> {
    let mut classes: Vec<LabelSet> = Vec::new();
    let mut lookup: HashMap<LabelSet, u32> = HashMap::new();
    let mut docs = Vec::with_capacity(collection.num_docs());
    for (i, doc) in collection.docs().iter().enumerate() {
        if doc.labels.is_empty() {
            return Err(CorpusError::EmptyLabelSet { doc: i });
        }
        let class = match lookup.get(&doc.labels) {
            Some(&c) => c,
            None => {
                let c = classes.len() as u32;
                classes.push(doc.labels.clone());
                lookup.insert(doc.labels.clone(), c);
                c
            }
        };
        docs.push(Document {
            vector: doc.vector.clone(),
            labels: LabelSet::singleton(class),
        });
    }
    let encoded = Collection::from_docs(docs, Some(collection.num_terms()))?;
    Ok((encoded, PowersetCodec { classes, lookup }))
}

/// Expected counts of a weighted sequence: term `n` receives
/// `Σ_{j: words[j] = n} weights[j]`; terms whose sum is zero are omitted.
pub fn expected_counts(seq: &WeightedSequence) -> SparseVector {
    SparseVector::accumulate(seq.iter())
}

/// Exact probability that `term`'s realized count in `seq` equals `c`.
///
/// Each occurrence of the term is an independent Bernoulli trial with its
/// occurrence probability, so the count follows a Poisson-binomial
/// distribution; the probability is computed by the standard dynamic program
/// over occurrences, tracking counts 0..=c.
pub fn count_probability(seq: &WeightedSequence, term: u32, c: usize) -> f64 {
    let trials = seq.iter().filter(|&(w, _)| w == term).map(|(_, r)| r);
    poisson_binomial_probability(trials, c)
}

/// Expected number of terms whose realized count equals `c`, pooled over a
/// collection of weighted sequences: `E(n_c) = Σ_terms P(count(term) = c)`.
///
/// A term's occurrences are pooled across all sequences, so the expectation
/// describes corpus-level type counts — the quantity the discount estimate
/// `n_1/(n_1 + 2 n_2)` consumes. With integer weights this is an exact tally
/// of count-`c` types.
pub fn expected_count_frequencies(seqs: &[WeightedSequence], c: usize) -> f64 {
    let mut by_term: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for seq in seqs {
        for (word, r) in seq.iter() {
            by_term.entry(word).or_default().push(r);
        }
    }
    by_term
        .values()
        .map(|rs| poisson_binomial_probability(rs.iter().copied(), c))
        .sum()
}

fn poisson_binomial_probability(trials: impl Iterator<Item = f64>, c: usize) -> f64 {
    // p[k] = probability of exactly k successes so far; mass beyond c is
    // never needed and silently truncated.
    let mut p = vec![0.0; c + 1];
    p[0] = 1.0;
    for r in trials {
        for k in (1..=c).rev() {
            p[k] = r * p[k - 1] + (1.0 - r) * p[k];
        }
        p[0] *= 1.0 - r;
    }
    p[c]
}
