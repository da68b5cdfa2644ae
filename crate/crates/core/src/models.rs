//! Model estimation: multinomial naive Bayes, its extension with prior
//! scaling and a Poisson document-length factor, and the tied document
//! mixture (TDM).
//!
//! Every trained model is a rooted backoff tree. Node 0 is the background
//! distribution; deeper nodes hold unsmoothed conditional distributions plus
//! the backoff weight `alpha` routed to their parent. MNB is the depth-2
//! case (background → label leaves); TDM is the depth-4 case (uniform root →
//! collection → labels → one leaf per training document), a multinomial
//! kernel density whose component weights are uniform over each label's
//! documents. Parent ids are always smaller than child ids, so a single
//! forward pass visits parents first.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::corpus::{Collection, CorpusError, Document, PowersetCodec};
use crate::smoothing::{
    background_model, discounted_distribution, SmoothingConfig, SmoothingError,
};
use crate::weighting::{
    apply_weighting, TermStats, VectorRole, WeightingConfig, WeightingError, WeightingMode,
};

/// Errors produced during model estimation and serialization.
#[derive(Debug, Error)]
pub enum ModelError {
    /// Training requires at least one document.
    #[error("cannot train on an empty collection")]
    EmptyCollection,
    /// TDM requires every training document to be non-empty.
    #[error("document {doc} is empty; the tied document mixture needs non-empty documents")]
    EmptyDocument {
        /// Zero-based document index.
        doc: usize,
    },
    /// A label carries no documents, so a per-label statistic is undefined.
    #[error("label {label} has no documents")]
    MissingLabelDocs {
        /// The label id.
        label: u32,
    },
    /// Prior scaling with an exponent below 1 cannot resurrect a zero prior.
    #[error("label {label} has a zero prior; scaling with an exponent < 1 is undefined")]
    ZeroPrior {
        /// The label id.
        label: u32,
    },
    /// A parameter is outside its permitted range.
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
    /// Smoothing-level failure.
    #[error(transparent)]
    Smoothing(#[from] SmoothingError),
    /// Weighting-level failure.
    #[error(transparent)]
    Weighting(#[from] WeightingError),
    /// Corpus-level failure.
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    /// A serialized model failed to parse.
    #[error("model parse error at line {line}: {message}")]
    Parse {
        /// One-based line number.
        line: usize,
        /// What went wrong.
        message: String,
    },
    /// Underlying I/O failure.
    #[error("i/o error")]
    Io(#[from] std::io::Error),
}

/// What a tree node represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    /// The root background distribution.
    RootBackground,
    /// The pooled collection distribution (TDM level 2).
    Collection,
    /// A label-conditional distribution.
    Label(u32),
    /// A single training document's distribution under a label.
    Document {
        /// Owning label id.
        label: u32,
        /// Zero-based index of the document in the training collection.
        doc: u32,
    },
}

/// One node of the backoff tree.
#[derive(Debug, Clone, PartialEq)]
pub struct BackoffNode {
    /// Node id; parents have smaller ids than children, the root is 0.
    pub id: u32,
    /// Parent node id; `None` only for the root.
    pub parent: Option<u32>,
    /// Backoff weight in `[0, 1]` routed to the parent; unused at the root.
    pub alpha: f64,
    /// Sparse unsmoothed distribution `p^u` over terms (zeros omitted).
    pub dist: Vec<(u32, f64)>,
    /// Role of the node.
    pub kind: NodeKind,
}

/// Per-label Poisson document-length factor.
#[derive(Debug, Clone, PartialEq)]
pub struct LengthModel {
    /// Exponent applied to the log Poisson likelihood.
    pub scale: f64,
    /// Poisson mean length per label slot.
    pub lambda: Vec<f64>,
}

/// A trained generative model: backoff tree, label priors, and optional
/// extensions (prior scaling already folded into the priors, length model,
/// powerset codec for decoding class ids back to label sets).
#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeModel {
    nodes: Vec<BackoffNode>,
    labels: Vec<u32>,
    prior: Vec<f64>,
    prior_scale: f64,
    leaves_by_label: Vec<Vec<u32>>,
    length_model: Option<LengthModel>,
    n_terms: u32,
    codec: Option<PowersetCodec>,
}

impl GenerativeModel {
    /// All nodes; index equals node id.
    pub fn nodes(&self) -> &[BackoffNode] {
        &self.nodes
    }

    /// The node with the given id.
    pub fn node(&self, id: u32) -> &BackoffNode {
        &self.nodes[id as usize]
    }

    /// The root background node.
    pub fn root(&self) -> &BackoffNode {
        &self.nodes[0]
    }

    /// Distinct label ids, ascending; the slot of a label is its position.
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Label priors `p(l)`, aligned with [`labels`](Self::labels).
    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    /// Cumulative prior-scaling exponent applied so far (1 = unscaled).
    pub fn prior_scale(&self) -> f64 {
        self.prior_scale
    }

    /// The slot of a label id, if the model knows it.
    pub fn label_slot(&self, label: u32) -> Option<usize> {
        self.labels.binary_search(&label).ok()
    }

    /// Leaf node ids per label slot.
    pub fn leaves_by_label(&self) -> &[Vec<u32>] {
        &self.leaves_by_label
    }

    /// The optional length model.
    pub fn length_model(&self) -> Option<&LengthModel> {
        self.length_model.as_ref()
    }

    /// Dictionary size `N`.
    pub fn num_terms(&self) -> u32 {
        self.n_terms
    }

    /// The powerset codec attached at training time, if any.
    pub fn codec(&self) -> Option<&PowersetCodec> {
        self.codec.as_ref()
    }

    /// Attaches a powerset codec for decoding predictions.
    pub fn with_codec(mut self, codec: PowersetCodec) -> Self {
        self.codec = Some(codec);
        self
    }

    /// Number of levels in the tree (2 for MNB, 4 for TDM).
    pub fn depth(&self) -> usize {
        let mut depth = 0;
        for node in &self.nodes {
            let mut d = 1;
            let mut cur = node;
            while let Some(p) = cur.parent {
                d += 1;
                cur = &self.nodes[p as usize];
            }
            depth = depth.max(d);
        }
        depth
    }

    /// Materializes the fully smoothed distribution at a node by walking the
    /// backoff chain: `p''_m = (1 - alpha_m)·p^u_m + alpha_m·p''_parent`.
    /// Reference path for equivalence tests; dense in the dictionary.
    pub fn dense_smoothed(&self, id: u32) -> Vec<f64> {
        let node = &self.nodes[id as usize];
        match node.parent {
            None => {
                let mut out = vec![0.0; self.n_terms as usize];
                for &(term, p) in &node.dist {
                    out[term as usize] = p;
                }
                out
            }
            Some(parent) => {
                let mut out = self.dense_smoothed(parent);
                for p in &mut out {
                    *p *= node.alpha;
                }
                for &(term, p) in &node.dist {
                    out[term as usize] += (1.0 - node.alpha) * p;
                }
                out
            }
        }
    }

    /// The log length factor for a label slot and (possibly fractional)
    /// document length `j`: `scale·(j·ln lambda - lambda - ln j!)`. Zero when
    /// no length model is fitted or its scale is zero.
    pub fn length_log_factor(&self, slot: usize, j: f64) -> f64 {
        let Some(lm) = &self.length_model else {
            return 0.0;
        };
        if lm.scale == 0.0 {
            return 0.0;
        }
        let lambda = lm.lambda[slot];
        let j_term = if j > 0.0 {
            if lambda > 0.0 {
                j * lambda.ln()
            } else {
                f64::NEG_INFINITY
            }
        } else {
            0.0
        };
        lm.scale * (j_term - lambda - ln_gamma(j + 1.0))
    }

    /// Checks the structural invariants: priors sum to 1, every non-empty
    /// stored distribution sums to 1 within 1e-9, every label owns at least
    /// one leaf, and parents precede children.
    pub fn validate(&self) -> Result<(), ModelError> {
        let prior_sum: f64 = self.prior.iter().sum();
        if (prior_sum - 1.0).abs() > 1e-12 {
            return Err(ModelError::InvalidParameter(format!(
                "priors sum to {prior_sum}, expected 1"
            )));
        }
        if self.leaves_by_label.iter().any(Vec::is_empty) {
            return Err(ModelError::InvalidParameter("a label owns no leaf".into()));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.id as usize != i {
                return Err(ModelError::InvalidParameter(
                    "node ids must be dense".into(),
                ));
            }
            match node.parent {
                None if i != 0 => {
                    return Err(ModelError::InvalidParameter(
                        "non-root without parent".into(),
                    ))
                }
                Some(p) if p >= node.id => {
                    return Err(ModelError::InvalidParameter(
                        "parent ids must precede children".into(),
                    ))
                }
                _ => {}
            }
            if !node.dist.is_empty() {
                let sum: f64 = node.dist.iter().map(|&(_, p)| p).sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(ModelError::InvalidParameter(format!(
                        "node {i} distribution sums to {sum}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Materializes the weighting transform over a whole collection: every
/// document vector is replaced by its transformed version while labels and
/// the dictionary size are preserved. Returns a clone when weighting is
/// inactive.
pub fn weighted_collection(
    collection: &Collection,
    weighting: &WeightingConfig,
) -> Result<Collection, ModelError> {
    weighting.validate()?;
    if weighting.mode != WeightingMode::DocumentAndTrain {
        return Ok(collection.clone());
    }
    let stats = TermStats::from_collection(collection);
    let docs: Vec<Document> = collection
        .docs()
        .iter()
        .map(|d| Document {
            vector: apply_weighting(&d.vector, VectorRole::TrainDoc, &stats, weighting),
            labels: d.labels.clone(),
        })
        .collect();
    Ok(Collection::from_docs(docs, Some(collection.num_terms()))?)
}

fn label_priors(stats: &Collection) -> Vec<f64> {
    let total = stats.total_label_doc_count();
    stats
        .labels()
        .iter()
        .map(|&l| stats.label_doc_count(l) / total)
        .collect()
}

fn background_to_sparse(dense: &[f64]) -> Vec<(u32, f64)> {
    dense
        .iter()
        .enumerate()
        .filter(|&(_, &p)| p > 0.0)
        .map(|(n, &p)| (n as u32, p))
        .collect()
}

/// Trains a multinomial naive Bayes model: a depth-2 backoff tree whose root
/// is the configured background distribution and whose leaves hold each
/// label's discounted conditional and backoff weight. The prior is the
/// label's share of document-label incidences. When weighting is in
/// document-and-train mode, counts are accumulated from transformed vectors.
pub fn train_mnb(
    collection: &Collection,
    smoothing: &SmoothingConfig,
    weighting: &WeightingConfig,
) -> Result<GenerativeModel, ModelError> {
    smoothing.validate()?;
    if collection.num_docs() == 0 {
        return Err(ModelError::EmptyCollection);
    }
    let stats = weighted_collection(collection, weighting)?;
    let background = background_model(&stats, &smoothing.background, &smoothing.discount)?;
    let mut nodes = vec![BackoffNode {
        id: 0,
        parent: None,
        alpha: 1.0,
        dist: background_to_sparse(&background),
        kind: NodeKind::RootBackground,
    }];
    let mut leaves_by_label = Vec::with_capacity(stats.num_labels());
    for (slot, &label) in stats.labels().iter().enumerate() {
        let (dist, alpha) = discounted_distribution(&stats.joint_row(label), smoothing);
        let id = 1 + slot as u32;
        nodes.push(BackoffNode {
            id,
            parent: Some(0),
            alpha,
            dist,
            kind: NodeKind::Label(label),
        });
        leaves_by_label.push(vec![id]);
    }
    Ok(GenerativeModel {
        nodes,
        labels: stats.labels().to_vec(),
        prior: label_priors(&stats),
        prior_scale: 1.0,
        leaves_by_label,
        length_model: None,
        n_terms: stats.num_terms(),
        codec: None,
    })
}

/// Trains a tied document mixture: a depth-4 backoff tree (uniform root →
/// collection → labels → one leaf per training document). Collection and
/// label distributions are estimated from length-normalized document counts
/// (each document contributes `w_n/|w|₁`); leaves hold the document's own
/// distribution. Each level is discounted by its own configuration. The
/// mixture weight over a label's documents is uniform and applied at
/// inference time.
pub fn train_tdm(
    collection: &Collection,
    document_smoothing: &SmoothingConfig,
    label_smoothing: &SmoothingConfig,
    collection_smoothing: &SmoothingConfig,
) -> Result<GenerativeModel, ModelError> {
    document_smoothing.validate()?;
    label_smoothing.validate()?;
    collection_smoothing.validate()?;
    if collection.num_docs() == 0 {
        return Err(ModelError::EmptyCollection);
    }
    if let Some(doc) = collection.docs().iter().position(|d| d.vector.is_empty()) {
        return Err(ModelError::EmptyDocument { doc });
    }
    let n = collection.num_terms() as usize;

    // Length-normalized count tables: pooled over the collection and per label.
    let mut collection_counts: BTreeMap<u32, f64> = BTreeMap::new();
    let mut label_counts: BTreeMap<u32, BTreeMap<u32, f64>> = BTreeMap::new();
    for doc in collection.docs() {
        let l1 = doc.vector.l1();
        for (term, w) in doc.vector.iter() {
            *collection_counts.entry(term).or_insert(0.0) += w / l1;
        }
        for label in doc.labels.iter() {
            let counts = label_counts.entry(label).or_default();
            for (term, w) in doc.vector.iter() {
                *counts.entry(term).or_insert(0.0) += w / l1;
            }
        }
    }

    let mut nodes = vec![BackoffNode {
        id: 0,
        parent: None,
        alpha: 1.0,
        dist: (0..n).map(|t| (t as u32, 1.0 / n as f64)).collect(),
        kind: NodeKind::RootBackground,
    }];
    let coll_pairs: Vec<(u32, f64)> = collection_counts.into_iter().collect();
    let (coll_dist, coll_alpha) = discounted_distribution(&coll_pairs, collection_smoothing);
    nodes.push(BackoffNode {
        id: 1,
        parent: None,
        alpha: coll_alpha,
        dist: coll_dist,
        kind: NodeKind::Collection,
    });
    nodes[1].parent = Some(0);

    let labels: Vec<u32> = collection.labels().to_vec();
    for (slot, &label) in labels.iter().enumerate() {
        let pairs: Vec<(u32, f64)> = label_counts
            .remove(&label)
            .unwrap_or_default()
            .into_iter()
            .collect();
        let (dist, alpha) = discounted_distribution(&pairs, label_smoothing);
        nodes.push(BackoffNode {
            id: 2 + slot as u32,
            parent: Some(1),
            alpha,
            dist,
            kind: NodeKind::Label(label),
        });
    }

    let mut leaves_by_label: Vec<Vec<u32>> = vec![Vec::new(); labels.len()];
    let mut next_id = 2 + labels.len() as u32;
    for (slot, &label) in labels.iter().enumerate() {
        for (i, doc) in collection.docs().iter().enumerate() {
            if !doc.labels.contains(label) {
                continue;
            }
            let (dist, alpha) = discounted_distribution(doc.vector.entries(), document_smoothing);
            nodes.push(BackoffNode {
                id: next_id,
                parent: Some(2 + slot as u32),
                alpha,
                dist,
                kind: NodeKind::Document {
                    label,
                    doc: i as u32,
                },
            });
            leaves_by_label[slot].push(next_id);
            next_id += 1;
        }
    }

    Ok(GenerativeModel {
        nodes,
        labels,
        prior: label_priors(collection),
        prior_scale: 1.0,
        leaves_by_label,
        length_model: None,
        n_terms: collection.num_terms(),
        codec: None,
    })
}

/// Raises every prior to `theta` and renormalizes: `theta = 1` is the
/// identity, `theta = 0` flattens to uniform. Zero priors cannot be scaled
/// with `theta < 1` (the power would resurrect or keep unnormalizable mass).
pub fn apply_prior_scaling(
    mut model: GenerativeModel,
    theta: f64,
) -> Result<GenerativeModel, ModelError> {
    if !theta.is_finite() || theta < 0.0 {
        return Err(ModelError::InvalidParameter(format!(
            "prior-scaling exponent must be finite and ≥ 0, got {theta}"
        )));
    }
    if theta < 1.0 {
        if let Some(slot) = model.prior.iter().position(|&p| p == 0.0) {
            return Err(ModelError::ZeroPrior {
                label: model.labels[slot],
            });
        }
    }
    let mut scaled: Vec<f64> = model.prior.iter().map(|&p| p.powf(theta)).collect();
    let total: f64 = scaled.iter().sum();
    for p in &mut scaled {
        *p /= total;
    }
    model.prior = scaled;
    model.prior_scale *= theta;
    Ok(model)
}

/// Fits the Poisson length model: `lambda_l` is the mean L1 length of the
/// label's documents in `collection` (pass the weighted view when weighting
/// is active), and `scale` exponentiates the log Poisson likelihood at
/// inference time. Every model label needs at least one document.
pub fn fit_length_model(
    mut model: GenerativeModel,
    collection: &Collection,
    scale: f64,
) -> Result<GenerativeModel, ModelError> {
    if !scale.is_finite() || scale < 0.0 {
        return Err(ModelError::InvalidParameter(format!(
            "length-model scale must be finite and ≥ 0, got {scale}"
        )));
    }
    let mut lambda = Vec::with_capacity(model.labels.len());
    for &label in &model.labels {
        let mut total = 0.0;
        let mut count = 0usize;
        for doc in collection.docs() {
            if doc.labels.contains(label) {
                total += doc.vector.l1();
                count += 1;
            }
        }
        if count == 0 {
            return Err(ModelError::MissingLabelDocs { label });
        }
        lambda.push(total / count as f64);
    }
    model.length_model = Some(LengthModel { scale, lambda });
    Ok(model)
}

fn kind_token(kind: &NodeKind) -> String {
    match *kind {
        NodeKind::RootBackground => "root".into(),
        NodeKind::Collection => "collection".into(),
        NodeKind::Label(l) => format!("label:{l}"),
        NodeKind::Document { label, doc } => format!("doc:{label}:{doc}"),
    }
}

fn parse_kind(token: &str, line: usize) -> Result<NodeKind, ModelError> {
    let bad = |message: String| ModelError::Parse { line, message };
    if token == "root" {
        return Ok(NodeKind::RootBackground);
    }
    if token == "collection" {
        return Ok(NodeKind::Collection);
    }
    if let Some(rest) = token.strip_prefix("label:") {
        let l = rest
            .parse()
            .map_err(|_| bad(format!("bad label kind `{token}`")))?;
        return Ok(NodeKind::Label(l));
    }
    if let Some(rest) = token.strip_prefix("doc:") {
        let (l, d) = rest
            .split_once(':')
            .ok_or_else(|| bad(format!("bad document kind `{token}`")))?;
        return Ok(NodeKind::Document {
            label: l
                .parse()
                .map_err(|_| bad(format!("bad document kind `{token}`")))?,
            doc: d
                .parse()
                .map_err(|_| bad(format!("bad document kind `{token}`")))?,
        });
    }
    Err(bad(format!("unknown node kind `{token}`")))
}

const MODEL_MAGIC: &str = "sgm model 1";

/// Writes the model as a line-oriented text dump. Floating-point values are
/// printed in shortest round-trip form, so reading the dump back reproduces
/// the model exactly.
pub fn write_model(model: &GenerativeModel, mut out: impl Write) -> Result<(), ModelError> {
    writeln!(out, "{MODEL_MAGIC}")?;
    writeln!(out, "n_terms {}", model.n_terms)?;
    writeln!(out, "prior_scale {:?}", model.prior_scale)?;
    writeln!(out, "labels {}", model.labels.len())?;
    for (slot, &label) in model.labels.iter().enumerate() {
        writeln!(out, "label {label} {:?}", model.prior[slot])?;
    }
    match &model.length_model {
        Some(lm) => {
            writeln!(out, "length 1 {:?}", lm.scale)?;
            for &l in &lm.lambda {
                writeln!(out, "lambda {l:?}")?;
            }
        }
        None => writeln!(out, "length 0")?,
    }
    match &model.codec {
        Some(codec) => {
            writeln!(out, "codec {}", codec.num_classes())?;
            for class in codec.classes() {
                let labels: Vec<String> = class.iter().map(|l| l.to_string()).collect();
                if labels.is_empty() {
                    writeln!(out, "class -")?;
                } else {
                    writeln!(out, "class {}", labels.join(","))?;
                }
            }
        }
        None => writeln!(out, "codec 0")?,
    }
    writeln!(out, "nodes {}", model.nodes.len())?;
    for node in &model.nodes {
        let parent = node.parent.map_or("-".into(), |p| p.to_string());
        write!(
            out,
            "node {} {} {:?} {} {}",
            node.id,
            parent,
            node.alpha,
            kind_token(&node.kind),
            node.dist.len()
        )?;
        for &(term, p) in &node.dist {
            write!(out, " {term}:{p:?}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

struct LineReader<R: BufRead> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> LineReader<R> {
    fn next_line(&mut self) -> Result<(usize, String), ModelError> {
        self.line += 1;
        match self.inner.next() {
            Some(Ok(s)) => Ok((self.line, s)),
            Some(Err(e)) => Err(ModelError::Io(e)),
            None => Err(ModelError::Parse {
                line: self.line,
                message: "unexpected end of file".into(),
            }),
        }
    }
}

fn expect_field<'a>(
    fields: &mut impl Iterator<Item = &'a str>,
    line: usize,
    what: &str,
) -> Result<&'a str, ModelError> {
    fields.next().ok_or_else(|| ModelError::Parse {
        line,
        message: format!("missing {what}"),
    })
}

fn parse_num<T: std::str::FromStr>(token: &str, line: usize, what: &str) -> Result<T, ModelError> {
    token.parse().map_err(|_| ModelError::Parse {
        line,
        message: format!("bad {what} `{token}`"),
    })
}

fn expect_keyword<'a>(
    fields: &mut impl Iterator<Item = &'a str>,
    line: usize,
    keyword: &str,
) -> Result<(), ModelError> {
    let token = expect_field(fields, line, keyword)?;
    if token != keyword {
        return Err(ModelError::Parse {
            line,
            message: format!("expected `{keyword}`, found `{token}`"),
        });
    }
    Ok(())
}

/// Reads a model written by [`write_model`].
pub fn read_model(reader: impl BufRead) -> Result<GenerativeModel, ModelError> {
    let mut lines = LineReader {
        inner: reader.lines(),
        line: 0,
    };

    let (line, magic) = lines.next_line()?;
    if magic != MODEL_MAGIC {
        return Err(ModelError::Parse {
            line,
            message: format!("bad header `{magic}`"),
        });
    }

    let (line, text) = lines.next_line()?;
    let mut f = text.split_whitespace();
    expect_keyword(&mut f, line, "n_terms")?;
    let n_terms: u32 = parse_num(
        expect_field(&mut f, line, "n_terms value")?,
        line,
        "n_terms",
    )?;

    let (line, text) = lines.next_line()?;
    let mut f = text.split_whitespace();
    expect_keyword(&mut f, line, "prior_scale")?;
    let prior_scale: f64 = parse_num(
        expect_field(&mut f, line, "prior_scale value")?,
        line,
        "prior_scale",
    )?;

    let (line, text) = lines.next_line()?;
    let mut f = text.split_whitespace();
    expect_keyword(&mut f, line, "labels")?;
    let num_labels: usize = parse_num(
        expect_field(&mut f, line, "label count")?,
        line,
        "label count",
    )?;
    let mut labels = Vec::with_capacity(num_labels);
    let mut prior = Vec::with_capacity(num_labels);
    for _ in 0..num_labels {
        let (line, text) = lines.next_line()?;
        let mut f = text.split_whitespace();
        expect_keyword(&mut f, line, "label")?;
        labels.push(parse_num(
            expect_field(&mut f, line, "label id")?,
            line,
            "label id",
        )?);
        prior.push(parse_num(
            expect_field(&mut f, line, "prior")?,
            line,
            "prior",
        )?);
    }

    let (line, text) = lines.next_line()?;
    let mut f = text.split_whitespace();
    expect_keyword(&mut f, line, "length")?;
    let has_length: u8 = parse_num(
        expect_field(&mut f, line, "length flag")?,
        line,
        "length flag",
    )?;
    let length_model = if has_length == 1 {
        let scale: f64 = parse_num(
            expect_field(&mut f, line, "length scale")?,
            line,
            "length scale",
        )?;
        let mut lambda = Vec::with_capacity(num_labels);
        for _ in 0..num_labels {
            let (line, text) = lines.next_line()?;
            let mut f = text.split_whitespace();
            expect_keyword(&mut f, line, "lambda")?;
            lambda.push(parse_num(
                expect_field(&mut f, line, "lambda")?,
                line,
                "lambda",
            )?);
        }
        Some(LengthModel { scale, lambda })
    } else {
        None
    };

    let (line, text) = lines.next_line()?;
    let mut f = text.split_whitespace();
    expect_keyword(&mut f, line, "codec")?;
    let num_classes: usize = parse_num(
        expect_field(&mut f, line, "class count")?,
        line,
        "class count",
    )?;
    let codec = if num_classes > 0 {
        let mut classes = Vec::with_capacity(num_classes);
        for _ in 0..num_classes {
            let (line, text) = lines.next_line()?;
            let mut f = text.split_whitespace();
            expect_keyword(&mut f, line, "class")?;
            let token = expect_field(&mut f, line, "class labels")?;
            let set = if token == "-" {
                crate::corpus::LabelSet::empty()
            } else {
                let ids: Result<Vec<u32>, _> = token
                    .split(',')
                    .map(|t| parse_num::<u32>(t, line, "class label"))
                    .collect();
                crate::corpus::LabelSet::new(ids?)
            };
            classes.push(set);
        }
        Some(PowersetCodec::from_classes(classes))
    } else {
        None
    };

    let (line, text) = lines.next_line()?;
    let mut f = text.split_whitespace();
    expect_keyword(&mut f, line, "nodes")?;
    let num_nodes: usize = parse_num(
        expect_field(&mut f, line, "node count")?,
        line,
        "node count",
    )?;
    let mut nodes = Vec::with_capacity(num_nodes);
    for _ in 0..num_nodes {
        let (line, text) = lines.next_line()?;
        let mut f = text.split_whitespace();
        expect_keyword(&mut f, line, "node")?;
        let id: u32 = parse_num(expect_field(&mut f, line, "node id")?, line, "node id")?;
        let parent_token = expect_field(&mut f, line, "parent")?;
        let parent = if parent_token == "-" {
            None
        } else {
            Some(parse_num(parent_token, line, "parent")?)
        };
        let alpha: f64 = parse_num(expect_field(&mut f, line, "alpha")?, line, "alpha")?;
        let kind = parse_kind(expect_field(&mut f, line, "kind")?, line)?;
        let dist_len: usize = parse_num(
            expect_field(&mut f, line, "dist length")?,
            line,
            "dist length",
        )?;
        let mut dist = Vec::with_capacity(dist_len);
        for _ in 0..dist_len {
            let entry = expect_field(&mut f, line, "dist entry")?;
            let (term, p) = entry.split_once(':').ok_or_else(|| ModelError::Parse {
                line,
                message: format!("bad dist entry `{entry}`"),
            })?;
            dist.push((
                parse_num::<u32>(term, line, "dist term")?,
                parse_num::<f64>(p, line, "dist probability")?,
            ));
        }
        nodes.push(BackoffNode {
            id,
            parent,
            alpha,
            dist,
            kind,
        });
    }

    let mut leaves_by_label: Vec<Vec<u32>> = vec![Vec::new(); labels.len()];
    let leaf_slot = |label: u32| labels.binary_search(&label).ok();
    // Leaves are the nodes no other node points to.
    let mut has_child = vec![false; nodes.len()];
    for node in &nodes {
        if let Some(p) = node.parent {
            if let Some(flag) = has_child.get_mut(p as usize) {
                *flag = true;
            }
        }
    }
    for node in &nodes {
        if has_child[node.id as usize] {
            continue;
        }
        let slot = match node.kind {
            NodeKind::Label(l) | NodeKind::Document { label: l, .. } => leaf_slot(l),
            _ => None,
        };
        if let Some(slot) = slot {
            leaves_by_label[slot].push(node.id);
        }
    }

    let model = GenerativeModel {
        nodes,
        labels,
        prior,
        prior_scale,
        leaves_by_label,
        length_model,
        n_terms,
        codec,
    };
    model.validate().map_err(|e| ModelError::Parse {
        line: lines.line,
        message: format!("invalid model: {e}"),
    })?;
    Ok(model)
}
