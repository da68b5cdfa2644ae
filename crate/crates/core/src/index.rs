//! The inverted index of precomputed log-parameters.
//!
//! Inference over a backoff tree needs, per query term `n` and tree node `m`,
//! the smoothed probability `p''_m(n)`. Storing those densely costs `O(L·N)`
//! and scoring costs `O(L·|v|)`. Instead the index stores the log-domain
//! decomposition
//!
//! ```text
//! ln p''_m(n) = ln p_root(n) + Σ_{a on path} ln alpha_a + Σ_{a on path with n in support} delta_a(n)
//! delta_a(n)  = ln p''_a(n) − ln alpha_a − ln p''_parent(a)(n)
//! ```
//!
//! so a node without `n` in its own support contributes exactly `ln alpha`,
//! and only the matched `(node, term)` pairs need postings. Scoring then
//! costs one pass over the matched postings plus a per-label constant — the
//! whole point of the structure.

use std::io::{Read, Write};

use thiserror::Error;

use crate::corpus::{LabelSet, PowersetCodec, SparseVector};
use crate::models::{GenerativeModel, LengthModel, ModelError, NodeKind};
use crate::weighting::{
    apply_weighting, IdfVariant, TermStats, VectorRole, WeightingConfig, WeightingMode,
};

/// Errors produced while building, serializing or loading an index.
#[derive(Debug, Error)]
pub enum IndexError {
    /// A non-root node with postings has a zero backoff weight, so its
    /// log-delta is undefined.
    #[error("node {node} has alpha = 0; its postings have no log-domain decomposition")]
    ZeroAlpha {
        /// The offending node id.
        node: u32,
    },
    /// A node supports a term its parent assigns zero probability.
    #[error("node {node} supports term {term} but its parent gives the term probability 0")]
    OrphanTerm {
        /// The offending node id.
        node: u32,
        /// The unsupported term.
        term: u32,
    },
    /// The model failed validation.
    #[error(transparent)]
    Model(#[from] ModelError),
    /// A serialized index failed to parse.
    #[error("index parse error: {0}")]
    Parse(String),
    /// Underlying I/O failure.
    #[error("i/o error")]
    Io(#[from] std::io::Error),
}

/// Optional query-side weighting carried inside the index, so a serialized
/// index can transform incoming vectors exactly as training did.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryWeighting {
    /// The weighting configuration used at training time.
    pub config: WeightingConfig,
    /// Training document frequencies and document count.
    pub stats: TermStats,
}

/// The immutable inference structure: per-term root log-probabilities and
/// postings of `(node id, log-delta)`, plus per-node backoff constants and
/// per-label priors. Built once from a [`GenerativeModel`]; concurrent
/// readers share it freely.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    n_terms: u32,
    /// `ln p_root(n)` per term; `-inf` where the root has no support.
    root_logprob: Vec<f64>,
    /// Per term: `(node id, delta)` sorted by node id.
    postings: Vec<Vec<(u32, f64)>>,
    node_parent: Vec<Option<u32>>,
    node_alpha_log: Vec<f64>,
    node_children_count: Vec<u32>,
    node_kind: Vec<NodeKind>,
    /// Per node: mean `ln alpha` over its children (0 for leaves).
    default_child_alpha_log: Vec<f64>,
    /// Per node: `Σ ln alpha` from the node up to (excluding) the root.
    path_alpha_log_sum: Vec<f64>,
    /// Per node: owning label slot for label/document nodes.
    node_label_slot: Vec<Option<u32>>,
    labels: Vec<u32>,
    label_logprior: Vec<f64>,
    leaves_by_label: Vec<Vec<u32>>,
    /// Per label slot: `Some(ln alpha)` when every leaf shares one backoff
    /// weight and one parent (enables the grouped no-match evaluation).
    uniform_leaf_alpha_log: Vec<Option<f64>>,
    depth: u32,
    length_model: Option<LengthModel>,
    codec: Option<PowersetCodec>,
    query_weighting: Option<QueryWeighting>,
}

impl InvertedIndex {
    /// Dictionary size `N`.
    pub fn num_terms(&self) -> u32 {
        self.n_terms
    }

    /// Number of tree nodes.
    pub fn num_nodes(&self) -> usize {
        self.node_parent.len()
    }

    /// `ln p_root(n)`; `-inf` for terms outside the root's support or the
    /// dictionary. Terms with `-inf` here are dropped from queries entirely.
    pub fn root_logprob(&self, term: u32) -> f64 {
        self.root_logprob
            .get(term as usize)
            .copied()
            .unwrap_or(f64::NEG_INFINITY)
    }

    /// The postings list of a term (empty outside the dictionary).
    pub fn postings(&self, term: u32) -> &[(u32, f64)] {
        self.postings
            .get(term as usize)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Parent of a node (`None` for the root).
    pub fn node_parent(&self, node: u32) -> Option<u32> {
        self.node_parent[node as usize]
    }

    /// `ln alpha` of a node (0 at the root).
    pub fn node_alpha_log(&self, node: u32) -> f64 {
        self.node_alpha_log[node as usize]
    }

    /// Number of children of a node.
    pub fn node_children_count(&self, node: u32) -> u32 {
        self.node_children_count[node as usize]
    }

    /// What the node represents.
    pub fn node_kind(&self, node: u32) -> NodeKind {
        self.node_kind[node as usize]
    }

    /// Mean `ln alpha` over the node's children (0 for leaves); what the
    /// approximate marginal charges an unmatched child when backoff weights
    /// are not all equal.
    pub fn default_child_alpha_log(&self, node: u32) -> f64 {
        self.default_child_alpha_log[node as usize]
    }

    /// `Σ ln alpha` along the node's ancestry including itself, excluding the
    /// root.
    pub fn path_alpha_log_sum(&self, node: u32) -> f64 {
        self.path_alpha_log_sum[node as usize]
    }

    /// The label slot a node belongs to (label and document nodes only).
    pub fn node_label_slot(&self, node: u32) -> Option<u32> {
        self.node_label_slot[node as usize]
    }

    /// Distinct label ids, ascending; positions are the label slots.
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// `ln p(l)` per label slot (prior scaling already applied).
    pub fn label_logprior(&self) -> &[f64] {
        &self.label_logprior
    }

    /// Leaf node ids per label slot.
    pub fn leaves_by_label(&self) -> &[Vec<u32>] {
        &self.leaves_by_label
    }

    /// `Some(ln alpha)` when all leaves of the slot share one backoff weight
    /// and one parent, so unmatched leaves can be scored as a group.
    pub fn uniform_leaf_alpha_log(&self, slot: usize) -> Option<f64> {
        self.uniform_leaf_alpha_log[slot]
    }

    /// Number of tree levels (2 for MNB, 4 for TDM).
    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// The Poisson length model, if the model carried one.
    pub fn length_model(&self) -> Option<&LengthModel> {
        self.length_model.as_ref()
    }

    /// The log length factor for a label slot and kept query length `j`.
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
        lm.scale * (j_term - lambda - statrs::function::gamma::ln_gamma(j + 1.0))
    }

    /// The powerset codec, if the model carried one.
    pub fn codec(&self) -> Option<&PowersetCodec> {
        self.codec.as_ref()
    }

    /// The embedded query-side weighting, if any.
    pub fn query_weighting(&self) -> Option<&QueryWeighting> {
        self.query_weighting.as_ref()
    }

    /// Applies the embedded weighting transform to an incoming vector (the
    /// identity when none is embedded).
    pub fn prepare_vector(&self, v: &SparseVector, role: VectorRole) -> SparseVector {
        match &self.query_weighting {
            Some(qw) => apply_weighting(v, role, &qw.stats, &qw.config),
            None => v.clone(),
        }
    }

    /// Decodes a winning label slot into the prediction label set: through
    /// the powerset codec when present, as a singleton otherwise.
    pub fn decode_slot(&self, slot: usize) -> LabelSet {
        let label = self.labels[slot];
        match &self.codec {
            Some(codec) => codec
                .decode(label)
                .cloned()
                .unwrap_or_else(|| LabelSet::new(vec![label])),
            None => LabelSet::new(vec![label]),
        }
    }
}

/// Builds the index from a trained model, embedding no query weighting.
pub fn build_index(model: &GenerativeModel) -> Result<InvertedIndex, IndexError> {
    build_index_weighted(model, None)
}

/// Builds the index from a trained model; `query_weighting` (configuration
/// plus the training collection's term statistics) is embedded so the
/// serialized index can transform queries by itself.
pub fn build_index_weighted(
    model: &GenerativeModel,
    query_weighting: Option<QueryWeighting>,
) -> Result<InvertedIndex, IndexError> {
    model.validate()?;
    let n = model.num_terms() as usize;
    let nodes = model.nodes();
    let num_nodes = nodes.len();

    let mut children: Vec<Vec<u32>> = vec![Vec::new(); num_nodes];
    for node in nodes {
        if let Some(p) = node.parent {
            children[p as usize].push(node.id);
        }
    }

    let mut root_logprob = vec![f64::NEG_INFINITY; n];
    let mut postings: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    let mut node_alpha_log = vec![0.0; num_nodes];
    let mut path_alpha_log_sum = vec![0.0; num_nodes];

    // Depth-first, top-down: at most `depth` dense distributions are alive at
    // once. `stack` pairs each frame with its dense smoothed distribution.
    let mut order: Vec<(u32, usize)> = vec![(0, 0)]; // (node, depth)
    let mut dense_stack: Vec<Vec<f64>> = Vec::new();
    let mut max_depth = 0usize;
    while let Some((id, level)) = order.pop() {
        let node = &nodes[id as usize];
        dense_stack.truncate(level);
        max_depth = max_depth.max(level + 1);
        let dense = match node.parent {
            None => {
                let mut dense = vec![0.0; n];
                for &(term, p) in &node.dist {
                    dense[term as usize] = p;
                    root_logprob[term as usize] = p.ln();
                }
                dense
            }
            Some(_) => {
                let alpha = node.alpha;
                if alpha == 0.0 {
                    return Err(IndexError::ZeroAlpha { node: id });
                }
                node_alpha_log[id as usize] = alpha.ln();
                path_alpha_log_sum[id as usize] =
                    path_alpha_log_sum[node.parent.unwrap() as usize] + alpha.ln();
                let parent_dense = dense_stack.last().expect("parent frame on stack");
                let mut dense: Vec<f64> = parent_dense.iter().map(|&p| alpha * p).collect();
                for &(term, p_u) in &node.dist {
                    let parent_p = parent_dense[term as usize];
                    if parent_p <= 0.0 {
                        return Err(IndexError::OrphanTerm { node: id, term });
                    }
                    let smoothed = (1.0 - alpha) * p_u + alpha * parent_p;
                    dense[term as usize] = smoothed;
                    postings[term as usize].push((id, smoothed.ln() - alpha.ln() - parent_p.ln()));
                }
                dense
            }
        };
        dense_stack.push(dense);
        // Push children in reverse so they pop in ascending id order.
        for &child in children[id as usize].iter().rev() {
            order.push((child, level + 1));
        }
    }
    for list in &mut postings {
        list.sort_unstable_by_key(|&(node, _)| node);
    }

    let default_child_alpha_log: Vec<f64> = (0..num_nodes)
        .map(|m| {
            let kids = &children[m];
            if kids.is_empty() {
                0.0
            } else {
                kids.iter()
                    .map(|&c| node_alpha_log[c as usize])
                    .sum::<f64>()
                    / kids.len() as f64
            }
        })
        .collect();

    let labels = model.labels().to_vec();
    let node_label_slot: Vec<Option<u32>> = nodes
        .iter()
        .map(|node| match node.kind {
            NodeKind::Label(l) | NodeKind::Document { label: l, .. } => {
                labels.binary_search(&l).ok().map(|s| s as u32)
            }
            _ => None,
        })
        .collect();

    let leaves_by_label = model.leaves_by_label().to_vec();
    let uniform_leaf_alpha_log: Vec<Option<f64>> = leaves_by_label
        .iter()
        .map(|leaves| {
            let first = node_alpha_log[leaves[0] as usize];
            let parent = nodes[leaves[0] as usize].parent;
            leaves
                .iter()
                .all(|&leaf| {
                    node_alpha_log[leaf as usize] == first && nodes[leaf as usize].parent == parent
                })
                .then_some(first)
        })
        .collect();

    Ok(InvertedIndex {
        n_terms: model.num_terms(),
        root_logprob,
        postings,
        node_parent: nodes.iter().map(|node| node.parent).collect(),
        node_alpha_log,
        node_children_count: children.iter().map(|kids| kids.len() as u32).collect(),
        node_kind: nodes.iter().map(|node| node.kind).collect(),
        default_child_alpha_log,
        path_alpha_log_sum,
        node_label_slot,
        labels,
        label_logprior: model.prior().iter().map(|&p| p.ln()).collect(),
        leaves_by_label,
        uniform_leaf_alpha_log,
        depth: max_depth as u32,
        length_model: model.length_model().cloned(),
        codec: model.codec().cloned(),
        query_weighting,
    })
}

/// Totals for reporting: `(num_terms, num_postings, bytes_estimate)`.
pub fn index_stats(index: &InvertedIndex) -> (u32, u64, u64) {
    let num_postings: u64 = index.postings.iter().map(|l| l.len() as u64).sum();
    let bytes = 12 * num_postings
        + 8 * index.root_logprob.len() as u64
        + 40 * index.num_nodes() as u64
        + 16 * index.labels.len() as u64;
    (index.n_terms, num_postings, bytes)
}

const INDEX_MAGIC: &[u8; 8] = b"SGMIDX01";

fn w_u8(out: &mut impl Write, v: u8) -> std::io::Result<()> {
    out.write_all(&[v])
}
fn w_u32(out: &mut impl Write, v: u32) -> std::io::Result<()> {
    out.write_all(&v.to_le_bytes())
}
fn w_u64(out: &mut impl Write, v: u64) -> std::io::Result<()> {
    out.write_all(&v.to_le_bytes())
}
fn w_f64(out: &mut impl Write, v: f64) -> std::io::Result<()> {
    out.write_all(&v.to_le_bytes())
}

fn r_u8(inp: &mut impl Read) -> std::io::Result<u8> {
    let mut b = [0u8; 1];
    inp.read_exact(&mut b)?;
    Ok(b[0])
}
fn r_u32(inp: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    inp.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
fn r_u64(inp: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    inp.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}
fn r_f64(inp: &mut impl Read) -> std::io::Result<f64> {
    let mut b = [0u8; 8];
    inp.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn kind_tag(kind: NodeKind) -> (u8, u32, u32) {
    match kind {
        NodeKind::RootBackground => (0, 0, 0),
        NodeKind::Collection => (1, 0, 0),
        NodeKind::Label(l) => (2, l, 0),
        NodeKind::Document { label, doc } => (3, label, doc),
    }
}

fn mode_tag(mode: WeightingMode) -> u8 {
    match mode {
        WeightingMode::DocumentAndTrain => 0,
        WeightingMode::QueryOnly => 1,
        WeightingMode::None => 2,
    }
}

fn idf_tag(variant: IdfVariant) -> u8 {
    match variant {
        IdfVariant::RobertsonWalker => 0,
        IdfVariant::CroftHarperSmoothed => 1,
        IdfVariant::CroftHarperUnsmoothed => 2,
    }
}

/// Writes the index in its versioned little-endian binary format. The output
/// is a pure function of the index contents, so identical indexes serialize
/// byte-identically.
pub fn write_index(index: &InvertedIndex, mut out: impl Write) -> Result<(), IndexError> {
    let out = &mut out;
    out.write_all(INDEX_MAGIC)?;
    w_u32(out, index.n_terms)?;
    w_u32(out, index.depth)?;

    let num_nodes = index.num_nodes();
    w_u64(out, num_nodes as u64)?;
    for m in 0..num_nodes {
        w_u32(out, index.node_parent[m].map_or(u32::MAX, |p| p))?;
        w_f64(out, index.node_alpha_log[m])?;
        w_u32(out, index.node_children_count[m])?;
        w_f64(out, index.default_child_alpha_log[m])?;
        w_f64(out, index.path_alpha_log_sum[m])?;
        w_u32(out, index.node_label_slot[m].map_or(u32::MAX, |s| s))?;
        let (tag, a, b) = kind_tag(index.node_kind[m]);
        w_u8(out, tag)?;
        w_u32(out, a)?;
        w_u32(out, b)?;
    }

    let supported = index.root_logprob.iter().filter(|v| v.is_finite()).count() as u64;
    w_u64(out, supported)?;
    for (term, &v) in index.root_logprob.iter().enumerate() {
        if v.is_finite() {
            w_u32(out, term as u32)?;
            w_f64(out, v)?;
        }
    }

    for list in &index.postings {
        w_u32(out, list.len() as u32)?;
        for &(node, delta) in list {
            w_u32(out, node)?;
            w_f64(out, delta)?;
        }
    }

    w_u32(out, index.labels.len() as u32)?;
    for (slot, &label) in index.labels.iter().enumerate() {
        w_u32(out, label)?;
        w_f64(out, index.label_logprior[slot])?;
        match index.uniform_leaf_alpha_log[slot] {
            Some(a) => {
                w_u8(out, 1)?;
                w_f64(out, a)?;
            }
            None => w_u8(out, 0)?,
        }
        let leaves = &index.leaves_by_label[slot];
        w_u32(out, leaves.len() as u32)?;
        for &leaf in leaves {
            w_u32(out, leaf)?;
        }
    }

    match &index.length_model {
        Some(lm) => {
            w_u8(out, 1)?;
            w_f64(out, lm.scale)?;
            for &l in &lm.lambda {
                w_f64(out, l)?;
            }
        }
        None => w_u8(out, 0)?,
    }

    match &index.codec {
        Some(codec) => {
            w_u32(out, codec.num_classes() as u32)?;
            for class in codec.classes() {
                w_u32(out, class.len() as u32)?;
                for l in class.iter() {
                    w_u32(out, l)?;
                }
            }
        }
        None => w_u32(out, 0)?,
    }

    match &index.query_weighting {
        Some(qw) => {
            w_u8(out, 1)?;
            w_f64(out, qw.config.phi)?;
            w_f64(out, qw.config.upsilon)?;
            w_u8(out, mode_tag(qw.config.mode))?;
            w_u8(out, idf_tag(qw.config.idf_variant))?;
            w_u64(out, qw.stats.num_docs())?;
            w_u32(out, qw.stats.df_slice().len() as u32)?;
            for &df in qw.stats.df_slice() {
                w_u32(out, df)?;
            }
        }
        None => w_u8(out, 0)?,
    }
    Ok(())
}

/// Reads an index written by [`write_index`].
pub fn read_index(mut inp: impl Read) -> Result<InvertedIndex, IndexError> {
    let inp = &mut inp;
    let mut magic = [0u8; 8];
    inp.read_exact(&mut magic)?;
    if &magic != INDEX_MAGIC {
        return Err(IndexError::Parse(format!(
            "bad magic {:?}; not an index file or unsupported version",
            String::from_utf8_lossy(&magic)
        )));
    }
    let n_terms = r_u32(inp)?;
    let depth = r_u32(inp)?;

    let num_nodes = r_u64(inp)? as usize;
    let mut node_parent = Vec::with_capacity(num_nodes);
    let mut node_alpha_log = Vec::with_capacity(num_nodes);
    let mut node_children_count = Vec::with_capacity(num_nodes);
    let mut default_child_alpha_log = Vec::with_capacity(num_nodes);
    let mut path_alpha_log_sum = Vec::with_capacity(num_nodes);
    let mut node_label_slot = Vec::with_capacity(num_nodes);
    let mut node_kind = Vec::with_capacity(num_nodes);
    for _ in 0..num_nodes {
        let parent = r_u32(inp)?;
        node_parent.push((parent != u32::MAX).then_some(parent));
        node_alpha_log.push(r_f64(inp)?);
        node_children_count.push(r_u32(inp)?);
        default_child_alpha_log.push(r_f64(inp)?);
        path_alpha_log_sum.push(r_f64(inp)?);
        let slot = r_u32(inp)?;
        node_label_slot.push((slot != u32::MAX).then_some(slot));
        let tag = r_u8(inp)?;
        let a = r_u32(inp)?;
        let b = r_u32(inp)?;
        node_kind.push(match tag {
            0 => NodeKind::RootBackground,
            1 => NodeKind::Collection,
            2 => NodeKind::Label(a),
            3 => NodeKind::Document { label: a, doc: b },
            other => return Err(IndexError::Parse(format!("unknown node kind tag {other}"))),
        });
    }

    let mut root_logprob = vec![f64::NEG_INFINITY; n_terms as usize];
    let supported = r_u64(inp)?;
    for _ in 0..supported {
        let term = r_u32(inp)? as usize;
        if term >= root_logprob.len() {
            return Err(IndexError::Parse(format!("root term {term} out of range")));
        }
        root_logprob[term] = r_f64(inp)?;
    }

    let mut postings = Vec::with_capacity(n_terms as usize);
    for _ in 0..n_terms {
        let len = r_u32(inp)? as usize;
        let mut list = Vec::with_capacity(len);
        for _ in 0..len {
            list.push((r_u32(inp)?, r_f64(inp)?));
        }
        postings.push(list);
    }

    let num_labels = r_u32(inp)? as usize;
    let mut labels = Vec::with_capacity(num_labels);
    let mut label_logprior = Vec::with_capacity(num_labels);
    let mut uniform_leaf_alpha_log = Vec::with_capacity(num_labels);
    let mut leaves_by_label = Vec::with_capacity(num_labels);
    for _ in 0..num_labels {
        labels.push(r_u32(inp)?);
        label_logprior.push(r_f64(inp)?);
        uniform_leaf_alpha_log.push(match r_u8(inp)? {
            1 => Some(r_f64(inp)?),
            _ => None,
        });
        let len = r_u32(inp)? as usize;
        let mut leaves = Vec::with_capacity(len);
        for _ in 0..len {
            leaves.push(r_u32(inp)?);
        }
        leaves_by_label.push(leaves);
    }

    let length_model = match r_u8(inp)? {
        1 => {
            let scale = r_f64(inp)?;
            let mut lambda = Vec::with_capacity(num_labels);
            for _ in 0..num_labels {
                lambda.push(r_f64(inp)?);
            }
            Some(LengthModel { scale, lambda })
        }
        _ => None,
    };

    let num_classes = r_u32(inp)? as usize;
    let codec = if num_classes > 0 {
        let mut classes = Vec::with_capacity(num_classes);
        for _ in 0..num_classes {
            let len = r_u32(inp)? as usize;
            let mut ids = Vec::with_capacity(len);
            for _ in 0..len {
                ids.push(r_u32(inp)?);
            }
            classes.push(LabelSet::new(ids));
        }
        Some(PowersetCodec::from_classes(classes))
    } else {
        None
    };

    let query_weighting = match r_u8(inp)? {
        1 => {
            let phi = r_f64(inp)?;
            let upsilon = r_f64(inp)?;
            let mode = match r_u8(inp)? {
                0 => WeightingMode::DocumentAndTrain,
                1 => WeightingMode::QueryOnly,
                2 => WeightingMode::None,
                other => {
                    return Err(IndexError::Parse(format!(
                        "unknown weighting mode tag {other}"
                    )))
                }
            };
            let idf_variant = match r_u8(inp)? {
                0 => IdfVariant::RobertsonWalker,
                1 => IdfVariant::CroftHarperSmoothed,
                2 => IdfVariant::CroftHarperUnsmoothed,
                other => return Err(IndexError::Parse(format!("unknown idf tag {other}"))),
            };
            let num_docs = r_u64(inp)?;
            let len = r_u32(inp)? as usize;
            let mut df = Vec::with_capacity(len);
            for _ in 0..len {
                df.push(r_u32(inp)?);
            }
            Some(QueryWeighting {
                config: WeightingConfig {
                    phi,
                    upsilon,
                    mode,
                    idf_variant,
                },
                stats: TermStats::new(df, num_docs),
            })
        }
        _ => None,
    };

    Ok(InvertedIndex {
        n_terms,
        root_logprob,
        postings,
        node_parent,
        node_alpha_log,
        node_children_count,
        node_kind,
        default_child_alpha_log,
        path_alpha_log_sum,
        node_label_slot,
        labels,
        label_logprior,
        leaves_by_label,
        uniform_leaf_alpha_log,
        depth,
        length_model,
        codec,
        query_weighting,
    })
}

/// Writes a human-readable dump: one line per posting, prefixed by the term,
/// followed by per-node and per-label summaries.
pub fn dump_index(index: &InvertedIndex, mut out: impl Write) -> Result<(), IndexError> {
    let (terms, postings, bytes) = index_stats(index);
    writeln!(
        out,
        "# terms={terms} nodes={} labels={} depth={} postings={postings} bytes~{bytes}",
        index.num_nodes(),
        index.labels.len(),
        index.depth
    )?;
    for node in 0..index.num_nodes() as u32 {
        let kind = match index.node_kind(node) {
            NodeKind::RootBackground => "root".to_string(),
            NodeKind::Collection => "collection".to_string(),
            NodeKind::Label(l) => format!("label:{l}"),
            NodeKind::Document { label, doc } => format!("doc:{label}:{doc}"),
        };
        writeln!(
            out,
            "node {node} kind={kind} parent={} alpha_log={:?} path_alpha_log={:?}",
            index
                .node_parent(node)
                .map_or("-".into(), |p| p.to_string()),
            index.node_alpha_log(node),
            index.path_alpha_log_sum(node),
        )?;
    }
    for (slot, &label) in index.labels.iter().enumerate() {
        writeln!(
            out,
            "label {label} logprior={:?} leaves={}",
            index.label_logprior[slot],
            index.leaves_by_label[slot].len()
        )?;
    }
    for term in 0..index.n_terms {
        let root = index.root_logprob(term);
        let list = index.postings(term);
        if !root.is_finite() && list.is_empty() {
            continue;
        }
        write!(
            out,
            "term {term} root_logprob={root:?} postings={}",
            list.len()
        )?;
        for &(node, delta) in list {
            write!(out, " ({node},{delta:?})")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
