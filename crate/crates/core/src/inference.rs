//! Sparse inference over the inverted index.
//!
//! Scoring a query `w` against an index proceeds in two phases:
//!
//! 1. **Postings pass** — for each kept query term, add `w_n · ln p_root(n)`
//!    into a shared `smooth` term and `w_n · delta` into a per-node
//!    accumulator for every posting of the term. Cost: one visit per matched
//!    posting, independent of the number of labels.
//! 2. **Label aggregation** — each label's log-likelihood is reassembled from
//!    the shared term, the label's backoff constants and the touched
//!    accumulators; deeper trees mix their per-document leaves with the
//!    unmatched leaves grouped into one bracket when they share a backoff
//!    weight.
//!
//! [`dense_oracle`] re-derives the same posterior directly from a model's
//! dense smoothed distributions, for testing the decomposition end to end.

use crate::corpus::{LabelSet, SparseVector};
use crate::index::InvertedIndex;
use crate::models::GenerativeModel;

/// Scoring results for one query against all labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    /// `ln p(w, l)` per label slot (prior scaling and the optional length
    /// factor included).
    pub log_joint: Vec<f64>,
    /// `ln p(l | w)` per label slot; the exponentials sum to 1.
    pub log_posterior: Vec<f64>,
    /// `ln p(w)`: the log-sum-exp of the joints.
    pub log_marginal: f64,
}

/// Work counters for one scoring call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct InferenceStats {
    /// Matched postings visited: exactly `Σ |postings(n)|` over kept query
    /// terms.
    pub postings_visited: u64,
    /// Nodes touched by the postings pass plus per-label aggregation terms
    /// evaluated afterwards.
    pub node_evaluations: u64,
}

/// Reusable scratch space for scoring. One workspace serves any number of
/// sequential queries (and any number of indexes); allocate one per thread.
#[derive(Debug, Default)]
pub struct Workspace {
    /// Per-node accumulator; entries listed in `touched` are live, the rest
    /// are zero.
    acc: Vec<f64>,
    touched: Vec<u32>,
    /// Kept `(slot, leaf)` pairs of touched leaves, sorted by slot.
    matched_leaves: Vec<(u32, u32)>,
    /// Scratch for per-label log-sum-exp terms.
    terms: Vec<f64>,
}

impl Workspace {
    /// A fresh workspace; it grows to fit whatever index it first scores.
    pub fn new() -> Self {
        Self::default()
    }

    fn begin(&mut self, num_nodes: usize) {
        for &m in &self.touched {
            self.acc[m as usize] = 0.0;
        }
        self.touched.clear();
        self.matched_leaves.clear();
        if self.acc.len() < num_nodes {
            self.acc.resize(num_nodes, 0.0);
        }
    }
}

/// Numerically stable `ln Σ exp(x_i)`; `-inf` for an empty slice or when all
/// inputs are `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

/// What the postings pass extracted from a query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassSummary {
    /// `Σ w_n · ln p_root(n)` over kept terms.
    pub smooth: f64,
    /// `Σ w_n` over kept terms (the post-drop query length).
    pub kept_l1: f64,
    /// Matched postings visited.
    pub postings_visited: u64,
}

/// Runs the match-accumulation phase: drops unusable terms, accumulates the
/// shared smoothing term, and adds `w_n · delta` into `ws` for every posting
/// of every kept term.
///
/// A term is *dropped* — excluded from the kept length, the smoothing term
/// and the postings loop alike — when its id falls outside the dictionary or
/// the root assigns it no probability. This mirrors discarding words unseen
/// in training.
///
/// The workspace is reset at the start of each pass, so the accumulated state
/// stays valid until the next call.
pub fn postings_pass(index: &InvertedIndex, v: &SparseVector, ws: &mut Workspace) -> PassSummary {
    ws.begin(index.num_nodes());
    let mut smooth = 0.0;
    let mut kept_l1 = 0.0;
    let mut postings_visited = 0u64;
    for (term, w) in v.iter() {
        let root = index.root_logprob(term);
        if root == f64::NEG_INFINITY {
            continue;
        }
        smooth += w * root;
        kept_l1 += w;
        let postings = index.postings(term);
        postings_visited += postings.len() as u64;
        for &(node, delta) in postings {
            let slot = &mut ws.acc[node as usize];
            if *slot == 0.0 {
                ws.touched.push(node);
            }
            *slot += w * delta;
        }
    }
    PassSummary {
        smooth,
        kept_l1,
        postings_visited,
    }
}

/// `Σ acc[a]` over `node` and its ancestors.
fn path_acc(index: &InvertedIndex, ws: &Workspace, node: u32) -> f64 {
    let mut sum = 0.0;
    let mut cur = Some(node);
    while let Some(m) = cur {
        sum += ws.acc[m as usize];
        cur = index.node_parent(m);
    }
    sum
}

/// Per-label log-joints plus the work counters, reassembled from a finished
/// postings pass.
fn aggregate_labels(
    index: &InvertedIndex,
    pass: &PassSummary,
    ws: &mut Workspace,
) -> (Vec<f64>, InferenceStats) {
    let mut evaluations = ws.touched.len() as u64;
    // Touched leaves, grouped by label slot for the mixture brackets.
    for &m in &ws.touched {
        if index.node_children_count(m) == 0 {
            if let Some(slot) = index.node_label_slot(m) {
                ws.matched_leaves.push((slot, m));
            }
        }
    }
    ws.matched_leaves.sort_unstable();

    let num_labels = index.labels().len();
    let mut log_joint = Vec::with_capacity(num_labels);
    let mut cursor = 0usize;
    for slot in 0..num_labels {
        let start = cursor;
        while cursor < ws.matched_leaves.len() && ws.matched_leaves[cursor].0 == slot as u32 {
            cursor += 1;
        }
        let matched = &ws.matched_leaves[start..cursor];

        let leaves = &index.leaves_by_label()[slot];
        let log_likelihood = if leaves.len() == 1 {
            let d = leaves[0];
            evaluations += 1;
            pass.smooth + pass.kept_l1 * index.path_alpha_log_sum(d) + path_acc(index, ws, d)
        } else if let Some(alpha) = index.uniform_leaf_alpha_log(slot) {
            // All leaves share one parent and one backoff weight: unmatched
            // leaves differ only in count.
            let parent = index
                .node_parent(leaves[0])
                .expect("multi-leaf labels hang below the root");
            let base = pass.smooth
                + pass.kept_l1 * (index.path_alpha_log_sum(parent) + alpha)
                + path_acc(index, ws, parent);
            ws.terms.clear();
            for &(_, d) in matched {
                ws.terms.push(base + ws.acc[d as usize]);
            }
            let unmatched = leaves.len() - matched.len();
            if unmatched > 0 {
                ws.terms.push(base + (unmatched as f64).ln());
            }
            evaluations += ws.terms.len() as u64;
            log_sum_exp(&ws.terms) - (leaves.len() as f64).ln()
        } else {
            // Leaves differ in backoff weight (or parent): evaluate each.
            ws.terms.clear();
            for &d in leaves {
                ws.terms.push(
                    pass.smooth
                        + pass.kept_l1 * index.path_alpha_log_sum(d)
                        + path_acc(index, ws, d),
                );
            }
            evaluations += ws.terms.len() as u64;
            log_sum_exp(&ws.terms) - (leaves.len() as f64).ln()
        };

        log_joint.push(
            index.label_logprior()[slot]
                + log_likelihood
                + index.length_log_factor(slot, pass.kept_l1),
        );
    }
    let stats = InferenceStats {
        postings_visited: pass.postings_visited,
        node_evaluations: evaluations,
    };
    (log_joint, stats)
}

fn normalize(log_joint: Vec<f64>) -> Posterior {
    let log_marginal = log_sum_exp(&log_joint);
    let log_posterior = log_joint.iter().map(|&j| j - log_marginal).collect();
    Posterior {
        log_joint,
        log_posterior,
        log_marginal,
    }
}

/// Scores a prepared query against every label and also reports the work
/// counters.
pub fn sparse_posterior_with_stats(
    index: &InvertedIndex,
    v: &SparseVector,
    ws: &mut Workspace,
) -> (Posterior, InferenceStats) {
    let pass = postings_pass(index, v, ws);
    let (log_joint, stats) = aggregate_labels(index, &pass, ws);
    (normalize(log_joint), stats)
}

/// Scores a prepared query against every label: joints, normalized
/// posteriors, and the marginal.
pub fn sparse_posterior(index: &InvertedIndex, v: &SparseVector, ws: &mut Workspace) -> Posterior {
    sparse_posterior_with_stats(index, v, ws).0
}

/// Per-leaf log-joints `ln p(w, leaf)`: the label prior, the uniform
/// in-label document prior `1/|I_l|`, and the leaf's log-likelihood. Exact at
/// any depth; one `(leaf id, log-joint)` entry per leaf, label-major.
pub fn hierarchical_joint(
    index: &InvertedIndex,
    v: &SparseVector,
    ws: &mut Workspace,
) -> Vec<(u32, f64)> {
    let pass = postings_pass(index, v, ws);
    let mut out = Vec::new();
    for slot in 0..index.labels().len() {
        let leaves = &index.leaves_by_label()[slot];
        let log_leaf_prior = index.label_logprior()[slot] - (leaves.len() as f64).ln()
            + index.length_log_factor(slot, pass.kept_l1);
        for &d in leaves {
            let log_likelihood =
                pass.smooth + pass.kept_l1 * index.path_alpha_log_sum(d) + path_acc(index, ws, d);
            out.push((d, log_leaf_prior + log_likelihood));
        }
    }
    out
}

/// How [`sparse_marginal`] treats labels none of whose nodes matched the
/// query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginalMode {
    /// Aggregate every label exactly.
    Exact,
    /// Two-level indexes only: group all unmatched labels into one bracket,
    /// approximating each with the mean log backoff weight of the root's
    /// children. Exact when the backoff weights are uniform; deeper indexes
    /// fall back to [`MarginalMode::Exact`].
    Approximate,
}

/// `ln p(w)` for a prepared query.
///
/// The approximate mode touches only matched labels: the unmatched remainder
/// contributes `(1 − Σ_matched p(l)) · exp(smooth + |w|_1 · mean ln alpha)`,
/// which costs nothing per unmatched label. The optional length factor is
/// applied to matched labels only, so the approximation targets plain
/// conditional models.
pub fn sparse_marginal(
    index: &InvertedIndex,
    v: &SparseVector,
    mode: MarginalMode,
    ws: &mut Workspace,
) -> f64 {
    if mode == MarginalMode::Exact || index.depth() > 2 {
        return sparse_posterior(index, v, ws).log_marginal;
    }
    let pass = postings_pass(index, v, ws);
    // Matched labels: any label one of whose leaves was touched. At depth 2
    // the leaves are the labels' only nodes.
    for &m in &ws.touched {
        if index.node_children_count(m) == 0 {
            if let Some(slot) = index.node_label_slot(m) {
                ws.matched_leaves.push((slot, m));
            }
        }
    }
    ws.matched_leaves.sort_unstable();
    ws.terms.clear();
    let mut matched_prior = 0.0;
    for &(slot, leaf) in &ws.matched_leaves {
        let slot = slot as usize;
        let log_joint = index.label_logprior()[slot]
            + pass.smooth
            + pass.kept_l1 * index.path_alpha_log_sum(leaf)
            + ws.acc[leaf as usize]
            + index.length_log_factor(slot, pass.kept_l1);
        ws.terms.push(log_joint);
        matched_prior += index.label_logprior()[slot].exp();
    }
    let unmatched_prior = 1.0 - matched_prior;
    if unmatched_prior > 0.0 {
        ws.terms.push(
            unmatched_prior.ln() + pass.smooth + pass.kept_l1 * index.default_child_alpha_log(0),
        );
    }
    log_sum_exp(&ws.terms)
}

/// The classification outcome for one vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Winning label slot.
    pub slot: usize,
    /// The decoded label set (through the powerset codec when present).
    pub labels: LabelSet,
    /// The winning `ln p(w, l)`.
    pub log_joint: f64,
}

/// Picks the maximum-joint label for a prepared vector; ties break toward
/// the lowest label id.
pub fn classify(index: &InvertedIndex, v: &SparseVector, ws: &mut Workspace) -> Prediction {
    let posterior = sparse_posterior(index, v, ws);
    let mut best = 0usize;
    for (slot, &j) in posterior.log_joint.iter().enumerate() {
        if j > posterior.log_joint[best] {
            best = slot;
        }
    }
    Prediction {
        slot: best,
        labels: index.decode_slot(best),
        log_joint: posterior.log_joint[best],
    }
}

/// Scores a prepared query and returns the top `k` labels as
/// `(label id, ln p(w, l))`, sorted by descending score with ties broken by
/// ascending label id. Fewer than `k` labels yields them all.
pub fn rank(
    index: &InvertedIndex,
    v: &SparseVector,
    k: usize,
    ws: &mut Workspace,
) -> Vec<(u32, f64)> {
    let posterior = sparse_posterior(index, v, ws);
    let mut scored: Vec<(u32, f64)> = index
        .labels()
        .iter()
        .copied()
        .zip(posterior.log_joint)
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored.truncate(k.min(scored.len()));
    scored
}

/// Scores a vector directly from the model's dense smoothed distributions —
/// no index, no decomposition — with the same term-drop rule as the sparse
/// path. The reference implementation the index is tested against; cost is
/// proportional to the full dictionary.
pub fn dense_oracle(model: &GenerativeModel, v: &SparseVector) -> Posterior {
    let root_dense = model.dense_smoothed(0);
    let kept: Vec<(u32, f64)> = v
        .iter()
        .filter(|&(term, _)| (term as usize) < root_dense.len() && root_dense[term as usize] > 0.0)
        .collect();
    let kept_l1: f64 = kept.iter().map(|&(_, w)| w).sum();

    let mut log_joint = Vec::with_capacity(model.labels().len());
    for slot in 0..model.labels().len() {
        let leaves = &model.leaves_by_label()[slot];
        let leaf_lls: Vec<f64> = leaves
            .iter()
            .map(|&d| {
                let dense = model.dense_smoothed(d);
                kept.iter()
                    .map(|&(term, w)| w * dense[term as usize].ln())
                    .sum()
            })
            .collect();
        let log_likelihood = log_sum_exp(&leaf_lls) - (leaves.len() as f64).ln();
        log_joint.push(
            model.prior()[slot].ln() + log_likelihood + model.length_log_factor(slot, kept_l1),
        );
    }
    normalize(log_joint)
}
