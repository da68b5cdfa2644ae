//! Shared fixtures for the workspace benchmarks.
//!
//! The benchmarks live in `benches/`; this library only provides synthetic
//! corpus generation so both benchmark binaries measure the same workloads.

#![forbid(unsafe_code)]

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sgm_core::corpus::{Collection, Document, LabelSet, SparseVector};

/// Generates a labeled collection with `labels * docs_per_label` documents,
/// each holding `terms_per_doc` draws from a `vocab`-sized dictionary.
///
/// Term ids are drawn from a squared-uniform distribution so that, like real
/// text, a few terms are common and most are rare.
pub fn synthetic_collection(
    labels: u32,
    docs_per_label: u32,
    vocab: u32,
    terms_per_doc: usize,
    seed: u64,
) -> Collection {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Uniform::new(0.0f64, 1.0).expect("valid range");
    let count = Uniform::new_inclusive(1u32, 4).expect("valid range");
    let mut docs = Vec::with_capacity((labels * docs_per_label) as usize);
    for label in 1..=labels {
        for _ in 0..docs_per_label {
            let vector = SparseVector::accumulate((0..terms_per_doc).map(|_| {
                let u = unit.sample(&mut rng);
                let term = ((u * u) * vocab as f64) as u32;
                (term.min(vocab - 1), count.sample(&mut rng) as f64)
            }));
            docs.push(Document {
                vector,
                labels: LabelSet::singleton(label),
            });
        }
    }
    Collection::from_docs(docs, Some(vocab)).expect("synthetic docs are valid")
}

/// Generates an unlabeled query of `terms` draws over the same distribution.
pub fn synthetic_query(vocab: u32, terms: usize, seed: u64) -> SparseVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Uniform::new(0.0f64, 1.0).expect("valid range");
    SparseVector::accumulate((0..terms).map(|_| {
        let u = unit.sample(&mut rng);
        let term = ((u * u) * vocab as f64) as u32;
        (term.min(vocab - 1), 1.0)
    }))
}
