//! Joinability-discovery baselines: Jaccard-Levenshtein, Similarity
//! Flooding, a name-plus-instance hybrid, and an adapter for external
//! matcher processes.
//!
//! Every matcher scores cross-table column pairs in `[0, 1]` and is
//! symmetric. Corpus-level runs only emit pairs with a positive score; an
//! absent pair scores 0.

mod external;
mod hybrid;
mod jl;
mod sf;

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{canonical_pair, ColumnRef, Corpus, TableData};
use crate::text::derive_seed;

pub use external::{external_match, read_predictions, write_predictions, ExternalMatcher};
pub use hybrid::{hybrid_match, instance_containment, name_similarity, HybridMatcher};
pub use jl::{fuzzy_jaccard, jl_match, max_fuzzy_matching, JlMatcher, DEFAULT_DELTA};
pub use sf::{sf_match, SfConfig, SfMatcher, SfResult};

/// Distinct values per column fed to the instance-based matchers.
pub const DEFAULT_VALUE_CAP: usize = 500;

#[derive(Debug, thiserror::Error)]
pub enum MatchError {
    #[error("invalid matcher parameters: {0}")]
    Params(String),
    #[error("external matcher: {0}")]
    External(String),
    #[error("predictions line {line}: {message}")]
    Predictions { line: usize, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchPrediction {
    pub left: ColumnRef,
    pub right: ColumnRef,
    pub score: f64,
}

impl MatchPrediction {
    /// Stores the pair in canonical order.
    pub fn new(a: ColumnRef, b: ColumnRef, score: f64) -> Self {
        let (left, right) = canonical_pair(a, b);
        MatchPrediction { left, right, score }
    }

    pub fn key(&self) -> (ColumnRef, ColumnRef) {
        (self.left.clone(), self.right.clone())
    }
}

impl fmt::Display for MatchPrediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ~ {} = {:.6}", self.left, self.right, self.score)
    }
}

/// Sorts canonically and keeps the highest score per pair.
pub fn canonicalize_predictions(preds: &mut Vec<MatchPrediction>) {
    preds.sort_by(|a, b| a.key().cmp(&b.key()).then(b.score.total_cmp(&a.score)));
    preds.dedup_by(|a, b| a.left == b.left && a.right == b.right);
}

/// A corpus-level matcher.
pub trait Matcher: Sync {
    /// Stable identifier used in reports.
    fn id(&self) -> String;

    /// Scores of every cross-table column pair between `a` and `b`.
    fn match_tables(&self, a: &TableData, b: &TableData) -> Vec<MatchPrediction>;

    /// Positive-score predictions over every table pair, canonicalized.
    fn match_corpus(&self, corpus: &Corpus) -> Result<Vec<MatchPrediction>, MatchError> {
        let n = corpus.tables.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let mut out: Vec<MatchPrediction> = pairs
            .par_iter()
            .flat_map_iter(|&(i, j)| self.match_tables(&corpus.tables[i], &corpus.tables[j]))
            .filter(|p| p.score > 0.0)
            .collect();
        canonicalize_predictions(&mut out);
        Ok(out)
    }
}

/// Distinct non-null values of a column, reduced to a seeded sample of
/// `cap` values when larger. `map` is applied before deduplication.
pub(crate) fn sampled_values(
    t: &TableData,
    ci: usize,
    cap: usize,
    seed: u64,
    map: impl Fn(&str) -> String,
) -> Vec<String> {
    let distinct: BTreeSet<String> = t.column_values(ci).flatten().map(map).filter(|v| !v.is_empty()).collect();
    let all: Vec<String> = distinct.into_iter().collect();
    if all.len() <= cap {
        return all;
    }
    let label = format!("{}\u{1f}{}", t.name(), t.schema.columns[ci].name);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &label));
    let mut idx = sample(&mut rng, all.len(), cap).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| all[i].clone()).collect()
}

pub(crate) fn column_ref(t: &TableData, ci: usize) -> ColumnRef {
    ColumnRef::new(t.name(), t.schema.columns[ci].name.clone())
}
