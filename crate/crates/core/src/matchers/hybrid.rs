//! Weighted combination of header similarity and value containment.

use std::collections::HashSet;

use rayon::prelude::*;

use super::{canonicalize_predictions, column_ref, sampled_values, MatchError, MatchPrediction, Matcher, DEFAULT_VALUE_CAP};
use crate::corpus::{Corpus, TableData};
use crate::text::{levenshtein_similarity, normalize_header, normalize_value, token_jaccard};

/// Larger of normalized Levenshtein similarity and word-set Jaccard.
pub fn name_similarity(a: &str, b: &str) -> f64 {
    levenshtein_similarity(&normalize_header(a), &normalize_header(b)).max(token_jaccard(a, b))
}

/// `|A ∩ B| / min(|A|, |B|)` over distinct values; 0 when either is empty.
pub fn instance_containment(a: &HashSet<String>, b: &HashSet<String>) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if small.is_empty() {
        return 0.0;
    }
    small.iter().filter(|v| large.contains(*v)).count() as f64 / small.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridMatcher {
    pub w_name: f64,
    pub w_instance: f64,
    pub value_cap: usize,
    pub seed: u64,
}

impl Default for HybridMatcher {
    fn default() -> Self {
        HybridMatcher { w_name: 0.5, w_instance: 0.5, value_cap: DEFAULT_VALUE_CAP, seed: 0 }
    }
}

impl HybridMatcher {
    /// Weights must be non-negative and sum to 1.
    pub fn new(w_name: f64, w_instance: f64) -> Result<Self, MatchError> {
        if w_name < 0.0 || w_instance < 0.0 || (w_name + w_instance - 1.0).abs() > 1e-9 {
            return Err(MatchError::Params(format!("hybrid weights {w_name} + {w_instance} must be non-negative and sum to 1")));
        }
        Ok(HybridMatcher { w_name, w_instance, ..Self::default() })
    }

    /// Values are compared after case folding, punctuation removal and
    /// whitespace collapsing.
    fn values(&self, t: &TableData, ci: usize) -> HashSet<String> {
        sampled_values(t, ci, self.value_cap, self.seed, normalize_value).into_iter().collect()
    }

    pub fn score(&self, name_a: &str, name_b: &str, va: &HashSet<String>, vb: &HashSet<String>) -> f64 {
        (self.w_name * name_similarity(name_a, name_b) + self.w_instance * instance_containment(va, vb)).clamp(0.0, 1.0)
    }
}

/// Scores every column pair of two tables with the given weights.
pub fn hybrid_match(a: &TableData, b: &TableData, w_name: f64, w_instance: f64) -> Result<Vec<MatchPrediction>, MatchError> {
    Ok(HybridMatcher::new(w_name, w_instance)?.match_tables(a, b))
}

impl HybridMatcher {
    fn table_values(&self, t: &TableData) -> Vec<HashSet<String>> {
        (0..t.schema.columns.len()).map(|c| self.values(t, c)).collect()
    }

    fn score_tables(&self, a: &TableData, va: &[HashSet<String>], b: &TableData, vb: &[HashSet<String>]) -> Vec<MatchPrediction> {
        let mut out = Vec::new();
        for (i, ca) in a.schema.columns.iter().enumerate() {
            for (j, cb) in b.schema.columns.iter().enumerate() {
                let s = self.score(&ca.name, &cb.name, &va[i], &vb[j]);
                out.push(MatchPrediction::new(column_ref(a, i), column_ref(b, j), s));
            }
        }
        out
    }
}

impl Matcher for HybridMatcher {
    fn id(&self) -> String {
        format!("hybrid(w_name={}, w_instance={})", self.w_name, self.w_instance)
    }

    fn match_tables(&self, a: &TableData, b: &TableData) -> Vec<MatchPrediction> {
        self.score_tables(a, &self.table_values(a), b, &self.table_values(b))
    }

    /// Value sets are built once per column rather than once per table pair.
    fn match_corpus(&self, corpus: &Corpus) -> Result<Vec<MatchPrediction>, MatchError> {
        let values: Vec<Vec<HashSet<String>>> = corpus.tables.par_iter().map(|t| self.table_values(t)).collect();
        let n = corpus.tables.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let mut out: Vec<MatchPrediction> = pairs
            .par_iter()
            .flat_map_iter(|&(i, j)| self.score_tables(&corpus.tables[i], &values[i], &corpus.tables[j], &values[j]))
            .filter(|p| p.score > 0.0)
            .collect();
        canonicalize_predictions(&mut out);
        Ok(out)
    }
}
