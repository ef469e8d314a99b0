//! Join ground truth: classification, brute-force enumeration and
//! lineage-driven propagation.
//!
//! A pair is `pkfk` when one side is its table's primary key and contains
//! every value of the other, `exact` when the raw value sets intersect, and
//! `semantic` when a recorded value mapping on either side's copy lineage
//! makes them intersect. Only cross-table pairs are considered.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::corpus::{
    canonical_pair, canonicalize_pairs, ColumnRef, Corpus, Difficulty, JoinKind, JoinPair, LineageEvent, Side,
};
use crate::text::normalize_header;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TruthError {
    #[error("lineage event `{event}` refers to missing column {column}")]
    DanglingLineage { event: String, column: String },
}

/// Easy iff the normalized headers are identical.
pub fn classify_difficulty(a: &ColumnRef, b: &ColumnRef) -> Difficulty {
    if normalize_header(&a.column) == normalize_header(&b.column) {
        Difficulty::Easy
    } else {
        Difficulty::Difficult
    }
}

/// Precomputed value sets and lineage chains for repeated classification.
pub struct JoinOracle<'a> {
    corpus: &'a Corpus,
    values: HashMap<ColumnRef, HashSet<&'a str>>,
    chains: HashMap<ColumnRef, Vec<(&'a str, BTreeMap<&'a str, &'a str>)>>,
}

/// Columns on the copy-lineage chain of `c`, nearest first, paired with the
/// index of the event that produced each link.
fn ancestry(lineage: &[LineageEvent], c: &ColumnRef) -> Vec<(usize, ColumnRef)> {
    let mut out = Vec::new();
    let mut cur = c.clone();
    let mut upto = lineage.len();
    while let Some(i) = lineage[..upto].iter().rposition(|e| e.result.as_column_ref().as_ref() == Some(&cur)) {
        let Some(src) = lineage[i].source.as_column_ref() else { break };
        out.push((i, src.clone()));
        cur = src;
        upto = i;
    }
    out
}

impl<'a> JoinOracle<'a> {
    pub fn new(corpus: &'a Corpus) -> Self {
        let mut values = HashMap::new();
        let mut chains = HashMap::new();
        for t in &corpus.tables {
            for (ci, col) in t.schema.columns.iter().enumerate() {
                let r = ColumnRef::new(t.name(), col.name.clone());
                let set: HashSet<&str> = t.column_values(ci).flatten().collect();
                let chain: Vec<(&str, BTreeMap<&str, &str>)> = ancestry(&corpus.lineage, &r)
                    .into_iter()
                    .filter_map(|(i, _)| {
                        let e = &corpus.lineage[i];
                        e.mapping.as_ref().filter(|m| !m.is_empty()).map(|m| (e.id.as_str(), m.as_function()))
                    })
                    .collect();
                if !chain.is_empty() {
                    chains.insert(r.clone(), chain);
                }
                values.insert(r, set);
            }
        }
        JoinOracle { corpus, values, chains }
    }

    pub fn columns(&self) -> impl Iterator<Item = &ColumnRef> {
        self.values.keys()
    }

    fn semantic_via(&self, mapped: &ColumnRef, other: &HashSet<&str>, target: &HashSet<&str>) -> Option<&'a str> {
        let chain = self.chains.get(mapped)?;
        chain
            .iter()
            .find(|(_, h)| other.iter().filter_map(|v| h.get(v)).any(|w| target.contains(w)))
            .map(|(id, _)| *id)
    }

    /// Classifies a cross-table pair; `None` when the columns are not
    /// joinable, do not resolve, or share a table.
    pub fn classify(&self, a: &ColumnRef, b: &ColumnRef) -> Option<JoinPair> {
        if a.table == b.table {
            return None;
        }
        let (a, b) = canonical_pair(a.clone(), b.clone());
        let (va, vb) = (self.values.get(&a)?, self.values.get(&b)?);
        let difficulty = classify_difficulty(&a, &b);
        let contains = |big: &HashSet<&str>, small: &HashSet<&str>| !small.is_empty() && small.is_subset(big);
        if self.corpus.is_primary_key(&a) && contains(va, vb) {
            return Some(JoinPair::new(a, b, JoinKind::Pkfk, difficulty, Some(Side::Left), None));
        }
        if self.corpus.is_primary_key(&b) && contains(vb, va) {
            return Some(JoinPair::new(a, b, JoinKind::Pkfk, difficulty, Some(Side::Right), None));
        }
        let (small, big) = if va.len() <= vb.len() { (va, vb) } else { (vb, va) };
        if small.iter().any(|v| big.contains(v)) {
            return Some(JoinPair::new(a, b, JoinKind::Exact, difficulty, None, None));
        }
        let id = self.semantic_via(&a, vb, va).or_else(|| self.semantic_via(&b, va, vb))?;
        Some(JoinPair::new(a, b, JoinKind::Semantic, difficulty, None, Some(id.to_string())))
    }
}

/// Classifies one pair against the corpus.
pub fn classify_join(corpus: &Corpus, a: &ColumnRef, b: &ColumnRef) -> Option<JoinPair> {
    JoinOracle::new(corpus).classify(a, b)
}

fn all_columns(corpus: &Corpus) -> Vec<ColumnRef> {
    corpus
        .tables
        .iter()
        .flat_map(|t| t.schema.columns.iter().map(move |c| ColumnRef::new(t.name(), c.name.clone())))
        .collect()
}

/// Classifies every cross-table column pair.
pub fn brute_force_ground_truth(corpus: &Corpus) -> Vec<JoinPair> {
    let oracle = JoinOracle::new(corpus);
    let cols = all_columns(corpus);
    let mut out: Vec<JoinPair> = Vec::new();
    for (i, a) in cols.iter().enumerate() {
        for b in &cols[i + 1..] {
            if let Some(p) = oracle.classify(a, b) {
                out.push(p);
            }
        }
    }
    canonicalize_pairs(&mut out);
    out
}

/// Candidate pairs from equal semantic types, classified. Pairs that turn
/// out not to be joinable are dropped.
pub fn infer_joins_from_types(corpus: &Corpus) -> Vec<JoinPair> {
    let oracle = JoinOracle::new(corpus);
    let mut by_type: BTreeMap<&str, Vec<ColumnRef>> = BTreeMap::new();
    for t in &corpus.tables {
        for c in &t.schema.columns {
            by_type.entry(c.semantic_type.as_str()).or_default().push(ColumnRef::new(t.name(), c.name.clone()));
        }
    }
    let mut out = Vec::new();
    for cols in by_type.values() {
        for (i, a) in cols.iter().enumerate() {
            for b in &cols[i + 1..] {
                if let Some(p) = oracle.classify(a, b) {
                    out.push(p);
                }
            }
        }
    }
    canonicalize_pairs(&mut out);
    out
}

/// Candidate pairs by equal semantic type without data classification.
pub fn type_candidates(corpus: &Corpus) -> Vec<(ColumnRef, ColumnRef)> {
    let mut by_type: BTreeMap<&str, Vec<ColumnRef>> = BTreeMap::new();
    for t in &corpus.tables {
        for c in &t.schema.columns {
            by_type.entry(c.semantic_type.as_str()).or_default().push(ColumnRef::new(t.name(), c.name.clone()));
        }
    }
    let mut out = BTreeSet::new();
    for cols in by_type.values() {
        for (i, a) in cols.iter().enumerate() {
            for b in &cols[i + 1..] {
                if a.table != b.table {
                    out.insert(canonical_pair(a.clone(), b.clone()));
                }
            }
        }
    }
    out.into_iter().collect()
}

/// Recomputes the ground truth after a perturbation step.
///
/// `parent` is the ground truth before the step and `step` the lineage
/// events the step appended (they must also be present in
/// `corpus.lineage`). Candidates are column pairs that are related through
/// lineage: same root column, roots in the same base table, ancestors paired
/// in `parent`, or one side holding a value introduced by the step that the
/// other side also holds or maps. Candidates are then classified against the data.
pub fn propagate_ground_truth(
    parent: &[JoinPair],
    step: &[LineageEvent],
    corpus: &Corpus,
) -> Result<Vec<JoinPair>, TruthError> {
    if step.is_empty() {
        return Ok(parent.to_vec());
    }
    let oracle = JoinOracle::new(corpus);
    let cols = all_columns(corpus);
    let present: HashSet<&ColumnRef> = cols.iter().collect();
    for e in step {
        if let Some(r) = e.result.as_column_ref() {
            if !present.contains(&r) && !step.iter().any(|later| later.source.as_column_ref().as_ref() == Some(&r)) {
                return Err(TruthError::DanglingLineage { event: e.id.clone(), column: r.to_string() });
            }
        }
    }

    // Ancestry (self included) and roots of every live column.
    let mut lineage_of: HashMap<&ColumnRef, Vec<ColumnRef>> = HashMap::new();
    for c in &cols {
        let mut anc = vec![c.clone()];
        anc.extend(ancestry(&corpus.lineage, c).into_iter().map(|(_, r)| r));
        lineage_of.insert(c, anc);
    }
    let root = |c: &ColumnRef| lineage_of[c].last().cloned().expect("non-empty ancestry");

    // Live columns descending from each (possibly dead) column.
    let mut desc: HashMap<ColumnRef, Vec<&ColumnRef>> = HashMap::new();
    for (c, anc) in &lineage_of {
        for a in anc {
            desc.entry(a.clone()).or_default().push(c);
        }
    }

    let mut candidates: BTreeSet<(ColumnRef, ColumnRef)> = BTreeSet::new();
    let mut add = |a: &ColumnRef, b: &ColumnRef| {
        if a.table != b.table {
            candidates.insert(canonical_pair(a.clone(), b.clone()));
        }
    };

    // Same root, or roots in one base table.
    let mut by_root_table: BTreeMap<String, Vec<&ColumnRef>> = BTreeMap::new();
    for c in &cols {
        by_root_table.entry(root(c).table).or_default().push(c);
    }
    for group in by_root_table.values() {
        for (i, a) in group.iter().enumerate() {
            for b in &group[i + 1..] {
                add(a, b);
            }
        }
    }

    // Ancestors paired in the parent ground truth.
    for p in parent {
        let empty = Vec::new();
        let left = desc.get(&p.left).unwrap_or(&empty);
        let right = desc.get(&p.right).unwrap_or(&empty);
        for a in left {
            for b in right {
                add(a, b);
            }
        }
    }

    // Values introduced by this step's edits, matched against every column.
    let mut fresh: HashMap<&str, Vec<ColumnRef>> = HashMap::new();
    for e in step {
        if let (Some(m), Some(r)) = (&e.mapping, e.result.as_column_ref()) {
            for edit in &m.edits {
                if let Some(v) = &edit.new {
                    fresh.entry(v.as_str()).or_default().push(r.clone());
                }
            }
        }
    }
    if !fresh.is_empty() {
        for t in &corpus.tables {
            for (ci, col) in t.schema.columns.iter().enumerate() {
                let c = ColumnRef::new(t.name(), col.name.clone());
                let mut hit: BTreeSet<&ColumnRef> = BTreeSet::new();
                for v in t.distinct_values(ci) {
                    if let Some(owners) = fresh.get(v) {
                        hit.extend(owners.iter());
                    }
                }
                for o in hit {
                    add(&c, o);
                }
            }
        }
        // A fresh value in the domain of another column's mapping makes the
        // pair semantically joinable.
        for (mapped, chain) in &oracle.chains {
            for (_, h) in chain {
                for owners in h.keys().filter_map(|k| fresh.get(k)) {
                    for o in owners {
                        add(mapped, o);
                    }
                }
            }
        }
    }

    let mut out: Vec<JoinPair> = candidates.iter().filter_map(|(a, b)| oracle.classify(a, b)).collect();
    canonicalize_pairs(&mut out);
    Ok(out)
}
