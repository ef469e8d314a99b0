//! Jaccard-Levenshtein: fuzzy Jaccard over distinct values, where two values
//! are equal when their normalized Levenshtein similarity reaches `delta`
//! and each value is matched at most once.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;

use super::{canonicalize_predictions, column_ref, sampled_values, MatchError, MatchPrediction, Matcher, DEFAULT_VALUE_CAP};
use crate::corpus::{Corpus, TableData};
use crate::text::levenshtein_similarity_chars;

pub const DEFAULT_DELTA: f64 = 0.8;

fn similar(a: &[char], b: &[char], delta: f64) -> bool {
    a == b || (delta < 1.0 && levenshtein_similarity_chars(a, b) >= delta)
}

/// Size of a maximum matching in a bipartite graph given as adjacency lists
/// from the left side into `0..n_right`.
pub fn max_fuzzy_matching(adj: &[Vec<usize>], n_right: usize) -> usize {
    fn augment(u: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                if owner[v].is_none_or(|w| augment(w, adj, seen, owner)) {
                    owner[v] = Some(u);
                    return true;
                }
            }
        }
        false
    }
    let mut owner: Vec<Option<usize>> = vec![None; n_right];
    let mut matched = vec![false; adj.len()];
    let mut size = 0;
    for (u, nbrs) in adj.iter().enumerate() {
        if let Some(&v) = nbrs.iter().find(|&&v| owner[v].is_none()) {
            owner[v] = Some(u);
            matched[u] = true;
            size += 1;
        }
    }
    let mut seen = vec![false; n_right];
    for u in 0..adj.len() {
        if !matched[u] {
            seen.fill(false);
            if augment(u, adj, &mut seen, &mut owner) {
                size += 1;
            }
        }
    }
    size
}

fn jaccard_from_matching(m: usize, na: usize, nb: usize) -> f64 {
    if na == 0 || nb == 0 {
        0.0
    } else {
        m as f64 / (na + nb - m) as f64
    }
}

/// Fuzzy Jaccard of two distinct-value lists.
pub fn fuzzy_jaccard(a: &[String], b: &[String], delta: f64) -> f64 {
    let ac: Vec<Vec<char>> = a.iter().map(|s| s.chars().collect()).collect();
    let bc: Vec<Vec<char>> = b.iter().map(|s| s.chars().collect()).collect();
    let adj: Vec<Vec<usize>> =
        ac.iter().map(|x| (0..bc.len()).filter(|&j| similar(x, &bc[j], delta)).collect()).collect();
    jaccard_from_matching(max_fuzzy_matching(&adj, bc.len()), a.len(), b.len())
}

/// Scores every column pair of two tables over their full distinct values.
pub fn jl_match(a: &TableData, b: &TableData, delta: f64) -> Vec<MatchPrediction> {
    JlMatcher { delta, value_cap: usize::MAX, seed: 0 }.match_tables(a, b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JlMatcher {
    pub delta: f64,
    pub value_cap: usize,
    pub seed: u64,
}

impl Default for JlMatcher {
    fn default() -> Self {
        JlMatcher { delta: DEFAULT_DELTA, value_cap: DEFAULT_VALUE_CAP, seed: 0 }
    }
}

impl JlMatcher {
    pub fn new(delta: f64) -> Result<Self, MatchError> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(MatchError::Params(format!("jl delta {delta} is outside (0, 1]")));
        }
        Ok(JlMatcher { delta, ..Self::default() })
    }

    fn values(&self, t: &TableData, ci: usize) -> Vec<String> {
        sampled_values(t, ci, self.value_cap, self.seed, str::to_string)
    }
}

/// Every string reachable from `s` by deleting at most `k` characters.
fn deletion_variants(s: &[char], k: usize) -> HashSet<Vec<char>> {
    let mut out: HashSet<Vec<char>> = HashSet::from([s.to_vec()]);
    let mut frontier = vec![s.to_vec()];
    for _ in 0..k {
        let mut next = Vec::new();
        for v in &frontier {
            for i in 0..v.len() {
                let mut w = v.clone();
                w.remove(i);
                if out.insert(w.clone()) {
                    next.push(w);
                }
            }
        }
        frontier = next;
    }
    out
}

/// Strings at most this many edits from any admissible partner go through
/// the deletion-neighbourhood index; longer ones through bigram counting.
const MAX_DELETION_EDITS: usize = 2;

/// Pairs of string ids whose similarity reaches `delta`, `i < j`. Strings
/// must be distinct and sorted by length. Short strings meet through shared
/// deletion variants, longer ones through a shared-bigram count bound;
/// every candidate is verified exactly.
fn similarity_join(strings: &[Vec<char>], delta: f64) -> Vec<(u32, u32)> {
    if delta >= 1.0 {
        return Vec::new();
    }
    // Longest admissible partner and the edit budget it allows.
    let hi = |l: usize| ((l as f64) / delta + 1e-9).floor() as usize;
    let budget = |l: usize| ((1.0 - delta) * hi(l) as f64 + 1e-9).floor() as usize;
    // Budgets grow with length and strings are sorted by length, so short ids form a prefix.
    let first_long = strings.partition_point(|s| budget(s.len()) <= MAX_DELETION_EDITS);

    let mut buckets: HashMap<Vec<char>, Vec<u32>> = HashMap::new();
    for (id, s) in strings[..first_long].iter().enumerate() {
        for v in deletion_variants(s, budget(s.len())) {
            buckets.entry(v).or_default().push(id as u32);
        }
    }
    let mut candidates: Vec<(u32, u32)> = buckets
        .values()
        .flat_map(|ids| ids.iter().enumerate().flat_map(move |(i, &x)| ids[i + 1..].iter().map(move |&y| (x.min(y), x.max(y)))))
        .collect();
    drop(buckets);
    candidates.par_sort_unstable();
    candidates.dedup();
    let mut out: Vec<(u32, u32)> = candidates
        .into_par_iter()
        .filter(|&(x, y)| similar(&strings[x as usize], &strings[y as usize], delta))
        .collect();

    let grams: Vec<Vec<u64>> = strings
        .iter()
        .map(|s| {
            let mut g: Vec<u64> = s.windows(2).map(|w| (u64::from(w[0]) << 32) | u64::from(w[1])).collect();
            g.sort_unstable();
            g.dedup();
            g
        })
        .collect();
    let mut postings: HashMap<u64, Vec<u32>> = HashMap::new();
    for (id, g) in grams.iter().enumerate().skip(first_long) {
        for &x in g {
            postings.entry(x).or_default().push(id as u32);
        }
    }
    // Pairs with a long partner: count shared bigrams against long strings only.
    let long_pairs: Vec<(u32, u32)> = (0..strings.len())
        .into_par_iter()
        .map_init(
            || (vec![0u32; strings.len()], Vec::<u32>::new()),
            |(counts, touched), s| {
                let ls = strings[s].len();
                let hi_s = hi(ls);
                let k = budget(ls);
                let need = grams[s].len() as isize - 2 * k as isize;
                let lo = (s + 1).max(first_long);
                let in_band = |t: usize| strings[t].len() <= hi_s;
                let mut out = Vec::new();
                if need >= 1 {
                    for g in &grams[s] {
                        let Some(list) = postings.get(g) else { continue };
                        let start = list.partition_point(|&t| (t as usize) < lo);
                        for &t in &list[start..] {
                            if !in_band(t as usize) {
                                break;
                            }
                            if counts[t as usize] == 0 {
                                touched.push(t);
                            }
                            counts[t as usize] += 1;
                        }
                    }
                    for t in touched.drain(..) {
                        let c = std::mem::take(&mut counts[t as usize]);
                        if c as isize >= need && similar(&strings[s], &strings[t as usize], delta) {
                            out.push((s as u32, t));
                        }
                    }
                } else {
                    for t in (lo..strings.len()).take_while(|&t| in_band(t)) {
                        if similar(&strings[s], &strings[t], delta) {
                            out.push((s as u32, t as u32));
                        }
                    }
                }
                out
            },
        )
        .flatten_iter()
        .collect();
    out.extend(long_pairs);
    out
}

impl Matcher for JlMatcher {
    fn id(&self) -> String {
        format!("jl(delta={})", self.delta)
    }

    fn match_tables(&self, a: &TableData, b: &TableData) -> Vec<MatchPrediction> {
        let va: Vec<Vec<String>> = (0..a.schema.columns.len()).map(|c| self.values(a, c)).collect();
        let vb: Vec<Vec<String>> = (0..b.schema.columns.len()).map(|c| self.values(b, c)).collect();
        let mut out = Vec::new();
        for (i, x) in va.iter().enumerate() {
            for (j, y) in vb.iter().enumerate() {
                out.push(MatchPrediction::new(column_ref(a, i), column_ref(b, j), fuzzy_jaccard(x, y, self.delta)));
            }
        }
        out
    }

    /// Interns every sampled value once, finds all similar value pairs with
    /// one similarity join, then matches only column pairs that share at
    /// least one similar value.
    fn match_corpus(&self, corpus: &Corpus) -> Result<Vec<MatchPrediction>, MatchError> {
        let mut cols = Vec::new();
        for (ti, t) in corpus.tables.iter().enumerate() {
            for ci in 0..t.schema.columns.len() {
                cols.push((ti, ci, self.values(t, ci)));
            }
        }
        let mut distinct: Vec<&str> =
            cols.iter().flat_map(|(_, _, v)| v.iter().map(String::as_str)).collect::<HashSet<_>>().into_iter().collect();
        distinct.sort_by(|x, y| x.chars().count().cmp(&y.chars().count()).then(x.cmp(y)));
        let id_of: HashMap<&str, u32> = distinct.iter().enumerate().map(|(i, s)| (*s, i as u32)).collect();
        let chars: Vec<Vec<char>> = distinct.iter().map(|s| s.chars().collect()).collect();
        let mut nbrs: Vec<Vec<u32>> = vec![Vec::new(); distinct.len()];
        for (x, y) in similarity_join(&chars, self.delta) {
            nbrs[x as usize].push(y);
            nbrs[y as usize].push(x);
        }
        let col_ids: Vec<Vec<u32>> = cols.iter().map(|(_, _, v)| v.iter().map(|s| id_of[s.as_str()]).collect()).collect();
        let mut holders: Vec<Vec<u32>> = vec![Vec::new(); distinct.len()];
        for (k, ids) in col_ids.iter().enumerate() {
            for &v in ids {
                holders[v as usize].push(k as u32);
            }
        }
        let (cols, col_ids, nbrs, holders) = (&cols, &col_ids, &nbrs, &holders);
        let mut out: Vec<MatchPrediction> = (0..cols.len())
            .into_par_iter()
            .flat_map_iter(|ka| {
                let ta = cols[ka].0;
                let mut partners: Vec<usize> = col_ids[ka]
                    .iter()
                    .flat_map(|&v| std::iter::once(v).chain(nbrs[v as usize].iter().copied()))
                    .flat_map(|v| holders[v as usize].iter().map(|&k| k as usize))
                    .filter(|&kb| kb > ka && cols[kb].0 != ta)
                    .collect();
                partners.sort_unstable();
                partners.dedup();
                let ids_a = &col_ids[ka];
                partners.into_iter().filter_map(move |kb| {
                    let pos: HashMap<u32, usize> = col_ids[kb].iter().enumerate().map(|(i, &v)| (v, i)).collect();
                    let adj: Vec<Vec<usize>> = ids_a
                        .iter()
                        .map(|&v| {
                            std::iter::once(v)
                                .chain(nbrs[v as usize].iter().copied())
                                .filter_map(|t| pos.get(&t).copied())
                                .collect()
                        })
                        .collect();
                    let m = max_fuzzy_matching(&adj, pos.len());
                    let score = jaccard_from_matching(m, ids_a.len(), pos.len());
                    let (ta, ca, _) = &cols[ka];
                    let (tb, cb, _) = &cols[kb];
                    (score > 0.0).then(|| {
                        MatchPrediction::new(
                            column_ref(&corpus.tables[*ta], *ca),
                            column_ref(&corpus.tables[*tb], *cb),
                            score,
                        )
                    })
                })
            })
            .collect();
        canonicalize_predictions(&mut out);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Column, Datatype, TableSchema};
    use proptest::prelude::*;

    fn s(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|x| x.to_string()).collect()
    }

    /// Exhaustive maximum matching over all injective assignments.
    fn brute_matching(a: &[String], b: &[String], delta: f64) -> usize {
        fn go(i: usize, a: &[Vec<char>], b: &[Vec<char>], used: u32, delta: f64) -> usize {
            if i == a.len() {
                return 0;
            }
            let mut best = go(i + 1, a, b, used, delta);
            for j in 0..b.len() {
                if used & (1 << j) == 0 && crate::text::levenshtein_similarity_chars(&a[i], &b[j]) >= delta {
                    best = best.max(1 + go(i + 1, a, b, used | (1 << j), delta));
                }
            }
            best
        }
        let ac: Vec<Vec<char>> = a.iter().map(|x| x.chars().collect()).collect();
        let bc: Vec<Vec<char>> = b.iter().map(|x| x.chars().collect()).collect();
        go(0, &ac, &bc, 0, delta)
    }

    #[test]
    fn examples() {
        let x = s(&["a", "b", "c"]);
        assert_eq!(fuzzy_jaccard(&x, &x, 1.0), 1.0);
        assert_eq!(fuzzy_jaccard(&x, &s(&["xyz", "qqq"]), 0.8), 0.0);
        assert_eq!(fuzzy_jaccard(&s(&["Apple Inc.", "Microsoft Inc."]), &s(&["Apple Inc", "Microsoft Inc."]), 0.9), 1.0);
        assert_eq!(fuzzy_jaccard(&[], &x, 0.8), 0.0);
    }

    #[test]
    fn greedy_trap_is_solved_optimally() {
        // Taking the identical pair first would leave "xbcde" unmatched.
        let a = s(&["abcde", "xbcde"]);
        let b = s(&["abcde", "abcdx"]);
        assert_eq!(fuzzy_jaccard(&a, &b, 0.8), 1.0);
    }

    fn table(name: &str, cols: &[(&str, Vec<&str>)]) -> TableData {
        let n = cols[0].1.len();
        TableData {
            schema: TableSchema {
                name: name.into(),
                columns: cols.iter().map(|(c, _)| Column::new(*c, *c, Datatype::Text)).collect(),
                primary_key: cols[0].0.into(),
            },
            rows: (0..n).map(|r| cols.iter().map(|(_, v)| Some(v[r].to_string())).collect()).collect(),
        }
    }

    #[test]
    fn corpus_path_equals_pairwise_path() {
        let t1 = table("A", &[("k", vec!["1", "2", "3", "4"]), ("name", vec!["Apple Inc.", "Microsoft Inc.", "Oracle", "IBM"])]);
        let t2 = table("B", &[("id", vec!["3", "4", "5", "6"]), ("org", vec!["Apple Inc", "Oracle Corp", "SAP", "IBM"])]);
        let t3 = table("C", &[("x", vec!["10", "20", "30", "40"]), ("y", vec!["Appel Inc.", "zzz", "www", "vvv"])]);
        let corpus = Corpus { tables: vec![t1, t2, t3], ground_truth: vec![], lineage: vec![], seed: 0, base_tables: vec![] };
        for delta in [1.0, 0.8, 0.6] {
            let m = JlMatcher { delta, ..JlMatcher::default() };
            let fast = m.match_corpus(&corpus).unwrap();
            let mut slow: Vec<MatchPrediction> = Vec::new();
            for i in 0..3 {
                for j in i + 1..3 {
                    slow.extend(m.match_tables(&corpus.tables[i], &corpus.tables[j]).into_iter().filter(|p| p.score > 0.0));
                }
            }
            canonicalize_predictions(&mut slow);
            assert_eq!(fast, slow, "delta {delta}");
        }
    }

    proptest! {
        #[test]
        fn exact_delta_is_classical_jaccard(a in proptest::collection::btree_set("[a-c]{1,3}", 0..8), b in proptest::collection::btree_set("[a-c]{1,3}", 0..8)) {
            let (va, vb): (Vec<String>, Vec<String>) = (a.iter().cloned().collect(), b.iter().cloned().collect());
            let expected = if a.is_empty() || b.is_empty() { 0.0 } else { a.intersection(&b).count() as f64 / a.union(&b).count() as f64 };
            prop_assert_eq!(fuzzy_jaccard(&va, &vb, 1.0), expected);
        }

        #[test]
        fn fuzzy_matches_exhaustive_oracle(a in proptest::collection::btree_set("[ab]{2,5}", 0..10), b in proptest::collection::btree_set("[ab]{2,5}", 0..10)) {
            let (va, vb): (Vec<String>, Vec<String>) = (a.into_iter().collect(), b.into_iter().collect());
            let m = brute_matching(&va, &vb, 0.8);
            let expected = if va.is_empty() || vb.is_empty() { 0.0 } else { m as f64 / (va.len() + vb.len() - m) as f64 };
            prop_assert_eq!(fuzzy_jaccard(&va, &vb, 0.8), expected);
            prop_assert_eq!(fuzzy_jaccard(&vb, &va, 0.8), expected);
        }

        #[test]
        fn similarity_join_matches_brute_force(set in proptest::collection::btree_set("[abc]{1,14}", 0..40), delta in 0.5f64..1.0) {
            let mut v: Vec<Vec<char>> = set.iter().map(|s| s.chars().collect()).collect();
            v.sort_by(|x, y| x.len().cmp(&y.len()).then(x.cmp(y)));
            let mut got = similarity_join(&v, delta);
            got.sort_unstable();
            let mut want = Vec::new();
            for i in 0..v.len() {
                for j in i + 1..v.len() {
                    if levenshtein_similarity_chars(&v[i], &v[j]) >= delta {
                        want.push((i as u32, j as u32));
                    }
                }
            }
            prop_assert_eq!(got, want);
        }
    }
}
