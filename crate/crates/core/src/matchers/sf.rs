//! Similarity Flooding over table/column/datatype graphs.
//!
//! Each table becomes a graph `table -column-> col -type-> datatype`
//! (optionally `col -token-> value token`). The pairwise connectivity graph
//! has one node per same-kind node pair and an edge wherever both graphs
//! have an equally labeled edge. Similarities propagate along those edges in
//! both directions with weight `1 / (multiplicity product)` until the
//! largest change drops below `epsilon`.
//!
//! Emitted column scores are the fixpoint rescaled so the best column pair
//! carries the best initial column similarity.

use std::collections::{BTreeMap, HashMap};

use super::{column_ref, MatchPrediction, Matcher};
use crate::corpus::TableData;
use crate::text::{levenshtein_similarity, normalize_header, normalize_value};

pub const DATATYPE_BONUS: f64 = 0.05;
pub const TOKENS_PER_COLUMN: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SfConfig {
    pub epsilon: f64,
    pub max_iters: usize,
    /// Adds the most frequent value tokens of each column as nodes.
    pub instance_tokens: bool,
}

impl Default for SfConfig {
    fn default() -> Self {
        SfConfig { epsilon: 1e-3, max_iters: 200, instance_tokens: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SfResult {
    pub predictions: Vec<MatchPrediction>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Node {
    Table,
    Column(usize),
    Type(String),
    Token(String),
}

impl Node {
    fn kind(&self) -> u8 {
        match self {
            Node::Table => 0,
            Node::Column(_) => 1,
            Node::Type(_) => 2,
            Node::Token(_) => 3,
        }
    }
}

struct Graph {
    nodes: Vec<Node>,
    /// `(from, label, to)` with label 0 = column, 1 = type, 2 = token.
    edges: Vec<(usize, u8, usize)>,
}

fn top_tokens(t: &TableData, ci: usize) -> Vec<String> {
    let mut freq: BTreeMap<String, usize> = BTreeMap::new();
    for v in t.column_values(ci).flatten() {
        for tok in normalize_value(v).split(' ').filter(|w| !w.is_empty()) {
            *freq.entry(tok.to_string()).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = freq.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.into_iter().take(TOKENS_PER_COLUMN).map(|(t, _)| t).collect()
}

fn build_graph(t: &TableData, tokens: bool) -> Graph {
    let mut index: BTreeMap<Node, usize> = BTreeMap::new();
    let mut nodes = Vec::new();
    let mut id = |n: Node, nodes: &mut Vec<Node>| {
        *index.entry(n.clone()).or_insert_with(|| {
            nodes.push(n);
            nodes.len() - 1
        })
    };
    let root = id(Node::Table, &mut nodes);
    let mut edges = Vec::new();
    for (ci, c) in t.schema.columns.iter().enumerate() {
        let cn = id(Node::Column(ci), &mut nodes);
        edges.push((root, 0, cn));
        let tn = id(Node::Type(c.datatype.as_str().to_string()), &mut nodes);
        edges.push((cn, 1, tn));
        if tokens {
            for tok in top_tokens(t, ci) {
                let k = id(Node::Token(tok), &mut nodes);
                edges.push((cn, 2, k));
            }
        }
    }
    Graph { nodes, edges }
}

fn initial(a: &TableData, b: &TableData, x: &Node, y: &Node) -> f64 {
    match (x, y) {
        (Node::Table, Node::Table) => levenshtein_similarity(&normalize_header(a.name()), &normalize_header(b.name())),
        (Node::Column(i), Node::Column(j)) => {
            let (ca, cb) = (&a.schema.columns[*i], &b.schema.columns[*j]);
            let bonus = if ca.datatype == cb.datatype { DATATYPE_BONUS } else { 0.0 };
            (levenshtein_similarity(&normalize_header(&ca.name), &normalize_header(&cb.name)) + bonus).min(1.0)
        }
        (Node::Type(p), Node::Type(q)) | (Node::Token(p), Node::Token(q)) => f64::from(u8::from(p == q)),
        _ => 0.0,
    }
}

/// Runs the fixpoint for one table pair. Returns the last iterate with
/// `converged = false` when `max_iters` is reached first.
pub fn sf_match(a: &TableData, b: &TableData, cfg: &SfConfig) -> SfResult {
    let ga = build_graph(a, cfg.instance_tokens);
    let gb = build_graph(b, cfg.instance_tokens);

    let mut pair_id: HashMap<(usize, usize), usize> = HashMap::new();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (i, x) in ga.nodes.iter().enumerate() {
        for (j, y) in gb.nodes.iter().enumerate() {
            if x.kind() == y.kind() {
                pair_id.insert((i, j), pairs.len());
                pairs.push((i, j));
            }
        }
    }
    let sigma0: Vec<f64> = pairs.iter().map(|&(i, j)| initial(a, b, &ga.nodes[i], &gb.nodes[j])).collect();

    let count = |g: &Graph, forward: bool| {
        let mut m: HashMap<(usize, u8), usize> = HashMap::new();
        for &(f, l, t) in &g.edges {
            *m.entry((if forward { f } else { t }, l)).or_default() += 1;
        }
        m
    };
    let (out_a, in_a, out_b, in_b) = (count(&ga, true), count(&ga, false), count(&gb, true), count(&gb, false));

    // (from, to, weight) over pair nodes, both directions.
    let mut prop: Vec<(usize, usize, f64)> = Vec::new();
    for &(fa, la, ta) in &ga.edges {
        for &(fb, lb, tb) in &gb.edges {
            if la != lb {
                continue;
            }
            let (Some(&p), Some(&q)) = (pair_id.get(&(fa, fb)), pair_id.get(&(ta, tb))) else { continue };
            let fw = 1.0 / (out_a[&(fa, la)] * out_b[&(fb, lb)]) as f64;
            let bw = 1.0 / (in_a[&(ta, la)] * in_b[&(tb, lb)]) as f64;
            prop.push((p, q, fw));
            prop.push((q, p, bw));
        }
    }

    let mut sigma = sigma0.clone();
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        let base: Vec<f64> = sigma0.iter().zip(&sigma).map(|(s0, s)| s0 + s).collect();
        let mut next = base.clone();
        for &(p, q, w) in &prop {
            next[q] += base[p] * w;
        }
        let top = next.iter().copied().fold(0.0_f64, f64::max);
        if top > 0.0 {
            next.iter_mut().for_each(|v| *v /= top);
        }
        residual = next.iter().zip(&sigma).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        sigma = next;
        iterations += 1;
        if residual < cfg.epsilon {
            break;
        }
    }

    let column_pairs: Vec<(usize, usize, usize)> = pairs
        .iter()
        .enumerate()
        .filter_map(|(k, &(i, j))| match (&ga.nodes[i], &gb.nodes[j]) {
            (Node::Column(ci), Node::Column(cj)) => Some((k, *ci, *cj)),
            _ => None,
        })
        .collect();
    let fix_max = column_pairs.iter().map(|&(k, _, _)| sigma[k]).fold(0.0_f64, f64::max);
    let init_max = column_pairs.iter().map(|&(k, _, _)| sigma0[k]).fold(0.0_f64, f64::max);
    let predictions = column_pairs
        .into_iter()
        .map(|(k, ci, cj)| {
            let score = if fix_max > 0.0 { (sigma[k] / fix_max * init_max).clamp(0.0, 1.0) } else { 0.0 };
            MatchPrediction::new(column_ref(a, ci), column_ref(b, cj), score)
        })
        .collect();
    SfResult { predictions, iterations, residual, converged: residual < cfg.epsilon }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SfMatcher {
    pub config: SfConfig,
}

impl Matcher for SfMatcher {
    fn id(&self) -> String {
        let suffix = if self.config.instance_tokens { ", tokens" } else { "" };
        format!("sf(epsilon={}, max_iters={}{suffix})", self.config.epsilon, self.config.max_iters)
    }

    fn match_tables(&self, a: &TableData, b: &TableData) -> Vec<MatchPrediction> {
        let r = sf_match(a, b, &self.config);
        if !r.converged {
            log::warn!("similarity flooding on {} / {} stopped at residual {:.2e}", a.name(), b.name(), r.residual);
        }
        r.predictions
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Column, Datatype, TableSchema};

    fn t(name: &str, cols: &[(&str, Datatype)]) -> TableData {
        TableData {
            schema: TableSchema {
                name: name.into(),
                columns: cols.iter().map(|(c, d)| Column::new(*c, *c, *d)).collect(),
                primary_key: cols[0].0.into(),
            },
            rows: vec![cols.iter().map(|(c, _)| Some(format!("{c} value"))).collect()],
        }
    }

    fn score(r: &SfResult, a: &str, b: &str) -> f64 {
        r.predictions.iter().find(|p| [&p.left.column, &p.right.column] == [a, b] || [&p.left.column, &p.right.column] == [b, a]).unwrap().score
    }

    #[test]
    fn identical_schemas_map_to_namesakes() {
        let cols = [("id", Datatype::Integer), ("Legal Name", Datatype::Text), ("Country", Datatype::Text)];
        let (a, b) = (t("Organization", &cols), t("Organization Copy", &cols));
        let r = sf_match(&a, &b, &SfConfig::default());
        assert!(r.converged);
        for (c, _) in &cols {
            let best = cols.iter().max_by(|x, y| score(&r, c, x.0).total_cmp(&score(&r, c, y.0))).unwrap().0;
            assert_eq!(best, *c);
        }
        assert!(r.predictions.iter().all(|p| (0.0..=1.0).contains(&p.score)));
    }

    #[test]
    fn unrelated_schemas_stay_below_threshold() {
        let a = t("Alpha", &[("qqq", Datatype::Integer), ("wvw", Datatype::Date)]);
        let b = t("Omega", &[("zzzz", Datatype::Text), ("kkk", Datatype::Decimal)]);
        let r = sf_match(&a, &b, &SfConfig::default());
        assert!(r.converged);
        assert!(r.predictions.iter().all(|p| p.score < 0.5), "{:?}", r.predictions);
    }

    #[test]
    fn symmetric_and_order_invariant() {
        let a = t("Listed Security", &[("id", Datatype::Integer), ("Ticker", Datatype::Text), ("listedBy", Datatype::Integer)]);
        let b = t("Organization", &[("id", Datatype::Integer), ("Legal Name", Datatype::Text)]);
        let ab = sf_match(&a, &b, &SfConfig::default());
        let ba = sf_match(&b, &a, &SfConfig::default());
        for p in &ab.predictions {
            let q = ba.predictions.iter().find(|q| q.key() == p.key()).unwrap();
            assert!((p.score - q.score).abs() < 1e-12);
        }
        // Reordering columns relabels internal nodes without changing scores.
        let mut a2 = a.clone();
        a2.schema.columns.reverse();
        a2.rows[0].reverse();
        let r2 = sf_match(&a2, &b, &SfConfig::default());
        for p in &ab.predictions {
            let q = r2.predictions.iter().find(|q| q.key() == p.key()).unwrap();
            assert!((p.score - q.score).abs() < 1e-9);
        }
    }

    #[test]
    fn iteration_cap_is_reported() {
        let a = t("A", &[("x", Datatype::Text), ("y", Datatype::Integer)]);
        let r = sf_match(&a, &a, &SfConfig { epsilon: 0.0, max_iters: 3, instance_tokens: true });
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }
}
