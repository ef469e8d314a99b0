//! Scoring matcher predictions against ground truth.
//!
//! A prediction is positive when its score is strictly above the threshold.
//! Top-k ranks by score, then by canonical pair order.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{ColumnRef, Difficulty, JoinKind, JoinPair};
use crate::matchers::{canonicalize_predictions, MatchPrediction};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_KS: [usize; 3] = [1, 3, 5];
pub const REPORT_FORMAT_VERSION: u32 = 1;

type PairKey = (ColumnRef, ColumnRef);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    ExactJoins,
    SemanticJoins,
    All,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::ExactJoins => "exact_joins",
            Task::SemanticJoins => "semantic_joins",
            Task::All => "all",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "exact" | "exact_joins" => Some(Task::ExactJoins),
            "semantic" | "semantic_joins" => Some(Task::SemanticJoins),
            "all" => Some(Task::All),
            _ => None,
        }
    }

    /// Whether a pair of `kind` belongs to this task's truth set. With
    /// `semantic_superset`, the semantic task also counts exact and PK/FK
    /// pairs.
    pub fn includes(self, kind: JoinKind, semantic_superset: bool) -> bool {
        match self {
            Task::ExactJoins => kind.is_exact_joinable(),
            Task::SemanticJoins => semantic_superset || kind == JoinKind::Semantic,
            Task::All => true,
        }
    }
}

pub fn truth_set<'a>(pairs: impl IntoIterator<Item = &'a JoinPair>) -> HashSet<PairKey> {
    pairs.into_iter().map(JoinPair::key).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub positives: usize,
    /// The truth set was empty, so recall is undefined.
    pub degenerate: bool,
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn canonical(preds: &[MatchPrediction]) -> Vec<MatchPrediction> {
    let mut v = preds.to_vec();
    canonicalize_predictions(&mut v);
    v
}

pub fn precision_recall_f1(preds: &[MatchPrediction], truth: &HashSet<PairKey>, threshold: f64) -> Prf {
    let preds = canonical(preds);
    let positives: Vec<&MatchPrediction> = preds.iter().filter(|p| p.score > threshold).collect();
    let tp = positives.iter().filter(|p| truth.contains(&p.key())).count();
    let precision = if positives.is_empty() { 0.0 } else { tp as f64 / positives.len() as f64 };
    let recall = if truth.is_empty() { 0.0 } else { tp as f64 / truth.len() as f64 };
    Prf { precision, recall, f1: f1(precision, recall), true_positives: tp, positives: positives.len(), degenerate: truth.is_empty() }
}

/// Predictions ranked by descending score, ties in canonical pair order.
pub fn rank(preds: &[MatchPrediction]) -> Vec<MatchPrediction> {
    let mut v = canonical(preds);
    v.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.key().cmp(&b.key())));
    v
}

/// Hits among the `k` best predictions over `k`; missing slots are misses.
pub fn top_k_precision(preds: &[MatchPrediction], truth: &HashSet<PairKey>, k: usize) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    rank(preds).iter().take(k).filter(|p| truth.contains(&p.key())).count() as f64 / k as f64
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub total: usize,
    pub correct: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DifficultyBreakdown {
    pub easy: Cell,
    pub difficult: Cell,
}

/// Per-difficulty counts over semantic pairs that are not also exact.
pub fn difficulty_breakdown(preds: &[MatchPrediction], truth: &[JoinPair], threshold: f64) -> DifficultyBreakdown {
    let positive: HashSet<PairKey> = canonical(preds).into_iter().filter(|p| p.score > threshold).map(|p| p.key()).collect();
    let mut out = DifficultyBreakdown::default();
    for p in truth.iter().filter(|p| p.kind == JoinKind::Semantic) {
        let cell = match p.difficulty {
            Difficulty::Easy => &mut out.easy,
            Difficulty::Difficult => &mut out.difficult,
        };
        cell.total += 1;
        cell.correct += usize::from(positive.contains(&p.key()));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub matcher: String,
    pub corpus_digest: String,
    pub task: Task,
    pub threshold: f64,
    pub truth_pairs: usize,
    pub predictions: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub top_k: BTreeMap<usize, f64>,
    pub difficulty: DifficultyBreakdown,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub threshold: f64,
    pub ks: Vec<usize>,
    pub semantic_superset: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { threshold: DEFAULT_THRESHOLD, ks: DEFAULT_KS.to_vec(), semantic_superset: true }
    }
}

pub fn evaluate(
    matcher: &str,
    corpus_digest: &str,
    preds: &[MatchPrediction],
    ground_truth: &[JoinPair],
    task: Task,
    cfg: &EvalConfig,
) -> EvalReport {
    let truth = truth_set(ground_truth.iter().filter(|p| task.includes(p.kind, cfg.semantic_superset)));
    let prf = precision_recall_f1(preds, &truth, cfg.threshold);
    EvalReport {
        matcher: matcher.to_string(),
        corpus_digest: corpus_digest.to_string(),
        task,
        threshold: cfg.threshold,
        truth_pairs: truth.len(),
        predictions: canonical(preds).len(),
        precision: prf.precision,
        recall: prf.recall,
        f1: prf.f1,
        top_k: cfg.ks.iter().map(|&k| (k, top_k_precision(preds, &truth, k))).collect(),
        difficulty: difficulty_breakdown(preds, ground_truth, cfg.threshold),
        degenerate: prf.degenerate,
    }
}

/// `F1 (P, R)` with two decimals.
pub fn f1_cell(r: &EvalReport) -> String {
    if r.degenerate {
        format!("{:.2} ({:.2}, n/a) degenerate truth set", r.f1, r.precision)
    } else {
        format!("{:.2} ({:.2}, {:.2})", r.f1, r.precision, r.recall)
    }
}

/// Fixed-layout text table, one row per report in the given order.
pub fn render_text(reports: &[EvalReport]) -> String {
    let ks: Vec<usize> = reports.first().map(|r| r.top_k.keys().copied().collect()).unwrap_or_default();
    let top_header = format!("top-{}", ks.iter().map(usize::to_string).collect::<Vec<_>>().join(","));
    let header = ["matcher", "task", "F1 (P, R)", top_header.as_str(), "easy", "difficult"].map(str::to_string);
    let rows: Vec<[String; 6]> = reports
        .iter()
        .map(|r| {
            [
                r.matcher.clone(),
                r.task.as_str().to_string(),
                f1_cell(r),
                r.top_k.values().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(", "),
                format!("{}/{}", r.difficulty.easy.correct, r.difficulty.easy.total),
                format!("{}/{}", r.difficulty.difficult.correct, r.difficulty.difficult.total),
            ]
        })
        .collect();
    let mut widths = header.each_ref().map(String::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[String; 6]| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", padded.join(" | ").trim_end());
    };
    line(&header);
    line(&widths.map(|w| "-".repeat(w)));
    for row in &rows {
        line(row);
    }
    out
}

#[derive(Serialize)]
struct ReportDocument<'a> {
    format_version: u32,
    reports: &'a [EvalReport],
}

/// Versioned JSON document with full-precision values.
pub fn render_json(reports: &[EvalReport]) -> String {
    let mut s = serde_json::to_string_pretty(&ReportDocument { format_version: REPORT_FORMAT_VERSION, reports })
        .expect("reports serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(t: &str, col: &str) -> ColumnRef {
        ColumnRef::new(t, col)
    }

    fn pair(i: usize) -> (ColumnRef, ColumnRef) {
        (c("A", &format!("c{i:03}")), c("B", &format!("c{i:03}")))
    }

    fn pred(i: usize, score: f64) -> MatchPrediction {
        let (a, b) = pair(i);
        MatchPrediction::new(a, b, score)
    }

    #[test]
    fn perfect_predictions() {
        let truth: HashSet<_> = (0..5).map(pair).collect();
        let preds: Vec<_> = (0..5).map(|i| pred(i, 1.0)).collect();
        let r = precision_recall_f1(&preds, &truth, 0.5);
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn hand_counted_confusion() {
        let truth: HashSet<_> = (0..20).map(pair).collect();
        let preds: Vec<_> = (15..25).map(|i| pred(i, 0.9)).chain((0..3).map(|i| pred(i, 0.5))).collect();
        let r = precision_recall_f1(&preds, &truth, 0.5);
        assert_eq!((r.precision, r.recall), (0.5, 0.25));
        assert!((r.f1 - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_truth_is_flagged() {
        let r = evaluate("m", "d", &[pred(0, 0.9)], &[], Task::ExactJoins, &EvalConfig::default());
        assert!(r.degenerate);
        assert!(render_text(&[r]).contains("degenerate truth set"));
    }

    #[test]
    fn top_k_examples() {
        let truth: HashSet<_> = [0, 2, 4].into_iter().map(pair).collect();
        let preds: Vec<_> = (0..6).map(|i| pred(i, 1.0 - i as f64 * 0.1)).collect();
        assert_eq!(top_k_precision(&preds, &truth, 1), 1.0);
        assert!((top_k_precision(&preds, &truth, 5) - 0.6).abs() < 1e-12);
        assert!((top_k_precision(&preds[..2], &truth, 5) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn duplicates_keep_the_max_score() {
        let truth: HashSet<_> = [pair(0)].into_iter().collect();
        let (a, b) = pair(0);
        let preds = vec![MatchPrediction::new(b, a, 0.2), pred(0, 0.9)];
        assert_eq!(precision_recall_f1(&preds, &truth, 0.5).true_positives, 1);
    }

    #[test]
    fn breakdown_counts_semantic_pairs() {
        let mk = |i: usize, kind, difficulty| {
            let (a, b) = pair(i);
            JoinPair::new(a, b, kind, difficulty, None, None)
        };
        let truth = vec![
            mk(0, JoinKind::Semantic, Difficulty::Easy),
            mk(1, JoinKind::Semantic, Difficulty::Easy),
            mk(2, JoinKind::Semantic, Difficulty::Difficult),
            mk(3, JoinKind::Exact, Difficulty::Difficult),
        ];
        let preds = vec![pred(0, 0.9), pred(1, 0.8), pred(2, 0.4), pred(3, 0.9)];
        let b = difficulty_breakdown(&preds, &truth, 0.5);
        assert_eq!(b.easy, Cell { total: 2, correct: 2 });
        assert_eq!(b.difficult, Cell { total: 1, correct: 0 });
    }

    #[test]
    fn rendering_is_stable() {
        let r = EvalReport {
            matcher: "jl(delta=0.8)".into(),
            corpus_digest: "abc".into(),
            task: Task::ExactJoins,
            threshold: 0.5,
            truth_pairs: 10,
            predictions: 12,
            precision: 0.81,
            recall: 0.67,
            f1: 0.7334,
            top_k: [(1, 0.52), (3, 0.41), (5, 0.31)].into_iter().collect(),
            difficulty: DifficultyBreakdown { easy: Cell { total: 46, correct: 46 }, difficult: Cell { total: 134, correct: 24 } },
            degenerate: false,
        };
        let text = render_text(&[r.clone(), EvalReport { matcher: "sf".into(), ..r.clone() }]);
        let expected = "\
matcher       | task        | F1 (P, R)         | top-1,3,5        | easy  | difficult
------------- | ----------- | ----------------- | ---------------- | ----- | ---------
jl(delta=0.8) | exact_joins | 0.73 (0.81, 0.67) | 0.52, 0.41, 0.31 | 46/46 | 24/134
sf            | exact_joins | 0.73 (0.81, 0.67) | 0.52, 0.41, 0.31 | 46/46 | 24/134
";
        assert_eq!(text, expected);
        let json: serde_json::Value = serde_json::from_str(&render_json(&[r])).unwrap();
        assert_eq!(json["format_version"], 1);
        assert_eq!(json["reports"][0]["top_k"]["3"], 0.41);
    }

    fn naive(preds: &[(usize, f64)], truth: &[usize], threshold: f64) -> (f64, f64) {
        let mut best: BTreeMap<usize, f64> = BTreeMap::new();
        for &(i, s) in preds {
            let e = best.entry(i).or_insert(s);
            *e = e.max(s);
        }
        let truth: std::collections::BTreeSet<usize> = truth.iter().copied().collect();
        let mut tp = 0;
        let mut pos = 0;
        for (i, s) in &best {
            if *s > threshold {
                pos += 1;
                if truth.contains(i) {
                    tp += 1;
                }
            }
        }
        let p = if pos == 0 { 0.0 } else { tp as f64 / pos as f64 };
        let r = if truth.is_empty() { 0.0 } else { tp as f64 / truth.len() as f64 };
        (p, r)
    }

    proptest! {
        #[test]
        fn metrics_match_naive_oracle(
            preds in proptest::collection::vec((0usize..300, 0u32..=20), 0..200),
            truth in proptest::collection::vec(0usize..300, 0..200),
            t in 0u32..=20,
        ) {
            let threshold = f64::from(t) / 20.0;
            let scored: Vec<(usize, f64)> = preds.iter().map(|&(i, s)| (i, f64::from(s) / 20.0)).collect();
            let mp: Vec<MatchPrediction> = scored.iter().map(|&(i, s)| pred(i, s)).collect();
            let ts: HashSet<_> = truth.iter().map(|&i| pair(i)).collect();
            let got = precision_recall_f1(&mp, &ts, threshold);
            let (p, r) = naive(&scored, &truth, threshold);
            prop_assert_eq!((got.precision, got.recall), (p, r));
            let higher = precision_recall_f1(&mp, &ts, (threshold + 0.1).min(1.0));
            prop_assert!(higher.recall <= got.recall);
        }

        #[test]
        fn top_k_is_non_increasing_when_hits_lead(hits in 0usize..10, misses in 0usize..10) {
            let truth: HashSet<_> = (0..hits).map(pair).collect();
            let preds: Vec<_> = (0..hits).map(|i| pred(i, 0.9)).chain((100..100 + misses).map(|i| pred(i, 0.3))).collect();
            let v: Vec<f64> = DEFAULT_KS.iter().map(|&k| top_k_precision(&preds, &truth, k)).collect();
            prop_assert!(v.windows(2).all(|w| w[0] >= w[1]));
        }
    }
}
