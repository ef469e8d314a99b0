//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so every line is printed; exits non-zero on any FAIL.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use lakeforge::corpus::{save_corpus, ColumnRef, Corpus, JoinKind, MANIFEST_FILE};
use lakeforge::eval::{evaluate, precision_recall_f1, render_json, render_text, top_k_precision, EvalConfig, Task};
use lakeforge::generate::{
    generate_base_tables, parse_completion, plan_generation, Backend, PromptTemplate, RowCaps, Source, DEFAULT_ROW_CAP,
};
use lakeforge::llm::{Gateway, GatewayConfig, Mode};
use lakeforge::matchers::{fuzzy_jaccard, sf_match, HybridMatcher, JlMatcher, MatchPrediction, Matcher, SfConfig, SfMatcher};
use lakeforge::ontology::{GroupingConfig, OntologyFormat};
use lakeforge::perturb::{apply_plan, PerturbationPlan};
use lakeforge::pipeline::{compile, derive_offline, generate_offline, FIBO_SUBSET, FINANCE};
use lakeforge::truth::brute_force_ground_truth;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Wall-clock budget of criterion 1.
const FIXTURE_BUDGET: Duration = Duration::from_secs(5);
/// Wall-clock budget of criterion 2.
const SCALE_BUDGET: Duration = Duration::from_secs(60);
/// Stats averages are compared with this absolute tolerance.
const AVG_TOLERANCE: f64 = 1e-9;
/// Similarity flooding residual bound and iteration cap of criterion 6.
const SF_EPSILON: f64 = 1e-3;
const SF_MAX_ITERS: usize = 200;
/// Minimum parsed-row yield of criterion 10.
const MIN_ROW_YIELD: f64 = 0.8;
/// Seeds of the trend criteria 7 and 8.
const TREND_SEEDS: [u64; 5] = [11, 22, 33, 44, 55];

type Verdict = Result<String, String>;

fn check(cond: bool, fail: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(fail())
    }
}

fn c1_fixture_pipeline() -> Verdict {
    let t0 = Instant::now();
    let g = generate_offline(FIBO_SUBSET, 42, DEFAULT_ROW_CAP).map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed();
    let c = &g.corpus;
    let fk = ColumnRef::new("Listed Security", "listedBy");
    let org = c.table("Organization").ok_or("no Organization table")?;
    let pk = ColumnRef::new("Organization", org.schema.primary_key.clone());
    let keys: HashSet<&str> = c.column_cells(&pk).ok_or("no key column")?.into_iter().flatten().collect();
    let refs: Vec<&str> = c.column_cells(&fk).ok_or("no listedBy column")?.into_iter().flatten().collect();
    check(!refs.is_empty(), || "listedBy is empty".into())?;
    let outside = refs.iter().filter(|v| !keys.contains(*v)).count();
    check(outside == 0, || format!("{outside} listedBy values are not Organization keys"))?;
    let pair = c
        .ground_truth
        .iter()
        .find(|p| (p.left == fk && p.right == pk) || (p.left == pk && p.right == fk))
        .ok_or("pair missing from ground truth")?;
    check(pair.kind == JoinKind::Pkfk, || format!("pair classified {:?}", pair.kind))?;
    check(elapsed < FIXTURE_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("{} listedBy values ⊆ {} keys, pkfk, {elapsed:.2?}", refs.len(), keys.len()))
}

/// Corpus summary recounted from the saved CSV files and manifest.
fn recount(dir: &Path) -> Result<(usize, usize, f64, f64, usize, usize), String> {
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE)).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let tables = m["tables"].as_array().ok_or("no tables")?;
    let (mut rows, mut cols) = (0usize, 0usize);
    for t in tables {
        let bytes = fs::read(dir.join(t["file"].as_str().ok_or("no file")?)).map_err(|e| e.to_string())?;
        let mut r = csv::Reader::from_reader(bytes.as_slice());
        cols += r.headers().map_err(|e| e.to_string())?.len();
        rows += r.records().count();
    }
    let mut kinds: BTreeMap<&str, usize> = BTreeMap::new();
    for p in m["ground_truth"].as_array().ok_or("no ground truth")? {
        *kinds.entry(p["kind"].as_str().ok_or("no kind")?).or_default() += 1;
    }
    let n = tables.len();
    let avg = |x: usize| if n == 0 { 0.0 } else { x as f64 / n as f64 };
    let k = |s: &str| kinds.get(s).copied().unwrap_or(0);
    Ok((m["base_tables"].as_array().ok_or("no base list")?.len(), n, avg(rows), avg(cols), k("exact") + k("pkfk"), k("semantic")))
}

fn c2_scale_shape() -> Verdict {
    let t0 = Instant::now();
    let base = generate_offline(FINANCE, 42, DEFAULT_ROW_CAP).map_err(|e| e.to_string())?;
    let derived = derive_offline(&base.corpus, &PerturbationPlan::default_plan()).map_err(|e| e.to_string())?.corpus;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    save_corpus(&derived, dir.path()).map_err(|e| e.to_string())?;
    let stats = derived.stats();
    let elapsed = t0.elapsed();
    let (bases, n, rows, cols, exact, semantic) = recount(dir.path())?;
    check(stats.base_tables == 20 && bases == 20, || format!("{} base tables", stats.base_tables))?;
    check(stats.tables >= 100, || format!("{} tables", stats.tables))?;
    check(
        stats.tables == n
            && (stats.avg_rows - rows).abs() <= AVG_TOLERANCE
            && (stats.avg_columns - cols).abs() <= AVG_TOLERANCE
            && stats.exact_joins == exact
            && stats.semantic_joins == semantic,
        || format!("stats {stats:?} vs recount {:?}", (n, rows, cols, exact, semantic)),
    )?;
    check(elapsed < SCALE_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("{bases} / {n} tables, {exact} exact, {semantic} semantic, {elapsed:.2?}"))
}

/// Plans small enough to keep three base tables within ten.
const SMALL_PLANS: [&str; 2] = [
    r#"
[[step]]
base_only = true
ops = [{ op = "vertical_split", overlap_ratio = 0.4 }]

[[step]]
tables = "*__vertical_split_1"
replace = true
ops = [{ op = "semantic_value_perturb" }, { op = "cryptify_headers" }]

[[step]]
tables = "*__vertical_split_2"
replace = true
ops = [{ op = "text_noise", rate = 0.2 }, { op = "inject_nulls", rate = 0.1 }, { op = "header_typos", rate = 0.5 }]
"#,
    r#"
[[step]]
tables = "Organization"
ops = [{ op = "horizontal_split", row_overlap_ratio = 0.3 }]

[[step]]
tables = "Listed Security"
ops = [{ op = "sample_rows", fraction = 0.5 }]

[[step]]
tables = "Listed Security__sample_rows_1"
replace = true
ops = [{ op = "semantic_value_perturb" }, { op = "duplicates", rate = 0.2 }, { op = "numeric_jitter", rel_scale = 0.1 }]

[[step]]
tables = "Postal Address"
ops = [{ op = "remove_columns", keep = ["postal*", "City"] }]
"#,
];

fn c3_ground_truth_oracle() -> Verdict {
    let mut compared = 0;
    for seed in 0..20u64 {
        let plan = PerturbationPlan::from_toml(SMALL_PLANS[seed as usize % SMALL_PLANS.len()]).map_err(|e| e.to_string())?;
        let base = generate_offline(FIBO_SUBSET, seed, 60).map_err(|e| e.to_string())?;
        let c = derive_offline(&base.corpus, &plan).map_err(|e| e.to_string())?.corpus;
        check(c.tables.len() <= 10, || format!("seed {seed}: {} tables", c.tables.len()))?;
        let propagated: BTreeSet<_> = c.ground_truth.iter().cloned().collect();
        let brute: BTreeSet<_> = brute_force_ground_truth(&c).into_iter().collect();
        if propagated != brute {
            let missing: Vec<_> = brute.difference(&propagated).take(3).collect();
            let extra: Vec<_> = propagated.difference(&brute).take(3).collect();
            return Err(format!("seed {seed}: missing {missing:?}, extra {extra:?}"));
        }
        compared += brute.len();
    }
    Ok(format!("20 seeds, {compared} pairs identical"))
}

fn cref(i: usize) -> (ColumnRef, ColumnRef) {
    let (a, b) = (ColumnRef::new(format!("L{}", i / 7), format!("c{}", i % 7)), ColumnRef::new(format!("R{}", i / 5), format!("d{}", i % 5)));
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn c4_metric_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for fixture in 0..100 {
        let universe = 400;
        let n = rng.gen_range(0..=200);
        let m = rng.gen_range(0..=200);
        let mut ids: Vec<usize> = (0..universe).collect();
        ids.shuffle(&mut rng);
        // Coarse scores force ties at and around the threshold.
        let preds: Vec<(usize, f64)> = ids[..n].iter().map(|&i| (i, f64::from(rng.gen_range(0..=20u32)) / 20.0)).collect();
        ids.shuffle(&mut rng);
        let truth_ids: HashSet<usize> = ids[..m].iter().copied().collect();
        let predictions: Vec<MatchPrediction> = preds.iter().map(|&(i, s)| { let (a, b) = cref(i); MatchPrediction::new(a, b, s) }).collect();
        let truth: HashSet<(ColumnRef, ColumnRef)> = truth_ids.iter().map(|&i| cref(i)).collect();

        // Confusion matrix.
        let (mut tp, mut fp) = (0usize, 0usize);
        for &(i, s) in &preds {
            if s > 0.5 {
                if truth_ids.contains(&i) {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
        }
        let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let r = if m == 0 { 0.0 } else { tp as f64 / m as f64 };
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        let got = precision_recall_f1(&predictions, &truth, 0.5);
        check(got.precision == p && got.recall == r && got.f1 == f, || format!("fixture {fixture}: {got:?} vs ({p}, {r}, {f})"))?;

        // Top-k by counting, for each prediction, how many rank above it.
        for k in [1usize, 3, 5] {
            let hits = preds
                .iter()
                .filter(|&&(i, s)| {
                    let above = preds.iter().filter(|&&(j, t)| t > s || (t == s && cref(j) < cref(i))).count();
                    above < k && truth_ids.contains(&i)
                })
                .count();
            let want = hits as f64 / k as f64;
            let got = top_k_precision(&predictions, &truth, k);
            check(got == want, || format!("fixture {fixture}: top-{k} {got} vs {want}"))?;
        }
    }
    Ok("100 fixtures, P/R/F1 and top-1,3,5 exact".into())
}

fn lev(a: &[char], b: &[char]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]));
        }
    }
    d[a.len()][b.len()]
}

fn lev_sim(a: &str, b: &str) -> f64 {
    let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    let n = a.len().max(b.len());
    if n == 0 {
        1.0
    } else {
        1.0 - lev(&a, &b) as f64 / n as f64
    }
}

/// Largest matching by exhaustive search over subsets of `b`.
fn best_matching(a: &[String], b: &[String], delta: f64) -> usize {
    let mut memo: BTreeMap<(usize, u32), usize> = BTreeMap::new();
    fn go(i: usize, used: u32, a: &[String], b: &[String], delta: f64, memo: &mut BTreeMap<(usize, u32), usize>) -> usize {
        if i == a.len() {
            return 0;
        }
        if let Some(&v) = memo.get(&(i, used)) {
            return v;
        }
        let mut best = go(i + 1, used, a, b, delta, memo);
        for j in 0..b.len() {
            if used & (1 << j) == 0 && lev_sim(&a[i], &b[j]) >= delta {
                best = best.max(1 + go(i + 1, used | (1 << j), a, b, delta, memo));
            }
        }
        memo.insert((i, used), best);
        best
    }
    go(0, 0, a, b, delta, &mut memo)
}

fn random_set(rng: &mut ChaCha8Rng, max: usize, alphabet: &[u8], len: std::ops::RangeInclusive<usize>) -> Vec<String> {
    let n = rng.gen_range(0..=max);
    let mut s = BTreeSet::new();
    for _ in 0..n {
        let l = rng.gen_range(len.clone());
        s.insert((0..l).map(|_| *alphabet.choose(rng).unwrap() as char).collect::<String>());
    }
    s.into_iter().collect()
}

fn c5_jl_correctness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..100 {
        let a = random_set(&mut rng, 12, b"abcd", 1..=3);
        let b = random_set(&mut rng, 12, b"abcd", 1..=3);
        let (sa, sb): (HashSet<&String>, HashSet<&String>) = (a.iter().collect(), b.iter().collect());
        let union = sa.union(&sb).count();
        let want = if union == 0 { 0.0 } else { sa.intersection(&sb).count() as f64 / union as f64 };
        let got = fuzzy_jaccard(&a, &b, 1.0);
        check(got == want, || format!("case {case}: δ=1 gives {got}, Jaccard {want}"))?;
    }
    for case in 0..100 {
        let a = random_set(&mut rng, 10, b"ab", 3..=6);
        let b = random_set(&mut rng, 10, b"ab", 3..=6);
        let m = best_matching(&a, &b, 0.8);
        let denom = a.len() + b.len() - m;
        let want = if denom == 0 { 0.0 } else { m as f64 / denom as f64 };
        let got = fuzzy_jaccard(&a, &b, 0.8);
        check(got == want, || format!("case {case}: δ=0.8 gives {got}, oracle {want} on {a:?} / {b:?}"))?;
    }
    Ok("100 δ=1 cases equal Jaccard; 100 δ=0.8 cases equal the exhaustive matching oracle".into())
}

fn c6_sf_behavior() -> Verdict {
    let cfg = SfConfig { epsilon: SF_EPSILON, max_iters: SF_MAX_ITERS, instance_tokens: false };
    let mut tables = generate_offline(FINANCE, 6, 50).map_err(|e| e.to_string())?.corpus.tables;
    tables.extend(generate_offline(FIBO_SUBSET, 6, 50).map_err(|e| e.to_string())?.corpus.tables);
    let mut pairs = 0;
    let mut worst = 0.0f64;
    for (i, a) in tables.iter().enumerate() {
        for b in &tables[i + 1..] {
            let r = sf_match(a, b, &cfg);
            check(r.residual < SF_EPSILON && r.iterations <= SF_MAX_ITERS, || {
                format!("{} / {}: residual {} after {} iterations", a.name(), b.name(), r.residual, r.iterations)
            })?;
            worst = worst.max(r.residual);
            pairs += 1;
        }
    }
    for a in &tables {
        let mut b = a.clone();
        b.schema.name = format!("{} copy", a.name());
        let r = sf_match(a, &b, &cfg);
        check(r.residual < SF_EPSILON, || format!("{} self-match residual {}", a.name(), r.residual))?;
        for col in &a.schema.columns {
            let best = r
                .predictions
                .iter()
                .filter(|p| p.left.table == a.name() && p.left.column == col.name || p.right.table == a.name() && p.right.column == col.name)
                .max_by(|x, y| x.score.total_cmp(&y.score))
                .ok_or_else(|| format!("no prediction for {}.{}", a.name(), col.name))?;
            let other = if best.left.table == a.name() { &best.right } else { &best.left };
            let tied = r
                .predictions
                .iter()
                .filter(|p| p.score == best.score && (p.left.column == col.name && p.left.table == a.name() || p.right.column == col.name && p.right.table == a.name()))
                .count();
            check(other.column == col.name && tied == 1, || format!("{}.{} top-1 is {other} (ties {tied})", a.name(), col.name))?;
        }
    }
    Ok(format!("{pairs} schema pairs converged (max residual {worst:.1e}); {} self-matches map every column to itself", tables.len()))
}

/// Derived finance corpora shared by criteria 7 and 8.
fn trend_corpora() -> Result<Vec<(u64, Corpus)>, String> {
    TREND_SEEDS
        .iter()
        .map(|&seed| {
            let base = generate_offline(FINANCE, seed, DEFAULT_ROW_CAP).map_err(|e| e.to_string())?;
            let d = derive_offline(&base.corpus, &PerturbationPlan::default_plan()).map_err(|e| e.to_string())?;
            Ok((seed, d.corpus))
        })
        .collect()
}

struct TrendRun {
    seed: u64,
    jl: [f64; 2],
    hybrid: [f64; 2],
    easy: (usize, usize),
    difficult: (usize, usize),
}

fn run_trend(corpora: &[(u64, Corpus)]) -> Result<Vec<TrendRun>, String> {
    let cfg = EvalConfig::default();
    let mut out = Vec::new();
    for (seed, c) in corpora {
        let f1 = |preds: &[MatchPrediction]| {
            [Task::ExactJoins, Task::SemanticJoins].map(|t| evaluate("m", "", preds, &c.ground_truth, t, &cfg).f1)
        };
        let jl = JlMatcher { seed: *seed, ..JlMatcher::default() }.match_corpus(c).map_err(|e| e.to_string())?;
        let hy = HybridMatcher { seed: *seed, ..HybridMatcher::default() }.match_corpus(c).map_err(|e| e.to_string())?;
        let d = evaluate("hybrid", "", &hy, &c.ground_truth, Task::SemanticJoins, &cfg).difficulty;
        out.push(TrendRun {
            seed: *seed,
            jl: f1(&jl),
            hybrid: f1(&hy),
            easy: (d.easy.correct, d.easy.total),
            difficult: (d.difficult.correct, d.difficult.total),
        });
    }
    Ok(out)
}

fn c7_trend(runs: &[TrendRun]) -> Verdict {
    let mut notes = Vec::new();
    for r in runs {
        check(r.jl[1] <= r.jl[0] && r.hybrid[1] <= r.hybrid[0], || {
            format!("seed {}: JL exact {:.3} semantic {:.3}; hybrid exact {:.3} semantic {:.3}", r.seed, r.jl[0], r.jl[1], r.hybrid[0], r.hybrid[1])
        })?;
        notes.push(format!("JL {:.2}→{:.2} hybrid {:.2}→{:.2}", r.jl[0], r.jl[1], r.hybrid[0], r.hybrid[1]));
    }
    Ok(format!("exact→semantic F1 over {} seeds: {}", runs.len(), notes.join("; ")))
}

fn c8_difficulty(runs: &[TrendRun]) -> Verdict {
    let mut notes = Vec::new();
    for r in runs {
        let rate = |(c, t): (usize, usize)| if t == 0 { f64::NAN } else { c as f64 / t as f64 };
        check(r.difficult.1 > 0 && r.easy.1 > 0, || format!("seed {}: easy {:?} difficult {:?}", r.seed, r.easy, r.difficult))?;
        check(rate(r.easy) > rate(r.difficult), || {
            format!("seed {}: easy {}/{} not above difficult {}/{}", r.seed, r.easy.0, r.easy.1, r.difficult.0, r.difficult.1)
        })?;
        notes.push(format!("{}/{} vs {}/{}", r.easy.0, r.easy.1, r.difficult.0, r.difficult.1));
    }
    Ok(format!("hybrid easy vs difficult hits: {}", notes.join("; ")))
}

/// Generate → perturb → evaluate through the gateway in `mode`, returning
/// the manifest bytes and both report renderings.
fn gateway_run(cache: &Path, mode: Mode, record_with: Option<Box<dyn lakeforge::llm::Completer>>) -> Result<(Vec<u8>, String, String), String> {
    let cfg = GatewayConfig::new(mode, cache);
    let gw = match record_with {
        Some(t) => Gateway::with_transport(cfg, t),
        None => Gateway::new(cfg).map_err(|e| e.to_string())?,
    };
    let (schemas, graph) = compile(FIBO_SUBSET, OntologyFormat::Native, &GroupingConfig::default()).map_err(|e| e.to_string())?;
    let plan = plan_generation(&graph, &RowCaps::uniform(40), Backend::Llm).map_err(|e| e.to_string())?;
    let src = Source::Llm { completer: &gw, template: PromptTemplate::default() };
    let base = generate_base_tables(&schemas, &plan, &src, 9).map_err(|e| e.to_string())?;
    let derived = apply_plan(&base.corpus, &PerturbationPlan::default_plan(), Some(&gw)).map_err(|e| e.to_string())?.corpus;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let digest = save_corpus(&derived, dir.path()).map_err(|e| e.to_string())?;
    let matchers: Vec<Box<dyn Matcher>> = vec![Box::new(JlMatcher::default()), Box::new(SfMatcher::default()), Box::new(HybridMatcher::default())];
    let mut reports = Vec::new();
    for m in &matchers {
        let preds = m.match_corpus(&derived).map_err(|e| e.to_string())?;
        for t in [Task::ExactJoins, Task::SemanticJoins] {
            reports.push(evaluate(&m.id(), &digest, &preds, &derived.ground_truth, t, &EvalConfig::default()));
        }
    }
    let manifest = fs::read(dir.path().join(MANIFEST_FILE)).map_err(|e| e.to_string())?;
    Ok((manifest, render_text(&reports), render_json(&reports)))
}

fn c9_determinism() -> Verdict {
    let cache = tempfile::tempdir().map_err(|e| e.to_string())?;
    let recorded = gateway_run(cache.path(), Mode::Record, Some(Box::new(common::scripted_provider(0))))?;
    let first = gateway_run(cache.path(), Mode::Replay, None)?;
    let second = gateway_run(cache.path(), Mode::Replay, None)?;
    check(first == second, || "replay runs differ".into())?;
    check(first == recorded, || "replay differs from the recording run".into())?;
    let entries = fs::read_dir(cache.path()).map_err(|e| e.to_string())?.count();
    Ok(format!("record + 2 replays byte-identical ({} manifest bytes, {entries} cache entries)", first.0.len()))
}

fn c10_llm_round_trip() -> Verdict {
    let (schemas, graph) = compile(FIBO_SUBSET, OntologyFormat::Native, &GroupingConfig::default()).map_err(|e| e.to_string())?;
    let cap = 50;
    let plan = plan_generation(&graph, &RowCaps::uniform(cap), Backend::Llm).map_err(|e| e.to_string())?;
    let cache = tempfile::tempdir().map_err(|e| e.to_string())?;
    let endpoint = std::env::var("LAKEFORGE_ENDPOINT").ok().filter(|e| !e.is_empty());
    let (gw, provider) = match &endpoint {
        Some(e) => {
            let cfg = GatewayConfig {
                endpoint: Some(e.clone()),
                api_key: std::env::var("LAKEFORGE_API_KEY").ok(),
                ..GatewayConfig::new(Mode::Record, cache.path())
            };
            (Gateway::new(cfg).map_err(|e| e.to_string())?, format!("endpoint {e}"))
        }
        None => (
            Gateway::with_transport(GatewayConfig::new(Mode::Record, cache.path()), Box::new(common::scripted_provider(10))),
            "scripted provider output, one malformed row in ten; no endpoint configured".into(),
        ),
    };
    let src = Source::Llm { completer: &gw, template: PromptTemplate::default() };
    let g = generate_base_tables(&schemas, &plan, &src, 10).map_err(|e| e.to_string())?;
    let rep = g.report.tables.iter().find(|t| t.table == "Listed Security").ok_or("no Listed Security report")?;
    let yield_ = rep.rows as f64 / cap as f64;
    check(yield_ >= MIN_ROW_YIELD, || format!("row yield {yield_:.2}"))?;
    let t = g.corpus.table("Listed Security").ok_or("no table")?;
    t.validate().map_err(|e| e.to_string())?;
    let schema = &t.schema;
    check(t.rows.iter().all(|r| r.len() == schema.columns.len() && r[schema.key_index()].is_some()), || "corrupt row".into())?;
    // Every cached completion re-parses into rows of the prompt's width.
    for entry in fs::read_dir(cache.path()).map_err(|e| e.to_string())? {
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(entry.map_err(|e| e.to_string())?.path()).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let (Some(prompt), Some(text)) = (v["request"]["prompt"].as_str(), v["response"].as_str()) else { continue };
        let Some(p) = common::parse_row_prompt(prompt) else { continue };
        if !prompt.contains("table named Listed Security") {
            continue;
        }
        let view = lakeforge::corpus::TableSchema {
            name: "Listed Security".into(),
            columns: p.columns.iter().map(|c| lakeforge::corpus::Column::new(c.clone(), c.clone(), lakeforge::corpus::Datatype::Text)).collect(),
            primary_key: String::new(),
        };
        if let Ok(parsed) = parse_completion(text, &view) {
            check(parsed.rows.iter().all(|r| r.len() == view.columns.len()), || "parsed row of wrong width".into())?;
        }
    }
    Ok(format!("Listed Security yield {}/{cap} = {yield_:.2}, {} lines skipped and logged ({provider})", rep.rows, rep.skipped_lines))
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, v: Verdict| match v {
        Ok(detail) => println!("PASS criterion {n} ({name}): {detail}"),
        Err(why) => {
            failed += 1;
            println!("FAIL criterion {n} ({name}): {why}");
        }
    };
    report(1, "fixture pipeline", c1_fixture_pipeline());
    report(2, "scale shape", c2_scale_shape());
    report(3, "ground-truth oracle equivalence", c3_ground_truth_oracle());
    report(4, "metric oracle equivalence", c4_metric_oracle());
    report(5, "JL correctness", c5_jl_correctness());
    report(6, "SF behavior", c6_sf_behavior());
    match trend_corpora().and_then(|c| run_trend(&c)) {
        Ok(runs) => {
            report(7, "trend reproduction", c7_trend(&runs));
            report(8, "difficulty decomposition", c8_difficulty(&runs));
        }
        Err(e) => {
            report(7, "trend reproduction", Err(e.clone()));
            report(8, "difficulty decomposition", Err(e));
        }
    }
    report(9, "determinism", c9_determinism());
    report(10, "LLM round trip", c10_llm_round_trip());
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
