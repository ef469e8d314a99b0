//! Base-table population in dependency order.
//!
//! Tables are generated wave by wave: a table is generated only after every
//! table it references. Reference columns draw their values from the
//! referenced primary key, so every declared join is a PK/FK pair.

mod prompt;
mod synth;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{ColumnRef, Corpus, Datatype, Row, TableData, TableSchema};
use crate::llm::{Completer, CompletionRequest, LlmError, GENERATION_TEMPERATURE};
use crate::ontology::{DependencyGraph, OntologyError, SchemaSet};
use crate::text::derive_seed;

pub use prompt::{
    parse_completion, render_completion, render_prompt, render_prompt_at, Dependency, ParsedRows, PromptTemplate,
    BATCH_ROWS, DEP_CHUNK_BUDGET,
};
pub use synth::{synthesize_offline, synthesize_offline_unique};
#[allow(unused_imports)]
pub(crate) use synth::{COMPANY_SUFFIXES, CURRENCY_CODES, STATES, STREET_SUFFIXES};

pub const DEFAULT_ROW_CAP: usize = 1000;

#[derive(Debug, thiserror::Error)]
pub enum GenError {
    #[error(transparent)]
    Ontology(#[from] OntologyError),
    #[error("table `{table}`: {source}")]
    Llm {
        table: String,
        #[source]
        source: LlmError,
    },
    #[error("table `{table}`: completion yielded no parseable rows; raw text:\n{raw}")]
    NoRows { table: String, raw: String },
    #[error("table `{table}`: dependency column `{column}` has no values to draw from")]
    EmptyDependency { table: String, column: String },
    #[error("table `{table}` references `{referenced}`, which has no rows")]
    EmptyReference { table: String, referenced: String },
    #[error("generation plan does not match the schema set: {0}")]
    Plan(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Llm,
    Offline,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowCaps {
    pub default: usize,
    pub per_table: BTreeMap<String, usize>,
}

impl Default for RowCaps {
    fn default() -> Self {
        RowCaps::uniform(DEFAULT_ROW_CAP)
    }
}

impl RowCaps {
    pub fn uniform(cap: usize) -> Self {
        RowCaps { default: cap, per_table: BTreeMap::new() }
    }

    pub fn cap(&self, table: &str) -> usize {
        self.per_table.get(table).copied().unwrap_or(self.default)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationPlan {
    /// Generation waves; each wave is sorted lexicographically.
    pub order: Vec<Vec<String>>,
    pub row_caps: BTreeMap<String, usize>,
    pub backend: Backend,
}

impl GenerationPlan {
    pub fn wave_of(&self, table: &str) -> Option<usize> {
        self.order.iter().position(|w| w.iter().any(|t| t == table))
    }
}

/// Kahn layering: wave 0 holds the tables with no dependencies, and wave k
/// the tables whose dependencies all lie in earlier waves. Self-loops are
/// ignored.
pub fn plan_generation(g: &DependencyGraph, caps: &RowCaps, backend: Backend) -> Result<GenerationPlan, GenError> {
    if let Some(cycle) = g.find_cycle() {
        return Err(OntologyError::Cycle { cycle }.into());
    }
    let mut remaining: BTreeMap<&str, usize> = g.nodes.iter().map(|n| (n.as_str(), g.out_degree(n))).collect();
    let mut order: Vec<Vec<String>> = Vec::new();
    while !remaining.is_empty() {
        let wave: Vec<String> = remaining.iter().filter(|(_, d)| **d == 0).map(|(n, _)| n.to_string()).collect();
        debug_assert!(!wave.is_empty(), "acyclic graph always has a ready node");
        for t in &wave {
            remaining.remove(t.as_str());
        }
        for (n, d) in remaining.iter_mut() {
            *d -= g.dependencies(n).filter(|x| x != n && wave.iter().any(|w| w == x)).count();
        }
        order.push(wave);
    }
    let row_caps = g.nodes.iter().map(|n| (n.clone(), caps.cap(n))).collect();
    Ok(GenerationPlan { order, row_caps, backend })
}

/// Per-table generation counters.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableReport {
    pub table: String,
    pub rows: usize,
    pub repaired: usize,
    pub skipped_lines: usize,
    pub duplicates_dropped: usize,
    pub prompts: usize,
    pub failed_prompts: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub tables: Vec<TableReport>,
}

impl GenerationReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<40} {:>6} {:>8} {:>8} {:>6} {:>8} {:>7}",
            "table", "rows", "repaired", "skipped", "dups", "prompts", "failed"
        );
        for t in &self.tables {
            let _ = writeln!(
                s,
                "{:<40} {:>6} {:>8} {:>8} {:>6} {:>8} {:>7}",
                t.table, t.rows, t.repaired, t.skipped_lines, t.duplicates_dropped, t.prompts, t.failed_prompts
            );
        }
        s
    }
}

/// Where row values come from.
pub enum Source<'a> {
    Offline,
    Llm { completer: &'a dyn Completer, template: PromptTemplate },
}

/// A reference column of a table and the key it draws from.
struct Reference {
    column: usize,
    table: String,
    key: usize,
    key_name: String,
}

/// Value offset of synthetic keys for the table at `index`, so unrelated
/// tables' keys never coincide.
pub fn synthetic_key_offset(index: usize) -> u64 {
    (index as u64 + 1) * 100_000
}

fn is_synthetic_key(schema: &TableSchema) -> bool {
    schema.primary_key == crate::ontology::synthetic_key_name(&schema.name)
        && schema.columns[schema.key_index()].datatype == Datatype::Integer
}

struct Context<'a> {
    schemas: &'a SchemaSet,
    refs: HashMap<&'a str, Vec<Reference>>,
    seed: u64,
}

fn generate_table(
    ctx: &Context<'_>,
    index: usize,
    cap: usize,
    done: &HashMap<String, TableData>,
    source: &Source<'_>,
) -> Result<(TableData, TableReport), GenError> {
    let schema = &ctx.schemas.tables[index];
    let name = schema.name.clone();
    let seed = derive_seed(ctx.seed, &name);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let refs = ctx.refs.get(name.as_str()).map(Vec::as_slice).unwrap_or(&[]);
    let key = schema.key_index();
    let synthetic = is_synthetic_key(schema);
    let mut report = TableReport { table: name.clone(), ..Default::default() };

    let key_values: Vec<String> = if synthetic {
        let base = synthetic_key_offset(index);
        (1..=cap as u64).map(|k| (base + k).to_string()).collect()
    } else {
        synthesize_offline_unique(&schema.columns[key], cap, seed)
    };

    // Referenced key values. A self-reference draws from the table's own keys.
    let mut pools: Vec<Vec<String>> = Vec::with_capacity(refs.len());
    for r in refs {
        let pool: Vec<String> = if r.table == name {
            key_values.clone()
        } else {
            let t = done.get(&r.table).ok_or_else(|| GenError::Plan(format!("`{}` generated before `{}`", name, r.table)))?;
            t.column_values(r.key).flatten().map(str::to_string).collect()
        };
        if pool.is_empty() && cap > 0 {
            return Err(GenError::EmptyReference { table: name, referenced: r.table.clone() });
        }
        pools.push(pool);
    }

    let mut rows: Vec<Row> = match source {
        Source::Offline => {
            let mut rows: Vec<Row> = (0..cap).map(|_| vec![None; schema.columns.len()]).collect();
            for (ci, col) in schema.columns.iter().enumerate() {
                if ci == key {
                    for (row, v) in rows.iter_mut().zip(&key_values) {
                        row[ci] = Some(v.clone());
                    }
                } else if let Some(ri) = refs.iter().position(|r| r.column == ci) {
                    for row in rows.iter_mut() {
                        row[ci] = pools[ri].choose(&mut rng).cloned();
                    }
                } else {
                    let values = synthesize_offline(col, cap, derive_seed(seed, &col.name));
                    for (row, v) in rows.iter_mut().zip(values) {
                        row[ci] = Some(v);
                    }
                }
            }
            rows
        }
        Source::Llm { completer, template } => {
            llm_rows(schema, synthetic, refs, &pools, &key_values, cap, *completer, template, &mut rng, &mut report)?
        }
    };

    // Repair: reference values must come from the referenced key.
    rows.truncate(cap);
    let own_keys: Vec<String> = rows.iter().filter_map(|r| r[key].clone()).collect();
    for (r, pool) in refs.iter().zip(&pools) {
        let pool = if r.table == name { &own_keys } else { pool };
        let allowed: HashSet<&str> = pool.iter().map(String::as_str).collect();
        for row in rows.iter_mut() {
            let ok = row[r.column].as_deref().is_some_and(|v| allowed.contains(v));
            if !ok {
                row[r.column] = pool.choose(&mut rng).cloned();
                report.repaired += 1;
            }
        }
    }
    if report.repaired > 0 {
        log::info!("table `{name}`: repaired {} reference values", report.repaired);
    }
    report.rows = rows.len();
    Ok((TableData { schema: schema.clone(), rows }, report))
}

#[allow(clippy::too_many_arguments)]
fn llm_rows(
    schema: &TableSchema,
    synthetic: bool,
    refs: &[Reference],
    pools: &[Vec<String>],
    key_values: &[String],
    cap: usize,
    completer: &dyn Completer,
    template: &PromptTemplate,
    rng: &mut ChaCha8Rng,
    report: &mut TableReport,
) -> Result<Vec<Row>, GenError> {
    let key = schema.key_index();
    // Synthetic keys are assigned locally and never shown to the model.
    let prompt_cols: Vec<usize> = (0..schema.columns.len()).filter(|&c| !(synthetic && c == key)).collect();
    let view = TableSchema {
        name: schema.name.clone(),
        columns: prompt_cols.iter().map(|&c| schema.columns[c].clone()).collect(),
        primary_key: schema.primary_key.clone(),
    };
    // Pre-sampled reference values, one per target row.
    let planned: Vec<Vec<String>> =
        pools.iter().map(|p| (0..cap).map(|_| p.choose(rng).cloned().expect("non-empty pool")).collect()).collect();

    let mut rows: Vec<Row> = Vec::new();
    let mut seen_keys = HashSet::new();
    let batches = cap.div_ceil(BATCH_ROWS);
    for b in 0..batches {
        if rows.len() >= cap {
            break;
        }
        let lo = b * BATCH_ROWS;
        let hi = (lo + BATCH_ROWS).min(cap);
        let deps: Vec<Dependency> = refs
            .iter()
            .zip(&planned)
            .map(|(r, vals)| Dependency {
                column: schema.columns[r.column].name.clone(),
                source: ColumnRef::new(r.table.clone(), r.key_name.clone()),
                values: vals[lo..hi].to_vec(),
            })
            .collect();
        for prompt in render_prompt_at(template, &view, &deps, hi - lo, lo + 1)? {
            report.prompts += 1;
            let req = CompletionRequest::new(prompt, GENERATION_TEMPERATURE);
            let text = completer.complete(&req).map_err(|e| GenError::Llm { table: schema.name.clone(), source: e })?;
            match parse_completion(&text, &view) {
                Ok(parsed) => {
                    report.skipped_lines += parsed.skipped;
                    report.duplicates_dropped += parsed.duplicates;
                    for partial in parsed.rows {
                        let mut row: Row = vec![None; schema.columns.len()];
                        for (v, &c) in partial.into_iter().zip(&prompt_cols) {
                            row[c] = v;
                        }
                        if synthetic {
                            row[key] = key_values.get(rows.len()).cloned();
                        }
                        match &row[key] {
                            Some(k) if seen_keys.insert(k.clone()) => rows.push(row),
                            _ => report.duplicates_dropped += 1,
                        }
                    }
                }
                Err(GenError::NoRows { raw, .. }) => {
                    report.failed_prompts += 1;
                    report.skipped_lines += raw.lines().filter(|l| !l.trim().is_empty()).count();
                    log::warn!("table `{}`: prompt yielded no rows", schema.name);
                }
                Err(e) => return Err(e),
            }
        }
    }
    if rows.is_empty() && cap > 0 {
        return Err(GenError::NoRows { table: schema.name.clone(), raw: String::new() });
    }
    Ok(rows)
}

/// Output of [`generate_base_tables`].
#[derive(Debug, Clone)]
pub struct Generated {
    pub corpus: Corpus,
    pub report: GenerationReport,
}

/// Populates every table of `s` in plan order. The resulting corpus carries
/// the declared joins as PK/FK pairs plus every other value-overlapping
/// column pair.
pub fn generate_base_tables(
    s: &SchemaSet,
    plan: &GenerationPlan,
    source: &Source<'_>,
    seed: u64,
) -> Result<Generated, GenError> {
    let planned: HashSet<&str> = plan.order.iter().flatten().map(String::as_str).collect();
    if planned.len() != s.tables.len() || s.tables.iter().any(|t| !planned.contains(t.name.as_str())) {
        return Err(GenError::Plan("plan and schema set list different tables".into()));
    }
    let index: HashMap<&str, usize> = s.tables.iter().enumerate().map(|(i, t)| (t.name.as_str(), i)).collect();
    let mut refs: HashMap<&str, Vec<Reference>> = HashMap::new();
    for j in &s.relationships {
        let from = &s.tables[index[j.from.table.as_str()]];
        let to = &s.tables[index[j.to.table.as_str()]];
        refs.entry(from.name.as_str()).or_default().push(Reference {
            column: from.column_index(&j.from.column).expect("validated join"),
            table: to.name.clone(),
            key: to.column_index(&j.to.column).expect("validated join"),
            key_name: j.to.column.clone(),
        });
    }
    let ctx = Context { schemas: s, refs, seed };

    let mut done: HashMap<String, TableData> = HashMap::new();
    let mut reports: HashMap<String, TableReport> = HashMap::new();
    for wave in &plan.order {
        for t in wave {
            if let Some(w) = ctx.refs.get(t.as_str()) {
                if let Some(r) = w.iter().find(|r| r.table != *t && !done.contains_key(&r.table)) {
                    return Err(GenError::Plan(format!("`{t}` is planned before its dependency `{}`", r.table)));
                }
            }
        }
        let results: Vec<Result<(TableData, TableReport), GenError>> = wave
            .par_iter()
            .map(|t| generate_table(&ctx, index[t.as_str()], plan.row_caps.get(t).copied().unwrap_or(DEFAULT_ROW_CAP), &done, source))
            .collect();
        for r in results {
            let (data, rep) = r?;
            reports.insert(data.schema.name.clone(), rep);
            done.insert(data.schema.name.clone(), data);
        }
    }

    let tables: Vec<TableData> = s.tables.iter().map(|t| done.remove(&t.name).expect("generated")).collect();
    let report = GenerationReport { tables: s.tables.iter().map(|t| reports.remove(&t.name).expect("reported")).collect() };
    let mut corpus = Corpus {
        base_tables: tables.iter().map(|t| t.schema.name.clone()).collect(),
        tables,
        ground_truth: Vec::new(),
        lineage: Vec::new(),
        seed,
    };
    corpus.ground_truth = crate::truth::brute_force_ground_truth(&corpus);
    Ok(Generated { corpus, report })
}
