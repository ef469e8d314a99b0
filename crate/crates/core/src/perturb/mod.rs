//! Derived tables from base tables through value, schema and shape
//! perturbations.
//!
//! A plan is an ordered list of steps. Each step selects tables and columns
//! by glob, runs its operators and records one lineage event per affected
//! output column. Ground truth is recomputed from lineage after every step.

mod ops;
mod semantic;

use std::collections::{BTreeMap, HashSet};

use glob::Pattern;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{ColumnRef, Corpus, Datatype, LineageEvent, LineageRef, TableData, ValueMapping};
use crate::llm::{Completer, LlmError};
use crate::text::derive_seed;
use crate::truth::{propagate_ground_truth, TruthError};

pub use ops::{
    cryptic_name, cryptify_headers, diff_mapping, duplicates, format_noise, header_typos, horizontal_split,
    inject_nulls, numeric_jitter, remove_columns, sample_rows, text_noise, typo, vertical_split, FormatKind,
    NoiseMode, VerticalSplit,
};
pub use semantic::{
    paraphrase_values, parse_semantic_response, parse_value_lines, render_semantic_prompt, OfflineParaphraser,
    SEMANTIC_CHUNK,
};

/// Plan shipped with the crate: two vertical splits per base table, then a
/// cryptified and typo-noised derivative and a semantically perturbed one.
pub const DEFAULT_PLAN: &str = include_str!("../../fixtures/default_plan.toml");

#[derive(Debug, thiserror::Error)]
pub enum PerturbError {
    #[error("plan line {line}: {message}")]
    Plan { line: usize, message: String },
    #[error("value `{0}` is not numeric")]
    NotNumeric(String),
    #[error("{0}")]
    Shape(String),
    #[error("semantic_value_perturb requires a completion backend")]
    NoBackend,
    #[error("step {step}, table `{table}`: {source}")]
    Step {
        step: usize,
        table: String,
        #[source]
        source: Box<PerturbError>,
    },
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Truth(#[from] TruthError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Value,
    Schema,
    Shape,
}

fn typos_mode() -> NoiseMode {
    NoiseMode::Typos
}

fn full_rate() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum PerturbOp {
    NumericJitter {
        rel_scale: f64,
    },
    Duplicates {
        rate: f64,
    },
    TextNoise {
        #[serde(default = "typos_mode")]
        mode: NoiseMode,
        rate: f64,
    },
    FormatNoise {
        kind: FormatKind,
        #[serde(default = "full_rate")]
        rate: f64,
    },
    InjectNulls {
        rate: f64,
    },
    CryptifyHeaders,
    HeaderTypos {
        rate: f64,
    },
    RemoveColumns {
        keep: Vec<String>,
    },
    SampleRows {
        fraction: f64,
    },
    VerticalSplit {
        overlap_ratio: f64,
        #[serde(default)]
        unique_key: bool,
    },
    HorizontalSplit {
        row_overlap_ratio: f64,
    },
    SemanticValuePerturb,
}

impl PerturbOp {
    pub fn name(&self) -> &'static str {
        match self {
            PerturbOp::NumericJitter { .. } => "numeric_jitter",
            PerturbOp::Duplicates { .. } => "duplicates",
            PerturbOp::TextNoise { .. } => "text_noise",
            PerturbOp::FormatNoise { .. } => "format_noise",
            PerturbOp::InjectNulls { .. } => "inject_nulls",
            PerturbOp::CryptifyHeaders => "cryptify_headers",
            PerturbOp::HeaderTypos { .. } => "header_typos",
            PerturbOp::RemoveColumns { .. } => "remove_columns",
            PerturbOp::SampleRows { .. } => "sample_rows",
            PerturbOp::VerticalSplit { .. } => "vertical_split",
            PerturbOp::HorizontalSplit { .. } => "horizontal_split",
            PerturbOp::SemanticValuePerturb => "semantic_value_perturb",
        }
    }

    pub fn family(&self) -> Family {
        match self {
            PerturbOp::CryptifyHeaders | PerturbOp::HeaderTypos { .. } => Family::Schema,
            PerturbOp::RemoveColumns { .. }
            | PerturbOp::SampleRows { .. }
            | PerturbOp::VerticalSplit { .. }
            | PerturbOp::HorizontalSplit { .. } => Family::Shape,
            _ => Family::Value,
        }
    }

    /// Rates lie in `[0, 1]`, ratios in `(0, 1)`, fractions in `(0, 1]`.
    pub fn validate(&self) -> Result<(), String> {
        let rate = |name: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(format!("{} {name} = {x} is outside [0, 1]", self.name()))
            }
        };
        let ratio = |name: &str, x: f64| {
            if x > 0.0 && x < 1.0 {
                Ok(())
            } else {
                Err(format!("{} {name} = {x} is outside (0, 1)", self.name()))
            }
        };
        match *self {
            PerturbOp::NumericJitter { rel_scale } => rate("rel_scale", rel_scale),
            PerturbOp::Duplicates { rate: r }
            | PerturbOp::TextNoise { rate: r, .. }
            | PerturbOp::FormatNoise { rate: r, .. }
            | PerturbOp::InjectNulls { rate: r }
            | PerturbOp::HeaderTypos { rate: r } => rate("rate", r),
            PerturbOp::SampleRows { fraction } if fraction > 0.0 && fraction <= 1.0 => Ok(()),
            PerturbOp::SampleRows { fraction } => Err(format!("sample_rows fraction = {fraction} is outside (0, 1]")),
            PerturbOp::VerticalSplit { overlap_ratio, .. } => ratio("overlap_ratio", overlap_ratio),
            PerturbOp::HorizontalSplit { row_overlap_ratio } => ratio("row_overlap_ratio", row_overlap_ratio),
            PerturbOp::RemoveColumns { ref keep } => {
                keep.iter().try_for_each(|k| Pattern::new(k).map(drop).map_err(|e| format!("keep pattern `{k}`: {e}")))
            }
            PerturbOp::CryptifyHeaders | PerturbOp::SemanticValuePerturb => Ok(()),
        }
    }

    /// Parameters as flat strings.
    fn params(&self) -> BTreeMap<String, String> {
        let serde_json::Value::Object(m) = serde_json::to_value(self).expect("ops serialize") else {
            return BTreeMap::new();
        };
        m.into_iter()
            .filter(|(k, _)| k != "op")
            .map(|(k, v)| {
                let s = match v {
                    serde_json::Value::String(s) => s,
                    serde_json::Value::Array(a) => {
                        a.iter().map(|x| x.as_str().map_or_else(|| x.to_string(), str::to_string)).collect::<Vec<_>>().join(",")
                    }
                    other => other.to_string(),
                };
                (k, s)
            })
            .collect()
    }
}

fn star() -> String {
    "*".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    /// Glob over table names.
    #[serde(default = "star")]
    pub tables: String,
    /// Glob over column names; value and schema ops only.
    #[serde(default = "star")]
    pub columns: String,
    /// Restricts the selection to base tables.
    #[serde(default)]
    pub base_only: bool,
    #[serde(default)]
    pub seed_offset: u64,
    /// Replace the selected tables instead of adding derivatives.
    #[serde(default)]
    pub replace: bool,
    pub ops: Vec<PerturbOp>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationPlan {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derived_table_target: Option<usize>,
    #[serde(default, rename = "step")]
    pub steps: Vec<Step>,
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Line of the `n`th `[[step]]` header (0-based `n`).
fn step_line(text: &str, n: usize) -> usize {
    text.lines()
        .enumerate()
        .filter(|(_, l)| l.trim_start().starts_with("[[step]]"))
        .nth(n)
        .map_or(1, |(i, _)| i + 1)
}

/// 1-based index of the step whose table encloses `line`, if any.
fn step_at(text: &str, line: usize) -> Option<usize> {
    let n = text.lines().take(line).filter(|l| l.trim_start().starts_with("[[step]]")).count();
    (n > 0).then_some(n)
}

impl PerturbationPlan {
    /// Parses and validates a TOML plan. Errors carry the offending line and
    /// step number.
    pub fn from_toml(text: &str) -> Result<Self, PerturbError> {
        let plan: PerturbationPlan = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(1, |s| line_of_offset(text, s.start));
            let message = match step_at(text, line) {
                Some(k) => format!("step {k}: {}", e.message()),
                None => e.message().to_string(),
            };
            PerturbError::Plan { line, message }
        })?;
        for (i, step) in plan.steps.iter().enumerate() {
            step.validate()
                .map_err(|m| PerturbError::Plan { line: step_line(text, i), message: format!("step {}: {m}", i + 1) })?;
        }
        Ok(plan)
    }

    pub fn default_plan() -> Self {
        Self::from_toml(DEFAULT_PLAN).expect("shipped plan is valid")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plans serialize")
    }
}

impl Step {
    pub fn validate(&self) -> Result<(), String> {
        if self.ops.is_empty() {
            return Err("step has no ops".into());
        }
        if self.ops.len() > 1 && self.ops.iter().any(|o| o.family() == Family::Shape) {
            return Err("a shape op must be the only op of its step".into());
        }
        for (what, p) in [("tables", &self.tables), ("columns", &self.columns)] {
            Pattern::new(p).map_err(|e| format!("{what} pattern `{p}`: {e}"))?;
        }
        self.ops.iter().try_for_each(PerturbOp::validate)
    }

    fn label(&self) -> String {
        self.ops.iter().map(PerturbOp::name).collect::<Vec<_>>().join("+")
    }

    fn params(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        for op in &self.ops {
            for (k, v) in op.params() {
                let key = if self.ops.len() > 1 { format!("{}.{k}", op.name()) } else { k };
                out.insert(key, v);
            }
        }
        out
    }
}

/// Result of applying a plan.
#[derive(Debug, Clone)]
pub struct Perturbed {
    pub corpus: Corpus,
    pub warnings: Vec<String>,
}

struct PendingEvent {
    source: LineageRef,
    result: LineageRef,
    params: BTreeMap<String, String>,
    mapping: Option<ValueMapping>,
}

struct Derived {
    source: String,
    outputs: Vec<TableData>,
    events: Vec<PendingEvent>,
    warnings: Vec<String>,
}

/// `n` fresh names `<src>__<op>_<k>` continuing after the highest existing `k`.
fn fresh_names(existing: &HashSet<&str>, src: &str, op: &str, n: usize) -> Vec<String> {
    let prefix = format!("{src}__{op}_");
    let top = existing
        .iter()
        .filter_map(|name| name.strip_prefix(&prefix)?.parse::<usize>().ok())
        .max()
        .unwrap_or(0);
    (1..=n).map(|i| format!("{prefix}{}", top + i)).collect()
}

fn is_numeric(d: Datatype) -> bool {
    matches!(d, Datatype::Integer | Datatype::Decimal)
}

struct StepCtx<'a> {
    corpus: &'a Corpus,
    step: &'a Step,
    names: &'a HashSet<&'a str>,
    columns: Pattern,
    backend: Option<&'a dyn Completer>,
}

impl StepCtx<'_> {
    fn derive(&self, t: &TableData) -> Result<Derived, PerturbError> {
        let seed = derive_seed(self.corpus.seed.wrapping_add(self.step.seed_offset), t.name());
        let op = &self.step.ops[0];
        if op.family() == Family::Shape {
            self.derive_shape(t, op, seed)
        } else {
            self.derive_values(t, seed)
        }
    }

    fn copy_events(&self, src: &TableData, outputs: &[TableData], extra: &BTreeMap<String, String>) -> Vec<PendingEvent> {
        let mut params = self.step.params();
        params.extend(extra.iter().map(|(k, v)| (k.clone(), v.clone())));
        outputs
            .iter()
            .flat_map(|o| {
                o.schema.columns.iter().map(|c| PendingEvent {
                    source: LineageRef::column(src.name(), c.name.clone()),
                    result: LineageRef::column(o.name(), c.name.clone()),
                    params: params.clone(),
                    mapping: None,
                })
            })
            .collect()
    }

    fn derive_shape(&self, t: &TableData, op: &PerturbOp, seed: u64) -> Result<Derived, PerturbError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut extra = BTreeMap::new();
        let outputs = match *op {
            PerturbOp::VerticalSplit { overlap_ratio, unique_key } => {
                let n = fresh_names(self.names, t.name(), op.name(), 2);
                let v = vertical_split(t, overlap_ratio, unique_key, (&n[0], &n[1]), &mut rng)?;
                extra.insert("shared".to_string(), v.shared.join(","));
                vec![v.a, v.b]
            }
            PerturbOp::HorizontalSplit { row_overlap_ratio } => {
                let n = fresh_names(self.names, t.name(), op.name(), 2);
                let (a, b) = horizontal_split(t, row_overlap_ratio, (&n[0], &n[1]), &mut rng)?;
                vec![a, b]
            }
            PerturbOp::RemoveColumns { ref keep } => {
                let n = fresh_names(self.names, t.name(), op.name(), 1);
                let pats: Vec<Pattern> = keep.iter().filter_map(|k| Pattern::new(k).ok()).collect();
                vec![remove_columns(t, |c| pats.iter().any(|p| p.matches(c)), &n[0])]
            }
            PerturbOp::SampleRows { fraction } => {
                let n = fresh_names(self.names, t.name(), op.name(), 1);
                vec![sample_rows(t, fraction, &n[0], &mut rng)]
            }
            _ => unreachable!("shape family"),
        };
        let events = self.copy_events(t, &outputs, &extra);
        Ok(Derived { source: t.name().to_string(), outputs, events, warnings: Vec::new() })
    }

    fn is_joinable(&self, table: &str, column: &str) -> bool {
        let r = ColumnRef::new(table, column);
        self.corpus.ground_truth.iter().any(|p| p.kind.is_exact_joinable() && (p.left == r || p.right == r))
    }

    fn derive_values(&self, t: &TableData, seed: u64) -> Result<Derived, PerturbError> {
        let out_name = if self.step.replace {
            t.name().to_string()
        } else {
            fresh_names(self.names, t.name(), self.step.ops[0].name(), 1).remove(0)
        };
        let mut work = t.clone();
        work.schema.name = out_name.clone();
        let original: Vec<String> = t.schema.column_names();
        let selected: Vec<bool> = original.iter().map(|c| self.columns.matches(c)).collect();
        let key = t.schema.key_index();
        let mut warnings = Vec::new();
        for (oi, op) in self.step.ops.iter().enumerate() {
            let op_seed = derive_seed(seed, &format!("{oi}:{}", op.name()));
            match op {
                PerturbOp::CryptifyHeaders | PerturbOp::HeaderTypos { .. } => {
                    let headers = work.schema.column_names();
                    let renamed = match *op {
                        PerturbOp::HeaderTypos { rate } => {
                            header_typos(&headers, &selected, rate, &mut ChaCha8Rng::seed_from_u64(op_seed))
                        }
                        _ => cryptify_headers(&headers, &selected),
                    };
                    work.schema.primary_key = renamed[key].clone();
                    for (c, n) in work.schema.columns.iter_mut().zip(renamed) {
                        c.name = n;
                    }
                }
                _ => {
                    for ci in (0..original.len()).filter(|&ci| selected[ci] && ci != key) {
                        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(op_seed, &original[ci]));
                        let values: Vec<Option<String>> = work.rows.iter().map(|r| r[ci].clone()).collect();
                        let col = &work.schema.columns[ci];
                        let new = match *op {
                            PerturbOp::NumericJitter { rel_scale } => {
                                if !is_numeric(col.datatype) {
                                    warnings.push(format!("{}.{}: numeric_jitter skipped on {} column", t.name(), original[ci], col.datatype));
                                    continue;
                                }
                                // An earlier op of the step may have reformatted the numbers.
                                if let Some(bad) = values.iter().flatten().find(|v| v.trim().parse::<f64>().is_err()) {
                                    warnings.push(format!("{}.{}: numeric_jitter skipped, `{bad}` is not numeric", t.name(), original[ci]));
                                    continue;
                                }
                                numeric_jitter(&values, rel_scale, &mut rng)?
                            }
                            PerturbOp::Duplicates { rate } => duplicates(&values, rate, &mut rng),
                            PerturbOp::TextNoise { mode, rate } => text_noise(&values, mode, rate, &mut rng),
                            PerturbOp::FormatNoise { kind, rate } => format_noise(&values, kind, rate, &mut rng),
                            PerturbOp::InjectNulls { rate } => inject_nulls(&values, rate, &mut rng),
                            PerturbOp::SemanticValuePerturb => {
                                if !self.is_joinable(t.name(), &original[ci]) {
                                    warnings.push(format!("{}.{}: semantic_value_perturb skipped on a column without exact joins", t.name(), original[ci]));
                                    continue;
                                }
                                let backend = self.backend.ok_or(PerturbError::NoBackend)?;
                                let (h, rejected) = paraphrase_values(backend, &work.schema, col, &values)?;
                                for r in rejected {
                                    warnings.push(format!("{}.{}: chunk starting at `{r}` left unperturbed", t.name(), original[ci]));
                                }
                                values.iter().map(|v| v.as_ref().map(|s| h.get(s).cloned().unwrap_or_else(|| s.clone()))).collect()
                            }
                            _ => unreachable!("value family"),
                        };
                        for (row, v) in work.rows.iter_mut().zip(new) {
                            row[ci] = v;
                        }
                    }
                }
            }
        }
        let params = self.step.params();
        let mut events = Vec::new();
        for (ci, orig) in original.iter().enumerate() {
            let before: Vec<Option<String>> = t.rows.iter().map(|r| r[ci].clone()).collect();
            let after: Vec<Option<String>> = work.rows.iter().map(|r| r[ci].clone()).collect();
            let mapping = diff_mapping(&before, &after);
            let renamed = work.schema.columns[ci].name != *orig;
            if self.step.replace && mapping.is_empty() && !renamed {
                continue;
            }
            events.push(PendingEvent {
                source: LineageRef::column(t.name(), orig.clone()),
                result: LineageRef::column(out_name.clone(), work.schema.columns[ci].name.clone()),
                params: params.clone(),
                mapping: (!mapping.is_empty()).then_some(mapping),
            });
        }
        Ok(Derived { source: t.name().to_string(), outputs: vec![work], events, warnings })
    }
}

/// Runs `plan` on a copy of `corpus`. Any step error discards the partial
/// result. `backend` answers semantic perturbation prompts.
pub fn apply_plan(
    corpus: &Corpus,
    plan: &PerturbationPlan,
    backend: Option<&dyn Completer>,
) -> Result<Perturbed, PerturbError> {
    let mut c = corpus.clone();
    let mut warnings = Vec::new();
    if plan.steps.is_empty() {
        let anchor = c.tables.first().map_or_else(String::new, |t| t.name().to_string());
        c.lineage.push(LineageEvent {
            id: format!("e{}", c.lineage.len() + 1),
            op: "noop".into(),
            source: LineageRef::table(anchor.clone()),
            result: LineageRef::table(anchor),
            params: BTreeMap::new(),
            mapping: None,
        });
        return Ok(Perturbed { corpus: c, warnings });
    }
    for (si, step) in plan.steps.iter().enumerate() {
        step.validate().map_err(|m| PerturbError::Plan { line: 0, message: format!("step {}: {m}", si + 1) })?;
        let table_pat = Pattern::new(&step.tables).expect("validated");
        let bases: HashSet<&str> = c.base_tables.iter().map(String::as_str).collect();
        let selected: Vec<&TableData> = c
            .tables
            .iter()
            .filter(|t| table_pat.matches(t.name()) && (!step.base_only || bases.contains(t.name())))
            .collect();
        if selected.is_empty() {
            let w = format!("step {}: selector `{}` matched no table", si + 1, step.tables);
            log::warn!("{w}");
            warnings.push(w);
            continue;
        }
        let names: HashSet<&str> = c.tables.iter().map(TableData::name).collect();
        let ctx = StepCtx {
            corpus: &c,
            step,
            names: &names,
            columns: Pattern::new(&step.columns).expect("validated"),
            backend,
        };
        let derived: Vec<Derived> = selected
            .par_iter()
            .map(|t| {
                ctx.derive(t).map_err(|e| PerturbError::Step { step: si + 1, table: t.name().to_string(), source: Box::new(e) })
            })
            .collect::<Result<_, _>>()?;

        let label = step.label();
        let parent = c.ground_truth.clone();
        let first_event = c.lineage.len();
        for d in derived {
            for w in d.warnings {
                log::warn!("{w}");
                warnings.push(w);
            }
            for e in d.events {
                c.lineage.push(LineageEvent {
                    id: format!("e{}", c.lineage.len() + 1),
                    op: label.clone(),
                    source: e.source,
                    result: e.result,
                    params: e.params,
                    mapping: e.mapping,
                });
            }
            if step.replace {
                let pos = c.tables.iter().position(|t| t.name() == d.source).expect("selected table present");
                c.tables.splice(pos..=pos, d.outputs);
                if c.table(&d.source).is_none() && c.base_tables.contains(&d.source) {
                    c.base_tables.retain(|b| *b != d.source);
                    let w = format!("base table `{}` was replaced", d.source);
                    log::warn!("{w}");
                    warnings.push(w);
                }
            } else {
                c.tables.extend(d.outputs);
            }
        }
        c.ground_truth = propagate_ground_truth(&parent, &c.lineage[first_event..], &c)?;
    }
    if let Some(target) = plan.derived_table_target {
        if c.tables.len() != target {
            let w = format!("plan produced {} tables, target is {target}", c.tables.len());
            log::warn!("{w}");
            warnings.push(w);
        }
    }
    Ok(Perturbed { corpus: c, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Column, JoinKind, TableSchema};
    use crate::truth::brute_force_ground_truth;

    fn base(n: usize) -> Corpus {
        let tables: Vec<TableData> = (0..n)
            .map(|i| TableData {
                schema: TableSchema {
                    name: format!("T{i:02}"),
                    columns: vec![
                        Column::new(format!("t{i}_id"), format!("T{i} ID"), Datatype::Integer),
                        Column::new("Currency", "Currency", Datatype::Text),
                        Column::new("Amount", "Amount", Datatype::Decimal),
                        Column::new("Legal Name", "Legal Name", Datatype::Text),
                        Column::new("City", "City", Datatype::Text),
                    ],
                    primary_key: format!("t{i}_id"),
                },
                rows: (0..30)
                    .map(|r| {
                        vec![
                            Some(format!("{}", (i + 1) * 100_000 + r)),
                            Some(["USD", "CAD", "EUR"][r % 3].to_string()),
                            Some(format!("{}.{:02}", 100 + r * 7 + i * 1000, r)),
                            Some(format!("Apex {r} Inc.")),
                            Some(format!("City {}", r % 7)),
                        ]
                    })
                    .collect(),
            })
            .collect();
        let mut c = Corpus {
            base_tables: tables.iter().map(|t| t.name().to_string()).collect(),
            tables,
            ground_truth: Vec::new(),
            lineage: Vec::new(),
            seed: 7,
        };
        c.ground_truth = brute_force_ground_truth(&c);
        c
    }

    #[test]
    fn default_plan_turns_20_bases_into_100_tables() {
        let out = apply_plan(&base(20), &PerturbationPlan::default_plan(), Some(&OfflineParaphraser)).unwrap();
        assert_eq!(out.corpus.tables.len(), 100);
        assert!(out.warnings.iter().all(|w| !w.contains("target")));
        out.corpus.validate().unwrap();
        let kinds: HashSet<JoinKind> = out.corpus.ground_truth.iter().map(|p| p.kind).collect();
        assert!(kinds.contains(&JoinKind::Semantic) && kinds.contains(&JoinKind::Pkfk));
        let cryptic = out.corpus.table("T00__vertical_split_1").unwrap();
        assert!(cryptic.schema.columns.iter().all(|c| c.name.len() <= 4));
    }

    #[test]
    fn empty_plan_only_marks_lineage() {
        let c = base(3);
        let out = apply_plan(&c, &PerturbationPlan::default(), None).unwrap().corpus;
        assert_eq!(out.tables, c.tables);
        assert_eq!(out.ground_truth, c.ground_truth);
        assert_eq!(out.lineage.len(), 1);
        assert_eq!(out.lineage[0].op, "noop");
    }

    #[test]
    fn one_split_per_base_gives_60_tables() {
        let plan = PerturbationPlan::from_toml("[[step]]\nbase_only = true\nops = [{ op = \"vertical_split\", overlap_ratio = 0.4 }]\n").unwrap();
        let out = apply_plan(&base(20), &plan, None).unwrap().corpus;
        assert_eq!(out.tables.len(), 60);
        assert!(out.table("T03__vertical_split_2").is_some());
    }

    #[test]
    fn every_derived_column_traces_back_to_a_base() {
        let out = apply_plan(&base(4), &PerturbationPlan::default_plan(), Some(&OfflineParaphraser)).unwrap().corpus;
        let bases: HashSet<&str> = out.base_tables.iter().map(String::as_str).collect();
        for t in out.tables.iter().filter(|t| !bases.contains(t.name())) {
            for col in &t.schema.columns {
                let mut cur = LineageRef::column(t.name(), col.name.clone());
                let mut upto = out.lineage.len();
                while let Some(i) = out.lineage[..upto].iter().rposition(|e| e.result == cur) {
                    cur = out.lineage[i].source.clone();
                    upto = i;
                }
                assert!(bases.contains(cur.table.as_str()), "{}.{} ends at {}", t.name(), col.name, cur.table);
            }
        }
    }

    #[test]
    fn value_step_mapping_replays_exactly() {
        let plan = PerturbationPlan::from_toml(
            "[[step]]\ncolumns = \"City\"\nops = [{ op = \"text_noise\", rate = 0.5 }, { op = \"inject_nulls\", rate = 0.1 }]\n",
        )
        .unwrap();
        let c = base(2);
        let out = apply_plan(&c, &plan, None).unwrap().corpus;
        let ev = out.lineage.iter().find(|e| e.result.column.as_deref() == Some("City")).unwrap();
        assert_eq!(ev.op, "text_noise+inject_nulls");
        let src: Vec<Option<String>> = c.tables[0].rows.iter().map(|r| r[4].clone()).collect();
        let dst: Vec<Option<String>> = out.table(&ev.result.table).unwrap().rows.iter().map(|r| r[4].clone()).collect();
        assert_eq!(ev.mapping.as_ref().unwrap().replay(&src), dst);
    }

    #[test]
    fn semantic_step_needs_a_backend_and_joinable_columns() {
        let plan = PerturbationPlan::from_toml("[[step]]\nops = [{ op = \"semantic_value_perturb\" }]\n").unwrap();
        let err = apply_plan(&base(2), &plan, None).unwrap_err();
        assert!(matches!(err, PerturbError::Step { ref source, .. } if matches!(**source, PerturbError::NoBackend)));
        let out = apply_plan(&base(2), &plan, Some(&OfflineParaphraser)).unwrap();
        let t = out.corpus.table("T00__semantic_value_perturb_1").unwrap();
        assert!(t.rows.iter().any(|r| r[1].as_deref() == Some("Canadian Dollar")));
        assert!(out.warnings.iter().any(|w| w.contains("Amount")));
    }

    #[test]
    fn plan_errors_cite_lines() {
        let text = "derived_table_target = 10\n\n[[step]]\nops = [{ op = \"cryptify_headers\" }]\n\n[[step]]\nops = [{ op = \"inject_nulls\", rate = 1.5 }]\n";
        match PerturbationPlan::from_toml(text) {
            Err(PerturbError::Plan { line, message }) => {
                assert_eq!(line, 6);
                assert!(message.contains("rate"));
            }
            other => panic!("{other:?}"),
        }
        let bad = "[[step]]\nops = [{ op = \"explode\" }]\n";
        assert!(matches!(PerturbationPlan::from_toml(bad), Err(PerturbError::Plan { line: 2, .. })));
        let mixed = "[[step]]\nops = [{ op = \"cryptify_headers\" }, { op = \"sample_rows\", fraction = 0.5 }]\n";
        assert!(matches!(PerturbationPlan::from_toml(mixed), Err(PerturbError::Plan { line: 1, .. })));
    }

    #[test]
    fn plans_round_trip_through_toml() {
        let p = PerturbationPlan::default_plan();
        assert_eq!(PerturbationPlan::from_toml(&p.to_toml()).unwrap(), p);
    }

    #[test]
    fn unmatched_selector_warns() {
        let plan = PerturbationPlan::from_toml("[[step]]\ntables = \"Nope*\"\nops = [{ op = \"cryptify_headers\" }]\n").unwrap();
        let out = apply_plan(&base(2), &plan, None).unwrap();
        assert_eq!(out.corpus.tables.len(), 2);
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn same_seed_same_result() {
        let p = PerturbationPlan::default_plan();
        let a = apply_plan(&base(5), &p, Some(&OfflineParaphraser)).unwrap().corpus;
        let b = apply_plan(&base(5), &p, Some(&OfflineParaphraser)).unwrap().corpus;
        assert_eq!(a.tables, b.tables);
        assert_eq!(a.lineage, b.lineage);
        assert_eq!(a.ground_truth, b.ground_truth);
    }
}
