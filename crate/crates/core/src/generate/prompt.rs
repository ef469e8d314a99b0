//! Prompt rendering and completion parsing in the few-shot `Example k:` format.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::GenError;
use crate::corpus::{ColumnRef, Row, TableSchema};

/// Maximum number of referenced values embedded in one prompt.
pub const DEP_CHUNK_BUDGET: usize = 100;
/// Rows requested per prompt.
pub const BATCH_ROWS: usize = 5;

const FEW_SHOT: &str = "The task is to generate row examples for the table. \
For example, the table named Securities Transaction has columns: ['Type', 'Count', 'Settlement Date', \
'Facilitated By Financial Service Account', 'Price Monetary Amount', 'refers To Listed Security']. \
And column 'Facilitated By Financial Service Account' comes from the 'Account Number' of table 'Financial Service Account'. \
Column 'Price Monetary Amount' comes from 'Amount' of table Monetary Amount. \
Column 'refers To Listed Security' comes from 'Legal Name' of table 'Listed Security'. \
The row examples should look like \
'Example 1: Buy; 1020; 01/20/2022; 310689442; 200; Apple Inc.; Example 2: Sell; 638; 02/22/2023; 432689224; 138; Microsoft Inc.'.";

/// Prompt fragments. Placeholders: `{table}`, `{columns}`, `{column}`,
/// `{ref_column}`, `{ref_table}`, `{values}`, `{n}`, `{start}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub few_shot_example: String,
    pub schema_clause: String,
    pub dependency_clause: String,
    pub given_clause: String,
    pub instruction_clause: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            few_shot_example: FEW_SHOT.to_string(),
            schema_clause: "Now, the table named {table} have the following columns: [{columns}].".into(),
            dependency_clause: "The entries from column '{column}' comes from '{ref_column}' of table '{ref_table}'.".into(),
            given_clause: "Given the entries of column '{column}' are [{values}].".into(),
            instruction_clause: "Generate {n} rows for the table, numbered from Example {start}.".into(),
        }
    }
}

/// A reference column and the values it must draw from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dependency {
    pub column: String,
    pub source: ColumnRef,
    pub values: Vec<String>,
}

fn quote(v: &str) -> String {
    format!("'{}'", v.replace('\'', "\\'"))
}

fn list(values: &[String]) -> String {
    values.iter().map(|v| quote(v)).collect::<Vec<_>>().join(", ")
}

fn render_one(t: &PromptTemplate, schema: &TableSchema, deps: &[(&Dependency, &[String])], n: usize, start: usize) -> String {
    let mut parts = vec![t.few_shot_example.clone()];
    parts.push(t.schema_clause.replace("{table}", &schema.name).replace("{columns}", &list(&schema.column_names())));
    for (d, _) in deps {
        parts.push(
            t.dependency_clause
                .replace("{column}", &d.column)
                .replace("{ref_column}", &d.source.column)
                .replace("{ref_table}", &d.source.table),
        );
    }
    for (d, values) in deps {
        parts.push(t.given_clause.replace("{column}", &d.column).replace("{values}", &list(values)));
    }
    parts.push(t.instruction_clause.replace("{n}", &n.to_string()).replace("{start}", &start.to_string()));
    parts.join("\n")
}

/// Renders the prompt(s) for one batch of `batch` rows.
///
/// Dependency value lists longer than [`DEP_CHUNK_BUDGET`] are split into
/// chunks, one prompt per chunk; the chunks of each dependency partition its
/// value list. A dependency with fewer chunks than the maximum is not
/// repeated in the later prompts.
pub fn render_prompt(
    t: &PromptTemplate,
    schema: &TableSchema,
    deps: &[Dependency],
    batch: usize,
) -> Result<Vec<String>, GenError> {
    render_prompt_at(t, schema, deps, batch, 1)
}

/// [`render_prompt`] with explicit example numbering.
pub fn render_prompt_at(
    t: &PromptTemplate,
    schema: &TableSchema,
    deps: &[Dependency],
    batch: usize,
    start: usize,
) -> Result<Vec<String>, GenError> {
    if let Some(d) = deps.iter().find(|d| d.values.is_empty()) {
        return Err(GenError::EmptyDependency { table: schema.name.clone(), column: d.column.clone() });
    }
    let chunked: Vec<Vec<&[String]>> = deps.iter().map(|d| d.values.chunks(DEP_CHUNK_BUDGET).collect()).collect();
    let prompts = chunked.iter().map(Vec::len).max().unwrap_or(1).max(1);
    Ok((0..prompts)
        .map(|p| {
            let active: Vec<(&Dependency, &[String])> = deps
                .iter()
                .zip(&chunked)
                .filter_map(|(d, chunks)| chunks.get(p).map(|c| (d, *c)))
                .collect();
            render_one(t, schema, &active, batch, start)
        })
        .collect())
}

fn marker() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"Example\s+(\d+)\s*:").expect("valid regex"))
}

/// Rows parsed from one completion.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedRows {
    pub rows: Vec<Row>,
    /// Non-empty lines or records that did not yield a row.
    pub skipped: usize,
    /// Rows dropped because their primary key repeated an earlier row.
    pub duplicates: usize,
}

fn parse_record(segment: &str, width: usize) -> Option<Row> {
    let mut values: Vec<&str> = segment.split(';').map(str::trim).collect();
    // Inline records end with the separator that precedes the next marker.
    if values.len() == width + 1 && values.last() == Some(&"") {
        values.pop();
    }
    (values.len() == width).then(|| {
        values
            .into_iter()
            .map(|v| if v.is_empty() { None } else { Some(v.to_string()) })
            .collect()
    })
}

/// Parses `Example k: v1; v2; ...` records. Several records may share a
/// line. Records of the wrong arity and stray lines are skipped and counted.
/// When the schema's primary key is one of its columns, repeated keys are
/// dropped (first wins), as are rows with a null key.
pub fn parse_completion(text: &str, schema: &TableSchema) -> Result<ParsedRows, GenError> {
    let width = schema.columns.len();
    let key = schema.column_index(&schema.primary_key);
    let mut out = ParsedRows::default();
    let mut seen = std::collections::HashSet::new();

    for line in text.lines() {
        let marks: Vec<_> = marker().find_iter(line).collect();
        if marks.is_empty() {
            if !line.trim().is_empty() {
                out.skipped += 1;
            }
            continue;
        }
        if !line[..marks[0].start()].trim().is_empty() {
            out.skipped += 1;
        }
        for (i, m) in marks.iter().enumerate() {
            let end = marks.get(i + 1).map_or(line.len(), |n| n.start());
            let Some(row) = parse_record(&line[m.end()..end], width) else {
                out.skipped += 1;
                continue;
            };
            if let Some(k) = key {
                match &row[k] {
                    None => {
                        out.skipped += 1;
                        continue;
                    }
                    Some(v) if !seen.insert(v.clone()) => {
                        out.duplicates += 1;
                        continue;
                    }
                    Some(_) => {}
                }
            }
            out.rows.push(row);
        }
    }
    if out.rows.is_empty() {
        return Err(GenError::NoRows { table: schema.name.clone(), raw: text.to_string() });
    }
    Ok(out)
}

/// Formats rows as a completion, one `Example k:` record per line.
pub fn render_completion(rows: &[Row]) -> String {
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            let vals: Vec<&str> = r.iter().map(|v| v.as_deref().unwrap_or("")).collect();
            format!("Example {}: {}", i + 1, vals.join("; "))
        })
        .collect::<Vec<_>>()
        .join("\n")
}
