//! LLM-backed value paraphrasing for joinable columns.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;
use std::sync::OnceLock;

use regex::Regex;

use super::ops::{expand_company_suffix, long_date};
use crate::corpus::{Column, TableSchema};
use crate::generate::{CURRENCY_CODES, STATES, STREET_SUFFIXES};
use crate::llm::{Completer, CompletionRequest, LlmError, PERTURBATION_TEMPERATURE};

/// Distinct values per prompt.
pub const SEMANTIC_CHUNK: usize = 20;

/// Prompt asking for an equivalent rewrite of each listed value.
pub fn render_semantic_prompt(schema: &TableSchema, column: &Column, values: &[&str]) -> String {
    let others: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).filter(|n| *n != column.name).collect();
    let mut p = String::new();
    let _ = writeln!(p, "Table: {}", schema.name);
    let _ = writeln!(p, "Other columns: [{}]", others.join(", "));
    let _ = writeln!(p, "Column: {} (semantic type: {})", column.name, column.semantic_type);
    let _ = writeln!(
        p,
        "For each value below, write a different surface form that a reader of this table would take to \
         denote the same real-world thing, such as an abbreviation, an expansion, a full name for a code \
         or another notation. Reply with exactly one line per value, formatted as \"Value k: <rewrite>\"."
    );
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(p, "Value {}: {v}", i + 1);
    }
    p
}

fn value_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?m)^\s*Value\s+(\d+)\s*:[ \t]?(.*?)\s*$").expect("valid regex"))
}

/// `Value k: v` lines of a text, keyed by `k`.
pub fn parse_value_lines(text: &str) -> BTreeMap<usize, String> {
    value_line()
        .captures_iter(text)
        .filter_map(|c| Some((c[1].parse().ok()?, c[2].to_string())))
        .collect()
}

/// Rewrites for one chunk, or `None` when the response does not answer
/// exactly values `1..=n`.
pub fn parse_semantic_response(text: &str, n: usize) -> Option<Vec<String>> {
    let lines = parse_value_lines(text);
    (lines.len() == n && lines.keys().copied().eq(1..=n)).then(|| lines.into_values().collect())
}

/// Old-to-new value function for the distinct non-null `values`. Values
/// whose rewrite is empty or identical are absent. Chunks whose response has
/// the wrong arity are left out and reported by their first value.
pub fn paraphrase_values(
    completer: &dyn Completer,
    schema: &TableSchema,
    column: &Column,
    values: &[Option<String>],
) -> Result<(HashMap<String, String>, Vec<String>), LlmError> {
    let mut distinct: Vec<&str> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for v in values.iter().flatten() {
        if seen.insert(v.as_str()) {
            distinct.push(v);
        }
    }
    let mut h = HashMap::new();
    let mut rejected = Vec::new();
    for chunk in distinct.chunks(SEMANTIC_CHUNK) {
        let req = CompletionRequest::new(render_semantic_prompt(schema, column, chunk), PERTURBATION_TEMPERATURE);
        let text = completer.complete(&req)?;
        match parse_semantic_response(&text, chunk.len()) {
            Some(new) => {
                for (old, new) in chunk.iter().zip(new) {
                    if !new.is_empty() && new != *old {
                        h.insert(old.to_string(), new);
                    }
                }
            }
            None => {
                log::warn!("{}.{}: response arity mismatch, chunk left unperturbed", schema.name, column.name);
                rejected.push(chunk[0].to_string());
            }
        }
    }
    Ok((h, rejected))
}

/// Deterministic stand-in for a paraphrasing model. Codes become names,
/// abbreviations expand or contract, dates and numbers change notation, and
/// anything else flips case.
#[derive(Debug, Clone, Copy, Default)]
pub struct OfflineParaphraser;

impl OfflineParaphraser {
    pub fn paraphrase(v: &str) -> String {
        if let Some((_, name)) = CURRENCY_CODES.iter().find(|(code, _)| *code == v) {
            return name.to_string();
        }
        if let Some((_, name)) = STATES.iter().find(|(code, _)| *code == v) {
            return name.to_string();
        }
        if let Some((head, last)) = v.rsplit_once(' ') {
            if let Some((_, abbr)) = STREET_SUFFIXES.iter().find(|(full, _)| *full == last) {
                return format!("{head} {abbr}");
            }
        }
        if let Some(s) = expand_company_suffix(v) {
            return s;
        }
        if let Some(s) = long_date(v) {
            return s;
        }
        if !v.is_empty() && v.bytes().all(|b| b.is_ascii_digit()) && v.len() < 8 {
            return format!("{v:0>8}");
        }
        if let Some(s) = grouped_decimal(v) {
            return s;
        }
        if v.chars().any(char::is_lowercase) {
            v.to_uppercase()
        } else {
            v.to_lowercase()
        }
    }
}

/// `1234.5` → `1,234.500`.
fn grouped_decimal(v: &str) -> Option<String> {
    let (neg, body) = v.strip_prefix('-').map_or((false, v), |b| (true, b));
    let (int, frac) = body.split_once('.')?;
    if int.is_empty() || !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let mut grouped = String::new();
    for (i, c) in int.chars().enumerate() {
        if i > 0 && (int.len() - i) % 3 == 0 {
            grouped.push(',');
        }
        grouped.push(c);
    }
    let frac = format!("{frac:0<3}");
    Some(format!("{}{grouped}.{frac}", if neg { "-" } else { "" }))
}

impl Completer for OfflineParaphraser {
    fn complete(&self, req: &CompletionRequest) -> Result<String, LlmError> {
        let mut out = String::new();
        for (k, v) in parse_value_lines(&req.prompt) {
            let _ = writeln!(out, "Value {k}: {}", Self::paraphrase(&v));
        }
        Ok(out)
    }
}
