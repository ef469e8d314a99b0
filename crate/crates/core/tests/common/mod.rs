#![allow(dead_code)]

use std::collections::HashMap;

use lakeforge::llm::{Completer, CompletionRequest, LlmError};
use lakeforge::perturb::OfflineParaphraser;
use regex::Regex;

/// Parsed pieces of a row-generation prompt.
pub struct RowPrompt {
    pub columns: Vec<String>,
    pub given: HashMap<String, Vec<String>>,
    pub n: usize,
    pub start: usize,
}

fn quoted(list: &str) -> Vec<String> {
    let re = Regex::new(r"'((?:[^'\\]|\\.)*)'").unwrap();
    re.captures_iter(list).map(|c| c[1].replace("\\'", "'")).collect()
}

pub fn parse_row_prompt(prompt: &str) -> Option<RowPrompt> {
    let cols = Regex::new(r"have the following columns: \[(.*)\]\.").unwrap();
    let given = Regex::new(r"^Given the entries of column '(.+?)' are \[(.*)\]\.$").unwrap();
    let instr = Regex::new(r"Generate (\d+) rows for the table, numbered from Example (\d+)\.").unwrap();
    let columns = quoted(&cols.captures(prompt)?[1]);
    let mut out = RowPrompt { columns, given: HashMap::new(), n: 0, start: 1 };
    for line in prompt.lines() {
        if let Some(c) = given.captures(line) {
            out.given.insert(c[1].to_string(), quoted(&c[2]));
        }
    }
    let c = instr.captures(prompt)?;
    out.n = c[1].parse().ok()?;
    out.start = c[2].parse().ok()?;
    Some(out)
}

/// Provider stand-in that answers row prompts in the `Example n:` reply format,
/// echoing the given dependency values, and answers value-paraphrase
/// prompts with the offline paraphraser. Every `malformed_every`-th row
/// loses a field, and every answer opens with a chatter line.
pub fn scripted_provider(malformed_every: usize) -> impl Completer {
    move |req: &CompletionRequest| -> Result<String, LlmError> {
        let Some(p) = parse_row_prompt(&req.prompt) else {
            return OfflineParaphraser.complete(req);
        };
        let mut out = String::from("Sure, here are the rows:\n");
        for k in 0..p.n {
            let row = p.start + k;
            let mut vals: Vec<String> = p
                .columns
                .iter()
                .map(|c| match p.given.get(c) {
                    Some(v) if !v.is_empty() => v[k % v.len()].clone(),
                    _ => format!("{c} {row}"),
                })
                .collect();
            if malformed_every > 0 && row % malformed_every == 0 {
                vals.pop();
            }
            out.push_str(&format!("Example {row}: {}\n", vals.join("; ")));
        }
        Ok(out)
    }
}
