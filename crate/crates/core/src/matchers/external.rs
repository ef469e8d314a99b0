//! Adapter for matchers that run as separate processes.
//!
//! The command template is run through `sh -c` with `{corpus}` replaced by
//! the corpus directory and `{out}` by a predictions file path. Without
//! `{out}`, predictions are read from standard output.

use std::path::{Path, PathBuf};
use std::process::Command;

use super::{canonicalize_predictions, MatchError, MatchPrediction, Matcher};
use crate::corpus::{ColumnRef, Corpus, TableData};

pub const PREDICTIONS_HEADER: [&str; 5] = ["left_table", "left_column", "right_table", "right_column", "score"];

/// Predictions as CSV with a header row and six-decimal scores.
pub fn write_predictions(preds: &[MatchPrediction]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(PREDICTIONS_HEADER).expect("in-memory write");
    for p in preds {
        w.write_record([
            p.left.table.as_str(),
            p.left.column.as_str(),
            p.right.table.as_str(),
            p.right.column.as_str(),
            &format!("{:.6}", p.score),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

/// Parses predictions CSV (header optional) and checks every reference
/// against `corpus` and every score against `[0, 1]`.
pub fn read_predictions(text: &str, corpus: &Corpus) -> Result<Vec<MatchPrediction>, MatchError> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line_hint = i + 1;
        let rec = rec.map_err(|e| MatchError::Predictions {
            line: e.position().map_or(line_hint, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(line_hint, |p| p.line() as usize);
        let err = |message: String| MatchError::Predictions { line, message };
        if i == 0 && rec.iter().eq(PREDICTIONS_HEADER) {
            continue;
        }
        if rec.len() != 5 {
            return Err(err(format!("expected 5 fields, found {}", rec.len())));
        }
        let left = ColumnRef::new(&rec[0], &rec[1]);
        let right = ColumnRef::new(&rec[2], &rec[3]);
        for c in [&left, &right] {
            if corpus.column(c).is_none() {
                return Err(err(format!("unknown column {c}")));
            }
        }
        if left.table == right.table {
            return Err(err(format!("{left} and {right} are in the same table")));
        }
        let score: f64 = rec[4].trim().parse().map_err(|_| err(format!("score `{}` is not a number", &rec[4])))?;
        if !score.is_finite() || !(0.0..=1.0).contains(&score) {
            return Err(err(format!("score {score} is outside [0, 1]")));
        }
        out.push(MatchPrediction::new(left, right, score));
    }
    canonicalize_predictions(&mut out);
    Ok(out)
}

/// Runs `command` against the corpus saved in `corpus_dir`.
pub fn external_match(corpus_dir: &Path, command: &str, corpus: &Corpus) -> Result<Vec<MatchPrediction>, MatchError> {
    let tmp = tempfile::tempdir().map_err(|e| MatchError::External(e.to_string()))?;
    let out_path = tmp.path().join("predictions.csv");
    let uses_out = command.contains("{out}");
    let cmd = command
        .replace("{corpus}", &shell_quote(&corpus_dir.display().to_string()))
        .replace("{out}", &shell_quote(&out_path.display().to_string()));
    let output = Command::new("sh")
        .arg("-c")
        .arg(&cmd)
        .output()
        .map_err(|e| MatchError::External(format!("cannot run `{cmd}`: {e}")))?;
    if !output.status.success() {
        return Err(MatchError::External(format!(
            "`{cmd}` exited with {}: {}",
            output.status,
            String::from_utf8_lossy(&output.stderr).trim()
        )));
    }
    let text = if uses_out {
        std::fs::read_to_string(&out_path)
            .map_err(|e| MatchError::Io { path: out_path.display().to_string(), message: e.to_string() })?
    } else {
        String::from_utf8_lossy(&output.stdout).into_owned()
    };
    read_predictions(&text, corpus)
}

fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

/// A corpus-level matcher backed by an external command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalMatcher {
    pub command: String,
    pub corpus_dir: PathBuf,
}

impl Matcher for ExternalMatcher {
    fn id(&self) -> String {
        format!("external({})", self.command)
    }

    fn match_tables(&self, _: &TableData, _: &TableData) -> Vec<MatchPrediction> {
        Vec::new()
    }

    fn match_corpus(&self, corpus: &Corpus) -> Result<Vec<MatchPrediction>, MatchError> {
        external_match(&self.corpus_dir, &self.command, corpus)
    }
}
