//! The corpus data model shared by every stage of the pipeline.
//!
//! Cell values are strings; `None` is the null marker and is written to CSV
//! as an empty field. Numeric operations parse cells on demand.

mod manifest;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use manifest::{corpus_digest, load_corpus, save_corpus, Manifest, TableEntry, MANIFEST_FILE, MANIFEST_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {message}")]
    Csv { path: String, message: String },
    #[error("malformed manifest: {0}")]
    Manifest(String),
    #[error("table `{table}` row {row}: expected {expected} fields, found {found}")]
    Arity {
        table: String,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("table `{table}`: header mismatch, expected {expected:?}, found {found:?}")]
    Header {
        table: String,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("digest mismatch: manifest says {expected}, contents hash to {actual}")]
    Digest { expected: String, actual: String },
    #[error("stats mismatch: manifest says {expected:?}, recount gives {actual:?}")]
    Stats {
        expected: Box<CorpusStats>,
        actual: Box<CorpusStats>,
    },
    #[error("invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Datatype {
    Text,
    Integer,
    Decimal,
    Date,
    Categorical,
}

impl Datatype {
    pub fn as_str(self) -> &'static str {
        match self {
            Datatype::Text => "text",
            Datatype::Integer => "integer",
            Datatype::Decimal => "decimal",
            Datatype::Date => "date",
            Datatype::Categorical => "categorical",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "text" | "string" => Some(Datatype::Text),
            "integer" | "int" => Some(Datatype::Integer),
            "decimal" | "float" | "double" | "number" => Some(Datatype::Decimal),
            "date" | "datetime" => Some(Datatype::Date),
            "categorical" | "category" => Some(Datatype::Categorical),
            _ => None,
        }
    }
}

impl fmt::Display for Datatype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub semantic_type: String,
    pub datatype: Datatype,
}

impl Column {
    pub fn new(name: impl Into<String>, semantic_type: impl Into<String>, datatype: Datatype) -> Self {
        Column {
            name: name.into(),
            semantic_type: semantic_type.into(),
            datatype,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSchema {
    pub name: String,
    pub columns: Vec<Column>,
    pub primary_key: String,
}

impl TableSchema {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn key_index(&self) -> usize {
        self.column_index(&self.primary_key)
            .expect("primary key resolves (checked by validate)")
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut seen = HashSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(CorpusError::Invariant(format!(
                    "table `{}` has duplicate column `{}`",
                    self.name, c.name
                )));
            }
        }
        if self.column_index(&self.primary_key).is_none() {
            return Err(CorpusError::Invariant(format!(
                "table `{}`: primary key `{}` is not a column",
                self.name, self.primary_key
            )));
        }
        Ok(())
    }
}

pub type Row = Vec<Option<String>>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableData {
    pub schema: TableSchema,
    pub rows: Vec<Row>,
}

impl TableData {
    pub fn new(schema: TableSchema) -> Self {
        TableData { schema, rows: Vec::new() }
    }

    pub fn name(&self) -> &str {
        &self.schema.name
    }

    /// Cell values of one column, in row order.
    pub fn column_values(&self, idx: usize) -> impl Iterator<Item = Option<&str>> {
        self.rows.iter().map(move |r| r[idx].as_deref())
    }

    /// Distinct non-null values of one column.
    pub fn distinct_values(&self, idx: usize) -> BTreeSet<&str> {
        self.column_values(idx).flatten().collect()
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        self.schema.validate()?;
        let width = self.schema.columns.len();
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != width {
                return Err(CorpusError::Arity {
                    table: self.schema.name.clone(),
                    row: i + 1,
                    expected: width,
                    found: row.len(),
                });
            }
        }
        let key = self.schema.key_index();
        let mut seen = HashSet::new();
        for (i, row) in self.rows.iter().enumerate() {
            match &row[key] {
                None => {
                    return Err(CorpusError::Invariant(format!(
                        "table `{}` row {}: null primary key",
                        self.schema.name,
                        i + 1
                    )))
                }
                Some(v) => {
                    if !seen.insert(v.as_str()) {
                        return Err(CorpusError::Invariant(format!(
                            "table `{}` row {}: duplicate primary key `{v}`",
                            self.schema.name,
                            i + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// A `(table, column)` reference. Ordering is lexicographic on table then
/// column, which defines canonical pair order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ColumnRef {
    pub table: String,
    pub column: String,
}

impl ColumnRef {
    pub fn new(table: impl Into<String>, column: impl Into<String>) -> Self {
        ColumnRef {
            table: table.into(),
            column: column.into(),
        }
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.table, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JoinKind {
    Exact,
    Semantic,
    Pkfk,
}

impl JoinKind {
    /// Exact and PK/FK pairs are both equi-joinable under the identity mapping.
    pub fn is_exact_joinable(self) -> bool {
        matches!(self, JoinKind::Exact | JoinKind::Pkfk)
    }
}

impl fmt::Display for JoinKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JoinKind::Exact => "exact",
            JoinKind::Semantic => "semantic",
            JoinKind::Pkfk => "pkfk",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Difficult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn flip(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

/// An unordered, annotated column pair. Construct with [`JoinPair::new`] so
/// that `left <= right` always holds.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JoinPair {
    pub left: ColumnRef,
    pub right: ColumnRef,
    pub kind: JoinKind,
    pub difficulty: Difficulty,
    /// Which side holds the primary key, for `pkfk` pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_side: Option<Side>,
    /// Lineage event whose value mapping connects the pair, for `semantic` pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapping_id: Option<String>,
}

impl JoinPair {
    pub fn new(
        a: ColumnRef,
        b: ColumnRef,
        kind: JoinKind,
        difficulty: Difficulty,
        key_side: Option<Side>,
        mapping_id: Option<String>,
    ) -> Self {
        if a <= b {
            JoinPair { left: a, right: b, kind, difficulty, key_side, mapping_id }
        } else {
            JoinPair {
                left: b,
                right: a,
                kind,
                difficulty,
                key_side: key_side.map(Side::flip),
                mapping_id,
            }
        }
    }

    pub fn key(&self) -> (ColumnRef, ColumnRef) {
        (self.left.clone(), self.right.clone())
    }

    pub fn is_canonical(&self) -> bool {
        self.left < self.right
    }
}

/// Orders two column references canonically.
pub fn canonical_pair(a: ColumnRef, b: ColumnRef) -> (ColumnRef, ColumnRef) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LineageRef {
    pub table: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
}

impl LineageRef {
    pub fn column(table: impl Into<String>, column: impl Into<String>) -> Self {
        LineageRef { table: table.into(), column: Some(column.into()) }
    }

    pub fn table(table: impl Into<String>) -> Self {
        LineageRef { table: table.into(), column: None }
    }

    pub fn as_column_ref(&self) -> Option<ColumnRef> {
        self.column.as_ref().map(|c| ColumnRef::new(self.table.clone(), c.clone()))
    }
}

/// One changed cell. Rows index both the source and the result column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellEdit {
    pub row: usize,
    pub old: Option<String>,
    pub new: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueMapping {
    pub edits: Vec<CellEdit>,
}

impl ValueMapping {
    pub fn is_empty(&self) -> bool {
        self.edits.is_empty()
    }

    /// The value-level function `old -> new` implied by the edits, restricted
    /// to non-null endpoints. The first edit wins when a value was mapped
    /// inconsistently.
    pub fn as_function(&self) -> BTreeMap<&str, &str> {
        let mut f = BTreeMap::new();
        for e in &self.edits {
            if let (Some(o), Some(n)) = (&e.old, &e.new) {
                f.entry(o.as_str()).or_insert(n.as_str());
            }
        }
        f
    }

    /// Replays the edits on a copy of `source`.
    pub fn replay(&self, source: &[Option<String>]) -> Vec<Option<String>> {
        let mut out = source.to_vec();
        for e in &self.edits {
            if let Some(slot) = out.get_mut(e.row) {
                *slot = e.new.clone();
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineageEvent {
    pub id: String,
    pub op: String,
    pub source: LineageRef,
    pub result: LineageRef,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapping: Option<ValueMapping>,
}

/// Corpus statistics in the layout of a dataset summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub base_tables: usize,
    pub tables: usize,
    pub avg_rows: f64,
    pub avg_columns: f64,
    pub exact_joins: usize,
    pub semantic_joins: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub tables: Vec<TableData>,
    pub ground_truth: Vec<JoinPair>,
    pub lineage: Vec<LineageEvent>,
    pub seed: u64,
    /// Names of tables generated directly from ontology concepts.
    pub base_tables: Vec<String>,
}

impl Corpus {
    pub fn table(&self, name: &str) -> Option<&TableData> {
        self.tables.iter().find(|t| t.schema.name == name)
    }

    pub fn table_mut(&mut self, name: &str) -> Option<&mut TableData> {
        self.tables.iter_mut().find(|t| t.schema.name == name)
    }

    pub fn column(&self, r: &ColumnRef) -> Option<&Column> {
        self.table(&r.table).and_then(|t| t.schema.column(&r.column))
    }

    /// Cell values of a column, or `None` if the reference does not resolve.
    pub fn column_cells(&self, r: &ColumnRef) -> Option<Vec<Option<&str>>> {
        let t = self.table(&r.table)?;
        let idx = t.schema.column_index(&r.column)?;
        Some(t.column_values(idx).collect())
    }

    pub fn is_primary_key(&self, r: &ColumnRef) -> bool {
        self.table(&r.table).is_some_and(|t| t.schema.primary_key == r.column)
    }

    pub fn stats(&self) -> CorpusStats {
        let n = self.tables.len();
        let (rows, cols) = self
            .tables
            .iter()
            .fold((0usize, 0usize), |(r, c), t| (r + t.rows.len(), c + t.schema.columns.len()));
        let avg = |total: usize| if n == 0 { 0.0 } else { total as f64 / n as f64 };
        CorpusStats {
            base_tables: self.base_tables.len(),
            tables: n,
            avg_rows: avg(rows),
            avg_columns: avg(cols),
            exact_joins: self.ground_truth.iter().filter(|p| p.kind.is_exact_joinable()).count(),
            semantic_joins: self.ground_truth.iter().filter(|p| p.kind == JoinKind::Semantic).count(),
        }
    }

    /// Sorts and deduplicates the ground truth by pair identity.
    pub fn canonicalize_ground_truth(&mut self) {
        canonicalize_pairs(&mut self.ground_truth);
    }

    /// Checks table, pair and reference invariants.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut names = HashSet::new();
        for t in &self.tables {
            if !names.insert(t.name()) {
                return Err(CorpusError::Invariant(format!("duplicate table `{}`", t.name())));
            }
            t.validate()?;
        }
        for b in &self.base_tables {
            if !names.contains(b.as_str()) {
                return Err(CorpusError::Invariant(format!("base table `{b}` is missing")));
            }
        }
        let mut pairs = HashSet::new();
        for p in &self.ground_truth {
            if !p.is_canonical() {
                return Err(CorpusError::Invariant(format!(
                    "ground-truth pair {} ~ {} is not canonical",
                    p.left, p.right
                )));
            }
            for r in [&p.left, &p.right] {
                if self.column(r).is_none() {
                    return Err(CorpusError::Invariant(format!(
                        "ground-truth pair references missing column {r}"
                    )));
                }
            }
            if !pairs.insert(p.key()) {
                return Err(CorpusError::Invariant(format!(
                    "duplicate ground-truth pair {} ~ {}",
                    p.left, p.right
                )));
            }
        }
        Ok(())
    }
}

/// Sorts pairs canonically and keeps the first occurrence of each identity.
pub fn canonicalize_pairs(pairs: &mut Vec<JoinPair>) {
    for p in pairs.iter_mut() {
        if p.left > p.right {
            std::mem::swap(&mut p.left, &mut p.right);
            p.key_side = p.key_side.map(Side::flip);
        }
    }
    pairs.sort_by(|a, b| a.key().cmp(&b.key()));
    pairs.dedup_by(|a, b| a.left == b.left && a.right == b.right);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(t: &str, c: &str) -> ColumnRef {
        ColumnRef::new(t, c)
    }

    #[test]
    fn join_pair_is_stored_canonically() {
        let p = JoinPair::new(
            col("Organization", "id"),
            col("Listed Security", "listedBy"),
            JoinKind::Pkfk,
            Difficulty::Difficult,
            Some(Side::Left),
            None,
        );
        assert_eq!(p.left.table, "Listed Security");
        assert_eq!(p.key_side, Some(Side::Right));
        assert!(p.is_canonical());
    }

    #[test]
    fn stats_count_pkfk_as_exact() {
        let mut c = Corpus::default();
        let schema = TableSchema {
            name: "T".into(),
            columns: vec![Column::new("id", "T ID", Datatype::Integer)],
            primary_key: "id".into(),
        };
        c.tables.push(TableData { schema, rows: vec![vec![Some("1".into())]] });
        for (i, kind) in [JoinKind::Exact, JoinKind::Pkfk, JoinKind::Semantic].into_iter().enumerate() {
            c.ground_truth.push(JoinPair::new(
                col("A", &i.to_string()),
                col("B", "x"),
                kind,
                Difficulty::Easy,
                None,
                None,
            ));
        }
        let s = c.stats();
        assert_eq!(s.exact_joins, 2);
        assert_eq!(s.semantic_joins, 1);
        assert_eq!(s.avg_rows, 1.0);
    }

    #[test]
    fn duplicate_primary_key_is_rejected() {
        let schema = TableSchema {
            name: "T".into(),
            columns: vec![Column::new("id", "T ID", Datatype::Integer)],
            primary_key: "id".into(),
        };
        let t = TableData { schema, rows: vec![vec![Some("1".into())], vec![Some("1".into())]] };
        assert!(matches!(t.validate(), Err(CorpusError::Invariant(_))));
    }

    #[test]
    fn mapping_replay_reproduces_edits() {
        let m = ValueMapping {
            edits: vec![
                CellEdit { row: 1, old: Some("CAD".into()), new: Some("Canadian Dollar".into()) },
                CellEdit { row: 2, old: Some("USD".into()), new: None },
            ],
        };
        let src = vec![Some("EUR".to_string()), Some("CAD".into()), Some("USD".into())];
        let out = m.replay(&src);
        assert_eq!(out, vec![Some("EUR".into()), Some("Canadian Dollar".into()), None]);
        assert_eq!(m.as_function().len(), 1);
    }
}
