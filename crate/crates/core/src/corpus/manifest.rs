//! On-disk corpus layout: one RFC-4180 CSV per table plus `manifest.json`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Corpus, CorpusError, CorpusStats, JoinPair, LineageEvent, Row, TableData, TableSchema};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub name: String,
    pub file: String,
    pub rows: usize,
    pub schema: TableSchema,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub seed: u64,
    pub base_tables: Vec<String>,
    pub tables: Vec<TableEntry>,
    pub ground_truth: Vec<JoinPair>,
    pub lineage: Vec<LineageEvent>,
    pub stats: CorpusStats,
    /// SHA-256 over the manifest (with this field empty) and every CSV file.
    pub digest: String,
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io { path: path.display().to_string(), source }
}

fn file_name_for(index: usize, table: &str) -> String {
    let stem: String = table
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect();
    format!("{index:03}_{stem}.csv")
}

fn table_to_csv(t: &TableData) -> Result<Vec<u8>, CorpusError> {
    let csv_err = |e: csv::Error| CorpusError::Csv { path: t.name().to_string(), message: e.to_string() };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    w.write_record(t.schema.columns.iter().map(|c| c.name.as_str()))
        .map_err(csv_err)?;
    for row in &t.rows {
        w.write_record(row.iter().map(|v| v.as_deref().unwrap_or("")))
            .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CorpusError::Csv {
        path: t.name().to_string(),
        message: e.to_string(),
    })
}

fn compute_digest(manifest: &Manifest, files: &[(String, Vec<u8>)]) -> String {
    let mut unsigned = manifest.clone();
    unsigned.digest.clear();
    let body = serde_json::to_vec(&unsigned).expect("manifest serializes");
    let mut h = Sha256::new();
    h.update(&body);
    for (name, bytes) in files {
        h.update(name.as_bytes());
        h.update([0u8]);
        h.update(bytes);
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}

fn build_manifest(c: &Corpus) -> Result<(Manifest, Vec<(String, Vec<u8>)>), CorpusError> {
    let mut entries = Vec::with_capacity(c.tables.len());
    let mut files = Vec::with_capacity(c.tables.len());
    for (i, t) in c.tables.iter().enumerate() {
        let file = file_name_for(i, t.name());
        files.push((file.clone(), table_to_csv(t)?));
        entries.push(TableEntry {
            name: t.name().to_string(),
            file,
            rows: t.rows.len(),
            schema: t.schema.clone(),
        });
    }
    let mut m = Manifest {
        format_version: MANIFEST_VERSION,
        seed: c.seed,
        base_tables: c.base_tables.clone(),
        tables: entries,
        ground_truth: c.ground_truth.clone(),
        lineage: c.lineage.clone(),
        stats: c.stats(),
        digest: String::new(),
    };
    m.digest = compute_digest(&m, &files);
    Ok((m, files))
}

/// Content digest of a corpus, identical to what [`save_corpus`] records.
pub fn corpus_digest(c: &Corpus) -> Result<String, CorpusError> {
    Ok(build_manifest(c)?.0.digest)
}

/// Writes the corpus into `dir` and returns the manifest digest.
///
/// Invariants are checked before anything is written. The same corpus always
/// produces byte-identical files.
pub fn save_corpus(c: &Corpus, dir: &Path) -> Result<String, CorpusError> {
    c.validate()?;
    let (manifest, files) = build_manifest(c)?;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    for (name, bytes) in &files {
        let p = dir.join(name);
        fs::write(&p, bytes).map_err(|e| io_err(&p, e))?;
    }
    let mut body = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    body.push(b'\n');
    let p = dir.join(MANIFEST_FILE);
    fs::write(&p, body).map_err(|e| io_err(&p, e))?;
    Ok(manifest.digest)
}

fn parse_csv(table: &str, path: &Path, bytes: &[u8], schema: &TableSchema) -> Result<Vec<Row>, CorpusError> {
    let csv_err = |e: csv::Error| CorpusError::Csv { path: path.display().to_string(), message: e.to_string() };
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(bytes);
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let expected = schema.column_names();
    if header != expected {
        return Err(CorpusError::Header { table: table.to_string(), expected, found: header });
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != expected.len() {
            return Err(CorpusError::Arity {
                table: table.to_string(),
                row: i + 1,
                expected: expected.len(),
                found: rec.len(),
            });
        }
        rows.push(
            rec.iter()
                .map(|v| if v.is_empty() { None } else { Some(v.to_string()) })
                .collect(),
        );
    }
    Ok(rows)
}

fn stats_match(a: &CorpusStats, b: &CorpusStats) -> bool {
    a.base_tables == b.base_tables
        && a.tables == b.tables
        && a.exact_joins == b.exact_joins
        && a.semantic_joins == b.semantic_joins
        && (a.avg_rows - b.avg_rows).abs() <= 1e-9 * a.avg_rows.abs().max(1.0)
        && (a.avg_columns - b.avg_columns).abs() <= 1e-9 * a.avg_columns.abs().max(1.0)
}

/// Loads a corpus directory, verifying digest, arity, references and stats.
pub fn load_corpus(dir: &Path) -> Result<Corpus, CorpusError> {
    let mp = dir.join(MANIFEST_FILE);
    let text = fs::read(&mp).map_err(|e| io_err(&mp, e))?;
    let manifest: Manifest =
        serde_json::from_slice(&text).map_err(|e| CorpusError::Manifest(e.to_string()))?;
    if manifest.format_version != MANIFEST_VERSION {
        return Err(CorpusError::Manifest(format!(
            "unsupported format_version {}",
            manifest.format_version
        )));
    }
    let mut files = Vec::with_capacity(manifest.tables.len());
    let mut tables = Vec::with_capacity(manifest.tables.len());
    for entry in &manifest.tables {
        let p = dir.join(&entry.file);
        let bytes = fs::read(&p).map_err(|e| io_err(&p, e))?;
        let rows = parse_csv(&entry.name, &p, &bytes, &entry.schema)?;
        if rows.len() != entry.rows {
            return Err(CorpusError::Manifest(format!(
                "table `{}`: manifest lists {} rows, file has {}",
                entry.name,
                entry.rows,
                rows.len()
            )));
        }
        files.push((entry.file.clone(), bytes));
        tables.push(TableData { schema: entry.schema.clone(), rows });
    }
    let actual = compute_digest(&manifest, &files);
    if actual != manifest.digest {
        return Err(CorpusError::Digest { expected: manifest.digest.clone(), actual });
    }
    let corpus = Corpus {
        tables,
        ground_truth: manifest.ground_truth,
        lineage: manifest.lineage,
        seed: manifest.seed,
        base_tables: manifest.base_tables,
    };
    corpus.validate()?;
    let recount = corpus.stats();
    if !stats_match(&recount, &manifest.stats) {
        return Err(CorpusError::Stats { expected: Box::new(manifest.stats), actual: Box::new(recount) });
    }
    Ok(corpus)
}
