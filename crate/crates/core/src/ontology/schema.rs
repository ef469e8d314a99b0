//! Concept → table compilation.

use std::collections::{BTreeMap, HashMap, HashSet};

use log::warn;
use serde::{Deserialize, Serialize};

use super::{Ontology, OntologyError};
use crate::corpus::{Column, ColumnRef, Datatype, TableSchema};
use crate::text::split_words;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupingConfig {
    /// Concepts with fewer data properties than this are folded into a
    /// neighbouring table.
    pub min_props: usize,
}

impl Default for GroupingConfig {
    fn default() -> Self {
        GroupingConfig { min_props: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JoinHint {
    Pkfk,
    Exact,
}

/// A join relationship declared by the ontology: the values of `from` are
/// drawn from `to`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeclaredJoin {
    pub from: ColumnRef,
    pub to: ColumnRef,
    pub kind: JoinHint,
    /// Object property the join was compiled from.
    pub property: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SchemaSet {
    pub tables: Vec<TableSchema>,
    pub relationships: Vec<DeclaredJoin>,
    /// Concept → table it was folded into, for concepts that were merged.
    #[serde(default)]
    pub merged: BTreeMap<String, String>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl SchemaSet {
    pub fn table(&self, name: &str) -> Option<&TableSchema> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn validate(&self) -> Result<(), OntologyError> {
        let mut names = HashSet::new();
        for t in &self.tables {
            if !names.insert(t.name.as_str()) {
                return Err(OntologyError::InvalidSchema(format!("duplicate table `{}`", t.name)));
            }
            t.validate().map_err(|e| OntologyError::InvalidSchema(e.to_string()))?;
        }
        for j in &self.relationships {
            for end in [&j.from, &j.to] {
                if self.table(&end.table).and_then(|t| t.column(&end.column)).is_none() {
                    return Err(OntologyError::InvalidSchema(format!("join endpoint {end} does not resolve")));
                }
            }
        }
        Ok(())
    }
}

/// Name of the synthetic key column for a table: `<table>_id`, lower-cased
/// with non-alphanumerics folded to `_`.
pub fn synthetic_key_name(table: &str) -> String {
    let stem: String = table
        .chars()
        .map(|c| if c.is_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    format!("{stem}_id")
}

/// Passive reference-column name for an object property: `lists` → `listedBy`.
fn reference_column_name(property: &str) -> String {
    let words = split_words(property);
    if words.len() == 1 && property.chars().all(|c| c.is_ascii_lowercase()) && property.len() > 2 {
        if let Some(stem) = property.strip_suffix('s') {
            return if stem.ends_with('e') { format!("{stem}dBy") } else { format!("{stem}edBy") };
        }
    }
    format!("{property}By")
}

fn unique_name(taken: &HashSet<String>, wanted: &str) -> String {
    if !taken.contains(wanted) {
        return wanted.to_string();
    }
    (2..).map(|k| format!("{wanted}_{k}")).find(|n| !taken.contains(n)).expect("unbounded")
}

/// Compiles an ontology into table schemas and declared joins.
///
/// One table per concept. A concept with fewer than `min_props` data
/// properties is folded into the retained table it shares the most object
/// properties with (ties broken by table name); with no such neighbour it
/// keeps its own table. Each object property adds a reference column on the
/// range-side table pointing at the domain-side primary key.
pub fn ontology_to_schemas(o: &Ontology, grouping: &GroupingConfig) -> Result<SchemaSet, OntologyError> {
    o.validate()?;
    let mut warnings = Vec::new();
    let mut warn_msg = |msg: String| {
        warn!("{msg}");
        warnings.push(msg);
    };

    let is_small = |c: &super::Concept| c.data_properties.len() < grouping.min_props;
    let retained: Vec<&str> = o.concepts.iter().filter(|c| !is_small(c)).map(|c| c.name.as_str()).collect();

    // Decide the host table of every concept.
    let mut host: HashMap<&str, &str> = HashMap::new();
    let mut merged = BTreeMap::new();
    for c in &o.concepts {
        if !is_small(c) || retained.is_empty() {
            host.insert(&c.name, &c.name);
            continue;
        }
        let mut links: BTreeMap<&str, usize> = BTreeMap::new();
        for op in &o.object_properties {
            let other = if op.domain == c.name {
                &op.range
            } else if op.range == c.name {
                &op.domain
            } else {
                continue;
            };
            if other != &c.name && retained.contains(&other.as_str()) {
                *links.entry(other.as_str()).or_default() += 1;
            }
        }
        // BTreeMap iteration is lexicographic, so the first maximum wins ties.
        let best = links.iter().fold(None::<(&str, usize)>, |acc, (name, n)| match acc {
            Some((_, m)) if m >= *n => acc,
            _ => Some((name, *n)),
        });
        match best {
            Some((target, _)) => {
                host.insert(&c.name, target);
                merged.insert(c.name.clone(), target.to_string());
            }
            None => {
                host.insert(&c.name, &c.name);
            }
        }
    }

    struct Draft {
        name: String,
        key: String,
        columns: Vec<Column>,
        taken: HashSet<String>,
    }
    let mut drafts: Vec<Draft> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for c in o.concepts.iter().filter(|c| host[c.name.as_str()] == c.name) {
        let mut columns = Vec::new();
        let (key, synthetic_key) = match &c.key {
            Some(k) => (k.clone(), false),
            None => {
                let k = synthetic_key_name(&c.name);
                columns.push(Column::new(k.clone(), format!("{} ID", c.name), Datatype::Integer));
                (k, true)
            }
        };
        for p in &c.data_properties {
            if synthetic_key && p.name == key {
                return Err(OntologyError::InvalidSchema(format!(
                    "concept `{}` has a property named like its synthetic key `{key}`",
                    c.name
                )));
            }
            columns.push(Column::new(p.name.clone(), p.semantic_type.clone(), p.datatype));
        }
        let taken = columns.iter().map(|c| c.name.clone()).collect();
        index.insert(c.name.clone(), drafts.len());
        drafts.push(Draft { name: c.name.clone(), key, columns, taken });
    }

    // Fold small concepts into their hosts.
    for c in &o.concepts {
        let h = host[c.name.as_str()];
        if h == c.name {
            continue;
        }
        if c.key.is_some() {
            warn_msg(format!("key of merged concept `{}` dropped; `{h}` keeps its own key", c.name));
        }
        let d = &mut drafts[index[h]];
        for p in &c.data_properties {
            let name = unique_name(&d.taken, &p.name);
            if name != p.name {
                warn_msg(format!(
                    "merging `{}` into `{h}`: property `{}` renamed to `{name}`",
                    c.name, p.name
                ));
            }
            d.taken.insert(name.clone());
            d.columns.push(Column::new(name, p.semantic_type.clone(), p.datatype));
        }
    }

    // Reference columns and declared joins.
    let mut relationships = Vec::new();
    for op in &o.object_properties {
        let domain_table = host[op.domain.as_str()];
        let range_table = host[op.range.as_str()];
        if domain_table == range_table && op.domain != op.range {
            warn_msg(format!(
                "object property `{}` connects concepts merged into `{domain_table}`; dropped",
                op.name
            ));
            continue;
        }
        let (pk_name, pk_col) = {
            let d = &drafts[index[domain_table]];
            let col = d.columns.iter().find(|c| c.name == d.key).expect("key column").clone();
            (d.key.clone(), col)
        };
        let r = &mut drafts[index[range_table]];
        let wanted = op.column.clone().unwrap_or_else(|| reference_column_name(&op.name));
        let name = unique_name(&r.taken, &wanted);
        if name != wanted {
            warn_msg(format!("reference column `{wanted}` on `{range_table}` renamed to `{name}`"));
        }
        r.taken.insert(name.clone());
        r.columns.push(Column::new(name.clone(), pk_col.semantic_type, pk_col.datatype));
        relationships.push(DeclaredJoin {
            from: ColumnRef::new(range_table, name),
            to: ColumnRef::new(domain_table, pk_name),
            kind: JoinHint::Pkfk,
            property: op.name.clone(),
        });
    }

    let tables = drafts
        .into_iter()
        .map(|d| TableSchema { name: d.name, columns: d.columns, primary_key: d.key })
        .collect();
    let set = SchemaSet { tables, relationships, merged, warnings };
    set.validate()?;
    Ok(set)
}
