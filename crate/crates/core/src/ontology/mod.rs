//! Ontology ingestion: parse a concept/property model and compile it into
//! relational table schemas with declared join relationships.
//!
//! Two input formats are supported. The native `.onto` format mirrors the
//! model one-to-one and round-trips losslessly. The Turtle reader accepts the
//! subset of OWL needed here: classes, datatype properties and object
//! properties with `rdfs:domain` / `rdfs:range`.

mod graph;
mod native;
mod schema;
mod turtle;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::Datatype;

pub use graph::{build_dependency_graph, DependencyGraph};
pub use native::to_native;
pub use schema::{ontology_to_schemas, synthetic_key_name, DeclaredJoin, GroupingConfig, JoinHint, SchemaSet};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OntologyError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("line {line}: {what} `{property}` references unknown concept `{concept}`")]
    Dangling {
        line: usize,
        what: &'static str,
        property: String,
        concept: String,
    },
    #[error("line {line}: duplicate concept `{name}`")]
    DuplicateConcept { line: usize, name: String },
    #[error("line {line}: concept `{concept}` declares property `{property}` twice")]
    DuplicateProperty { line: usize, concept: String, property: String },
    #[error("line {line}: object property `{name}` is a self-reference but is not flagged `self: true`")]
    UnflaggedSelfReference { line: usize, name: String },
    #[error("ontology declares no concepts")]
    NoConcepts,
    #[error("dependency cycle: {}", .cycle.join(" -> "))]
    Cycle { cycle: Vec<String> },
    #[error("invalid schema set: {0}")]
    InvalidSchema(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OntologyFormat {
    Native,
    Turtle,
}

impl OntologyFormat {
    /// Picks a format from a file extension (`.ttl` is Turtle, anything else native).
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("ttl") => OntologyFormat::Turtle,
            _ => OntologyFormat::Native,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataProperty {
    pub name: String,
    pub semantic_type: String,
    pub datatype: Datatype,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub name: String,
    pub data_properties: Vec<DataProperty>,
    /// Data property serving as primary key; a synthetic key is added when absent.
    pub key: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectProperty {
    pub name: String,
    pub domain: String,
    pub range: String,
    /// Explicit name for the reference column on the range-side table.
    pub column: Option<String>,
    /// Self-references (`domain == range`) must be flagged explicitly.
    pub self_reference: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Ontology {
    pub concepts: Vec<Concept>,
    pub object_properties: Vec<ObjectProperty>,
}

impl Ontology {
    pub fn concept(&self, name: &str) -> Option<&Concept> {
        self.concepts.iter().find(|c| c.name == name)
    }

    /// Checks the model invariants without location information.
    pub fn validate(&self) -> Result<(), OntologyError> {
        if self.concepts.is_empty() {
            return Err(OntologyError::NoConcepts);
        }
        let mut names = HashSet::new();
        for c in &self.concepts {
            if !names.insert(c.name.as_str()) {
                return Err(OntologyError::DuplicateConcept { line: 0, name: c.name.clone() });
            }
            let mut props = HashSet::new();
            for p in &c.data_properties {
                if !props.insert(p.name.as_str()) {
                    return Err(OntologyError::DuplicateProperty {
                        line: 0,
                        concept: c.name.clone(),
                        property: p.name.clone(),
                    });
                }
            }
            if let Some(k) = &c.key {
                if !props.contains(k.as_str()) {
                    return Err(OntologyError::InvalidSchema(format!(
                        "concept `{}` key `{k}` is not one of its data properties",
                        c.name
                    )));
                }
            }
        }
        for op in &self.object_properties {
            for (what, target) in [("domain of", &op.domain), ("range of", &op.range)] {
                if !names.contains(target.as_str()) {
                    return Err(OntologyError::Dangling {
                        line: 0,
                        what,
                        property: op.name.clone(),
                        concept: target.clone(),
                    });
                }
            }
            if op.domain == op.range && !op.self_reference {
                return Err(OntologyError::UnflaggedSelfReference { line: 0, name: op.name.clone() });
            }
        }
        Ok(())
    }
}

/// Parses an ontology document in the given format.
pub fn parse_ontology(source: &str, format: OntologyFormat) -> Result<Ontology, OntologyError> {
    match format {
        OntologyFormat::Native => native::parse(source),
        OntologyFormat::Turtle => turtle::parse(source),
    }
}
