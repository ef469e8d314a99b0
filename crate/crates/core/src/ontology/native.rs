//! The native `.onto` format.
//!
//! ```text
//! # comment
//! concept: Organization
//!   key: Legal Entity Identifier
//!   property: Legal Name | Legal Name | text
//!   property: Legal Entity Identifier | LEI | text
//! object: lists
//!   domain: Organization
//!   range: Listed Security
//!   column: listedBy
//! ```
//!
//! A `property` entry is `name`, `name | datatype`, or
//! `name | semantic type | datatype`. Indentation is not significant; entries
//! attach to the closest preceding `concept:` or `object:` header.

use std::collections::HashMap;
use std::fmt::Write;

use super::{Concept, DataProperty, ObjectProperty, Ontology, OntologyError};
use crate::corpus::Datatype;

enum Block {
    Concept(usize),
    Object(usize),
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> OntologyError {
    OntologyError::Syntax { line, column, message: message.into() }
}

fn parse_property(line_no: usize, offset: usize, value: &str) -> Result<DataProperty, OntologyError> {
    let parts: Vec<&str> = value.split('|').map(str::trim).collect();
    let (name, semantic, dtype) = match parts.as_slice() {
        [name] => (*name, *name, "text"),
        [name, dtype] => (*name, *name, *dtype),
        [name, semantic, dtype] => (*name, if semantic.is_empty() { *name } else { *semantic }, *dtype),
        _ => return Err(syntax(line_no, offset, "property takes at most three `|`-separated fields")),
    };
    if name.is_empty() {
        return Err(syntax(line_no, offset, "property name is empty"));
    }
    let datatype = Datatype::parse(dtype)
        .ok_or_else(|| syntax(line_no, offset, format!("unknown datatype `{dtype}`")))?;
    Ok(DataProperty { name: name.to_string(), semantic_type: semantic.to_string(), datatype })
}

pub(super) fn parse(source: &str) -> Result<Ontology, OntologyError> {
    let mut onto = Ontology::default();
    let mut concept_lines = Vec::new();
    let mut object_lines = Vec::new();
    let mut property_lines: Vec<Vec<usize>> = Vec::new();
    let mut current: Option<Block> = None;

    for (i, raw) in source.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let indent = raw.len() - raw.trim_start().len();
        let Some((key, value)) = trimmed.split_once(':') else {
            return Err(syntax(line_no, indent + 1, "expected `key: value`"));
        };
        let key = key.trim();
        let value = value.trim();
        let colon = raw.find(':').unwrap_or(0);
        let value_offset = raw.len() - raw[colon + 1..].trim_start().len() + 1;
        match key {
            "concept" | "object" if value.is_empty() => {
                return Err(syntax(line_no, value_offset, format!("`{key}` needs a name")));
            }
            "concept" => {
                onto.concepts.push(Concept { name: value.to_string(), data_properties: vec![], key: None });
                concept_lines.push(line_no);
                property_lines.push(vec![]);
                current = Some(Block::Concept(onto.concepts.len() - 1));
            }
            "object" => {
                onto.object_properties.push(ObjectProperty {
                    name: value.to_string(),
                    domain: String::new(),
                    range: String::new(),
                    column: None,
                    self_reference: false,
                });
                object_lines.push(line_no);
                current = Some(Block::Object(onto.object_properties.len() - 1));
            }
            _ => match &current {
                None => {
                    return Err(syntax(line_no, indent + 1, format!("`{key}` outside of a concept or object block")))
                }
                Some(Block::Concept(ci)) => {
                    let c = &mut onto.concepts[*ci];
                    match key {
                        "property" => {
                            c.data_properties.push(parse_property(line_no, value_offset, value)?);
                            property_lines[*ci].push(line_no);
                        }
                        "key" => c.key = Some(value.to_string()),
                        other => {
                            return Err(syntax(line_no, indent + 1, format!("unknown concept entry `{other}`")))
                        }
                    }
                }
                Some(Block::Object(oi)) => {
                    let op = &mut onto.object_properties[*oi];
                    match key {
                        "domain" => op.domain = value.to_string(),
                        "range" => op.range = value.to_string(),
                        "column" => op.column = Some(value.to_string()),
                        "self" => {
                            op.self_reference = match value {
                                "true" | "yes" => true,
                                "false" | "no" => false,
                                _ => return Err(syntax(line_no, value_offset, "`self` expects true or false")),
                            }
                        }
                        other => {
                            return Err(syntax(line_no, indent + 1, format!("unknown object entry `{other}`")))
                        }
                    }
                }
            },
        }
    }

    // Invariant checks with locations.
    if onto.concepts.is_empty() {
        return Err(OntologyError::NoConcepts);
    }
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (ci, c) in onto.concepts.iter().enumerate() {
        if seen.insert(c.name.as_str(), ci).is_some() {
            return Err(OntologyError::DuplicateConcept { line: concept_lines[ci], name: c.name.clone() });
        }
        let mut props = HashMap::new();
        for (pi, p) in c.data_properties.iter().enumerate() {
            if props.insert(p.name.as_str(), pi).is_some() {
                return Err(OntologyError::DuplicateProperty {
                    line: property_lines[ci][pi],
                    concept: c.name.clone(),
                    property: p.name.clone(),
                });
            }
        }
        if let Some(k) = &c.key {
            if !props.contains_key(k.as_str()) {
                return Err(syntax(concept_lines[ci], 1, format!("key `{k}` is not a property of `{}`", c.name)));
            }
        }
    }
    for (oi, op) in onto.object_properties.iter().enumerate() {
        let line = object_lines[oi];
        for (what, target) in [("domain of", &op.domain), ("range of", &op.range)] {
            if target.is_empty() {
                return Err(syntax(line, 1, format!("object `{}` is missing its {}", op.name, &what[..what.len() - 3])));
            }
            if !seen.contains_key(target.as_str()) {
                return Err(OntologyError::Dangling {
                    line,
                    what,
                    property: op.name.clone(),
                    concept: target.clone(),
                });
            }
        }
        if op.domain == op.range && !op.self_reference {
            return Err(OntologyError::UnflaggedSelfReference { line, name: op.name.clone() });
        }
    }
    Ok(onto)
}

/// Serializes an ontology to the native format; parsing the output yields an
/// equal ontology.
pub fn to_native(o: &Ontology) -> String {
    let mut out = String::new();
    for c in &o.concepts {
        let _ = writeln!(out, "concept: {}", c.name);
        if let Some(k) = &c.key {
            let _ = writeln!(out, "  key: {k}");
        }
        for p in &c.data_properties {
            let _ = writeln!(out, "  property: {} | {} | {}", p.name, p.semantic_type, p.datatype);
        }
    }
    for op in &o.object_properties {
        let _ = writeln!(out, "object: {}", op.name);
        let _ = writeln!(out, "  domain: {}", op.domain);
        let _ = writeln!(out, "  range: {}", op.range);
        if let Some(c) = &op.column {
            let _ = writeln!(out, "  column: {c}");
        }
        if op.self_reference {
            out.push_str("  self: true\n");
        }
    }
    out
}
