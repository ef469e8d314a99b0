//! Reader for the Turtle subset used to describe concept/property models.
//!
//! Recognized statements: `@prefix` / `PREFIX` declarations and triples whose
//! predicates are `rdf:type` (`a`), `rdfs:label`, `rdfs:domain`, `rdfs:range`,
//! plus two optional annotations matched by local name: `semanticType`
//! (literal, on datatype properties) and `referenceColumn` (literal, on object
//! properties). Everything else is parsed and ignored.

use std::collections::{BTreeMap, HashMap};

use super::{Concept, DataProperty, ObjectProperty, Ontology, OntologyError};
use crate::corpus::Datatype;

const RDF: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
const RDFS: &str = "http://www.w3.org/2000/01/rdf-schema#";
const OWL: &str = "http://www.w3.org/2002/07/owl#";
const XSD: &str = "http://www.w3.org/2001/XMLSchema#";

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Iri(String),
    Prefixed(String, String),
    Literal(String),
    A,
    PrefixKw,
    Semicolon,
    Comma,
    Dot,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn err(line: usize, column: usize, message: impl Into<String>) -> OntologyError {
    OntologyError::Syntax { line, column, message: message.into() }
}

fn tokenize(src: &str) -> Result<Vec<Spanned>, OntologyError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, c: char| {
        *i += 1;
        if c == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let (sl, sc) = (line, col);
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, c);
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                { let ch = chars[i]; advance(&mut i, &mut line, &mut col, ch); }
            }
            continue;
        }
        let push = |out: &mut Vec<Spanned>, tok| out.push(Spanned { tok, line: sl, column: sc });
        match c {
            '<' => {
                advance(&mut i, &mut line, &mut col, c);
                let mut iri = String::new();
                loop {
                    match chars.get(i) {
                        None | Some('\n') => return Err(err(sl, sc, "unterminated IRI")),
                        Some('>') => {
                            advance(&mut i, &mut line, &mut col, '>');
                            break;
                        }
                        Some(&ch) => {
                            iri.push(ch);
                            advance(&mut i, &mut line, &mut col, ch);
                        }
                    }
                }
                push(&mut out, Tok::Iri(iri));
            }
            '"' => {
                advance(&mut i, &mut line, &mut col, c);
                let mut lit = String::new();
                loop {
                    match chars.get(i) {
                        None => return Err(err(sl, sc, "unterminated string literal")),
                        Some('"') => {
                            advance(&mut i, &mut line, &mut col, '"');
                            break;
                        }
                        Some('\\') => {
                            advance(&mut i, &mut line, &mut col, '\\');
                            let Some(&e) = chars.get(i) else {
                                return Err(err(sl, sc, "unterminated escape"));
                            };
                            lit.push(match e {
                                'n' => '\n',
                                't' => '\t',
                                other => other,
                            });
                            advance(&mut i, &mut line, &mut col, e);
                        }
                        Some(&ch) => {
                            lit.push(ch);
                            advance(&mut i, &mut line, &mut col, ch);
                        }
                    }
                }
                // Language tags and datatype suffixes are accepted and dropped.
                if chars.get(i) == Some(&'@') {
                    while i < chars.len() && (chars[i] == '@' || chars[i].is_alphanumeric() || chars[i] == '-') {
                        { let ch = chars[i]; advance(&mut i, &mut line, &mut col, ch); }
                    }
                } else if chars.get(i) == Some(&'^') && chars.get(i + 1) == Some(&'^') {
                    advance(&mut i, &mut line, &mut col, '^');
                    advance(&mut i, &mut line, &mut col, '^');
                    while i < chars.len() && !chars[i].is_whitespace() && !matches!(chars[i], ';' | ',') {
                        if chars[i] == '.' && chars.get(i + 1).is_none_or(|n| n.is_whitespace()) {
                            break;
                        }
                        { let ch = chars[i]; advance(&mut i, &mut line, &mut col, ch); }
                    }
                }
                push(&mut out, Tok::Literal(lit));
            }
            ';' => {
                advance(&mut i, &mut line, &mut col, c);
                push(&mut out, Tok::Semicolon);
            }
            ',' => {
                advance(&mut i, &mut line, &mut col, c);
                push(&mut out, Tok::Comma);
            }
            '.' => {
                advance(&mut i, &mut line, &mut col, c);
                push(&mut out, Tok::Dot);
            }
            _ => {
                let mut word = String::new();
                while i < chars.len() {
                    let ch = chars[i];
                    if ch.is_whitespace() || matches!(ch, ';' | ',' | '<' | '"') {
                        break;
                    }
                    if ch == '.' && chars.get(i + 1).is_none_or(|n| n.is_whitespace() || *n == '#') {
                        break;
                    }
                    word.push(ch);
                    advance(&mut i, &mut line, &mut col, ch);
                }
                let tok = if word == "a" {
                    Tok::A
                } else if word == "@prefix" || word.eq_ignore_ascii_case("prefix") {
                    Tok::PrefixKw
                } else if let Some((p, l)) = word.split_once(':') {
                    Tok::Prefixed(p.to_string(), l.to_string())
                } else {
                    return Err(err(sl, sc, format!("unexpected token `{word}`")));
                };
                push(&mut out, tok);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
enum Term {
    Iri(String),
    Literal(String),
}

struct Triple {
    subject: String,
    predicate: String,
    object: Term,
    line: usize,
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    prefixes: HashMap<String, String>,
}

impl Parser {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Result<Spanned, OntologyError> {
        let t = self.toks.get(self.pos).cloned().ok_or_else(|| {
            let (line, column) = self.toks.last().map_or((1, 1), |t| (t.line, t.column));
            err(line, column, "unexpected end of document")
        })?;
        self.pos += 1;
        Ok(t)
    }

    fn expand(&self, t: &Spanned) -> Result<String, OntologyError> {
        match &t.tok {
            Tok::Iri(i) => Ok(i.clone()),
            Tok::Prefixed(p, l) => self
                .prefixes
                .get(p)
                .map(|base| format!("{base}{l}"))
                .ok_or_else(|| err(t.line, t.column, format!("undeclared prefix `{p}:`"))),
            Tok::A => Ok(format!("{RDF}type")),
            other => Err(err(t.line, t.column, format!("expected an IRI, found {other:?}"))),
        }
    }

    fn parse(mut self) -> Result<Vec<Triple>, OntologyError> {
        let mut triples = Vec::new();
        while let Some(t) = self.peek().cloned() {
            if t.tok == Tok::PrefixKw {
                self.pos += 1;
                let name = self.next()?;
                let Tok::Prefixed(p, l) = &name.tok else {
                    return Err(err(name.line, name.column, "expected `prefix:` name"));
                };
                if !l.is_empty() {
                    return Err(err(name.line, name.column, "prefix name must end with `:`"));
                }
                let iri = self.next()?;
                let Tok::Iri(base) = &iri.tok else {
                    return Err(err(iri.line, iri.column, "expected `<iri>` after prefix name"));
                };
                self.prefixes.insert(p.clone(), base.clone());
                if matches!(self.peek(), Some(Spanned { tok: Tok::Dot, .. })) {
                    self.pos += 1;
                }
                continue;
            }
            let subj_tok = self.next()?;
            let subject = self.expand(&subj_tok)?;
            loop {
                let pred_tok = self.next()?;
                let predicate = self.expand(&pred_tok)?;
                loop {
                    let obj_tok = self.next()?;
                    let object = match &obj_tok.tok {
                        Tok::Literal(l) => Term::Literal(l.clone()),
                        _ => Term::Iri(self.expand(&obj_tok)?),
                    };
                    triples.push(Triple {
                        subject: subject.clone(),
                        predicate: predicate.clone(),
                        object,
                        line: subj_tok.line,
                    });
                    if matches!(self.peek(), Some(Spanned { tok: Tok::Comma, .. })) {
                        self.pos += 1;
                        continue;
                    }
                    break;
                }
                let sep = self.next()?;
                match sep.tok {
                    Tok::Semicolon => {
                        // A trailing `;` before `.` is legal Turtle.
                        if matches!(self.peek(), Some(Spanned { tok: Tok::Dot, .. })) {
                            self.pos += 1;
                            break;
                        }
                    }
                    Tok::Dot => break,
                    other => return Err(err(sep.line, sep.column, format!("expected `;` or `.`, found {other:?}"))),
                }
            }
        }
        Ok(triples)
    }
}

fn local_name(iri: &str) -> &str {
    iri.rsplit(['#', '/']).next().unwrap_or(iri)
}

fn xsd_datatype(iri: &str) -> Datatype {
    match iri.strip_prefix(XSD).unwrap_or(local_name(iri)) {
        "integer" | "int" | "long" | "short" | "nonNegativeInteger" | "positiveInteger" => Datatype::Integer,
        "decimal" | "double" | "float" => Datatype::Decimal,
        "date" | "dateTime" => Datatype::Date,
        "categorical" => Datatype::Categorical,
        _ => Datatype::Text,
    }
}

#[derive(Default)]
struct Subject {
    types: Vec<String>,
    label: Option<String>,
    domain: Option<String>,
    range: Option<String>,
    semantic_type: Option<String>,
    reference_column: Option<String>,
    line: usize,
}

pub(super) fn parse(src: &str) -> Result<Ontology, OntologyError> {
    let toks = tokenize(src)?;
    let triples = Parser { toks, pos: 0, prefixes: HashMap::new() }.parse()?;

    // Subjects in first-appearance order for deterministic output.
    let mut order: Vec<String> = Vec::new();
    let mut subjects: BTreeMap<String, Subject> = BTreeMap::new();
    for t in triples {
        let s = subjects.entry(t.subject.clone()).or_insert_with(|| {
            order.push(t.subject.clone());
            Subject { line: t.line, ..Subject::default() }
        });
        let as_text = |o: &Term| match o {
            Term::Iri(i) => i.clone(),
            Term::Literal(l) => l.clone(),
        };
        match (t.predicate.as_str(), local_name(&t.predicate)) {
            (p, _) if p == format!("{RDF}type") => s.types.push(as_text(&t.object)),
            (p, _) if p == format!("{RDFS}label") => s.label = Some(as_text(&t.object)),
            (p, _) if p == format!("{RDFS}domain") => s.domain = Some(as_text(&t.object)),
            (p, _) if p == format!("{RDFS}range") => s.range = Some(as_text(&t.object)),
            (_, "semanticType") => s.semantic_type = Some(as_text(&t.object)),
            (_, "referenceColumn") => s.reference_column = Some(as_text(&t.object)),
            _ => {}
        }
    }
    let is = |s: &Subject, local: &str| {
        s.types.iter().any(|t| t == &format!("{OWL}{local}") || t == &format!("{RDFS}{local}"))
    };
    let display = |iri: &str, s: &Subject| s.label.clone().unwrap_or_else(|| local_name(iri).to_string());

    let mut onto = Ontology::default();
    let mut class_names: HashMap<String, usize> = HashMap::new();
    for iri in &order {
        let s = &subjects[iri];
        if is(s, "Class") {
            let name = display(iri, s);
            if onto.concepts.iter().any(|c| c.name == name) {
                return Err(OntologyError::DuplicateConcept { line: s.line, name });
            }
            class_names.insert(iri.clone(), onto.concepts.len());
            onto.concepts.push(Concept { name, data_properties: vec![], key: None });
        }
    }
    if onto.concepts.is_empty() {
        return Err(OntologyError::NoConcepts);
    }
    let resolve = |what: &'static str, prop: &str, target: &Option<String>, line: usize| {
        let t = target.clone().unwrap_or_default();
        class_names.get(&t).copied().ok_or(OntologyError::Dangling {
            line,
            what,
            property: prop.to_string(),
            concept: if t.is_empty() { "<none>".into() } else { local_name(&t).to_string() },
        })
    };
    for iri in &order {
        let s = &subjects[iri];
        let name = display(iri, s);
        if is(s, "DatatypeProperty") {
            let ci = resolve("domain of", &name, &s.domain, s.line)?;
            let datatype = s.range.as_deref().map_or(Datatype::Text, xsd_datatype);
            let concept = &mut onto.concepts[ci];
            if concept.data_properties.iter().any(|p| p.name == name) {
                return Err(OntologyError::DuplicateProperty {
                    line: s.line,
                    concept: concept.name.clone(),
                    property: name,
                });
            }
            concept.data_properties.push(DataProperty {
                semantic_type: s.semantic_type.clone().unwrap_or_else(|| name.clone()),
                name,
                datatype,
            });
        } else if is(s, "ObjectProperty") {
            let d = resolve("domain of", &name, &s.domain, s.line)?;
            let r = resolve("range of", &name, &s.range, s.line)?;
            onto.object_properties.push(ObjectProperty {
                name,
                domain: onto.concepts[d].name.clone(),
                range: onto.concepts[r].name.clone(),
                column: s.reference_column.clone(),
                self_reference: d == r,
            });
        }
    }
    Ok(onto)
}
