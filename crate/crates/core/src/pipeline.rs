//! End-to-end helpers: ontology text to base corpus to derived corpus.

use crate::corpus::Corpus;
use crate::generate::{generate_base_tables, plan_generation, Backend, Generated, RowCaps, Source};
use crate::ontology::{
    build_dependency_graph, ontology_to_schemas, parse_ontology, DependencyGraph, GroupingConfig, OntologyFormat,
    SchemaSet,
};
use crate::perturb::{apply_plan, OfflineParaphraser, PerturbationPlan, Perturbed};
use crate::Error;

/// Three concepts with `lists` and `houses` relationships.
pub const FIBO_SUBSET: &str = include_str!("../fixtures/fibo_subset.onto");
/// The same three concepts in Turtle.
pub const FIBO_SUBSET_TTL: &str = include_str!("../fixtures/fibo_subset.ttl");
/// Twenty finance concepts, acyclic, at least two data properties each.
pub const FINANCE: &str = include_str!("../fixtures/finance.onto");

/// Parses an ontology and compiles its schemas and dependency graph.
pub fn compile(
    source: &str,
    format: OntologyFormat,
    grouping: &GroupingConfig,
) -> Result<(SchemaSet, DependencyGraph), Error> {
    let onto = parse_ontology(source, format)?;
    let schemas = ontology_to_schemas(&onto, grouping)?;
    let graph = build_dependency_graph(&schemas)?;
    Ok((schemas, graph))
}

/// Base corpus from native ontology text with the offline synthesizer.
pub fn generate_offline(source: &str, seed: u64, row_cap: usize) -> Result<Generated, Error> {
    let (schemas, graph) = compile(source, OntologyFormat::Native, &GroupingConfig::default())?;
    let plan = plan_generation(&graph, &RowCaps::uniform(row_cap), Backend::Offline)?;
    Ok(generate_base_tables(&schemas, &plan, &Source::Offline, seed)?)
}

/// Applies `plan` with the offline paraphraser answering semantic prompts.
pub fn derive_offline(base: &Corpus, plan: &PerturbationPlan) -> Result<Perturbed, Error> {
    Ok(apply_plan(base, plan, Some(&OfflineParaphraser))?)
}
