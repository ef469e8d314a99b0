//! Ontology-driven generation of joinable-table benchmark corpora, with
//! lineage-derived ground truth and baseline matchers to evaluate on them.
//!
//! The pipeline runs ontology → [`ontology::SchemaSet`] → base
//! [`corpus::Corpus`] → derived corpus → matcher predictions →
//! [`eval::EvalReport`].

pub mod corpus;
pub mod eval;
pub mod generate;
pub mod llm;
pub mod matchers;
pub mod ontology;
pub mod perturb;
pub mod pipeline;
pub mod text;
pub mod truth;

/// Any pipeline failure.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Ontology(#[from] ontology::OntologyError),
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Generate(#[from] generate::GenError),
    #[error(transparent)]
    Llm(#[from] llm::LlmError),
    #[error(transparent)]
    Perturb(#[from] perturb::PerturbError),
    #[error(transparent)]
    Truth(#[from] truth::TruthError),
    #[error(transparent)]
    Match(#[from] matchers::MatchError),
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/ontology.md")]
    mod ontology {}
    #[doc = include_str!("../../../book/src/generation.md")]
    mod generation {}
    #[doc = include_str!("../../../book/src/llm.md")]
    mod llm {}
    #[doc = include_str!("../../../book/src/perturbation.md")]
    mod perturbation {}
    #[doc = include_str!("../../../book/src/ground_truth.md")]
    mod ground_truth {}
    #[doc = include_str!("../../../book/src/matchers.md")]
    mod matchers {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
