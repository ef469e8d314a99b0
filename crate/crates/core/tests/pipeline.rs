use lakeforge::corpus::{corpus_digest, load_corpus, save_corpus};
use lakeforge::generate::{generate_base_tables, plan_generation, Backend, PromptTemplate, RowCaps, Source};
use lakeforge::llm::{Gateway, GatewayConfig, LlmError, Mode};
use lakeforge::ontology::{GroupingConfig, OntologyFormat};
use lakeforge::perturb::PerturbationPlan;
use lakeforge::pipeline::{compile, derive_offline, generate_offline, FIBO_SUBSET, FIBO_SUBSET_TTL, FINANCE};
use lakeforge::Error;

#[test]
fn derived_corpus_survives_a_save_load_cycle() {
    let base = generate_offline(FINANCE, 8, 25).unwrap().corpus;
    let derived = derive_offline(&base, &PerturbationPlan::default_plan()).unwrap().corpus;
    let dir = tempfile::tempdir().unwrap();
    let digest = save_corpus(&derived, dir.path()).unwrap();
    let loaded = load_corpus(dir.path()).unwrap();
    assert_eq!(loaded, derived);
    assert_eq!(corpus_digest(&loaded).unwrap(), digest);
}

#[test]
fn native_and_turtle_sources_compile_to_the_same_schemas() {
    let g = GroupingConfig::default();
    let (a, ga) = compile(FIBO_SUBSET, OntologyFormat::Native, &g).unwrap();
    let (b, gb) = compile(FIBO_SUBSET_TTL, OntologyFormat::Turtle, &g).unwrap();
    assert_eq!(a.tables, b.tables);
    assert_eq!(ga, gb);
}

#[test]
fn replay_without_a_recording_reports_a_cache_miss() {
    let cache = tempfile::tempdir().unwrap();
    let (schemas, graph) = compile(FIBO_SUBSET, OntologyFormat::Native, &GroupingConfig::default()).unwrap();
    let plan = plan_generation(&graph, &RowCaps::uniform(5), Backend::Llm).unwrap();
    let gw = Gateway::new(GatewayConfig::new(Mode::Replay, cache.path())).unwrap();
    let src = Source::Llm { completer: &gw, template: PromptTemplate::default() };
    let err = generate_base_tables(&schemas, &plan, &src, 1).map_err(Error::from).unwrap_err();
    assert!(err.to_string().contains("cache"), "{err}");
    assert!(matches!(Gateway::new(GatewayConfig::new(Mode::Live, cache.path())), Err(LlmError::NotConfigured(Mode::Live))));
}
