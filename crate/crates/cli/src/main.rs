//! `lakeforge`: build joinable-table benchmark corpora from an ontology and
//! evaluate matchers on them.
//!
//! Exit codes: 0 success, 2 input error, 3 generation error, 4 perturbation
//! error, 5 evaluation error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use lakeforge::corpus::{load_corpus, save_corpus, Corpus, CorpusStats};
use lakeforge::eval::{evaluate, render_json, render_text, EvalConfig, EvalReport, Task};
use lakeforge::generate::{generate_base_tables, plan_generation, Backend, PromptTemplate, RowCaps, Source, DEFAULT_ROW_CAP};
use lakeforge::llm::{Completer, Gateway, GatewayConfig, Mode};
use lakeforge::matchers::{write_predictions, ExternalMatcher, HybridMatcher, JlMatcher, Matcher, SfConfig, SfMatcher};
use lakeforge::ontology::{GroupingConfig, OntologyFormat};
use lakeforge::perturb::{apply_plan, OfflineParaphraser, PerturbationPlan};
use lakeforge::pipeline::compile;

const SCHEMAS_FILE: &str = "schemas.json";
const STATS_FILE: &str = "stats.json";
const REPORT_TEXT_FILE: &str = "report.txt";
const REPORT_JSON_FILE: &str = "report.json";
const PREDICTIONS_DIR: &str = "predictions";

#[derive(Debug, Parser)]
#[command(name = "lakeforge", version, about = "Ontology-driven joinable-table benchmark generator")]
struct Cli {
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compile an ontology into table schemas.
    Schema {
        #[arg(long)]
        ontology: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        grouping: GroupingArgs,
    },
    /// Populate base tables from an ontology.
    Generate {
        #[arg(long)]
        ontology: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_ROW_CAP)]
        row_cap: usize,
        #[command(flatten)]
        grouping: GroupingArgs,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Derive tables from a corpus with a perturbation plan.
    Perturb {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Seed for every perturbation draw; recorded as the derived corpus seed.
        #[arg(long)]
        seed: u64,
        /// TOML plan; the built-in default plan when omitted.
        #[arg(long)]
        plan: Option<PathBuf>,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Run matchers over a corpus and score them against its ground truth.
    Evaluate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Seed for value sampling inside matchers.
        #[arg(long)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "jl,sf,hybrid")]
        matchers: Vec<MatcherKind>,
        /// Shell command of an external matcher; `{corpus}` and `{out}` are substituted.
        #[arg(long = "external")]
        external: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "exact_joins,semantic_joins")]
        tasks: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "1,3,5")]
        k: Vec<usize>,
        #[arg(long, default_value_t = lakeforge::eval::DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long, default_value_t = lakeforge::matchers::DEFAULT_DELTA)]
        jl_delta: f64,
        /// Name and instance weights of the hybrid matcher.
        #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.5, 0.5])]
        hybrid_weights: Vec<f64>,
        /// Add value-token nodes to the similarity flooding graphs.
        #[arg(long)]
        sf_tokens: bool,
    },
    /// Print corpus statistics.
    Stats {
        #[arg(long)]
        corpus: PathBuf,
        /// Also write the statistics as JSON into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct GroupingArgs {
    /// Concepts with fewer data properties are folded into a neighbour.
    #[arg(long, default_value_t = GroupingConfig::default().min_props)]
    min_props: usize,
}

#[derive(Debug, Args)]
struct BackendArgs {
    #[arg(long, value_enum, default_value_t = BackendKind::Offline)]
    backend: BackendKind,
    #[arg(long, default_value = "replay")]
    mode: Mode,
    /// Completion cache directory.
    #[arg(long, default_value = ".lakeforge-cache")]
    cache: PathBuf,
    #[arg(long, env = "LAKEFORGE_ENDPOINT", hide_env_values = true)]
    endpoint: Option<String>,
    #[arg(long, env = "LAKEFORGE_API_KEY", hide_env_values = true)]
    api_key: Option<String>,
    /// Model name sent with every completion request.
    #[arg(long, default_value = lakeforge::llm::DEFAULT_MODEL)]
    model: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    Llm,
    Offline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MatcherKind {
    Jl,
    Sf,
    Hybrid,
}

/// A failure carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl ToString) -> Self {
        Failure { code: 2, message: message.to_string() }
    }
    fn generation(message: impl ToString) -> Self {
        Failure { code: 3, message: message.to_string() }
    }
    fn perturbation(message: impl ToString) -> Self {
        Failure { code: 4, message: message.to_string() }
    }
    fn evaluation(message: impl ToString) -> Self {
        Failure { code: 5, message: message.to_string() }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            warn!("cannot size worker pool: {e}");
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Schema { ontology, out, grouping } => cmd_schema(&ontology, &out, &grouping),
        Command::Generate { ontology, out, seed, row_cap, grouping, backend } => {
            cmd_generate(&ontology, &out, seed, row_cap, &grouping, &backend)
        }
        Command::Perturb { corpus, out, seed, plan, backend } => cmd_perturb(&corpus, &out, seed, plan.as_deref(), &backend),
        Command::Evaluate { corpus, out, seed, matchers, external, tasks, k, threshold, jl_delta, hybrid_weights, sf_tokens } => {
            let selection = Selection { kinds: matchers, external, jl_delta, hybrid_weights, sf_tokens, seed };
            cmd_evaluate(&corpus, &out, &selection, &tasks, &k, threshold)
        }
        Command::Stats { corpus, out } => cmd_stats(&corpus, out.as_deref()),
    }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn write_output(path: &Path, body: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Failure::input(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, body).map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
}

fn open_corpus(dir: &Path) -> Result<Corpus, Failure> {
    load_corpus(dir).map_err(|e| Failure::input(format!("{}: {e}", dir.display())))
}

fn gateway(args: &BackendArgs) -> Result<Gateway, Failure> {
    let cfg = GatewayConfig {
        endpoint: args.endpoint.clone(),
        api_key: args.api_key.clone(),
        model: args.model.clone(),
        ..GatewayConfig::new(args.mode, &args.cache)
    };
    Gateway::new(cfg).map_err(Failure::input)
}

fn cmd_schema(ontology: &Path, out: &Path, grouping: &GroupingArgs) -> Outcome {
    let source = read_input(ontology)?;
    let cfg = GroupingConfig { min_props: grouping.min_props };
    let (schemas, _) = compile(&source, OntologyFormat::from_path(ontology), &cfg).map_err(Failure::input)?;
    let mut body = serde_json::to_string_pretty(&schemas).expect("schemas serialize");
    body.push('\n');
    write_output(&out.join(SCHEMAS_FILE), &body)?;
    let mut summary = String::new();
    for t in &schemas.tables {
        let _ = writeln!(summary, "{} ({} columns, key {})", t.name, t.columns.len(), t.primary_key);
    }
    for (concept, table) in &schemas.merged {
        let _ = writeln!(summary, "{concept} folded into {table}");
    }
    print!("{summary}");
    Ok(())
}

fn cmd_generate(ontology: &Path, out: &Path, seed: u64, row_cap: usize, grouping: &GroupingArgs, backend: &BackendArgs) -> Outcome {
    let source = read_input(ontology)?;
    let cfg = GroupingConfig { min_props: grouping.min_props };
    let (schemas, graph) = compile(&source, OntologyFormat::from_path(ontology), &cfg).map_err(Failure::input)?;
    let kind = match backend.backend {
        BackendKind::Llm => Backend::Llm,
        BackendKind::Offline => Backend::Offline,
    };
    let plan = plan_generation(&graph, &RowCaps::uniform(row_cap), kind).map_err(Failure::input)?;
    let gw = match backend.backend {
        BackendKind::Llm => Some(gateway(backend)?),
        BackendKind::Offline => None,
    };
    let src = match &gw {
        Some(g) => Source::Llm { completer: g, template: PromptTemplate::default() },
        None => Source::Offline,
    };
    let generated = generate_base_tables(&schemas, &plan, &src, seed).map_err(Failure::generation)?;
    let digest = save_corpus(&generated.corpus, out).map_err(Failure::generation)?;
    print!("{}", generated.report.render());
    println!("digest {digest}");
    info!("wrote {} tables to {}", generated.corpus.tables.len(), out.display());
    Ok(())
}

fn cmd_perturb(corpus: &Path, out: &Path, seed: u64, plan: Option<&Path>, backend: &BackendArgs) -> Outcome {
    let mut base = open_corpus(corpus)?;
    let plan = match plan {
        Some(p) => PerturbationPlan::from_toml(&read_input(p)?)
            .map_err(|e| Failure::perturbation(format!("{}: {e}", p.display())))?,
        None => PerturbationPlan::default_plan(),
    };
    base.seed = seed;
    let gw = match backend.backend {
        BackendKind::Llm => Some(gateway(backend)?),
        BackendKind::Offline => None,
    };
    let completer: &dyn Completer = match &gw {
        Some(g) => g,
        None => &OfflineParaphraser,
    };
    let perturbed = apply_plan(&base, &plan, Some(completer)).map_err(Failure::perturbation)?;
    info!("{} warnings", perturbed.warnings.len());
    let digest = save_corpus(&perturbed.corpus, out).map_err(Failure::perturbation)?;
    print!("{}", render_stats(&perturbed.corpus.stats()));
    println!("digest {digest}");
    Ok(())
}

struct Selection {
    kinds: Vec<MatcherKind>,
    external: Vec<String>,
    jl_delta: f64,
    hybrid_weights: Vec<f64>,
    sf_tokens: bool,
    seed: u64,
}

impl Selection {
    fn build(&self, corpus_dir: &Path) -> Result<Vec<Box<dyn Matcher>>, Failure> {
        let mut out: Vec<Box<dyn Matcher>> = Vec::new();
        for kind in &self.kinds {
            out.push(match kind {
                MatcherKind::Jl => Box::new(JlMatcher { seed: self.seed, ..JlMatcher::new(self.jl_delta).map_err(Failure::input)? }),
                MatcherKind::Sf => Box::new(SfMatcher { config: SfConfig { instance_tokens: self.sf_tokens, ..SfConfig::default() } }),
                MatcherKind::Hybrid => {
                    let m = HybridMatcher::new(self.hybrid_weights[0], self.hybrid_weights[1]).map_err(Failure::input)?;
                    Box::new(HybridMatcher { seed: self.seed, ..m })
                }
            });
        }
        for command in &self.external {
            out.push(Box::new(ExternalMatcher { command: command.clone(), corpus_dir: corpus_dir.to_path_buf() }));
        }
        Ok(out)
    }
}

/// File-system-safe form of a matcher id.
fn slug(id: &str) -> String {
    let mut s: String = id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' }).collect();
    while s.contains("__") {
        s = s.replace("__", "_");
    }
    s.trim_matches('_').to_string()
}

fn cmd_evaluate(corpus_dir: &Path, out: &Path, selection: &Selection, tasks: &[String], ks: &[usize], threshold: f64) -> Outcome {
    let corpus = open_corpus(corpus_dir)?;
    let tasks: Vec<Task> = tasks
        .iter()
        .map(|t| Task::parse(t).ok_or_else(|| Failure::input(format!("unknown task `{t}`"))))
        .collect::<Result<_, _>>()?;
    if ks.contains(&0) {
        return Err(Failure::input("k must be at least 1"));
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Failure::input(format!("threshold {threshold} is outside [0, 1]")));
    }
    let matchers = selection.build(corpus_dir)?;
    let digest = lakeforge::corpus::corpus_digest(&corpus).map_err(Failure::input)?;
    let cfg = EvalConfig { threshold, ks: ks.to_vec(), ..EvalConfig::default() };
    let mut reports: Vec<EvalReport> = Vec::new();
    for m in &matchers {
        let id = m.id();
        info!("running {id}");
        let preds = m.match_corpus(&corpus).map_err(|e| Failure::evaluation(format!("{id}: {e}")))?;
        write_output(&out.join(PREDICTIONS_DIR).join(format!("{}.csv", slug(&id))), &write_predictions(&preds))?;
        for &task in &tasks {
            reports.push(evaluate(&id, &digest, &preds, &corpus.ground_truth, task, &cfg));
        }
    }
    for r in &reports {
        if r.degenerate {
            warn!("{} on {}: truth set is empty", r.matcher, r.task.as_str());
        }
    }
    let text = render_text(&reports);
    write_output(&out.join(REPORT_TEXT_FILE), &text)?;
    write_output(&out.join(REPORT_JSON_FILE), &render_json(&reports))?;
    print!("{text}");
    Ok(())
}

/// One-line corpus summary: base tables, tables, average rows and columns, join counts.
fn render_stats(s: &CorpusStats) -> String {
    let header = ["base tables", "tables", "avg rows", "avg columns", "exact joins", "semantic joins"];
    let cells = [
        s.base_tables.to_string(),
        s.tables.to_string(),
        format!("{:.2}", s.avg_rows),
        format!("{:.2}", s.avg_columns),
        s.exact_joins.to_string(),
        s.semantic_joins.to_string(),
    ];
    let widths: Vec<usize> = header.iter().zip(&cells).map(|(h, c)| h.len().max(c.len())).collect();
    let line = |cols: Vec<&str>| cols.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect::<Vec<_>>().join(" | ");
    format!("{}\n{}\n", line(header.to_vec()), line(cells.iter().map(String::as_str).collect()))
}

fn cmd_stats(corpus: &Path, out: Option<&Path>) -> Outcome {
    let c = open_corpus(corpus)?;
    let stats = c.stats();
    if let Some(dir) = out {
        let mut body = serde_json::to_string_pretty(&stats).expect("stats serialize");
        body.push('\n');
        write_output(&dir.join(STATS_FILE), &body)?;
    }
    print!("{}", render_stats(&stats));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs_are_path_safe() {
        assert_eq!(slug("jl(delta=0.8)"), "jl_delta_0.8");
        assert_eq!(slug("hybrid(w_name=0.5, w_instance=0.5)"), "hybrid_w_name_0.5_w_instance_0.5");
    }

    #[test]
    fn stats_row_has_six_columns() {
        let s = render_stats(&CorpusStats { base_tables: 0, tables: 0, avg_rows: 0.0, avg_columns: 0.0, exact_joins: 0, semantic_joins: 0 });
        assert_eq!(s.lines().count(), 2);
        assert_eq!(s.lines().nth(1).unwrap().split('|').count(), 6);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
