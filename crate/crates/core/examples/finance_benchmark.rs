//! Builds the finance benchmark offline and scores the three built-in
//! matchers on it.
//!
//! Usage: `cargo run --release --example finance_benchmark [seed] [row_cap]`

use std::time::Instant;

use lakeforge::corpus::corpus_digest;
use lakeforge::eval::{evaluate, render_text, EvalConfig, Task};
use lakeforge::matchers::{HybridMatcher, JlMatcher, Matcher, SfMatcher};
use lakeforge::perturb::PerturbationPlan;
use lakeforge::pipeline::{derive_offline, generate_offline, FINANCE};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(Ok(42), |s| s.parse())?;
    let cap: usize = args.next().map_or(Ok(1000), |s| s.parse())?;

    let t = Instant::now();
    let base = generate_offline(FINANCE, seed, cap)?;
    let corpus = derive_offline(&base.corpus, &PerturbationPlan::default_plan())?.corpus;
    println!("{:?} in {:.2?}", corpus.stats(), t.elapsed());

    let digest = corpus_digest(&corpus)?;
    let matchers: Vec<Box<dyn Matcher>> =
        vec![Box::new(JlMatcher::default()), Box::new(SfMatcher::default()), Box::new(HybridMatcher::default())];
    let mut reports = Vec::new();
    for m in &matchers {
        let t = Instant::now();
        let preds = m.match_corpus(&corpus)?;
        eprintln!("{} took {:.2?}", m.id(), t.elapsed());
        for task in [Task::ExactJoins, Task::SemanticJoins] {
            reports.push(evaluate(&m.id(), &digest, &preds, &corpus.ground_truth, task, &EvalConfig::default()));
        }
    }
    print!("{}", render_text(&reports));
    Ok(())
}
