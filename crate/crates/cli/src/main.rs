//! `flood`: run, analyze, verify and search amnesiac flooding scenarios.
//!
//! Exit codes: 0 terminated / all checks pass / search succeeded,
//! 20 non-terminating, 30 budget exhausted, 10 a check failed or the
//! search found a counterexample, 2 the search found nothing, 1 bad input.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use flood_core::analysis::{self, CheckReport};
use flood_core::engine::{Instance, Verdict};
use flood_core::graph::{self, parse_edge_list, Graph, SourceSet};
use flood_core::report::{canonical_json, outcome_jsonl, verdict_json, Labels};
use flood_core::scenario::Scenario;
use flood_core::search::{self, SearchLimits, SearchOutcome, WitnessFamily};

const EXIT_CHECK_FAILED: u8 = 10;
const EXIT_NOT_FOUND: u8 = 2;
const EXIT_INPUT: u8 = 1;

#[derive(Parser)]
#[command(name = "flood", version, about = "Amnesiac flooding simulator and theorem checker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario; prints one JSON line per round, then the verdict.
    Run {
        /// Scenario JSON file, or "-" for stdin.
        scenario: PathBuf,
        #[arg(long)]
        budget: Option<u32>,
        /// Write the output here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Distance structure of a graph relative to a source set.
    Analyze {
        /// Edge-list file, or "-" for stdin.
        graph: PathBuf,
        #[arg(long, conflicts_with = "sources")]
        source: Option<String>,
        /// Comma-separated node labels.
        #[arg(long, value_delimiter = ',')]
        sources: Vec<String>,
    },
    /// Simulate a scenario and run every applicable theorem check.
    Verify {
        scenario: PathBuf,
        #[arg(long)]
        budget: Option<u32>,
    },
    /// Exhaustive and randomized searches.
    Search(SearchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    /// Count connected labelled graphs on --max-nodes nodes.
    Count,
    /// Check every single-source run on connected graphs up to --max-nodes.
    Sweep,
    /// Runs meeting the termination bounds exactly.
    Sharp,
    /// Random multi-source runs checked against the termination bounds.
    RandomBounds,
    FixedDelay,
    Unranked,
    EdgeAddition,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(value_enum)]
    family: Family,
    #[arg(long, default_value_t = 6)]
    max_nodes: usize,
    #[arg(long, default_value_t = 4)]
    max_weight: u32,
    #[arg(long, default_value_t = 3)]
    max_round: u32,
    #[arg(long, default_value_t = 5_000_000)]
    max_candidates: u64,
    /// Cases for random-bounds.
    #[arg(long, default_value_t = 1000)]
    cases: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for witness scenario files.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn dispatch(command: Command) -> Result<u8> {
    match command {
        Command::Run { scenario, budget, out } => cmd_run(&scenario, budget, out.as_deref()),
        Command::Analyze { graph, source, sources } => {
            let sources = source.map(|s| vec![s]).unwrap_or(sources);
            cmd_analyze(&graph, &sources)
        }
        Command::Verify { scenario, budget } => cmd_verify(&scenario, budget),
        Command::Search(args) => cmd_search(&args),
    }
}

fn read_input(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut text = String::new();
        io::stdin().read_to_string(&mut text).context("reading stdin")?;
        Ok(text)
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
    }
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = read_input(path)?;
    let base = if path == Path::new("-") { None } else { path.parent() };
    Scenario::from_json(&text, base).map_err(|e| anyhow::anyhow!("invalid scenario: {e}"))
}

fn verdict_code(verdict: &Verdict) -> u8 {
    match verdict {
        Verdict::Terminated { .. } => 0,
        Verdict::NonTerminating { .. } => 20,
        Verdict::BudgetExhausted { .. } => 30,
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            io::stdout().lock().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn cmd_run(path: &Path, budget: Option<u32>, out: Option<&Path>) -> Result<u8> {
    let scenario = load_scenario(path)?;
    let outcome = scenario.instance.run(budget.or(scenario.budget))?;
    emit(&outcome_jsonl(&scenario.labels, &outcome), out)?;
    Ok(verdict_code(&outcome.verdict))
}

fn cmd_analyze(path: &Path, sources: &[String]) -> Result<u8> {
    let parsed = parse_edge_list(&read_input(path)?)?;
    let g = parsed.graph();
    if sources.is_empty() {
        bail!("give --source or --sources");
    }
    let ids = sources
        .iter()
        .map(|l| g.node_by_label(l).with_context(|| format!("unknown node {l:?}")))
        .collect::<Result<Vec<_>>>()?;
    let set = SourceSet::new(g, ids)?;
    let label = |v: usize| g.label(v).to_string();
    let connected = g.is_connected();

    let mut report = json!({
        "nodes": g.node_count(),
        "edges": g.edge_count(),
        "sources": set.iter().map(label).collect::<Vec<_>>(),
        "bipartite": graph::is_bipartite(g),
        "ecBipartite": graph::is_ec_bipartite(g, &set),
        "ecNodes": graph::ec_nodes(g, &set).into_iter().map(label).collect::<Vec<_>>(),
        "distanceSets": graph::distance_sets(g, &set)
            .into_iter()
            .map(|(d, nodes)| (d.to_string(), json!(nodes.into_iter().map(label).collect::<Vec<_>>())))
            .collect::<serde_json::Map<_, _>>(),
        "e": graph::eccentricity(g, &set).ok(),
        "d": graph::diameter(g).ok(),
    });
    if !connected {
        let warning = "graph is disconnected: eccentricity and diameter are undefined";
        eprintln!("warning: {warning}");
        report["warning"] = json!(warning);
    }
    println!("{}", canonical_json(&report));
    Ok(0)
}

/// Check reports with node and message ids replaced by labels.
fn labelled_checks(labels: &Labels, reports: &[CheckReport]) -> Vec<Value> {
    reports
        .iter()
        .map(|r| {
            let mut v = serde_json::to_value(r).expect("serializable");
            if let Some(violation) = v.get_mut("violation") {
                if let Some(node) = violation.get("node").and_then(Value::as_u64) {
                    violation["node"] = json!(labels.node(node as usize));
                }
                if let Some(m) = violation.get("message").and_then(Value::as_u64) {
                    violation["message"] = json!(labels.message(flood_core::MessageId(m as u32)));
                }
            }
            v
        })
        .collect()
}

fn cmd_verify(path: &Path, budget: Option<u32>) -> Result<u8> {
    let scenario = load_scenario(path)?;
    let outcome = scenario.instance.run(budget.or(scenario.budget))?;
    let reports = analysis::verify(&scenario.instance, &outcome);
    let failed = reports.iter().any(CheckReport::failed);
    let doc = json!({
        "verdict": verdict_json(&outcome.verdict),
        "checks": labelled_checks(&scenario.labels, &reports),
        "passed": !failed,
    });
    println!("{}", canonical_json(&doc));
    Ok(if failed { EXIT_CHECK_FAILED } else { 0 })
}

fn write_scenario(dir: Option<&Path>, name: &str, scenario: &Scenario) -> Result<Option<PathBuf>> {
    let Some(dir) = dir else { return Ok(None) };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(format!("{name}.json"));
    fs::write(&path, scenario.to_json()).with_context(|| format!("writing {}", path.display()))?;
    Ok(Some(path))
}

fn cmd_search(args: &SearchArgs) -> Result<u8> {
    let out = args.out.as_deref();
    match args.family {
        Family::Count => {
            let count = search::connected_edge_masks(args.max_nodes)?.count();
            println!("{}", json!({ "nodes": args.max_nodes, "connectedGraphs": count }));
            Ok(0)
        }
        Family::Sweep => {
            let report = search::sweep_single_source(args.max_nodes)?;
            println!("{}", canonical_json(&report));
            Ok(if report.violations.is_empty() { 0 } else { EXIT_CHECK_FAILED })
        }
        Family::Sharp => {
            let mut found = Vec::new();
            for n in 1..=args.max_nodes {
                for s in search::find_sharp_instances(n, 1)? {
                    let name = format!("sharp-{}-n{}-{}", kind_name(&s), n, s.edge_mask);
                    let file = write_scenario(out, &name, &Scenario::from_instance(s.instance(), None))?;
                    let mut v = serde_json::to_value(&s)?;
                    if let Some(file) = file {
                        v["file"] = json!(file.display().to_string());
                    }
                    found.push(v);
                }
            }
            println!("{}", canonical_json(&found));
            Ok(if found.is_empty() { EXIT_NOT_FOUND } else { 0 })
        }
        Family::RandomBounds => random_bounds(args),
        Family::FixedDelay | Family::Unranked | Family::EdgeAddition => {
            let family = match args.family {
                Family::FixedDelay => WitnessFamily::FixedDelay,
                Family::Unranked => WitnessFamily::UnrankedFullSend,
                _ => WitnessFamily::EdgeAddition,
            };
            let limits = SearchLimits {
                max_nodes: args.max_nodes,
                max_weight: args.max_weight,
                max_round: args.max_round,
                max_candidates: args.max_candidates,
            };
            match search::find_nontermination_witness(family, &limits)? {
                SearchOutcome::Found(w) => {
                    let scenario = Scenario::from_instance(w.instance.clone(), None);
                    let name = serde_json::to_value(family)?.as_str().unwrap_or("witness").to_string();
                    let file = write_scenario(out, &name, &scenario)?;
                    let doc = json!({
                        "family": family,
                        "found": true,
                        "examined": w.examined,
                        "cycleStart": w.cycle_start,
                        "period": w.period,
                        "certificate": w.certificate.fingerprint().to_hex(),
                        "reverified": w.reverify(),
                        "file": file.map(|f| f.display().to_string()),
                        "scenario": serde_json::to_value(scenario.to_file())?,
                    });
                    println!("{}", canonical_json(&doc));
                    Ok(0)
                }
                SearchOutcome::NotFound { examined } => {
                    println!("{}", canonical_json(&json!({ "family": family, "found": false, "examined": examined })));
                    Ok(EXIT_NOT_FOUND)
                }
            }
        }
    }
}

fn kind_name(s: &search::SharpInstance) -> &'static str {
    match s.kind {
        search::Sharpness::Upper => "upper",
        search::Sharpness::Lower => "lower",
    }
}

fn random_bounds(args: &SearchArgs) -> Result<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut failures = Vec::new();
    for case in 0..args.cases {
        let n = rng.gen_range(1..=args.max_nodes.max(1));
        let g: Graph = search::random_connected_graph(&mut rng, n, 0.3);
        let sources = search::random_sources(&mut rng, &g, 4);
        let set = SourceSet::new(&g, sources.iter().copied())?;
        let outcome = Instance::basic(g.clone(), sources).run(None)?;
        let bound = analysis::check_bounds(&g, &set, &outcome.trace)?;
        if !bound.passed {
            failures.push(json!({ "case": case, "graph": g.to_string(), "report": bound }));
        }
    }
    println!("{}", canonical_json(&json!({ "cases": args.cases, "seed": args.seed, "failures": failures })));
    Ok(if failures.is_empty() { 0 } else { EXIT_CHECK_FAILED })
}
