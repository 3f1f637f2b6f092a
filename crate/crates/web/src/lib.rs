//! Browser bindings. Every export takes and returns JSON strings; the page
//! in `www/` draws the graph and lets a slider step through the rounds.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use flood_core::analysis;
use flood_core::engine::Instance;
use flood_core::graph::{self, parse_edge_list, SourceSet};
use flood_core::report::{round_json, verdict_json};
use flood_core::scenario::Scenario;
use flood_core::timing::triangle_adversary_scenario;

/// Longest run the page will draw.
const MAX_ROUNDS: u32 = 500;

/// Runs a scenario: nodes, initial edges, one object per round, the
/// verdict and the theorem checks.
pub fn simulate_json(scenario: &str) -> Result<String, String> {
    let scenario = Scenario::from_json(scenario, None).map_err(|e| e.to_string())?;
    let budget = scenario.budget.unwrap_or_else(|| scenario.instance.default_budget()).min(MAX_ROUNDS);
    let outcome = scenario.instance.run(Some(budget)).map_err(|e| e.to_string())?;
    let labels = &scenario.labels;
    let g = &scenario.instance.graph;
    let rounds: Vec<Value> = outcome.trace.rounds.iter().map(|r| round_json(labels, r, None)).collect();
    let checks: Vec<Value> = analysis::verify(&scenario.instance, &outcome)
        .iter()
        .map(|c| serde_json::to_value(c).expect("serializable"))
        .collect();
    let doc = json!({
        "nodes": g.labels(),
        "edges": g.edges().map(|e| [g.label(e.lo()), g.label(e.hi())]).collect::<Vec<_>>(),
        "rounds": rounds,
        "verdict": verdict_json(&outcome.verdict),
        "checks": checks,
    });
    Ok(doc.to_string())
}

/// Distance sets, ec nodes, eccentricity and diameter for a comma- or
/// space-separated source list.
pub fn analyze_json(edge_list: &str, sources: &str) -> Result<String, String> {
    let parsed = parse_edge_list(edge_list).map_err(|e| e.to_string())?;
    let g = parsed.graph();
    let ids = sources
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|l| g.node_by_label(l).ok_or_else(|| format!("unknown node {l:?}")))
        .collect::<Result<Vec<_>, _>>()?;
    let set = SourceSet::new(g, ids).map_err(|e| e.to_string())?;
    let label = |v: usize| g.label(v).to_string();
    let sets: Vec<Vec<String>> = graph::distance_sets(g, &set)
        .into_values()
        .map(|nodes| nodes.into_iter().map(label).collect())
        .collect();
    let doc = json!({
        "distanceSets": sets,
        "ecNodes": graph::ec_nodes(g, &set).into_iter().map(label).collect::<Vec<_>>(),
        "e": graph::eccentricity(g, &set).ok(),
        "d": graph::diameter(g).ok(),
        "bipartite": graph::is_bipartite(g),
        "ecBipartite": graph::is_ec_bipartite(g, &set),
    });
    Ok(doc.to_string())
}

/// The built-in adversarial triangle as scenario JSON.
pub fn triangle_adversary_scenario_json() -> String {
    let (graph, schedule, delays) = triangle_adversary_scenario();
    let instance = Instance::basic(graph, []).with_schedule(schedule).with_delays(delays);
    Scenario::from_instance(instance, None).to_json()
}

#[wasm_bindgen]
pub fn simulate(scenario: &str) -> Result<String, JsError> {
    simulate_json(scenario).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn analyze(edge_list: &str, sources: &str) -> Result<String, JsError> {
    analyze_json(edge_list, sources).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn triangle_adversary() -> String {
    triangle_adversary_scenario_json()
}
