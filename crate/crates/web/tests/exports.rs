use flood_web::{analyze_json, simulate_json, triangle_adversary_scenario_json};
use serde_json::Value;

fn parse(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn simulates_an_odd_cycle() {
    let scenario = r#"{"graph":{"edgeList":"a b\nb c\nc d\nd e\ne a"},
        "initiations":[{"node":"a","message":"M","round":0}]}"#;
    let doc = parse(&simulate_json(scenario).unwrap());
    assert_eq!(doc["verdict"]["lastRound"], 5);
    assert_eq!(doc["nodes"].as_array().unwrap().len(), 5);
    assert_eq!(doc["rounds"].as_array().unwrap().len(), 6);
    assert!(doc["checks"].as_array().unwrap().iter().all(|c| c["status"] != "fail"));
}

#[test]
fn triangle_adversary_never_stops() {
    let doc = parse(&simulate_json(&triangle_adversary_scenario_json()).unwrap());
    assert_eq!(doc["verdict"]["verdict"], "non-terminating");
    assert_eq!(doc["verdict"]["period"], 4);
}

#[test]
fn analyzes_adjacent_sources_on_c4() {
    let doc = parse(&analyze_json("a b\nb c\nc d\nd a", "a, b").unwrap());
    assert_eq!(doc["bipartite"], true);
    assert_eq!(doc["ecBipartite"], false);
    assert_eq!(doc["e"], 1);
}

#[test]
fn errors_are_strings() {
    assert!(simulate_json("{").is_err());
    assert!(analyze_json("a b", "z").unwrap_err().contains("unknown node"));
}
