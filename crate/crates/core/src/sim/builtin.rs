//! Scenarios shipped with the crate.

use super::scenario::Scenario;

/// `(name, json)` of every shipped scenario.
pub const BUILTIN_SCENARIOS: [(&str, &str); 4] = [
    (
        "experiment1_slalom",
        include_str!("../../scenarios/experiment1_slalom.json"),
    ),
    (
        "experiment2_overtake",
        include_str!("../../scenarios/experiment2_overtake.json"),
    ),
    ("experiment3_tv", include_str!("../../scenarios/experiment3_tv.json")),
    (
        "experiment4_handover",
        include_str!("../../scenarios/experiment4_handover.json"),
    ),
];

/// Parsed shipped scenario by name.
pub fn builtin_scenario(name: &str) -> Option<Scenario> {
    BUILTIN_SCENARIOS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, json)| Scenario::from_json(json).expect("shipped scenarios are valid"))
}
