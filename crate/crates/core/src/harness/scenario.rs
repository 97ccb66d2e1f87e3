use serde::{Deserialize, Serialize};

use crate::world::WorldConfig;
use crate::SimError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub pursuers: usize,
    pub evaders: usize,
    pub obstacles: usize,
    pub vortices: usize,
    #[serde(default = "default_cap")]
    pub episode_cap: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

fn default_cap() -> u64 {
    1000
}

fn default_trials() -> usize {
    20
}

impl ScenarioSpec {
    pub fn new(name: &str, pursuers: usize, evaders: usize, obstacles: usize, vortices: usize) -> Self {
        Self {
            name: name.to_string(),
            pursuers,
            evaders,
            obstacles,
            vortices,
            episode_cap: default_cap(),
            trials: default_trials(),
        }
    }

    pub fn counts(&self) -> (usize, usize, usize, usize) {
        (self.pursuers, self.evaders, self.obstacles, self.vortices)
    }

    pub fn world(&self, base: &WorldConfig) -> WorldConfig {
        base.clone()
            .with_counts(self.pursuers, self.evaders, self.obstacles, self.vortices)
    }
}

/// The ten evaluation scenarios.
pub fn scenario_catalog() -> Vec<ScenarioSpec> {
    [
        ("small-1", 11, 3, 2, 8),
        ("small-2", 15, 4, 4, 8),
        ("small-3", 19, 5, 6, 8),
        ("medium-1", 48, 12, 8, 8),
        ("medium-2", 51, 13, 8, 8),
        ("medium-3", 56, 14, 8, 8),
        ("large-1", 72, 18, 8, 8),
        ("large-2", 76, 19, 8, 8),
        ("large-3", 80, 20, 8, 8),
        ("CC", 28, 14, 8, 8),
    ]
    .into_iter()
    .map(|(n, p, e, o, v)| ScenarioSpec::new(n, p, e, o, v))
    .collect()
}

pub fn find_scenario(catalog: &[ScenarioSpec], name: &str) -> Result<ScenarioSpec, SimError> {
    catalog
        .iter()
        .find(|s| s.name == name)
        .cloned()
        .ok_or_else(|| SimError::UnknownScenario(name.to_string()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    scenario: Vec<ScenarioSpec>,
}

/// Reads `[[scenario]]` tables; entries replace built-in scenarios of the
/// same name and new names are appended.
pub fn catalog_with_overrides(text: &str) -> Result<Vec<ScenarioSpec>, SimError> {
    let file: CatalogFile = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
    let mut catalog = scenario_catalog();
    for s in file.scenario {
        match catalog.iter_mut().find(|c| c.name == s.name) {
            Some(slot) => *slot = s,
            None => catalog.push(s),
        }
    }
    Ok(catalog)
}
