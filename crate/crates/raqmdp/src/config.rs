//! Scenario configuration files: commented TOML with one section per
//! subsystem. Parse errors carry line/column anchors; semantic errors name
//! the offending field.

use crate::idm::IdmParams;
use crate::mcts::SearchConfig;
use crate::qmdp::RiskConfig;
use crate::sim::mdp::{BpAction, CostWeights};
use crate::sim::planner::PlannerKind;
use crate::sim::sensor::SensorModel;
use crate::sim::{Scenario, ScenarioKind};
use crate::traffic::{ObjectKind, RoadModel, RoadObject, VehicleState};
use serde::Deserialize;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: String, source: Box<toml::de::Error> },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    scenario: ScenarioSection,
    #[serde(default)]
    road: Option<RoadSection>,
    #[serde(default)]
    ego: Option<EgoSection>,
    #[serde(default)]
    vehicles: Option<Vec<VehicleSection>>,
    sensor: SensorModel,
    #[serde(default)]
    idm: IdmParams,
    #[serde(default)]
    search: SearchConfig,
    #[serde(default)]
    risk: RiskConfig,
    #[serde(default)]
    cost: CostWeights,
    planner: PlannerSection,
    #[serde(default)]
    actions: Option<ActionsSection>,
    episode: EpisodeSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSection {
    kind: ScenarioKind,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RoadSection {
    #[serde(default)]
    merge_point: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EgoSection {
    #[serde(default)]
    x: f64,
    #[serde(default)]
    y: f64,
    v: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VehicleSection {
    id: u32,
    kind: ObjectKind,
    #[serde(default)]
    x: f64,
    y: f64,
    #[serde(default)]
    v: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlannerSection {
    kind: PlannerKind,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionsSection {
    intervals: Vec<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EpisodeSection {
    duration: f64,
    #[serde(default = "default_vehicle_length")]
    vehicle_length: f64,
    #[serde(default = "default_w0")]
    w0: f64,
    #[serde(default)]
    seed: u64,
}

fn default_vehicle_length() -> f64 {
    5.0
}

fn default_w0() -> f64 {
    0.5
}

/// A parsed and validated scenario plus the file's default seed.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub default_seed: u64,
}

/// Load and validate a scenario config file.
pub fn load_scenario(path: &Path) -> Result<LoadedScenario, ConfigError> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: display.clone(), source })?;
    parse_scenario(&text, &display)
}

/// Parse a scenario config from TOML text; `origin` labels error messages.
pub fn parse_scenario(text: &str, origin: &str) -> Result<LoadedScenario, ConfigError> {
    let file: ConfigFile = toml::from_str(text)
        .map_err(|source| ConfigError::Parse { path: origin.to_string(), source: Box::new(source) })?;

    let planner = file.planner.kind;
    let mut scenario = match file.scenario.kind {
        ScenarioKind::StationaryObject => {
            let range = match file.sensor {
                SensorModel::LimitedRange { range, .. } => range,
                _ => 60.0,
            };
            Scenario::stationary_object(range, planner)
        }
        ScenarioKind::RampMerge => Scenario::ramp_merge(planner),
    };

    scenario.sensor = file.sensor;
    scenario.idm = file.idm;
    scenario.search = file.search;
    scenario.risk = file.risk;
    scenario.cost = file.cost;
    scenario.duration = file.episode.duration;
    scenario.vehicle_length = file.episode.vehicle_length;
    scenario.w0 = file.episode.w0;

    if let Some(road) = file.road {
        if let Some(m) = road.merge_point {
            scenario.road = RoadModel::with_ramp(m);
        }
    }
    if let Some(ego) = file.ego {
        scenario.ego_start = VehicleState::longitudinal(ego.y, ego.v).with_x(ego.x);
    }
    if let Some(vehicles) = file.vehicles {
        scenario.others_start = vehicles
            .into_iter()
            .map(|v| RoadObject {
                id: v.id,
                state: VehicleState::longitudinal(v.y, v.v).with_x(v.x),
                kind: v.kind,
            })
            .collect();
    }
    if let Some(actions) = file.actions {
        scenario.actions = actions.intervals.iter().map(|[lo, hi]| BpAction::new(*lo, *hi)).collect();
    }

    scenario.validate().map_err(|e| ConfigError::Invalid {
        path: origin.to_string(),
        message: e.to_string(),
    })?;

    Ok(LoadedScenario { scenario, default_seed: file.episode.seed })
}

/// Reference config text for the stationary-object scenario.
pub fn example_scenario1_toml() -> &'static str {
    include_str!("../configs/scenario1.toml")
}

/// Reference config text for the ramp-merge scenario.
pub fn example_scenario2_toml() -> &'static str {
    include_str!("../configs/scenario2.toml")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_scenario1_parses() {
        let loaded = parse_scenario(example_scenario1_toml(), "scenario1.toml").unwrap();
        assert_eq!(loaded.scenario.kind, ScenarioKind::StationaryObject);
        assert!(matches!(loaded.scenario.sensor, SensorModel::LimitedRange { .. }));
        assert_eq!(loaded.scenario.actions.len(), 5);
    }

    #[test]
    fn shipped_scenario2_parses() {
        let loaded = parse_scenario(example_scenario2_toml(), "scenario2.toml").unwrap();
        assert_eq!(loaded.scenario.kind, ScenarioKind::RampMerge);
        assert_eq!(loaded.scenario.road.merge_point, Some(300.0));
    }

    #[test]
    fn parse_error_is_line_anchored() {
        let err = parse_scenario("[scenario\nkind = \"x\"", "broken.toml").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("broken.toml"), "{msg}");
        assert!(msg.to_lowercase().contains("line 1"), "{msg}");
    }

    #[test]
    fn negative_sensor_range_names_the_field() {
        let text = example_scenario1_toml().replace("range = 60.0", "range = -5.0");
        let err = parse_scenario(&text, "s.toml").unwrap_err();
        assert!(err.to_string().contains("sensor.range"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{}\n[extra]\nfoo = 1\n", example_scenario1_toml());
        assert!(parse_scenario(&text, "s.toml").is_err());
    }
}
