//! Scenario files: world layout, cameras, scripted people and events.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costmap::{InflationParams, ObstacleSet};
use crate::detection::{CameraEntry, CameraRegistry};
use crate::geometry::{GridSpec, Homography, WorldPoint};
use crate::planner::{DEFAULT_COST_WEIGHT, DEFAULT_REPLAN_PERIOD};
use crate::social::SocialParams;
use crate::tracking::TrackerParams;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario")]
    Io(#[from] std::io::Error),
    #[error("schema error at `{path}`: {msg}")]
    Schema { path: String, msg: String },
    #[error("invalid scenario: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub origin: WorldPoint,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
}

impl GridConfig {
    pub fn spec(&self) -> Result<GridSpec, ScenarioError> {
        GridSpec::new(self.origin, self.resolution, self.width, self.height)
            .map_err(|e| ScenarioError::Validation(format!("grid: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticDetectorParams {
    /// Std of the feet-point pixel noise, pixels.
    pub pixel_noise_std: f64,
    pub miss_prob: f64,
    /// Expected false detections per frame.
    pub clutter_rate: f64,
    pub score_mean_tp: f64,
    pub score_std_tp: f64,
    pub score_mean_fp: f64,
    pub score_std_fp: f64,
}

impl Default for SyntheticDetectorParams {
    fn default() -> Self {
        Self {
            pixel_noise_std: 2.0,
            miss_prob: 0.05,
            clutter_rate: 0.2,
            score_mean_tp: 70.0,
            score_std_tp: 8.0,
            score_mean_fp: 15.0,
            score_std_fp: 8.0,
        }
    }
}

impl SyntheticDetectorParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.miss_prob) {
            return Err("miss_prob must lie in [0, 1]".into());
        }
        let non_negative = [
            ("pixel_noise_std", self.pixel_noise_std),
            ("clutter_rate", self.clutter_rate),
            ("score_std_tp", self.score_std_tp),
            ("score_std_fp", self.score_std_fp),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("{name} must be non-negative"));
            }
        }
        if !(self.score_mean_tp.is_finite() && self.score_mean_fp.is_finite()) {
            return Err("score means must be finite".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub id: String,
    /// Image to ground, row-major.
    pub homography: [f64; 9],
    pub image_width: u32,
    pub image_height: u32,
    /// Ground region the camera sees.
    pub fov: Vec<WorldPoint>,
    #[serde(default = "default_measurement_noise")]
    pub measurement_noise_std: f64,
    #[serde(default)]
    pub detector: SyntheticDetectorParams,
}

fn default_measurement_noise() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    /// Earliest time the person heads for this point.
    #[serde(default)]
    pub time: f64,
    pub position: WorldPoint,
    #[serde(default = "default_walk_speed")]
    pub speed: f64,
}

fn default_walk_speed() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersonConfig {
    pub id: String,
    pub position: WorldPoint,
    /// Facing direction while not walking, radians.
    #[serde(default)]
    pub facing: f64,
    #[serde(default)]
    pub seated: bool,
    #[serde(default)]
    pub script: Vec<Waypoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectConfig {
    pub id: String,
    pub position: WorldPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventKind {
    /// The person follows its script from now on.
    StartWalking {
        person: String,
    },
    InteractionOn {
        person: String,
        object: String,
        #[serde(default = "default_importance")]
        importance: f64,
    },
    InteractionOff {
        person: String,
        object: String,
    },
    /// The robot should approach the person to hand something over.
    HandoverRequest {
        person: String,
    },
    SetGoal {
        goal: WorldPoint,
    },
}

fn default_importance() -> f64 {
    1.0
}

impl EventKind {
    pub fn label(&self) -> String {
        match self {
            EventKind::StartWalking { person } => format!("start_walking:{person}"),
            EventKind::InteractionOn { person, object, .. } => format!("interaction_on:{person}:{object}"),
            EventKind::InteractionOff { person, object } => format!("interaction_off:{person}:{object}"),
            EventKind::HandoverRequest { person } => format!("handover_request:{person}"),
            EventKind::SetGoal { goal } => format!("set_goal:{}:{}", goal.x, goal.y),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotConfig {
    pub start: WorldPoint,
    #[serde(default)]
    pub heading: f64,
    #[serde(default = "default_v_max")]
    pub v_max: f64,
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// Distance at which a goal counts as reached.
    #[serde(default = "default_goal_tolerance")]
    pub goal_tolerance: f64,
}

fn default_v_max() -> f64 {
    0.5
}
fn default_radius() -> f64 {
    0.3
}
fn default_goal_tolerance() -> f64 {
    0.25
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalConfig {
    #[serde(default)]
    pub time: f64,
    pub position: WorldPoint,
}

/// Knobs of the closed loop. Everything has a default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    pub dt: f64,
    pub time_limit: f64,
    pub replan_period: f64,
    pub cost_weight: f64,
    pub score_threshold: f64,
    pub social: SocialParams,
    /// Defaults to the robot radius as inscribed radius.
    pub inflation: Option<InflationParams>,
    pub tracker: TrackerParams,
    /// A confirmed track borrows the annotations of the nearest scripted
    /// person within this distance.
    pub annotation_radius: f64,
    /// Preferred robot-to-person distance when approaching for a hand-over.
    pub handover_standoff: f64,
    /// Highest social cost, in `[0, 1]`, acceptable at the hand-over spot.
    pub handover_max_cost: f64,
    /// How far from the person hand-over spots are searched for.
    pub handover_search_radius: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt: 0.1,
            time_limit: 120.0,
            replan_period: DEFAULT_REPLAN_PERIOD,
            cost_weight: DEFAULT_COST_WEIGHT,
            score_threshold: crate::detection::DEFAULT_SCORE_THRESHOLD,
            social: SocialParams::default(),
            inflation: None,
            tracker: TrackerParams::default(),
            annotation_radius: 1.0,
            handover_standoff: 0.75,
            handover_max_cost: 0.1,
            handover_search_radius: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub grid: GridConfig,
    #[serde(default)]
    pub obstacles: ObstacleSet,
    #[serde(default)]
    pub cameras: Vec<CameraConfig>,
    #[serde(default)]
    pub persons: Vec<PersonConfig>,
    #[serde(default)]
    pub objects: Vec<ObjectConfig>,
    #[serde(default)]
    pub events: Vec<Event>,
    pub robot: RobotConfig,
    #[serde(default)]
    pub goals: Vec<GoalConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub params: SimParams,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| ScenarioError::Schema {
            path: e.path().to_string(),
            msg: e.inner().to_string(),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Same world at another grid resolution; the extent is kept.
    pub fn with_resolution(&self, resolution: f64) -> Result<Scenario, ScenarioError> {
        let spec = self
            .grid_spec()
            .with_resolution(resolution)
            .map_err(|e| ScenarioError::Validation(format!("grid: {e}")))?;
        let mut out = self.clone();
        out.grid = GridConfig {
            origin: spec.origin,
            resolution: spec.resolution,
            width: spec.width,
            height: spec.height,
        };
        out.validate()?;
        Ok(out)
    }

    pub fn grid_spec(&self) -> GridSpec {
        self.grid.spec().expect("validated grid")
    }

    pub fn inflation(&self) -> InflationParams {
        self.params.inflation.unwrap_or(InflationParams {
            inscribed_radius: self.robot.radius,
            ..InflationParams::default()
        })
    }

    pub fn camera_registry(&self) -> CameraRegistry {
        let mut reg = CameraRegistry::new();
        for c in &self.cameras {
            reg.insert(
                c.id.clone(),
                CameraEntry {
                    homography: Homography::from_row_major(c.homography).expect("validated homography"),
                    image_width: c.image_width,
                    image_height: c.image_height,
                    measurement_noise_std: c.measurement_noise_std,
                },
            );
        }
        reg
    }

    pub fn person_index(&self, id: &str) -> Option<usize> {
        self.persons.iter().position(|p| p.id == id)
    }

    pub fn object_index(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    /// Checks everything serde cannot: ranges, ordering and references.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let fail = |msg: String| Err(ScenarioError::Validation(msg));
        let spec = self.grid.spec()?;
        let on_grid = |p: WorldPoint| spec.world_to_grid(p).is_ok();

        let p = &self.params;
        if !(p.dt > 0.0 && p.time_limit > 0.0 && p.replan_period >= 0.0 && p.cost_weight >= 0.0) {
            return fail(
                "params: dt and time_limit must be positive, replan_period and cost_weight non-negative".into(),
            );
        }
        if !(0.0..=1.0).contains(&p.handover_max_cost)
            || !(p.handover_standoff >= 0.0)
            || !(p.handover_search_radius > 0.0)
        {
            return fail("params: hand-over settings out of range".into());
        }
        p.social
            .validate()
            .map_err(|e| ScenarioError::Validation(format!("params.social: {e}")))?;
        p.tracker
            .validate()
            .map_err(|e| ScenarioError::Validation(format!("params.tracker: {e}")))?;
        self.inflation()
            .validate()
            .map_err(|e| ScenarioError::Validation(format!("params.inflation: {e}")))?;

        let mut ids = BTreeSet::new();
        for (i, c) in self.cameras.iter().enumerate() {
            if !ids.insert(c.id.as_str()) {
                return fail(format!("cameras[{i}]: duplicate id `{}`", c.id));
            }
            if Homography::from_row_major(c.homography).is_err() {
                return fail(format!("cameras[{i}].homography: singular matrix"));
            }
            if c.fov.len() < 3 {
                return fail(format!("cameras[{i}].fov: needs at least 3 vertices"));
            }
            if c.image_width == 0 || c.image_height == 0 {
                return fail(format!("cameras[{i}]: image size must be positive"));
            }
            if !(c.measurement_noise_std > 0.0) {
                return fail(format!("cameras[{i}].measurement_noise_std must be positive"));
            }
            c.detector
                .validate()
                .map_err(|e| ScenarioError::Validation(format!("cameras[{i}].detector: {e}")))?;
        }

        let mut ids = BTreeSet::new();
        for (i, person) in self.persons.iter().enumerate() {
            if !ids.insert(person.id.as_str()) {
                return fail(format!("persons[{i}]: duplicate id `{}`", person.id));
            }
            if !on_grid(person.position) {
                return fail(format!("persons[{i}].position lies off the grid"));
            }
            let mut last = f64::NEG_INFINITY;
            for (k, w) in person.script.iter().enumerate() {
                if w.time < last {
                    return fail(format!("persons[{i}].script[{k}]: times must be non-decreasing"));
                }
                if !(w.speed > 0.0) {
                    return fail(format!("persons[{i}].script[{k}].speed must be positive"));
                }
                if !on_grid(w.position) {
                    return fail(format!("persons[{i}].script[{k}].position lies off the grid"));
                }
                last = w.time;
            }
        }
        let mut ids = BTreeSet::new();
        for (i, o) in self.objects.iter().enumerate() {
            if !ids.insert(o.id.as_str()) {
                return fail(format!("objects[{i}]: duplicate id `{}`", o.id));
            }
        }

        for (i, e) in self.events.iter().enumerate() {
            let person_ok = |id: &str| self.person_index(id).is_some();
            let object_ok = |id: &str| self.object_index(id).is_some();
            let dangling = match &e.kind {
                EventKind::StartWalking { person } | EventKind::HandoverRequest { person } => {
                    (!person_ok(person)).then(|| format!("unknown person `{person}`"))
                }
                EventKind::InteractionOn {
                    person,
                    object,
                    importance,
                } => {
                    if !(0.0..=1.0).contains(importance) {
                        return fail(format!("events[{i}].importance must lie in [0, 1]"));
                    }
                    if !person_ok(person) {
                        Some(format!("unknown person `{person}`"))
                    } else {
                        (!object_ok(object)).then(|| format!("unknown object `{object}`"))
                    }
                }
                EventKind::InteractionOff { person, object } => {
                    if !person_ok(person) {
                        Some(format!("unknown person `{person}`"))
                    } else {
                        (!object_ok(object)).then(|| format!("unknown object `{object}`"))
                    }
                }
                EventKind::SetGoal { goal } => (!on_grid(*goal)).then(|| "goal lies off the grid".to_string()),
            };
            if let Some(msg) = dangling {
                return fail(format!("events[{i}]: {msg}"));
            }
            if !(e.time >= 0.0) {
                return fail(format!("events[{i}].time must be non-negative"));
            }
        }

        let r = &self.robot;
        if !on_grid(r.start) {
            return fail("robot.start lies off the grid".into());
        }
        if !(r.v_max > 0.0 && r.radius > 0.0 && r.goal_tolerance >= 0.0) {
            return fail("robot: v_max and radius must be positive".into());
        }
        for (i, g) in self.goals.iter().enumerate() {
            if !on_grid(g.position) {
                return fail(format!("goals[{i}].position lies off the grid"));
            }
        }
        let has_target = !self.goals.is_empty()
            || self
                .events
                .iter()
                .any(|e| matches!(e.kind, EventKind::SetGoal { .. } | EventKind::HandoverRequest { .. }));
        if !has_target {
            return fail("scenario gives the robot nothing to do: add a goal".into());
        }
        Ok(())
    }
}
