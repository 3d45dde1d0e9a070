//! Deterministic closed-loop simulator.
//!
//! Every frame, in order: fire due events and goals, synthesize and filter
//! detections, step the tracker, rebuild the social layer and fuse it with
//! the static layers, replan if due, record the frame, then move people and
//! the robot by one `dt`.

mod builtin;
pub mod detector;
pub mod metrics;
pub mod scenario;
pub mod trace;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use builtin::{builtin_scenario, BUILTIN_SCENARIOS};
pub use detector::{synthesize_camera, synthesize_detections};
pub use metrics::{compute_metrics, Metrics, PersonMetrics};
pub use scenario::{
    CameraConfig, Event, EventKind, Scenario, ScenarioError, SimParams, SyntheticDetectorParams, Waypoint,
};
pub use trace::{write_artifacts, FrameRecord, Outcome, PersonTruth, TraceLog, TrackRecord};

use crate::costmap::{fuse, inflate, quantize_social, rasterize_social, rasterize_static, Costmap, INSCRIBED};
use crate::detection::{threshold_filter, CameraRegistry, GroundMeasurement};
use crate::geometry::{apply_homography, bbox_ground_point, normalize_angle, Homography, Pose2, WorldPoint};
use crate::planner::{astar, replan_policy, PlanRequest};
use crate::social::{InteractionSpec, SocialScene};
use crate::tracking::{
    estimate_person, KalmanTrack, PersonAnnotation, PersonEstimate, Posture, TrackId, Tracker, TrackingError,
};

/// Slack when comparing accumulated simulation time against scripted times.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("tracker failed: {0}")]
    Tracking(#[from] TrackingError),
}

/// Ground-truth state of one scripted person.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonState {
    pub position: WorldPoint,
    pub velocity: WorldPoint,
    pub heading: f64,
    pub facing: f64,
    pub seated: bool,
    /// Whether the script is being followed.
    pub started: bool,
    pub next_waypoint: usize,
}

impl PersonState {
    pub fn at(position: WorldPoint, facing: f64) -> Self {
        Self {
            position,
            velocity: WorldPoint::default(),
            heading: normalize_angle(facing),
            facing: normalize_angle(facing),
            seated: false,
            started: true,
            next_waypoint: 0,
        }
    }

    pub fn is_moving(&self) -> bool {
        self.velocity.norm() > 0.0
    }

    pub fn posture(&self) -> Posture {
        if self.seated {
            Posture::Seated
        } else if self.is_moving() {
            Posture::Walking
        } else {
            Posture::Standing
        }
    }

    pub fn truth(&self, handover_target: bool) -> PersonEstimate {
        PersonEstimate {
            position: self.position,
            velocity: self.velocity,
            speed: self.velocity.norm(),
            heading: self.heading,
            posture: self.posture(),
            handover_target,
        }
    }
}

/// Moves a person along its script for `dt` seconds starting at `time`.
/// Waypoints are pursued in order, each no earlier than its scripted time.
pub fn advance_person(person: &mut PersonState, script: &[Waypoint], time: f64, dt: f64) {
    let start = person.position;
    let mut left = dt;
    while person.started && left > 0.0 {
        let Some(wp) = script.get(person.next_waypoint) else {
            break;
        };
        if time + TIME_EPS < wp.time {
            break;
        }
        let to = wp.position - person.position;
        let dist = to.norm();
        let needed = dist / wp.speed;
        if needed <= left {
            person.position = wp.position;
            person.next_waypoint += 1;
            left -= needed;
        } else {
            person.position = person.position + to.scale(wp.speed * left / dist);
            left = 0.0;
        }
    }
    person.velocity = (person.position - start).scale(1.0 / dt);
    person.heading = if person.is_moving() {
        person.velocity.angle()
    } else {
        person.facing
    };
}

/// Moves the robot along `targets` by at most `v_max * dt`. Stops short of a
/// target whose cell is untraversable in `map` and returns `true` then.
pub fn advance_robot(
    robot: &mut Pose2,
    targets: &mut VecDeque<WorldPoint>,
    map: &Costmap,
    v_max: f64,
    dt: f64,
) -> bool {
    let mut budget = v_max * dt;
    while let Some(&next) = targets.front() {
        if map.cost_at(next).is_none_or(|c| c >= INSCRIBED) {
            return true;
        }
        let to = next - robot.position;
        let d = to.norm();
        if d > 0.0 {
            robot.heading = to.angle();
        }
        if d <= budget {
            robot.position = next;
            budget -= d;
            targets.pop_front();
        } else {
            robot.position = robot.position + to.scale(budget / d);
            break;
        }
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum GoalTarget {
    Point(WorldPoint),
    Handover(usize),
}

/// What the costmap depends on besides positions; a change forces a replan.
#[derive(Debug, Clone, PartialEq, Default)]
struct Signature {
    tracks: BTreeMap<TrackId, (Posture, bool)>,
    interactions: BTreeSet<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Keep every distinct fused costmap in the trace.
    pub record_costmaps: bool,
}

pub struct Simulation {
    scenario: Scenario,
    cameras: Vec<(CameraConfig, Homography)>,
    registry: CameraRegistry,
    static_layer: Costmap,
    rng: ChaCha8Rng,
    tracker: Tracker,
    persons: Vec<PersonState>,
    robot: Pose2,
    targets: VecDeque<WorldPoint>,
    events_fired: Vec<bool>,
    goals_fired: Vec<bool>,
    goal: Option<GoalTarget>,
    goal_point: Option<WorldPoint>,
    interactions: BTreeMap<(usize, usize), f64>,
    handover: BTreeSet<usize>,
    last_plan: Option<f64>,
    force_replan: bool,
    signature: Option<Signature>,
    costmap: Option<Costmap>,
    costmap_id: u64,
    frame: u64,
}

impl Simulation {
    pub fn new(scenario: Scenario) -> Result<Self, SimError> {
        scenario.validate()?;
        let spec = scenario.grid_spec();
        let static_layer = inflate(&rasterize_static(&spec, &scenario.obstacles), &scenario.inflation());
        let cameras = scenario
            .cameras
            .iter()
            .map(|c| (c.clone(), Homography::from_row_major(c.homography).expect("validated")))
            .collect();
        let persons = scenario
            .persons
            .iter()
            .map(|p| PersonState {
                seated: p.seated,
                started: !scenario
                    .events
                    .iter()
                    .any(|e| matches!(&e.kind, EventKind::StartWalking { person } if *person == p.id)),
                ..PersonState::at(p.position, p.facing)
            })
            .collect();
        Ok(Self {
            registry: scenario.camera_registry(),
            cameras,
            static_layer,
            rng: ChaCha8Rng::seed_from_u64(scenario.seed),
            tracker: Tracker::new(scenario.params.tracker)?,
            persons,
            robot: Pose2::new(scenario.robot.start, scenario.robot.heading),
            targets: VecDeque::new(),
            events_fired: vec![false; scenario.events.len()],
            goals_fired: vec![false; scenario.goals.len()],
            goal: None,
            goal_point: None,
            interactions: BTreeMap::new(),
            handover: BTreeSet::new(),
            last_plan: None,
            force_replan: false,
            signature: None,
            costmap: None,
            costmap_id: 0,
            frame: 0,
            scenario,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn time(&self) -> f64 {
        self.frame as f64 * self.scenario.params.dt
    }

    pub fn robot(&self) -> Pose2 {
        self.robot
    }

    pub fn persons(&self) -> &[PersonState] {
        &self.persons
    }

    /// Current fused costmap; `None` before the first frame.
    pub fn costmap(&self) -> Option<&Costmap> {
        self.costmap.as_ref()
    }

    fn fire_due(&mut self, t: f64) -> Vec<String> {
        let mut labels = Vec::new();
        for (i, g) in self.scenario.goals.iter().enumerate() {
            if !self.goals_fired[i] && t + TIME_EPS >= g.time {
                self.goals_fired[i] = true;
                self.goal = Some(GoalTarget::Point(g.position));
                self.force_replan = true;
                labels.push(format!("goal:{}:{}", g.position.x, g.position.y));
            }
        }
        for (i, e) in self.scenario.events.iter().enumerate() {
            if self.events_fired[i] || t + TIME_EPS < e.time {
                continue;
            }
            self.events_fired[i] = true;
            labels.push(e.kind.label());
            let person = |id: &str| self.scenario.person_index(id).expect("validated id");
            let object = |id: &str| self.scenario.object_index(id).expect("validated id");
            match &e.kind {
                EventKind::StartWalking { person: p } => self.persons[person(p)].started = true,
                EventKind::InteractionOn {
                    person: p,
                    object: o,
                    importance,
                } => {
                    self.interactions.insert((person(p), object(o)), *importance);
                }
                EventKind::InteractionOff { person: p, object: o } => {
                    self.interactions.remove(&(person(p), object(o)));
                }
                EventKind::HandoverRequest { person: p } => {
                    let i = person(p);
                    self.handover.insert(i);
                    self.goal = Some(GoalTarget::Handover(i));
                    self.force_replan = true;
                }
                EventKind::SetGoal { goal } => {
                    self.goal = Some(GoalTarget::Point(*goal));
                    self.force_replan = true;
                }
            }
        }
        labels
    }

    fn pending_targets(&self) -> bool {
        self.goals_fired.iter().any(|f| !f)
            || self
                .scenario
                .events
                .iter()
                .zip(&self.events_fired)
                .any(|(e, f)| !f && matches!(e.kind, EventKind::SetGoal { .. } | EventKind::HandoverRequest { .. }))
    }

    /// Nearest scripted person within the annotation radius of a track.
    fn person_for(&self, track: &KalmanTrack) -> Option<usize> {
        let pos = track.position();
        self.persons
            .iter()
            .enumerate()
            .map(|(i, p)| (i, p.position.distance(pos)))
            .filter(|&(_, d)| d <= self.scenario.params.annotation_radius)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    }

    fn annotation(&self, person: Option<usize>) -> PersonAnnotation {
        person.map_or_else(PersonAnnotation::default, |i| {
            let p = &self.persons[i];
            PersonAnnotation {
                seated: p.seated,
                facing: (!p.is_moving()).then_some(p.facing),
                handover_target: self.handover.contains(&i),
            }
        })
    }

    /// Best spot to hand something to person `i`: an acceptable-cost cell
    /// as close as possible to the standoff distance, then most frontal.
    fn handover_spot(
        &self,
        i: usize,
        map: &Costmap,
        estimates: &BTreeMap<usize, PersonEstimate>,
    ) -> Option<WorldPoint> {
        let params = &self.scenario.params;
        let person = estimates
            .get(&i)
            .copied()
            .unwrap_or_else(|| self.persons[i].truth(true));
        let spec = map.spec();
        let max_cost = quantize_social(params.handover_max_cost);
        let mut best: Option<((f64, f64, usize), WorldPoint)> = None;
        for (idx, &c) in map.cells().iter().enumerate() {
            if c > max_cost {
                continue;
            }
            let center = spec.cell_center(spec.cell_of(idx));
            let offset = center - person.position;
            let d = offset.norm();
            if d > params.handover_search_radius || d == 0.0 {
                continue;
            }
            let bearing = normalize_angle(offset.angle() - person.heading).abs();
            let key = ((d - params.handover_standoff).abs(), bearing, idx);
            let better = best.as_ref().is_none_or(|(k, _)| {
                key.0
                    .total_cmp(&k.0)
                    .then(key.1.total_cmp(&k.1))
                    .then(key.2.cmp(&k.2))
                    .is_lt()
            });
            if better {
                best = Some((key, center));
            }
        }
        best.map(|(_, p)| p)
    }

    fn replan(&mut self, t: f64, map: &Costmap, estimates: &BTreeMap<usize, PersonEstimate>) -> Vec<WorldPoint> {
        let goal = match self.goal {
            Some(GoalTarget::Point(p)) => Some(p),
            Some(GoalTarget::Handover(i)) => self.handover_spot(i, map, estimates),
            None => None,
        };
        self.goal_point = goal;
        self.last_plan = Some(t);
        self.force_replan = false;
        self.targets.clear();
        let Some(goal) = goal else {
            return Vec::new();
        };
        let request = PlanRequest {
            start: self.robot.position,
            goal,
            cost_weight: self.scenario.params.cost_weight,
        };
        let Ok(path) = astar(map, &request) else {
            return Vec::new();
        };
        self.targets
            .extend(path.waypoints.iter().copied().skip_while(|w| *w == self.robot.position));
        if self.targets.back() != Some(&goal) {
            self.targets.push_back(goal);
        }
        path.waypoints
    }

    /// Runs one frame and moves the world forward unless the run is over.
    /// Returns the frame and, when the run ended on it, the outcome.
    pub fn step(&mut self) -> Result<(FrameRecord, Option<Outcome>), SimError> {
        let params = self.scenario.params;
        let t = self.time();
        let events = self.fire_due(t);

        let truth: Vec<WorldPoint> = self.persons.iter().map(|p| p.position).collect();
        let detections = synthesize_detections(&self.cameras, &truth, t, &mut self.rng);
        let measurements: Vec<GroundMeasurement> = threshold_filter(&detections, params.score_threshold)
            .into_iter()
            .filter_map(|d| {
                let cam = self.registry.get(&d.camera_id)?;
                let position = apply_homography(&cam.homography, bbox_ground_point(&d.bbox)).ok()?;
                Some(GroundMeasurement {
                    position,
                    timestamp: t,
                    camera_id: d.camera_id,
                    noise_std: cam.measurement_noise_std,
                })
            })
            .collect();
        self.tracker.step(t, &measurements)?;

        let walk = params.tracker.walk_speed_threshold;
        let mut signature = Signature::default();
        let mut scene = SocialScene::default();
        let mut per_person: BTreeMap<usize, (f64, PersonEstimate)> = BTreeMap::new();
        let mut tracks = Vec::new();
        for track in self.tracker.tracks() {
            let person = self.person_for(track);
            let ann = self.annotation(person);
            let est = estimate_person(track, walk, &ann);
            tracks.push(TrackRecord {
                id: track.id,
                state: [track.state[0], track.state[1], track.state[2], track.state[3]],
                posture: est.posture,
                status: track.status,
            });
            if !track.is_confirmed() {
                continue;
            }
            signature.tracks.insert(track.id, (est.posture, est.handover_target));
            scene.persons.push(est);
            if let Some(i) = person {
                let d = self.persons[i].position.distance(est.position);
                if per_person.get(&i).is_none_or(|(best, _)| d < *best) {
                    per_person.insert(i, (d, est));
                }
            }
        }
        let estimates: BTreeMap<usize, PersonEstimate> = per_person.into_iter().map(|(i, (_, e))| (i, e)).collect();

        let mut true_interactions = Vec::new();
        for (&(pi, oi), &importance) in &self.interactions {
            signature.interactions.insert((pi, oi));
            let object = self.scenario.objects[oi].position;
            let observed = estimates.get(&pi).map_or(self.persons[pi].position, |e| e.position);
            if let Some(spec) = InteractionSpec::new(observed, object, importance) {
                scene.interactions.push(spec);
            }
            if let Some(spec) = InteractionSpec::new(self.persons[pi].position, object, importance) {
                true_interactions.push(spec);
            }
        }

        let spec = self.scenario.grid_spec();
        let social = rasterize_social(&spec, &scene, &params.social);
        let fused = fuse(&[&self.static_layer, &social]).expect("layers share the grid");
        if self.costmap.as_ref() != Some(&fused) {
            self.costmap_id += 1;
        }
        let changed = self.signature.as_ref() != Some(&signature);
        self.signature = Some(signature);

        let tolerance = self.scenario.robot.goal_tolerance;
        let at_goal = |g: Option<WorldPoint>, r: WorldPoint| g.is_some_and(|g| g.distance(r) <= tolerance);
        let mut plan = None;
        if self.goal.is_some() {
            let due = match self.last_plan {
                None => true,
                Some(last) => self.force_replan || replan_policy(t, last, params.replan_period, changed),
            };
            let settled = !self.force_replan && at_goal(self.goal_point, self.robot.position);
            if due && !settled {
                plan = Some(self.replan(t, &fused, &estimates));
            }
        }

        let record = FrameRecord {
            time: t,
            robot: self.robot,
            robot_cell_cost: fused.cost_at(self.robot.position).unwrap_or(0),
            costmap_id: self.costmap_id,
            replanned: plan.is_some(),
            plan,
            goal: self.goal_point,
            persons: self
                .persons
                .iter()
                .enumerate()
                .map(|(i, p)| PersonTruth {
                    index: i,
                    state: p.truth(self.handover.contains(&i)),
                })
                .collect(),
            detections,
            tracks,
            interactions: true_interactions,
            events,
        };
        self.costmap = Some(fused);

        let outcome = if at_goal(self.goal_point, self.robot.position) && !self.pending_targets() {
            Some(Outcome::GoalReached)
        } else if t + TIME_EPS >= params.time_limit {
            Some(Outcome::TimeLimitExceeded)
        } else {
            None
        };
        if outcome.is_none() {
            for (p, cfg) in self.persons.iter_mut().zip(&self.scenario.persons) {
                advance_person(p, &cfg.script, t, params.dt);
            }
            let map = self.costmap.as_ref().expect("set above");
            if advance_robot(
                &mut self.robot,
                &mut self.targets,
                map,
                self.scenario.robot.v_max,
                params.dt,
            ) {
                self.force_replan = true;
            }
            self.frame += 1;
        }
        Ok((record, outcome))
    }
}

/// Runs a scenario to the goal or the time limit.
pub fn run(scenario: &Scenario) -> Result<TraceLog, SimError> {
    run_with(scenario, RunOptions::default())
}

pub fn run_with(scenario: &Scenario, options: RunOptions) -> Result<TraceLog, SimError> {
    let mut sim = Simulation::new(scenario.clone())?;
    let mut frames = Vec::new();
    let mut costmaps: Vec<(u64, Costmap)> = Vec::new();
    loop {
        let (record, outcome) = sim.step()?;
        if options.record_costmaps && costmaps.last().is_none_or(|(id, _)| *id != record.costmap_id) {
            costmaps.push((record.costmap_id, sim.costmap().expect("frame ran").clone()));
        }
        frames.push(record);
        if let Some(outcome) = outcome {
            return Ok(TraceLog {
                name: scenario.name.clone(),
                seed: scenario.seed,
                dt: scenario.params.dt,
                grid: scenario.grid_spec(),
                social: scenario.params.social,
                person_ids: scenario.persons.iter().map(|p| p.id.clone()).collect(),
                frames,
                outcome,
                costmaps,
                final_costmap: sim.costmap().expect("frame ran").clone(),
            });
        }
    }
}
