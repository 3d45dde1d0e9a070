//! Social-compliance metrics computed from a finished trace.

use serde::Serialize;

use super::trace::{Outcome, TraceLog};
use crate::format::round6;
use crate::geometry::{normalize_angle, WorldPoint};
use crate::social::person_cost;
use crate::tracking::TrackStatus;

/// Cost above which the robot counts as inside someone's personal space.
pub const VIOLATION_COST: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PersonMetrics {
    pub id: String,
    pub min_distance: f64,
    pub closest_time: f64,
    /// True cost of this person's field at the robot at closest approach.
    pub cost_at_closest: f64,
    pub violation_frames: usize,
    /// `"left"` or `"right"` of the person's heading; absent unless the
    /// robot actually went past the person.
    pub passing_side: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HandoverMetrics {
    pub person: String,
    /// Final robot distance to the person, m.
    pub distance: f64,
    /// Final angle between the person's heading and the robot, degrees.
    pub bearing_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub scenario: String,
    pub seed: u64,
    pub outcome: String,
    pub success: bool,
    pub time_limit_exceeded: bool,
    pub duration: f64,
    pub frames: usize,
    pub path_length: f64,
    pub replan_count: usize,
    pub violation_frames: usize,
    pub violation_time: f64,
    /// Frames with the robot inside an active interaction disc.
    pub interaction_frames: usize,
    pub max_robot_cell_cost: u8,
    /// Frames where the robot sat on a cell costing at least 253.
    pub untraversable_frames: usize,
    /// Mean distance from confirmed tracks to the nearest true person.
    pub mean_track_error: Option<f64>,
    pub persons: Vec<PersonMetrics>,
    pub handover: Vec<HandoverMetrics>,
}

impl Metrics {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize") + "\n"
    }
}

/// `+1` if `robot` is on the left of a person at `person` heading `heading`,
/// `-1` on the right, 0 exactly ahead or behind.
pub fn side_sign(person: WorldPoint, heading: f64, robot: WorldPoint) -> f64 {
    let c = WorldPoint::from_polar(1.0, heading).cross(robot - person);
    if c > 0.0 {
        1.0
    } else if c < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn compute_metrics(trace: &TraceLog) -> Metrics {
    let frames = &trace.frames;
    let n_people = trace.person_ids.len();
    let mut min_d = vec![(f64::INFINITY, 0usize); n_people];
    let mut violations = vec![0usize; n_people];
    // Longitudinal offset sign of the robot, per person: first seen and whether it flipped.
    let mut along: Vec<(f64, bool)> = vec![(0.0, false); n_people];
    let mut violation_frames = 0;
    let mut interaction_frames = 0;
    let mut untraversable = 0;
    let mut track_err = (0.0, 0usize);

    for (k, f) in frames.iter().enumerate() {
        let r = f.robot.position;
        let mut violated = false;
        for p in &f.persons {
            let s = &p.state;
            let d = s.position.distance(r);
            if d < min_d[p.index].0 {
                min_d[p.index] = (d, k);
            }
            if !s.handover_target && person_cost(r, s, &trace.social) > VIOLATION_COST {
                violations[p.index] += 1;
                violated = true;
            }
            let lon = WorldPoint::from_polar(1.0, s.heading).dot(r - s.position);
            let sign = lon.signum() * f64::from(u8::from(lon != 0.0));
            let entry = &mut along[p.index];
            if entry.0 == 0.0 {
                entry.0 = sign;
            } else if sign != 0.0 && sign != entry.0 {
                entry.1 = true;
            }
        }
        violation_frames += usize::from(violated);
        interaction_frames += usize::from(f.interactions.iter().any(|i| i.contains(r, false)));
        untraversable += usize::from(f.robot_cell_cost >= crate::costmap::INSCRIBED);
        for t in f.tracks.iter().filter(|t| t.status == TrackStatus::Confirmed) {
            let pos = WorldPoint::new(t.state[0], t.state[1]);
            if let Some(e) = f
                .persons
                .iter()
                .map(|p| p.state.position.distance(pos))
                .min_by(f64::total_cmp)
            {
                track_err.0 += e;
                track_err.1 += 1;
            }
        }
    }

    let persons = (0..n_people)
        .filter(|&i| min_d[i].0.is_finite())
        .map(|i| {
            let (d, k) = min_d[i];
            let f = &frames[k];
            let s = &f.persons.iter().find(|p| p.index == i).expect("person recorded").state;
            let side = along[i].1.then(|| side_sign(s.position, s.heading, f.robot.position));
            PersonMetrics {
                id: trace.person_ids[i].clone(),
                min_distance: round6(d),
                closest_time: round6(f.time),
                cost_at_closest: round6(person_cost(f.robot.position, s, &trace.social)),
                violation_frames: violations[i],
                passing_side: side.and_then(|s| match s {
                    s if s > 0.0 => Some("left".to_string()),
                    s if s < 0.0 => Some("right".to_string()),
                    _ => None,
                }),
            }
        })
        .collect();

    let handover = frames
        .last()
        .map(|f| {
            f.persons
                .iter()
                .filter(|p| p.state.handover_target)
                .map(|p| {
                    let offset = f.robot.position - p.state.position;
                    HandoverMetrics {
                        person: trace.person_ids[p.index].clone(),
                        distance: round6(offset.norm()),
                        bearing_deg: round6(normalize_angle(offset.angle() - p.state.heading).abs().to_degrees()),
                    }
                })
                .collect()
        })
        .unwrap_or_default();

    let path_length: f64 = frames
        .windows(2)
        .map(|w| w[0].robot.position.distance(w[1].robot.position))
        .sum();
    Metrics {
        scenario: trace.name.clone(),
        seed: trace.seed,
        outcome: trace.outcome.as_str().to_string(),
        success: trace.outcome == Outcome::GoalReached,
        time_limit_exceeded: trace.outcome == Outcome::TimeLimitExceeded,
        duration: round6(frames.last().map_or(0.0, |f| f.time)),
        frames: frames.len(),
        path_length: round6(path_length),
        replan_count: frames.iter().filter(|f| f.replanned).count(),
        violation_frames,
        violation_time: round6(violation_frames as f64 * trace.dt),
        interaction_frames,
        max_robot_cell_cost: frames.iter().map(|f| f.robot_cell_cost).max().unwrap_or(0),
        untraversable_frames: untraversable,
        mean_track_error: (track_err.1 > 0).then(|| round6(track_err.0 / track_err.1 as f64)),
        persons,
        handover,
    }
}
