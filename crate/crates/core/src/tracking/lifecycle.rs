//! Track creation, confirmation and deletion.

use std::collections::BTreeSet;

use super::kalman::{KalmanTrack, TrackId, TrackStatus};
use crate::detection::GroundMeasurement;
use crate::geometry::WorldPoint;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LifecycleParams {
    /// Hits needed inside `confirm_window` frames to confirm a track.
    pub confirm_hits: u32,
    pub confirm_window: u32,
    /// Frames without association after which a track is dropped.
    pub inactivity_limit: u32,
    /// Unassigned measurements closer than this are treated as one newborn.
    pub birth_radius: f64,
}

impl Default for LifecycleParams {
    fn default() -> Self {
        Self {
            confirm_hits: 3,
            confirm_window: 5,
            inactivity_limit: 10,
            birth_radius: 0.5,
        }
    }
}

impl LifecycleParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.confirm_hits == 0 || self.confirm_hits > self.confirm_window {
            return Err("confirm_hits must be in 1..=confirm_window".into());
        }
        if self.inactivity_limit == 0 {
            return Err("inactivity_limit must be at least 1".into());
        }
        if !(self.birth_radius > 0.0) {
            return Err("birth_radius must be positive".into());
        }
        Ok(())
    }
}

/// What changed during one lifecycle step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LifecycleEvents {
    pub born: Vec<TrackId>,
    pub confirmed: Vec<TrackId>,
    pub deleted: Vec<TrackId>,
}

/// Allocates ids and initial state for new tracks.
#[derive(Debug, Clone)]
pub struct TrackFactory {
    pub next_id: TrackId,
    pub initial_velocity_std: f64,
}

impl Default for TrackFactory {
    fn default() -> Self {
        Self {
            next_id: 1,
            initial_velocity_std: 1.5,
        }
    }
}

impl TrackFactory {
    pub fn spawn(&mut self, z: &GroundMeasurement) -> KalmanTrack {
        let id = self.next_id;
        self.next_id += 1;
        KalmanTrack::from_measurement(id, z, self.initial_velocity_std)
    }
}

/// Greedy merge of measurements that lie within `radius` of a group's first
/// member. Merged positions are averaged; the smallest noise is kept.
fn merge_births(leftovers: &[GroundMeasurement], radius: f64) -> Vec<GroundMeasurement> {
    let mut groups: Vec<(WorldPoint, Vec<&GroundMeasurement>)> = Vec::new();
    for z in leftovers {
        match groups
            .iter_mut()
            .find(|(anchor, _)| anchor.distance(z.position) <= radius)
        {
            Some((_, members)) => members.push(z),
            None => groups.push((z.position, vec![z])),
        }
    }
    groups
        .into_iter()
        .map(|(_, members)| {
            let n = members.len() as f64;
            let sum = members.iter().fold(WorldPoint::default(), |acc, z| acc + z.position);
            let noise = members.iter().map(|z| z.noise_std).fold(f64::INFINITY, f64::min);
            GroundMeasurement {
                position: sum.scale(1.0 / n),
                timestamp: members[0].timestamp,
                camera_id: members[0].camera_id.clone(),
                noise_std: noise,
            }
        })
        .collect()
}

/// Advances every track's bookkeeping by one frame.
///
/// Assigned tracks reset inactivity and gain a hit; a tentative track is
/// confirmed once it has `confirm_hits` hits inside the last `confirm_window`
/// frames, and is dropped if it is still tentative after `confirm_window`
/// frames. Any track reaching `inactivity_limit` missed frames is deleted.
/// Unassigned measurements not already covered by a track seed new tentative
/// tracks, so a person seen `confirm_hits` frames in a row yields a confirmed
/// track on the last of those frames.
pub fn lifecycle_step(
    tracks: &mut Vec<KalmanTrack>,
    assigned: &BTreeSet<TrackId>,
    leftovers: &[GroundMeasurement],
    params: &LifecycleParams,
    factory: &mut TrackFactory,
) -> LifecycleEvents {
    let mut events = LifecycleEvents::default();
    let window = params.confirm_window as usize;

    for t in tracks.iter_mut() {
        let hit = assigned.contains(&t.id);
        t.age += 1;
        t.history.push_back(hit);
        while t.history.len() > window {
            t.history.pop_front();
        }
        if hit {
            t.inactivity = 0;
            t.hits += 1;
        } else {
            t.inactivity += 1;
        }
        if t.status == TrackStatus::Tentative && t.recent_hits(window) >= params.confirm_hits as usize {
            t.status = TrackStatus::Confirmed;
            events.confirmed.push(t.id);
        }
    }

    tracks.retain(|t| {
        let stale_tentative = t.status == TrackStatus::Tentative && t.age >= params.confirm_window;
        let keep = t.inactivity < params.inactivity_limit && !stale_tentative;
        if !keep {
            events.deleted.push(t.id);
        }
        keep
    });

    let fresh: Vec<GroundMeasurement> = leftovers
        .iter()
        .filter(|z| {
            tracks
                .iter()
                .all(|t| t.position().distance(z.position) > params.birth_radius)
        })
        .cloned()
        .collect();
    for z in merge_births(&fresh, params.birth_radius) {
        let mut t = factory.spawn(&z);
        if t.recent_hits(window) >= params.confirm_hits as usize {
            t.status = TrackStatus::Confirmed;
            events.confirmed.push(t.id);
        }
        events.born.push(t.id);
        tracks.push(t);
    }
    events
}
