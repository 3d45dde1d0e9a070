//! Multi-person tracking on the ground plane.
//!
//! Each frame follows the same sequence: predict every track to the frame
//! time, associate measurements camera by camera with NNJPDA, correct the
//! assigned tracks, then create and delete tracks.

mod association;
mod kalman;
mod lifecycle;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use thiserror::Error;

pub use association::{
    hard_assign, jpda_marginals, nnjpda_associate, Association, AssociationParams, Marginals, MAX_ENUMERATION,
};
pub use kalman::{gate_distance, kf_predict, kf_update, process_noise, KalmanTrack, TrackId, TrackStatus};
pub use lifecycle::{lifecycle_step, LifecycleEvents, LifecycleParams, TrackFactory};

use crate::detection::GroundMeasurement;
use crate::format::fmt6;
use crate::geometry::{normalize_angle, WorldPoint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackingError {
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("association enumeration overflow: {0}; partition the scene first")]
    EnumerationOverflow(String),
    #[error("invalid tracker parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Posture {
    Standing,
    Walking,
    Seated,
}

impl Posture {
    pub fn as_str(self) -> &'static str {
        match self {
            Posture::Standing => "standing",
            Posture::Walking => "walking",
            Posture::Seated => "seated",
        }
    }
}

/// Facts about a person the tracker cannot observe.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PersonAnnotation {
    pub seated: bool,
    /// Facing direction used whenever the person is not walking.
    pub facing: Option<f64>,
    pub handover_target: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersonEstimate {
    pub position: WorldPoint,
    pub velocity: WorldPoint,
    pub speed: f64,
    pub heading: f64,
    pub posture: Posture,
    pub handover_target: bool,
}

impl PersonEstimate {
    /// A person at rest facing `heading`.
    pub fn standing(position: WorldPoint, heading: f64) -> Self {
        Self {
            position,
            velocity: WorldPoint::default(),
            speed: 0.0,
            heading: normalize_angle(heading),
            posture: Posture::Standing,
            handover_target: false,
        }
    }

    pub fn seated(position: WorldPoint, heading: f64) -> Self {
        Self {
            posture: Posture::Seated,
            ..Self::standing(position, heading)
        }
    }

    /// A person moving with `velocity`; heading follows the motion.
    pub fn walking(position: WorldPoint, velocity: WorldPoint) -> Self {
        Self {
            position,
            velocity,
            speed: velocity.norm(),
            heading: normalize_angle(velocity.angle()),
            posture: Posture::Walking,
            handover_target: false,
        }
    }
}

pub const DEFAULT_WALK_SPEED_THRESHOLD: f64 = 0.25;

pub fn estimate_person(
    track: &KalmanTrack,
    walk_speed_threshold: f64,
    annotation: &PersonAnnotation,
) -> PersonEstimate {
    let velocity = track.velocity();
    let speed = velocity.norm();
    let posture = if annotation.seated {
        Posture::Seated
    } else if speed >= walk_speed_threshold {
        Posture::Walking
    } else {
        Posture::Standing
    };
    let heading = match (posture, annotation.facing) {
        (Posture::Walking, _) => velocity.angle(),
        (_, Some(facing)) => facing,
        (_, None) if speed > 0.0 => velocity.angle(),
        _ => 0.0,
    };
    PersonEstimate {
        position: track.position(),
        velocity,
        speed,
        heading: normalize_angle(heading),
        posture,
        handover_target: annotation.handover_target,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerParams {
    pub association: AssociationParams,
    pub lifecycle: LifecycleParams,
    /// White-acceleration process noise, m/s^2.
    pub accel_noise: f64,
    pub initial_velocity_std: f64,
    pub walk_speed_threshold: f64,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            association: AssociationParams::default(),
            lifecycle: LifecycleParams::default(),
            accel_noise: 0.5,
            initial_velocity_std: 1.5,
            walk_speed_threshold: DEFAULT_WALK_SPEED_THRESHOLD,
        }
    }
}

impl TrackerParams {
    pub fn validate(&self) -> Result<(), TrackingError> {
        self.association
            .validate()
            .and_then(|_| self.lifecycle.validate())
            .map_err(TrackingError::InvalidParams)?;
        if !(self.accel_noise >= 0.0 && self.initial_velocity_std > 0.0 && self.walk_speed_threshold >= 0.0) {
            return Err(TrackingError::InvalidParams(
                "noise and speed parameters must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Summary of one tracker frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameReport {
    pub assigned: BTreeSet<TrackId>,
    pub leftovers: usize,
    pub events: LifecycleEvents,
}

/// Owns the set of live tracks. Single-owner; one `step` per frame.
#[derive(Debug, Clone)]
pub struct Tracker {
    params: TrackerParams,
    tracks: Vec<KalmanTrack>,
    factory: TrackFactory,
    last_time: Option<f64>,
}

impl Tracker {
    pub fn new(params: TrackerParams) -> Result<Self, TrackingError> {
        params.validate()?;
        Ok(Self {
            factory: TrackFactory {
                next_id: 1,
                initial_velocity_std: params.initial_velocity_std,
            },
            params,
            tracks: Vec::new(),
            last_time: None,
        })
    }

    pub fn params(&self) -> &TrackerParams {
        &self.params
    }

    pub fn tracks(&self) -> &[KalmanTrack] {
        &self.tracks
    }

    pub fn confirmed(&self) -> impl Iterator<Item = &KalmanTrack> {
        self.tracks.iter().filter(|t| t.is_confirmed())
    }

    /// Processes all measurements of the frame at `time`.
    ///
    /// Measurements from different cameras are separate scans of the same
    /// instant, so a person seen by several cameras is associated once per
    /// camera rather than spawning duplicates.
    pub fn step(&mut self, time: f64, measurements: &[GroundMeasurement]) -> Result<FrameReport, TrackingError> {
        if let Some(last) = self.last_time {
            let dt = time - last;
            if dt > 0.0 {
                for t in self.tracks.iter_mut() {
                    *t = kf_predict(t, dt, self.params.accel_noise);
                }
            }
        }
        self.last_time = Some(time);

        let mut by_camera: BTreeMap<&str, Vec<&GroundMeasurement>> = BTreeMap::new();
        for z in measurements {
            by_camera.entry(z.camera_id.as_str()).or_default().push(z);
        }

        let mut assigned = BTreeSet::new();
        let mut leftovers = Vec::new();
        for scan in by_camera.values() {
            let scan: Vec<GroundMeasurement> = scan.iter().map(|z| (*z).clone()).collect();
            let result = nnjpda_associate(&self.tracks, &scan, &self.params.association)?;
            for (t, a) in result.assignments.iter().enumerate() {
                if let Some(j) = a {
                    self.tracks[t] = kf_update(&self.tracks[t], &scan[*j])?;
                    assigned.insert(self.tracks[t].id);
                }
            }
            leftovers.extend(result.leftovers.iter().map(|&j| scan[j].clone()));
        }

        let n_leftovers = leftovers.len();
        let events = lifecycle_step(
            &mut self.tracks,
            &assigned,
            &leftovers,
            &self.params.lifecycle,
            &mut self.factory,
        );
        Ok(FrameReport {
            assigned,
            leftovers: n_leftovers,
            events,
        })
    }
}

/// Appends rows of `t,track_id,x,y,vx,vy,posture,status`.
pub fn write_track_rows<W: Write>(
    mut out: W,
    time: f64,
    tracks: &[KalmanTrack],
    walk_speed_threshold: f64,
    annotations: &dyn Fn(&KalmanTrack) -> PersonAnnotation,
) -> std::io::Result<()> {
    for t in tracks {
        let est = estimate_person(t, walk_speed_threshold, &annotations(t));
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt6(time),
            t.id,
            fmt6(t.state[0]),
            fmt6(t.state[1]),
            fmt6(t.state[2]),
            fmt6(t.state[3]),
            est.posture.as_str(),
            t.status.as_str()
        )?;
    }
    Ok(())
}

pub const TRACK_LOG_HEADER: &str = "t,track_id,x,y,vx,vy,posture,status";
