//! Per-frame run records and their on-disk form.
//!
//! A run directory holds `trace.csv` (one row per frame), `truth.csv`,
//! `tracks.csv`, `detections.csv`, `paths.csv` (every plan, by frame time) and
//! `metrics.json`. Files are written next to their destination and renamed
//! into place, so a failed run leaves no half-written artifact.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::costmap::Costmap;
use crate::detection::{write_detection_log, Detection};
use crate::dump::{write_costmap_csv, write_costmap_pgm};
use crate::format::fmt6;
use crate::geometry::{GridSpec, Pose2, WorldPoint};
use crate::social::{InteractionSpec, SocialParams};
use crate::tracking::{PersonEstimate, Posture, TrackId, TrackStatus, TRACK_LOG_HEADER};

use super::metrics::Metrics;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    GoalReached,
    TimeLimitExceeded,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::GoalReached => "goal_reached",
            Outcome::TimeLimitExceeded => "time_limit_exceeded",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersonTruth {
    /// Position in the scenario's person list.
    pub index: usize,
    pub state: PersonEstimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackRecord {
    pub id: TrackId,
    /// `[x, y, vx, vy]`.
    pub state: [f64; 4],
    pub posture: Posture,
    pub status: TrackStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub time: f64,
    pub robot: Pose2,
    /// Cost of the robot's cell in this frame's fused costmap.
    pub robot_cell_cost: u8,
    /// Changes whenever the fused costmap differs from the previous frame's.
    pub costmap_id: u64,
    pub replanned: bool,
    /// Waypoints of the plan made this frame; empty if planning failed.
    pub plan: Option<Vec<WorldPoint>>,
    pub goal: Option<WorldPoint>,
    pub persons: Vec<PersonTruth>,
    /// Everything the cameras reported, before thresholding.
    pub detections: Vec<Detection>,
    pub tracks: Vec<TrackRecord>,
    /// Active interactions at true positions.
    pub interactions: Vec<InteractionSpec>,
    pub events: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceLog {
    pub name: String,
    pub seed: u64,
    pub dt: f64,
    pub grid: GridSpec,
    pub social: SocialParams,
    pub person_ids: Vec<String>,
    pub frames: Vec<FrameRecord>,
    pub outcome: Outcome,
    /// Distinct fused costmaps by id, when recording was requested.
    pub costmaps: Vec<(u64, Costmap)>,
    pub final_costmap: Costmap,
}

impl TraceLog {
    /// Robot positions, one per frame.
    pub fn robot_positions(&self) -> Vec<WorldPoint> {
        self.frames.iter().map(|f| f.robot.position).collect()
    }

    /// Time of the first frame carrying an event whose label starts with `prefix`.
    pub fn event_time(&self, prefix: &str) -> Option<f64> {
        self.frames
            .iter()
            .find(|f| f.events.iter().any(|e| e.starts_with(prefix)))
            .map(|f| f.time)
    }
}

pub const TRACE_HEADER: &str =
    "t,robot_x,robot_y,robot_heading,robot_cell_cost,costmap_id,replanned,goal_x,goal_y,detections,confirmed_tracks,events";

pub fn write_trace_csv<W: Write>(mut out: W, trace: &TraceLog) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for f in &trace.frames {
        let (gx, gy) = f
            .goal
            .map_or((String::new(), String::new()), |g| (fmt6(g.x), fmt6(g.y)));
        let confirmed = f.tracks.iter().filter(|t| t.status == TrackStatus::Confirmed).count();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt6(f.time),
            fmt6(f.robot.position.x),
            fmt6(f.robot.position.y),
            fmt6(f.robot.heading),
            f.robot_cell_cost,
            f.costmap_id,
            u8::from(f.replanned),
            gx,
            gy,
            f.detections.len(),
            confirmed,
            f.events.join(";")
        )?;
    }
    Ok(())
}

pub fn write_truth_csv<W: Write>(mut out: W, trace: &TraceLog) -> io::Result<()> {
    writeln!(out, "t,person_id,x,y,vx,vy,heading,posture,handover_target")?;
    for f in &trace.frames {
        for p in &f.persons {
            let s = &p.state;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                fmt6(f.time),
                trace.person_ids[p.index],
                fmt6(s.position.x),
                fmt6(s.position.y),
                fmt6(s.velocity.x),
                fmt6(s.velocity.y),
                fmt6(s.heading),
                s.posture.as_str(),
                u8::from(s.handover_target)
            )?;
        }
    }
    Ok(())
}

pub fn write_tracks_csv<W: Write>(mut out: W, trace: &TraceLog) -> io::Result<()> {
    writeln!(out, "{TRACK_LOG_HEADER}")?;
    for f in &trace.frames {
        for t in &f.tracks {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                fmt6(f.time),
                t.id,
                fmt6(t.state[0]),
                fmt6(t.state[1]),
                fmt6(t.state[2]),
                fmt6(t.state[3]),
                t.posture.as_str(),
                t.status.as_str()
            )?;
        }
    }
    Ok(())
}

pub fn write_paths_csv<W: Write>(mut out: W, trace: &TraceLog) -> io::Result<()> {
    writeln!(out, "t,seq,x,y")?;
    for f in &trace.frames {
        for (i, p) in f.plan.iter().flatten().enumerate() {
            writeln!(out, "{},{},{},{}", fmt6(f.time), i, fmt6(p.x), fmt6(p.y))?;
        }
    }
    Ok(())
}

pub fn write_detections_csv<W: Write>(out: W, trace: &TraceLog) -> io::Result<()> {
    let all: Vec<Detection> = trace.frames.iter().flat_map(|f| f.detections.iter().cloned()).collect();
    write_detection_log(out, &all)
}

/// Writes `bytes` to `path` through a sibling temporary file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

fn render<F: Fn(&mut Vec<u8>) -> io::Result<()>>(f: F) -> io::Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Writes the run artifacts under `dir`. With `dump_costmaps`, every recorded
/// costmap also goes to `dir/costmaps/` as CSV and PGM.
pub fn write_artifacts(dir: &Path, trace: &TraceLog, metrics: &Metrics, dump_costmaps: bool) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    // Render everything first so an error leaves the directory untouched.
    let files = [
        ("trace.csv", render(|b| write_trace_csv(b, trace))?),
        ("truth.csv", render(|b| write_truth_csv(b, trace))?),
        ("tracks.csv", render(|b| write_tracks_csv(b, trace))?),
        ("detections.csv", render(|b| write_detections_csv(b, trace))?),
        ("paths.csv", render(|b| write_paths_csv(b, trace))?),
        ("metrics.json", metrics.to_json().into_bytes()),
    ];
    for (name, bytes) in &files {
        write_atomic(&dir.join(name), bytes)?;
    }
    if dump_costmaps {
        let sub = dir.join("costmaps");
        fs::create_dir_all(&sub)?;
        for (id, map) in &trace.costmaps {
            write_atomic(
                &sub.join(format!("costmap_{id:05}.csv")),
                &render(|b| write_costmap_csv(b, map))?,
            )?;
            write_atomic(
                &sub.join(format!("costmap_{id:05}.pgm")),
                &render(|b| write_costmap_pgm(b, map))?,
            )?;
        }
    }
    Ok(())
}
