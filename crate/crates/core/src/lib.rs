//! Socially aware navigation for an indoor robot observed by fixed cameras.
//!
//! Detections from overhead cameras are projected to the floor, tracked with a
//! Kalman filter and NNJPDA, turned into per-person social cost fields, fused
//! with static obstacles into a layered costmap, and planned over with A*.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod costmap;
pub mod detection;
pub mod dump;
pub mod format;
pub mod geometry;
pub mod planner;
pub mod sim;
pub mod social;
pub mod tracking;

pub use costmap::{Costmap, ObstacleSet, INSCRIBED, LETHAL, MAX_SOCIAL};
pub use detection::{CameraRegistry, Detection, GroundMeasurement};
pub use geometry::{GridSpec, Homography, PixelBBox, WorldPoint};
pub use planner::{astar, Path, PlanError, PlanRequest};
pub use social::{SocialParams, SocialScene};
pub use tracking::{PersonEstimate, Posture, Tracker, TrackerParams};
