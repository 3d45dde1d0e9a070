//! Constant-velocity Kalman filter over `[x, y, vx, vy]` with position-only
//! measurements.

use std::collections::VecDeque;
use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Matrix4x2, Vector2, Vector4};

use super::TrackingError;
use crate::detection::GroundMeasurement;
use crate::geometry::WorldPoint;

pub type TrackId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
}

impl TrackStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TrackStatus::Tentative => "tentative",
            TrackStatus::Confirmed => "confirmed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct KalmanTrack {
    pub id: TrackId,
    pub state: Vector4<f64>,
    pub covariance: Matrix4<f64>,
    /// Consecutive frames without an associated measurement.
    pub inactivity: u32,
    pub hits: u32,
    /// Frames since the track was created, including the creation frame.
    pub age: u32,
    pub status: TrackStatus,
    /// Most recent association outcomes, newest last.
    pub(crate) history: VecDeque<bool>,
}

impl KalmanTrack {
    /// New tentative track at a measured position with zero velocity.
    pub fn from_measurement(id: TrackId, z: &GroundMeasurement, velocity_std: f64) -> Self {
        let pos_var = z.noise_std * z.noise_std;
        let vel_var = velocity_std * velocity_std;
        Self {
            id,
            state: Vector4::new(z.position.x, z.position.y, 0.0, 0.0),
            covariance: Matrix4::from_diagonal(&Vector4::new(pos_var, pos_var, vel_var, vel_var)),
            inactivity: 0,
            hits: 1,
            age: 1,
            status: TrackStatus::Tentative,
            history: VecDeque::from([true]),
        }
    }

    pub fn with_state(id: TrackId, state: Vector4<f64>, covariance: Matrix4<f64>) -> Self {
        Self {
            id,
            state,
            covariance,
            inactivity: 0,
            hits: 0,
            age: 0,
            status: TrackStatus::Tentative,
            history: VecDeque::new(),
        }
    }

    pub fn position(&self) -> WorldPoint {
        WorldPoint::new(self.state[0], self.state[1])
    }

    pub fn velocity(&self) -> WorldPoint {
        WorldPoint::new(self.state[2], self.state[3])
    }

    pub fn is_confirmed(&self) -> bool {
        self.status == TrackStatus::Confirmed
    }

    /// Hits among the last `window` frames.
    pub fn recent_hits(&self, window: usize) -> usize {
        self.history.iter().rev().take(window).filter(|h| **h).count()
    }
}

fn transition(dt: f64) -> Matrix4<f64> {
    let mut f = Matrix4::identity();
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    f
}

/// Discrete white-noise-acceleration process covariance.
pub fn process_noise(dt: f64, accel_std: f64) -> Matrix4<f64> {
    let q = accel_std * accel_std;
    let (pp, pv, vv) = (dt.powi(4) / 4.0 * q, dt.powi(3) / 2.0 * q, dt * dt * q);
    let mut m = Matrix4::zeros();
    for axis in 0..2 {
        let (p, v) = (axis, axis + 2);
        m[(p, p)] = pp;
        m[(p, v)] = pv;
        m[(v, p)] = pv;
        m[(v, v)] = vv;
    }
    m
}

fn observation() -> Matrix2x4<f64> {
    Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0)
}

pub fn kf_predict(track: &KalmanTrack, dt: f64, accel_std: f64) -> KalmanTrack {
    debug_assert!(dt > 0.0, "prediction step needs dt > 0");
    let f = transition(dt);
    let mut out = track.clone();
    out.state = f * track.state;
    out.covariance = f * track.covariance * f.transpose() + process_noise(dt, accel_std);
    out
}

pub(crate) struct Innovation {
    pub residual: Vector2<f64>,
    pub covariance: Matrix2<f64>,
    pub inverse: Matrix2<f64>,
}

pub(crate) fn innovation(track: &KalmanTrack, z: &GroundMeasurement) -> Result<Innovation, TrackingError> {
    let h = observation();
    let r = Matrix2::identity() * (z.noise_std * z.noise_std);
    let s = h * track.covariance * h.transpose() + r;
    let det = s.determinant();
    if !det.is_finite() || det <= f64::MIN_POSITIVE {
        return Err(TrackingError::NumericalFailure(format!(
            "innovation covariance of track {} is singular (det = {det:e})",
            track.id
        )));
    }
    let inverse = s
        .try_inverse()
        .ok_or_else(|| TrackingError::NumericalFailure("innovation covariance not invertible".into()))?;
    let residual = Vector2::new(z.position.x, z.position.y) - h * track.state;
    Ok(Innovation {
        residual,
        covariance: s,
        inverse,
    })
}

/// Squared Mahalanobis distance of the measurement from the predicted position.
pub fn gate_distance(track: &KalmanTrack, z: &GroundMeasurement) -> Result<f64, TrackingError> {
    let inn = innovation(track, z)?;
    Ok((inn.residual.transpose() * inn.inverse * inn.residual)[0])
}

/// Gaussian density of the innovation, `N(ν; 0, S)`.
pub(crate) fn measurement_likelihood(inn: &Innovation) -> f64 {
    let d2 = (inn.residual.transpose() * inn.inverse * inn.residual)[0];
    (-0.5 * d2).exp() / (2.0 * PI * inn.covariance.determinant().sqrt())
}

pub fn kf_update(track: &KalmanTrack, z: &GroundMeasurement) -> Result<KalmanTrack, TrackingError> {
    let inn = innovation(track, z)?;
    let h = observation();
    let gain: Matrix4x2<f64> = track.covariance * h.transpose() * inn.inverse;
    let mut out = track.clone();
    out.state = track.state + gain * inn.residual;
    // Joseph form keeps the posterior positive semi-definite.
    let i_kh = Matrix4::identity() - gain * h;
    let r = Matrix2::identity() * (z.noise_std * z.noise_std);
    let p = i_kh * track.covariance * i_kh.transpose() + gain * r * gain.transpose();
    out.covariance = (p + p.transpose()) * 0.5;
    Ok(out)
}
