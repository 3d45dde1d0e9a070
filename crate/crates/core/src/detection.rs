//! Scored person detections: the confidence-threshold stage and projection
//! of bounding boxes onto the ground plane.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::fmt6;
use crate::geometry::{apply_homography, bbox_ground_point, GeometryError, Homography, PixelBBox, WorldPoint};

/// Detector operating point used throughout the pipeline.
pub const DEFAULT_SCORE_THRESHOLD: f64 = 40.0;

#[derive(Debug, Error)]
pub enum DetectionError {
    #[error("unknown camera `{0}`")]
    UnknownCamera(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("detection log line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub camera_id: String,
    pub timestamp: f64,
    pub bbox: PixelBBox,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundMeasurement {
    pub position: WorldPoint,
    pub timestamp: f64,
    pub camera_id: String,
    pub noise_std: f64,
}

#[derive(Debug, Clone)]
pub struct CameraEntry {
    pub homography: Homography,
    pub image_width: u32,
    pub image_height: u32,
    pub measurement_noise_std: f64,
}

#[derive(Debug, Clone, Default)]
pub struct CameraRegistry {
    cameras: BTreeMap<String, CameraEntry>,
}

impl CameraRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, entry: CameraEntry) {
        self.cameras.insert(id.into(), entry);
    }

    pub fn get(&self, id: &str) -> Option<&CameraEntry> {
        self.cameras.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &CameraEntry)> {
        self.cameras.iter()
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }
}

/// Keeps detections scoring at least `threshold`, in their original order.
pub fn threshold_filter(batch: &[Detection], threshold: f64) -> Vec<Detection> {
    batch.iter().filter(|d| d.score >= threshold).cloned().collect()
}

/// Projects each detection's feet point into world coordinates.
pub fn ground_measurements(
    batch: &[Detection],
    registry: &CameraRegistry,
) -> Result<Vec<GroundMeasurement>, DetectionError> {
    batch
        .iter()
        .map(|d| {
            let cam = registry
                .get(&d.camera_id)
                .ok_or_else(|| DetectionError::UnknownCamera(d.camera_id.clone()))?;
            let position = apply_homography(&cam.homography, bbox_ground_point(&d.bbox))?;
            Ok(GroundMeasurement {
                position,
                timestamp: d.timestamp,
                camera_id: d.camera_id.clone(),
                noise_std: cam.measurement_noise_std,
            })
        })
        .collect()
}

/// Writes `t,camera_id,x,y,w,h,score` records, with a header line.
pub fn write_detection_log<W: Write>(mut out: W, detections: &[Detection]) -> std::io::Result<()> {
    writeln!(out, "t,camera_id,x,y,w,h,score")?;
    for d in detections {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt6(d.timestamp),
            d.camera_id,
            fmt6(d.bbox.x),
            fmt6(d.bbox.y),
            fmt6(d.bbox.w),
            fmt6(d.bbox.h),
            fmt6(d.score)
        )?;
    }
    Ok(())
}

/// Reads a detection log. A leading header line is optional; blank lines
/// are skipped.
pub fn read_detection_log<R: BufRead>(input: R) -> Result<Vec<Detection>, DetectionError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || (line_no == 1 && trimmed.starts_with("t,")) {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 7 {
            return Err(DetectionError::Parse {
                line: line_no,
                msg: format!("expected 7 fields, found {}", fields.len()),
            });
        }
        let num = |idx: usize, name: &str| -> Result<f64, DetectionError> {
            fields[idx]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| DetectionError::Parse {
                    line: line_no,
                    msg: format!("field `{name}` is not a finite number: `{}`", fields[idx]),
                })
        };
        let bbox = PixelBBox::new(num(2, "x")?, num(3, "y")?, num(4, "w")?, num(5, "h")?).ok_or_else(|| {
            DetectionError::Parse {
                line: line_no,
                msg: "bounding box must have positive width and height".into(),
            }
        })?;
        out.push(Detection {
            timestamp: num(0, "t")?,
            camera_id: fields[1].to_string(),
            bbox,
            score: num(6, "score")?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn det(cam: &str, score: f64) -> Detection {
        Detection {
            camera_id: cam.into(),
            timestamp: 0.0,
            bbox: PixelBBox::new(0.0, 0.0, 10.0, 20.0).unwrap(),
            score,
        }
    }

    fn registry() -> CameraRegistry {
        let mut reg = CameraRegistry::new();
        reg.insert(
            "a",
            CameraEntry {
                homography: Homography::identity(),
                image_width: 640,
                image_height: 480,
                measurement_noise_std: 0.1,
            },
        );
        reg.insert(
            "b",
            CameraEntry {
                homography: Homography::from_row_major([0.5, 0.0, 1.0, 0.0, 0.5, 2.0, 0.0, 0.0, 1.0]).unwrap(),
                image_width: 640,
                image_height: 480,
                measurement_noise_std: 0.25,
            },
        );
        reg
    }

    #[test]
    fn threshold_keeps_equal_scores() {
        let batch = vec![det("a", 55.0), det("a", 40.0), det("a", 12.0)];
        let kept: Vec<f64> = threshold_filter(&batch, 40.0).iter().map(|d| d.score).collect();
        assert_eq!(kept, vec![55.0, 40.0]);
        assert!(threshold_filter(&[], 40.0).is_empty());
        assert!(threshold_filter(&[det("a", 1.0), det("a", 39.9)], 40.0).is_empty());
    }

    #[test]
    fn ground_measurement_examples() {
        let reg = registry();
        let m = ground_measurements(&[det("a", 50.0)], &reg).unwrap();
        assert_eq!(m[0].position, WorldPoint::new(5.0, 20.0));
        assert_eq!(m[0].noise_std, 0.1);

        let m = ground_measurements(&[det("a", 50.0), det("b", 50.0)], &reg).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m[1].noise_std, 0.25);
        assert_eq!(m[1].position, WorldPoint::new(3.5, 12.0));

        assert!(matches!(
            ground_measurements(&[det("zz", 50.0)], &reg),
            Err(DetectionError::UnknownCamera(id)) if id == "zz"
        ));
    }

    #[test]
    fn log_parsing() {
        let text = "t,camera_id,x,y,w,h,score\n0.1,cam1,10,20,4,8,55.5\n\n0.2,cam2,1.5,2,3,4,12\n";
        let dets = read_detection_log(text.as_bytes()).unwrap();
        assert_eq!(dets.len(), 2);
        assert_eq!(dets[0].camera_id, "cam1");
        assert_eq!(dets[1].score, 12.0);

        let mut buf = Vec::new();
        write_detection_log(&mut buf, &dets).unwrap();
        assert_eq!(read_detection_log(buf.as_slice()).unwrap(), dets);

        let err = read_detection_log("0.1,cam1,10,20,0,8,55\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DetectionError::Parse { line: 1, .. }));
        let err = read_detection_log("0.1,cam1,10,20\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DetectionError::Parse { .. }));
    }

    proptest! {
        #[test]
        fn threshold_properties(scores in prop::collection::vec(-100.0f64..200.0, 0..40), tau in -50.0f64..150.0) {
            let batch: Vec<Detection> = scores.iter().map(|&s| det("a", s)).collect();
            let once = threshold_filter(&batch, tau);
            prop_assert_eq!(threshold_filter(&once, tau), once.clone());
            prop_assert_eq!(threshold_filter(&batch, f64::NEG_INFINITY), batch.clone());
            prop_assert!(threshold_filter(&batch, f64::INFINITY).is_empty());
            prop_assert_eq!(ground_measurements(&batch, &registry()).unwrap().len(), batch.len());
        }
    }
}
