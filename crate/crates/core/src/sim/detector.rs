//! Geometric stand-in for the camera detector: projects true ground
//! positions into each image and adds pixel noise, misses and clutter.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

use super::scenario::CameraConfig;
use crate::detection::Detection;
use crate::geometry::{point_in_polygon, Homography, PixelBBox, WorldPoint};

/// Person height used to size synthetic boxes, m.
pub const PERSON_HEIGHT: f64 = 1.7;
pub const BOX_ASPECT: f64 = 0.4;

/// Pixels per meter of ground around `p`, from the ground-to-image Jacobian.
fn pixels_per_meter(to_image: &Homography, p: WorldPoint) -> f64 {
    let h = 1e-3;
    let at = |x: f64, y: f64| to_image.project(x, y).unwrap_or((0.0, 0.0));
    let (u0, v0) = at(p.x, p.y);
    let (ux, vx) = at(p.x + h, p.y);
    let (uy, vy) = at(p.x, p.y + h);
    let det = ((ux - u0) * (vy - v0) - (uy - u0) * (vx - v0)) / (h * h);
    det.abs().sqrt()
}

/// Box whose bottom-center is `(u, v)`.
fn feet_box(u: f64, v: f64, height: f64) -> Option<PixelBBox> {
    let w = BOX_ASPECT * height;
    PixelBBox::new(u - w / 2.0, v - height, w, height)
}

fn normal(mean: f64, std: f64) -> Normal<f64> {
    Normal::new(mean, std).expect("validated std")
}

/// Detections one camera reports for people standing at `people`.
pub fn synthesize_camera<R: Rng + ?Sized>(
    camera: &CameraConfig,
    homography: &Homography,
    people: &[WorldPoint],
    time: f64,
    rng: &mut R,
) -> Vec<Detection> {
    let params = &camera.detector;
    let to_image = homography.inverse();
    let pixel_noise = normal(0.0, params.pixel_noise_std);
    let tp_score = normal(params.score_mean_tp, params.score_std_tp);
    let fp_score = normal(params.score_mean_fp, params.score_std_fp);
    let mut out = Vec::new();

    for &p in people {
        if !point_in_polygon(p, &camera.fov) {
            continue;
        }
        let detected = rng.random::<f64>() >= params.miss_prob;
        let du = pixel_noise.sample(rng);
        let dv = pixel_noise.sample(rng);
        let score = tp_score.sample(rng);
        if !detected {
            continue;
        }
        let Ok((u, v)) = to_image.project(p.x, p.y) else {
            continue;
        };
        let height = PERSON_HEIGHT * pixels_per_meter(&to_image, p);
        if let Some(bbox) = feet_box(u + du, v + dv, height) {
            out.push(Detection {
                camera_id: camera.id.clone(),
                timestamp: time,
                bbox,
                score,
            });
        }
    }

    let clutter = if params.clutter_rate > 0.0 {
        Poisson::new(params.clutter_rate).expect("validated rate").sample(rng) as usize
    } else {
        0
    };
    for _ in 0..clutter {
        let u = rng.random::<f64>() * camera.image_width as f64;
        let v = rng.random::<f64>() * camera.image_height as f64;
        let height = camera.image_height as f64 / 4.0;
        let score = fp_score.sample(rng);
        if let Some(bbox) = feet_box(u, v, height) {
            out.push(Detection {
                camera_id: camera.id.clone(),
                timestamp: time,
                bbox,
                score,
            });
        }
    }
    out
}

/// All cameras, in scenario order.
pub fn synthesize_detections<R: Rng + ?Sized>(
    cameras: &[(CameraConfig, Homography)],
    people: &[WorldPoint],
    time: f64,
    rng: &mut R,
) -> Vec<Detection> {
    cameras
        .iter()
        .flat_map(|(c, h)| synthesize_camera(c, h, people, time, rng))
        .collect()
}
