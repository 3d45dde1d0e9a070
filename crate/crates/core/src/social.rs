//! Social cost fields over the ground plane. Every function returns a value
//! in `[0, 1]`, 1 being the most uncomfortable spot (the person's position).

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::geometry::{normalize_angle, WorldPoint};
use crate::tracking::{PersonEstimate, Posture};

/// Orientation and the three length scales (meters) of an asymmetric Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymGaussParams {
    pub alpha: f64,
    /// Spread along `alpha`.
    pub front: f64,
    /// Spread along `alpha ± π/2`.
    pub side: f64,
    /// Spread along `alpha - π`.
    pub rear: f64,
}

impl AsymGaussParams {
    pub fn new(alpha: f64, front: f64, side: f64, rear: f64) -> Self {
        Self {
            alpha,
            front,
            side,
            rear,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.front > 0.0 && self.side > 0.0 && self.rear > 0.0 && self.alpha.is_finite()
    }
}

/// Gaussian bump centered at `p`, elongated along `alpha` with a different
/// longitudinal spread ahead of and behind the center.
pub fn asym_gauss(e: WorldPoint, p: WorldPoint, params: &AsymGaussParams) -> f64 {
    let d = e - p;
    if d.x == 0.0 && d.y == 0.0 {
        return 1.0;
    }
    let theta = normalize_angle(d.angle() - params.alpha);
    let sigma = if theta.abs() <= FRAC_PI_2 {
        params.front
    } else {
        params.rear
    };
    let (sin_a, cos_a) = params.alpha.sin_cos();
    let (s2, side2) = (sigma * sigma, params.side * params.side);
    let sin_2a = (2.0 * params.alpha).sin();
    let a = cos_a * cos_a / (2.0 * s2) + sin_a * sin_a / (2.0 * side2);
    let b = sin_2a / (4.0 * s2) - sin_2a / (4.0 * side2);
    let c = sin_a * sin_a / (2.0 * s2) + cos_a * cos_a / (2.0 * side2);
    (-(a * d.x * d.x + 2.0 * b * d.x * d.y + c * d.y * d.y)).exp()
}

/// Tunable parameters of the person cost functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SocialParams {
    /// Floor on the walking personal-space scale, m.
    pub walking_min_scale: f64,
    /// Standing/seated circular Gaussian spreads, m.
    pub circular_sigma_x: f64,
    pub circular_sigma_y: f64,
    /// Visibility field behind a seated person (front, side, rear), m.
    pub visibility_front: f64,
    pub visibility_side: f64,
    pub visibility_rear: f64,
    /// Overtake field on a walking person's right (front, side, rear), m.
    pub overtake_front: f64,
    pub overtake_side: f64,
    pub overtake_rear: f64,
    /// Full opening angle of the hand-over cone, degrees.
    pub handover_cone_deg: f64,
    /// Inner radius kept closed by the hand-over cone, m.
    pub handover_min_distance: f64,
    /// Disable to get the plain standing field for hand-over targets.
    pub handover_gate: bool,
    /// Compare squared distance against the unsquared radius in the
    /// interaction disc test instead of plain distance against radius.
    pub literal_interaction_radius: bool,
}

impl Default for SocialParams {
    fn default() -> Self {
        Self {
            walking_min_scale: 0.8,
            circular_sigma_x: 0.45,
            circular_sigma_y: 0.45,
            visibility_front: 1.2,
            visibility_side: 0.8,
            visibility_rear: 0.006,
            overtake_front: 1.5,
            overtake_side: 0.3,
            overtake_rear: 0.0075,
            handover_cone_deg: 45.0,
            handover_min_distance: 0.6,
            handover_gate: true,
            literal_interaction_radius: false,
        }
    }
}

impl SocialParams {
    pub fn validate(&self) -> Result<(), String> {
        let scales = [
            ("walking_min_scale", self.walking_min_scale),
            ("circular_sigma_x", self.circular_sigma_x),
            ("circular_sigma_y", self.circular_sigma_y),
            ("visibility_front", self.visibility_front),
            ("visibility_side", self.visibility_side),
            ("visibility_rear", self.visibility_rear),
            ("overtake_front", self.overtake_front),
            ("overtake_side", self.overtake_side),
            ("overtake_rear", self.overtake_rear),
        ];
        for (name, v) in scales {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.handover_cone_deg > 0.0 && self.handover_cone_deg <= 360.0) {
            return Err("handover_cone_deg must be in (0, 360]".into());
        }
        if !(self.handover_min_distance >= 0.0) {
            return Err("handover_min_distance must be non-negative".into());
        }
        Ok(())
    }
}

/// Personal space of a walking person; scales grow with speed above the floor.
pub fn g1_walking(e: WorldPoint, person: &PersonEstimate, params: &SocialParams) -> f64 {
    let scale = person.speed.max(params.walking_min_scale);
    asym_gauss(
        e,
        person.position,
        &AsymGaussParams::new(person.heading, scale, 2.0 / 3.0 * scale, 0.5 * scale),
    )
}

/// Axis-aligned circular Gaussian.
pub fn g2_circular(e: WorldPoint, p: WorldPoint, sigma_x: f64, sigma_y: f64) -> f64 {
    let (dx, dy) = (e.x - p.x, e.y - p.y);
    (-(dx * dx) / (2.0 * sigma_x * sigma_x) - (dy * dy) / (2.0 * sigma_y * sigma_y)).exp()
}

/// Whether `e` lies in the opened frontal region of a hand-over target.
pub fn in_handover_opening(e: WorldPoint, person: &PersonEstimate, params: &SocialParams) -> bool {
    let d = e - person.position;
    let dist = d.norm();
    if dist < params.handover_min_distance || dist == 0.0 {
        return false;
    }
    let off_axis = normalize_angle(d.angle() - person.heading).abs();
    off_axis <= (params.handover_cone_deg / 2.0).to_radians()
}

/// Zeroes `base_cost` inside the hand-over opening.
pub fn handover_gate(e: WorldPoint, person: &PersonEstimate, base_cost: f64, params: &SocialParams) -> f64 {
    if in_handover_opening(e, person, params) {
        0.0
    } else {
        base_cost
    }
}

/// Discourages passing behind a seated person.
pub fn g3_visibility(e: WorldPoint, person: &PersonEstimate, params: &SocialParams) -> f64 {
    asym_gauss(
        e,
        person.position,
        &AsymGaussParams::new(
            person.heading - PI,
            params.visibility_front,
            params.visibility_side,
            params.visibility_rear,
        ),
    )
}

/// Two entities sharing an interaction and its importance in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionSpec {
    pub entity_a: WorldPoint,
    pub entity_b: WorldPoint,
    pub importance: f64,
}

impl InteractionSpec {
    pub fn new(entity_a: WorldPoint, entity_b: WorldPoint, importance: f64) -> Option<Self> {
        let valid = (0.0..=1.0).contains(&importance) && entity_a != entity_b;
        valid.then_some(Self {
            entity_a,
            entity_b,
            importance,
        })
    }

    pub fn center(&self) -> WorldPoint {
        self.entity_a.midpoint(self.entity_b)
    }

    pub fn radius(&self) -> f64 {
        self.entity_a.distance(self.entity_b) / 2.0
    }

    /// Disc membership: `|e - c| <= r`, or `|e - c|^2 <= r` when `literal`.
    pub fn contains(&self, e: WorldPoint, literal: bool) -> bool {
        let d = e.distance(self.center());
        if literal {
            d * d <= self.radius()
        } else {
            d <= self.radius()
        }
    }
}

/// Flat cost over the disc spanned by an interacting pair.
pub fn g4_interaction(e: WorldPoint, spec: &InteractionSpec, literal: bool) -> f64 {
    if spec.contains(e, literal) {
        spec.importance
    } else {
        0.0
    }
}

/// Extra cost on a walking person's right so overtaking happens on the left.
pub fn g5_overtake(e: WorldPoint, person: &PersonEstimate, params: &SocialParams) -> f64 {
    asym_gauss(
        e,
        person.position,
        &AsymGaussParams::new(
            person.heading - FRAC_PI_2,
            params.overtake_front,
            params.overtake_side,
            params.overtake_rear,
        ),
    )
}

/// Seated person: personal space fused with the visibility field.
pub fn g6_seated(e: WorldPoint, person: &PersonEstimate, params: &SocialParams) -> f64 {
    g2_circular(e, person.position, params.circular_sigma_x, params.circular_sigma_y)
        .max(g3_visibility(e, person, params))
}

/// Walking person: personal space fused with the overtaking rule.
pub fn g7_walking(e: WorldPoint, person: &PersonEstimate, params: &SocialParams) -> f64 {
    g1_walking(e, person, params).max(g5_overtake(e, person, params))
}

/// Cost a person imposes on `e`, chosen by posture and max-fused.
pub fn person_cost(e: WorldPoint, person: &PersonEstimate, params: &SocialParams) -> f64 {
    match person.posture {
        Posture::Standing => {
            let base = g2_circular(e, person.position, params.circular_sigma_x, params.circular_sigma_y);
            if person.handover_target && params.handover_gate {
                handover_gate(e, person, base, params)
            } else {
                base
            }
        }
        Posture::Seated => g6_seated(e, person, params),
        Posture::Walking => g7_walking(e, person, params),
    }
}

/// Everything that shapes the social field at one instant.
#[derive(Debug, Clone, Default)]
pub struct SocialScene {
    pub persons: Vec<PersonEstimate>,
    pub interactions: Vec<InteractionSpec>,
}

impl SocialScene {
    /// Max-fused cost of all persons and interactions at `e`.
    pub fn cost(&self, e: WorldPoint, params: &SocialParams) -> f64 {
        let persons = self
            .persons
            .iter()
            .map(|p| person_cost(e, p, params))
            .fold(0.0, f64::max);
        self.interactions
            .iter()
            .map(|i| g4_interaction(e, i, params.literal_interaction_radius))
            .fold(persons, f64::max)
    }
}
