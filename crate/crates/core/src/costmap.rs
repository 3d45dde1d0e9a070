//! Layered costmaps: static obstacles, inflation and social costs fused into
//! one `u8` grid for the planner.
//!
//! Cost scale: 254 lethal, 253 inscribed (the robot center here means a
//! collision), 0..=252 traversable. Social costs top out at 252.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{point_in_polygon, GridSpec, WorldPoint};
use crate::social::{SocialParams, SocialScene};

pub const LETHAL: u8 = 254;
pub const INSCRIBED: u8 = 253;
pub const MAX_SOCIAL: u8 = 252;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostmapError {
    #[error("costmap layers have different grids")]
    SpecMismatch,
    #[error("nothing to fuse")]
    NoLayers,
    #[error("invalid inflation parameters: {0}")]
    InvalidInflation(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Costmap {
    spec: GridSpec,
    cells: Vec<u8>,
}

impl Costmap {
    pub fn new(spec: GridSpec) -> Self {
        Self {
            cells: vec![0; spec.len()],
            spec,
        }
    }

    pub fn from_cells(spec: GridSpec, cells: Vec<u8>) -> Option<Self> {
        (cells.len() == spec.len() && cells.iter().all(|&c| c <= LETHAL)).then_some(Self { spec, cells })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn get(&self, col: usize, row: usize) -> u8 {
        self.cells[row * self.spec.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, value: u8) {
        self.cells[row * self.spec.width + col] = value.min(LETHAL);
    }

    /// Cost of the cell containing `p`, `None` off the map.
    pub fn cost_at(&self, p: WorldPoint) -> Option<u8> {
        self.spec.world_to_grid(p).ok().map(|c| self.cells[self.spec.linear(c)])
    }

    pub fn count_at_least(&self, threshold: u8) -> usize {
        self.cells.iter().filter(|&&c| c >= threshold).count()
    }
}

/// Static obstacles in world coordinates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSet {
    #[serde(default)]
    pub polygons: Vec<Vec<WorldPoint>>,
    /// Individual occupied points; the cell containing each is lethal.
    #[serde(default)]
    pub cells: Vec<WorldPoint>,
}

impl ObstacleSet {
    pub fn is_empty(&self) -> bool {
        self.polygons.is_empty() && self.cells.is_empty()
    }

    /// Axis-aligned rectangle helper.
    pub fn rectangle(min: WorldPoint, max: WorldPoint) -> Vec<WorldPoint> {
        vec![min, WorldPoint::new(max.x, min.y), max, WorldPoint::new(min.x, max.y)]
    }
}

/// Cells whose center lies inside an obstacle become lethal.
pub fn rasterize_static(spec: &GridSpec, obstacles: &ObstacleSet) -> Costmap {
    let mut map = Costmap::new(*spec);
    for poly in &obstacles.polygons {
        if poly.len() < 3 {
            continue;
        }
        let (min_x, max_x, min_y, max_y) = poly.iter().fold(
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), p| (a.min(p.x), b.max(p.x), c.min(p.y), d.max(p.y)),
        );
        let Some((c0, c1)) = index_span(spec.origin.x, spec.resolution, spec.width, min_x, max_x) else {
            continue;
        };
        let Some((r0, r1)) = index_span(spec.origin.y, spec.resolution, spec.height, min_y, max_y) else {
            continue;
        };
        for row in r0..=r1 {
            for col in c0..=c1 {
                let center = spec.cell_center(crate::geometry::CellIndex::new(col, row));
                if point_in_polygon(center, poly) {
                    map.set(col, row, LETHAL);
                }
            }
        }
    }
    for p in &obstacles.cells {
        if let Ok(c) = spec.world_to_grid(*p) {
            map.set(c.col, c.row, LETHAL);
        }
    }
    map
}

/// Range of cell indices whose centers may fall in `[lo, hi]`.
fn index_span(origin: f64, res: f64, n: usize, lo: f64, hi: f64) -> Option<(usize, usize)> {
    let first = ((lo - origin) / res - 0.5).ceil().max(0.0);
    let last = ((hi - origin) / res - 0.5).floor().min(n as f64 - 1.0);
    (first <= last && last >= 0.0).then_some((first as usize, last as usize))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InflationParams {
    pub inscribed_radius: f64,
    /// Exponential decay rate, 1/m.
    pub decay_rate: f64,
    pub cutoff_radius: f64,
}

impl Default for InflationParams {
    fn default() -> Self {
        Self {
            inscribed_radius: 0.3,
            decay_rate: 5.0,
            cutoff_radius: 1.5,
        }
    }
}

impl InflationParams {
    pub fn validate(&self) -> Result<(), CostmapError> {
        let ok = self.inscribed_radius > 0.0
            && self.decay_rate > 0.0
            && self.cutoff_radius > 0.0
            && self.cutoff_radius >= self.inscribed_radius;
        if ok {
            Ok(())
        } else {
            Err(CostmapError::InvalidInflation(format!("{self:?}")))
        }
    }

    /// Inflation cost at distance `d` (meters) from the nearest lethal cell.
    pub fn cost_at_distance(&self, d: f64) -> u8 {
        if d == 0.0 {
            LETHAL
        } else if d <= self.inscribed_radius {
            INSCRIBED
        } else if d <= self.cutoff_radius {
            (252.0 * (-self.decay_rate * (d - self.inscribed_radius)).exp()).round() as u8
        } else {
            0
        }
    }
}

/// Squared distance, in cells, from every cell to the nearest lethal cell.
/// `f64::INFINITY` where the map has no lethal cell.
///
/// Exact Euclidean transform: two passes of the 1-D lower-envelope algorithm
/// (columns, then rows).
pub fn lethal_distance_sq(map: &Costmap) -> Vec<f64> {
    let (w, h) = (map.spec.width, map.spec.height);
    let mut grid: Vec<f64> = map
        .cells
        .iter()
        .map(|&c| if c == LETHAL { 0.0 } else { f64::INFINITY })
        .collect();
    let mut buf_in = vec![0.0; w.max(h)];
    let mut buf_out = vec![0.0; w.max(h)];
    for col in 0..w {
        for row in 0..h {
            buf_in[row] = grid[row * w + col];
        }
        edt_1d(&buf_in[..h], &mut buf_out[..h]);
        for row in 0..h {
            grid[row * w + col] = buf_out[row];
        }
    }
    for row in 0..h {
        buf_in[..w].copy_from_slice(&grid[row * w..(row + 1) * w]);
        edt_1d(&buf_in[..w], &mut buf_out[..w]);
        grid[row * w..(row + 1) * w].copy_from_slice(&buf_out[..w]);
    }
    grid
}

fn edt_1d(f: &[f64], d: &mut [f64]) {
    let n = f.len();
    let finite: Vec<usize> = (0..n).filter(|&i| f[i].is_finite()).collect();
    if finite.is_empty() {
        d.iter_mut().for_each(|v| *v = f64::INFINITY);
        return;
    }
    // Lower envelope of parabolas rooted at finite samples.
    let mut v: Vec<usize> = Vec::with_capacity(finite.len());
    let mut z: Vec<f64> = Vec::with_capacity(finite.len() + 1);
    for &q in &finite {
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.clear();
                    z.push(f64::NEG_INFINITY);
                    z.push(f64::INFINITY);
                    break;
                }
                Some(&p) => {
                    let (qf, pf) = (q as f64, p as f64);
                    let s = ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * (qf - pf));
                    if s <= z[z.len() - 2] {
                        v.pop();
                        z.pop();
                        if v.is_empty() {
                            continue;
                        }
                    } else {
                        let last = z.len() - 1;
                        z[last] = s;
                        z.push(f64::INFINITY);
                        v.push(q);
                        break;
                    }
                }
            }
        }
    }
    let mut k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let p = v[k];
        let diff = qf - p as f64;
        *out = diff * diff + f[p];
    }
}

/// Raises cells near lethal ones; never lowers a cell.
pub fn inflate(map: &Costmap, params: &InflationParams) -> Costmap {
    let dist_sq = lethal_distance_sq(map);
    let res = map.spec.resolution;
    let mut out = map.clone();
    for (cell, d2) in out.cells.iter_mut().zip(dist_sq) {
        if d2.is_finite() {
            let c = params.cost_at_distance(d2.sqrt() * res);
            *cell = (*cell).max(c);
        }
    }
    out
}

/// Samples the fused social field at every cell center, scaled to `0..=252`.
pub fn rasterize_social(spec: &GridSpec, scene: &SocialScene, params: &SocialParams) -> Costmap {
    let mut map = Costmap::new(*spec);
    // Below half a quantum everything rounds to zero, so each contributor is
    // only evaluated inside the radius where it can still reach that level.
    let quantum_floor = 0.5 / MAX_SOCIAL as f64;
    let reach = (2.0 * (1.0 / quantum_floor).ln()).sqrt();
    for person in &scene.persons {
        let sigma = max_person_scale(person, params);
        let single = SocialScene {
            persons: vec![*person],
            interactions: Vec::new(),
        };
        splat(&mut map, person.position, sigma * reach, |e| single.cost(e, params));
    }
    for inter in &scene.interactions {
        let r = inter.radius();
        let single = SocialScene {
            persons: Vec::new(),
            interactions: vec![*inter],
        };
        splat(&mut map, inter.center(), r.max(r.sqrt()) + spec.resolution, |e| {
            single.cost(e, params)
        });
    }
    map
}

fn max_person_scale(person: &crate::tracking::PersonEstimate, p: &SocialParams) -> f64 {
    use crate::tracking::Posture;
    let circular = p.circular_sigma_x.max(p.circular_sigma_y);
    match person.posture {
        Posture::Standing => circular,
        Posture::Seated => circular
            .max(p.visibility_front)
            .max(p.visibility_side)
            .max(p.visibility_rear),
        Posture::Walking => person
            .speed
            .max(p.walking_min_scale)
            .max(p.overtake_front)
            .max(p.overtake_side)
            .max(p.overtake_rear),
    }
}

fn splat(map: &mut Costmap, center: WorldPoint, radius: f64, field: impl Fn(WorldPoint) -> f64) {
    let spec = map.spec;
    let Some((c0, c1)) = index_span(
        spec.origin.x,
        spec.resolution,
        spec.width,
        center.x - radius,
        center.x + radius,
    ) else {
        return;
    };
    let Some((r0, r1)) = index_span(
        spec.origin.y,
        spec.resolution,
        spec.height,
        center.y - radius,
        center.y + radius,
    ) else {
        return;
    };
    for row in r0..=r1 {
        for col in c0..=c1 {
            let e = spec.cell_center(crate::geometry::CellIndex::new(col, row));
            let v = quantize_social(field(e));
            let idx = row * spec.width + col;
            if v > map.cells[idx] {
                map.cells[idx] = v;
            }
        }
    }
}

/// `[0, 1]` social cost to the costmap scale.
pub fn quantize_social(cost: f64) -> u8 {
    (MAX_SOCIAL as f64 * cost.clamp(0.0, 1.0)).round() as u8
}

/// Cellwise maximum of same-grid layers.
pub fn fuse(layers: &[&Costmap]) -> Result<Costmap, CostmapError> {
    let (first, rest) = layers.split_first().ok_or(CostmapError::NoLayers)?;
    let mut out = (*first).clone();
    for layer in rest {
        if layer.spec != first.spec {
            return Err(CostmapError::SpecMismatch);
        }
        for (a, b) in out.cells.iter_mut().zip(&layer.cells) {
            *a = (*a).max(*b);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CellIndex;
    use crate::social::InteractionSpec;
    use crate::tracking::PersonEstimate;
    use proptest::prelude::*;

    fn grid(res: f64, w: usize, h: usize) -> GridSpec {
        GridSpec::new(WorldPoint::new(0.0, 0.0), res, w, h).unwrap()
    }

    /// Brute-force nearest-lethal distance in cells.
    fn brute_distance_sq(map: &Costmap) -> Vec<f64> {
        let spec = map.spec();
        let lethal: Vec<(i64, i64)> = (0..spec.len())
            .filter(|&i| map.cells()[i] == LETHAL)
            .map(|i| ((i % spec.width) as i64, (i / spec.width) as i64))
            .collect();
        (0..spec.len())
            .map(|i| {
                let (c, r) = ((i % spec.width) as i64, (i / spec.width) as i64);
                lethal
                    .iter()
                    .map(|&(lc, lr)| ((c - lc).pow(2) + (r - lr).pow(2)) as f64)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    #[test]
    fn rasterize_static_examples() {
        let spec = grid(0.5, 10, 10);
        assert_eq!(rasterize_static(&spec, &ObstacleSet::default()).count_at_least(1), 0);

        let square = ObstacleSet {
            polygons: vec![ObstacleSet::rectangle(
                WorldPoint::new(1.0, 1.0),
                WorldPoint::new(2.0, 2.0),
            )],
            cells: vec![],
        };
        let map = rasterize_static(&spec, &square);
        assert_eq!(map.count_at_least(LETHAL), 4);
        assert_eq!(map.get(2, 2), LETHAL);
        assert_eq!(map.get(3, 3), LETHAL);
        assert_eq!(map.get(4, 4), 0);

        let outside = ObstacleSet {
            polygons: vec![ObstacleSet::rectangle(
                WorldPoint::new(20.0, 20.0),
                WorldPoint::new(21.0, 21.0),
            )],
            cells: vec![WorldPoint::new(-3.0, 1.0)],
        };
        assert_eq!(rasterize_static(&spec, &outside).count_at_least(1), 0);

        let point = ObstacleSet {
            polygons: vec![],
            cells: vec![WorldPoint::new(0.7, 0.2)],
        };
        assert_eq!(rasterize_static(&spec, &point).get(1, 0), LETHAL);
    }

    #[test]
    fn inflation_examples() {
        let spec = grid(0.1, 20, 5);
        let empty = Costmap::new(spec);
        assert_eq!(inflate(&empty, &InflationParams::default()), empty);

        let mut map = Costmap::new(spec);
        map.set(0, 2, LETHAL);
        let params = InflationParams {
            inscribed_radius: 0.1,
            decay_rate: 5.0,
            cutoff_radius: 1.5,
        };
        let out = inflate(&map, &params);
        assert_eq!(out.get(0, 2), LETHAL);
        // Adjacent cell sits exactly at the inscribed radius.
        assert_eq!(out.get(1, 2), INSCRIBED);
        // inscribed + 1/k = 0.3 m = 3 cells: round(252 / e) = 93.
        assert_eq!(out.get(3, 2), 93);
        assert_eq!((252.0 * (-1.0f64).exp()).round(), 93.0);
        // Beyond the cutoff nothing changes.
        assert_eq!(out.get(19, 2), 0);
    }

    #[test]
    fn edt_matches_brute_force_on_fixed_layout() {
        let spec = grid(1.0, 13, 7);
        let mut map = Costmap::new(spec);
        for (c, r) in [(0, 0), (5, 3), (12, 6), (6, 3)] {
            map.set(c, r, LETHAL);
        }
        assert_eq!(lethal_distance_sq(&map), brute_distance_sq(&map));
    }

    #[test]
    fn rasterize_social_examples() {
        let spec = grid(0.1, 40, 40);
        let params = SocialParams::default();
        assert_eq!(
            rasterize_social(&spec, &SocialScene::default(), &params).count_at_least(1),
            0
        );

        let center = spec.cell_center(CellIndex::new(20, 20));
        let a = PersonEstimate::standing(center, 0.0);
        let map = rasterize_social(
            &spec,
            &SocialScene {
                persons: vec![a],
                interactions: vec![],
            },
            &params,
        );
        assert_eq!(map.get(20, 20), MAX_SOCIAL);
        assert_eq!(map.count_at_least(INSCRIBED), 0);

        let b = PersonEstimate::walking(spec.cell_center(CellIndex::new(25, 20)), WorldPoint::new(1.0, 0.0));
        let both = rasterize_social(
            &spec,
            &SocialScene {
                persons: vec![a, b],
                interactions: vec![],
            },
            &params,
        );
        let only_b = rasterize_social(
            &spec,
            &SocialScene {
                persons: vec![b],
                interactions: vec![],
            },
            &params,
        );
        assert_eq!(both, fuse(&[&map, &only_b]).unwrap());
    }

    #[test]
    fn rasterize_social_matches_direct_sampling() {
        // The splatting cutoff must not change any cell.
        let spec = grid(0.1, 80, 60);
        let params = SocialParams::default();
        let scene = SocialScene {
            persons: vec![
                PersonEstimate::walking(WorldPoint::new(3.0, 3.0), WorldPoint::new(1.2, 0.4)),
                PersonEstimate::seated(WorldPoint::new(5.5, 2.0), 2.0),
                PersonEstimate::standing(WorldPoint::new(1.0, 4.5), 0.0),
            ],
            interactions: vec![
                InteractionSpec::new(WorldPoint::new(5.5, 2.0), WorldPoint::new(6.5, 4.0), 0.7).unwrap(),
            ],
        };
        let map = rasterize_social(&spec, &scene, &params);
        for i in 0..spec.len() {
            let e = spec.cell_center(spec.cell_of(i));
            assert_eq!(map.cells()[i], quantize_social(scene.cost(e, &params)), "cell {i}");
        }
    }

    #[test]
    fn fuse_examples() {
        let spec = grid(1.0, 2, 1);
        let a = Costmap::from_cells(spec, vec![100, 7]).unwrap();
        let b = Costmap::from_cells(spec, vec![253, 0]).unwrap();
        assert_eq!(fuse(&[&a]).unwrap(), a);
        assert_eq!(fuse(&[&a, &Costmap::new(spec)]).unwrap(), a);
        assert_eq!(fuse(&[&a, &b]).unwrap().cells(), &[253, 7]);
        let other = Costmap::new(grid(0.5, 2, 1));
        assert_eq!(fuse(&[&a, &other]), Err(CostmapError::SpecMismatch));
        assert_eq!(fuse(&[]), Err(CostmapError::NoLayers));
    }

    fn random_map(w: usize, h: usize) -> impl Strategy<Value = Costmap> {
        prop::collection::vec(prop_oneof![8 => 0u8..=252, 1 => Just(LETHAL)], w * h)
            .prop_map(move |cells| Costmap::from_cells(grid(0.1, w, h), cells).unwrap())
    }

    proptest! {
        #[test]
        fn edt_matches_brute_force(map in random_map(17, 11)) {
            prop_assert_eq!(lethal_distance_sq(&map), brute_distance_sq(&map));
        }

        #[test]
        fn inflate_monotone_and_idempotent(map in random_map(15, 9)) {
            let params = InflationParams::default();
            let once = inflate(&map, &params);
            for (a, b) in map.cells().iter().zip(once.cells()) {
                prop_assert!(b >= a);
            }
            prop_assert_eq!(inflate(&once, &params), once);
        }

        #[test]
        fn fuse_is_a_semilattice(a in random_map(6, 5), b in random_map(6, 5), c in random_map(6, 5)) {
            let ab_c = fuse(&[&fuse(&[&a, &b]).unwrap(), &c]).unwrap();
            let a_bc = fuse(&[&a, &fuse(&[&b, &c]).unwrap()]).unwrap();
            prop_assert_eq!(&ab_c, &a_bc);
            prop_assert_eq!(fuse(&[&a, &b]).unwrap(), fuse(&[&b, &a]).unwrap());
            prop_assert_eq!(fuse(&[&a, &a]).unwrap(), a);
        }
    }
}
