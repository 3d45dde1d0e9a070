//! A* over the fused costmap, 8-connected.
//!
//! Moving from `u` into neighbor `v` costs `len(u, v) * (1 + w * c(v) / 252)`,
//! `len` being the resolution or `sqrt(2)` times it. Cells at or above
//! [`INSCRIBED`] are untraversable, and a diagonal move needs both orthogonal
//! cells it squeezes between to be traversable. Every step costs at least its
//! length, so the straight-line distance to the goal never overestimates.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use thiserror::Error;

use crate::costmap::{Costmap, INSCRIBED, MAX_SOCIAL};
use crate::format::fmt6;
use crate::geometry::{CellIndex, GridSpec, WorldPoint};

pub const DEFAULT_COST_WEIGHT: f64 = 10.0;
pub const DEFAULT_REPLAN_PERIOD: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("no path to the goal")]
    NoPath,
    #[error("invalid plan request: {0}")]
    InvalidRequest(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanRequest {
    pub start: WorldPoint,
    pub goal: WorldPoint,
    /// How strongly cell cost inflates step length; 0 plans by length only.
    pub cost_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub cells: Vec<CellIndex>,
    /// Cell centers, start first.
    pub waypoints: Vec<WorldPoint>,
    pub total_cost: f64,
}

impl Path {
    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| w[0].distance(w[1])).sum()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "seq,x,y")?;
        for (i, p) in self.waypoints.iter().enumerate() {
            writeln!(out, "{},{},{}", i, fmt6(p.x), fmt6(p.y))?;
        }
        Ok(())
    }
}

const NEIGHBORS: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

pub fn is_traversable(cost: u8) -> bool {
    cost < INSCRIBED
}

/// Moves out of `idx` with their step costs.
pub(crate) fn successors(map: &Costmap, idx: usize, weight: f64, mut visit: impl FnMut(usize, f64)) {
    let spec = map.spec();
    let cells = map.cells();
    let (col, row) = ((idx % spec.width) as i64, (idx / spec.width) as i64);
    let at = |c: i64, r: i64| r as usize * spec.width + c as usize;
    for (dc, dr) in NEIGHBORS {
        let (nc, nr) = (col + dc, row + dr);
        if !spec.contains_cell(nc, nr) {
            continue;
        }
        let n = at(nc, nr);
        if !is_traversable(cells[n]) {
            continue;
        }
        let diagonal = dc != 0 && dr != 0;
        if diagonal && !(is_traversable(cells[at(col + dc, row)]) && is_traversable(cells[at(col, row + dr)])) {
            continue;
        }
        let len = if diagonal {
            spec.resolution * std::f64::consts::SQRT_2
        } else {
            spec.resolution
        };
        visit(n, len * (1.0 + weight * cells[n] as f64 / MAX_SOCIAL as f64));
    }
}

fn endpoint(spec: &GridSpec, map: &Costmap, p: WorldPoint, what: &str) -> Result<usize, PlanError> {
    let c = spec
        .world_to_grid(p)
        .map_err(|_| PlanError::InvalidRequest(format!("{what} ({}, {}) is off the map", p.x, p.y)))?;
    let idx = spec.linear(c);
    if !is_traversable(map.cells()[idx]) {
        return Err(PlanError::InvalidRequest(format!(
            "{what} ({}, {}) lies in an untraversable cell",
            p.x, p.y
        )));
    }
    Ok(idx)
}

fn validate(map: &Costmap, req: &PlanRequest) -> Result<(usize, usize), PlanError> {
    if !(req.cost_weight >= 0.0 && req.cost_weight.is_finite()) {
        return Err(PlanError::InvalidRequest(
            "cost weight must be a non-negative number".into(),
        ));
    }
    let spec = map.spec();
    Ok((
        endpoint(spec, map, req.start, "start")?,
        endpoint(spec, map, req.goal, "goal")?,
    ))
}

#[derive(Debug, Clone, Copy)]
struct OpenEntry {
    f: f64,
    h: f64,
    g: f64,
    idx: usize,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for OpenEntry {}
impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OpenEntry {
    // Reversed for the max-heap: smallest f, then smallest h, then lowest index.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(other.h.total_cmp(&self.h))
            .then(other.idx.cmp(&self.idx))
    }
}

pub fn astar(map: &Costmap, req: &PlanRequest) -> Result<Path, PlanError> {
    let (start, goal) = validate(map, req)?;
    let spec = *map.spec();
    let goal_center = spec.cell_center(spec.cell_of(goal));
    let heuristic = |idx: usize| spec.cell_center(spec.cell_of(idx)).distance(goal_center);

    let n = spec.len();
    let mut g_score = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    g_score[start] = 0.0;
    let h0 = heuristic(start);
    open.push(OpenEntry {
        f: h0,
        h: h0,
        g: 0.0,
        idx: start,
    });

    while let Some(OpenEntry { g, idx, .. }) = open.pop() {
        if closed[idx] || g > g_score[idx] {
            continue;
        }
        if idx == goal {
            return Ok(build_path(&spec, &parent, start, goal, g));
        }
        closed[idx] = true;
        successors(map, idx, req.cost_weight, |next, step| {
            if closed[next] {
                return;
            }
            let tentative = g + step;
            if tentative < g_score[next] {
                g_score[next] = tentative;
                parent[next] = idx;
                let h = heuristic(next);
                open.push(OpenEntry {
                    f: tentative + h,
                    h,
                    g: tentative,
                    idx: next,
                });
            }
        });
    }
    Err(PlanError::NoPath)
}

fn build_path(spec: &GridSpec, parent: &[usize], start: usize, goal: usize, cost: f64) -> Path {
    let mut chain = vec![goal];
    let mut cur = goal;
    while cur != start {
        cur = parent[cur];
        chain.push(cur);
    }
    chain.reverse();
    let cells: Vec<CellIndex> = chain.iter().map(|&i| spec.cell_of(i)).collect();
    let waypoints = cells.iter().map(|&c| spec.cell_center(c)).collect();
    Path {
        cells,
        waypoints,
        total_cost: cost,
    }
}

/// Uniform-cost search over the same move graph; returns only the optimal
/// cost. Kept deliberately plain so it can serve as a reference for [`astar`].
pub fn dijkstra_oracle(map: &Costmap, req: &PlanRequest) -> Result<f64, PlanError> {
    #[derive(PartialEq)]
    struct Item(f64, usize);
    impl Eq for Item {}
    impl PartialOrd for Item {
        fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for Item {
        fn cmp(&self, o: &Self) -> Ordering {
            o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
        }
    }

    let (start, goal) = validate(map, req)?;
    let mut dist = vec![f64::INFINITY; map.spec().len()];
    let mut heap = BinaryHeap::new();
    dist[start] = 0.0;
    heap.push(Item(0.0, start));
    while let Some(Item(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        if u == goal {
            return Ok(d);
        }
        successors(map, u, req.cost_weight, |v, step| {
            if d + step < dist[v] {
                dist[v] = d + step;
                heap.push(Item(d + step, v));
            }
        });
    }
    Err(PlanError::NoPath)
}

/// Cost of following an explicit cell sequence, `None` if it is not a legal
/// sequence of moves.
pub fn path_cost(map: &Costmap, cells: &[CellIndex], weight: f64) -> Option<f64> {
    let spec = map.spec();
    let mut total = 0.0;
    for w in cells.windows(2) {
        let (from, to) = (spec.linear(w[0]), spec.linear(w[1]));
        let mut step_cost = None;
        successors(map, from, weight, |n, s| {
            if n == to {
                step_cost = Some(s);
            }
        });
        total += step_cost?;
    }
    Some(total)
}

/// Whether to plan again: the period elapsed (inclusive, with a nanosecond of
/// slack for accumulated simulation time) or the costmap changed.
pub fn replan_policy(now: f64, last_plan: f64, period: f64, costmap_changed: bool) -> bool {
    costmap_changed || now - last_plan >= period - 1e-9
}
