//! SVG trajectory overlay on top of the final costmap.

use std::fmt::Write as _;

use socialnav::costmap::{Costmap, INSCRIBED};
use socialnav::sim::TraceLog;
use socialnav::WorldPoint;

/// Pixels per grid cell in the overlay.
const CELL_PX: f64 = 6.0;

const PERSON_COLORS: [&str; 4] = ["#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

struct Canvas {
    origin: WorldPoint,
    scale: f64,
    height_px: f64,
}

impl Canvas {
    fn px(&self, p: WorldPoint) -> (f64, f64) {
        (
            (p.x - self.origin.x) * self.scale,
            self.height_px - (p.y - self.origin.y) * self.scale,
        )
    }

    fn polyline(&self, points: impl Iterator<Item = WorldPoint>) -> String {
        points
            .map(|p| {
                let (x, y) = self.px(p);
                format!("{x:.1},{y:.1}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn cell_fill(cost: u8) -> String {
    if cost >= INSCRIBED {
        return "#000000".into();
    }
    let v = 255 - (u32::from(cost) * 200 / 252) as u8;
    format!("#{v:02x}{v:02x}{v:02x}")
}

fn costmap_layer(svg: &mut String, map: &Costmap, canvas: &Canvas) {
    let spec = map.spec();
    for (i, &cost) in map.cells().iter().enumerate() {
        if cost == 0 {
            continue;
        }
        let c = spec.cell_of(i);
        let (x, y) = canvas.px(WorldPoint::new(
            spec.origin.x + c.col as f64 * spec.resolution,
            spec.origin.y + (c.row + 1) as f64 * spec.resolution,
        ));
        let _ = writeln!(
            svg,
            r#"<rect x="{x:.1}" y="{y:.1}" width="{CELL_PX}" height="{CELL_PX}" fill="{}"/>"#,
            cell_fill(cost)
        );
    }
}

pub fn trajectory_svg(trace: &TraceLog) -> String {
    let spec = trace.grid;
    let canvas = Canvas {
        origin: spec.origin,
        scale: CELL_PX / spec.resolution,
        height_px: spec.height as f64 * CELL_PX,
    };
    let width_px = spec.width as f64 * CELL_PX;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width_px}" height="{}" viewBox="0 0 {width_px} {}">"#,
        canvas.height_px, canvas.height_px
    );
    let _ = writeln!(svg, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    costmap_layer(&mut svg, &trace.final_costmap, &canvas);

    for (i, id) in trace.person_ids.iter().enumerate() {
        let color = PERSON_COLORS[i % PERSON_COLORS.len()];
        let track = trace
            .frames
            .iter()
            .flat_map(|f| f.persons.iter().filter(|p| p.index == i).map(|p| p.state.position));
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2" stroke-dasharray="4 2"><title>{id}</title></polyline>"#,
            canvas.polyline(track)
        );
        if let Some(p) = trace
            .frames
            .last()
            .and_then(|f| f.persons.iter().find(|p| p.index == i))
        {
            let (x, y) = canvas.px(p.state.position);
            let _ = writeln!(svg, r#"<circle cx="{x:.1}" cy="{y:.1}" r="5" fill="{color}"/>"#);
        }
    }

    let _ = writeln!(
        svg,
        r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="2.5"><title>robot</title></polyline>"##,
        canvas.polyline(trace.robot_positions().into_iter())
    );
    if let Some(goal) = trace.frames.iter().rev().find_map(|f| f.goal) {
        let (x, y) = canvas.px(goal);
        let _ = writeln!(
            svg,
            r##"<rect x="{:.1}" y="{:.1}" width="8" height="8" fill="#1f77b4"/>"##,
            x - 4.0,
            y - 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}
