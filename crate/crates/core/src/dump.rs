//! Text and image dumps of grids.
//!
//! CSV grids start with the header `origin_x,origin_y,resolution,width,height`
//! and one line of those values, followed by `height` lines of `width` values.
//! The first data line is row 0 (lowest y). PGM images are binary (`P5`,
//! maxval 255) with the top image row at the highest y.

use std::io::{BufRead, Write};

use thiserror::Error;

use crate::costmap::{Costmap, LETHAL};
use crate::format::fmt6;
use crate::geometry::{CellIndex, GridSpec, WorldPoint};

pub const GRID_HEADER: &str = "origin_x,origin_y,resolution,width,height";

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn write_header<W: Write>(out: &mut W, spec: &GridSpec) -> std::io::Result<()> {
    writeln!(out, "{GRID_HEADER}")?;
    writeln!(
        out,
        "{},{},{},{},{}",
        fmt6(spec.origin.x),
        fmt6(spec.origin.y),
        fmt6(spec.resolution),
        spec.width,
        spec.height
    )
}

pub fn write_costmap_csv<W: Write>(mut out: W, map: &Costmap) -> std::io::Result<()> {
    let spec = map.spec();
    write_header(&mut out, spec)?;
    for row in map.cells().chunks(spec.width) {
        let line: Vec<String> = row.iter().map(u8::to_string).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn read_costmap_csv<R: BufRead>(input: R) -> Result<Costmap, DumpError> {
    let mut lines = input.lines().enumerate();
    let mut next = |what: &str| -> Result<(usize, String), DumpError> {
        match lines.next() {
            Some((i, l)) => Ok((i + 1, l?)),
            None => Err(DumpError::Parse {
                line: 0,
                msg: format!("unexpected end of file, expected {what}"),
            }),
        }
    };
    let (n, header) = next("header")?;
    if header.trim() != GRID_HEADER {
        return Err(DumpError::Parse {
            line: n,
            msg: format!("expected header `{GRID_HEADER}`"),
        });
    }
    let (n, meta) = next("grid description")?;
    let fields: Vec<&str> = meta.trim().split(',').collect();
    let bad = |msg: &str| DumpError::Parse {
        line: n,
        msg: msg.to_string(),
    };
    if fields.len() != 5 {
        return Err(bad("grid description needs 5 fields"));
    }
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("bad number"));
    let int = |s: &str| s.trim().parse::<usize>().map_err(|_| bad("bad integer"));
    let spec = GridSpec::new(
        WorldPoint::new(num(fields[0])?, num(fields[1])?),
        num(fields[2])?,
        int(fields[3])?,
        int(fields[4])?,
    )
    .map_err(|e| bad(&e.to_string()))?;

    let mut cells = Vec::with_capacity(spec.len());
    for _ in 0..spec.height {
        let (n, line) = next("grid row")?;
        let row: Result<Vec<u8>, _> = line.trim().split(',').map(|v| v.trim().parse::<u8>()).collect();
        let row = row.map_err(|_| DumpError::Parse {
            line: n,
            msg: "cell values must be integers in 0..=254".into(),
        })?;
        if row.len() != spec.width || row.iter().any(|&c| c > LETHAL) {
            return Err(DumpError::Parse {
                line: n,
                msg: format!("expected {} values in 0..=254", spec.width),
            });
        }
        cells.extend(row);
    }
    Ok(Costmap::from_cells(spec, cells).expect("validated cells"))
}

fn write_pgm<W: Write>(mut out: W, spec: &GridSpec, pixel: impl Fn(usize) -> u8) -> std::io::Result<()> {
    write!(out, "P5\n{} {}\n255\n", spec.width, spec.height)?;
    let mut bytes = Vec::with_capacity(spec.len());
    for row in (0..spec.height).rev() {
        for col in 0..spec.width {
            bytes.push(pixel(row * spec.width + col));
        }
    }
    out.write_all(&bytes)
}

/// Costmap as a grayscale image; lethal cells are drawn at 255.
pub fn write_costmap_pgm<W: Write>(out: W, map: &Costmap) -> std::io::Result<()> {
    write_pgm(out, map.spec(), |i| {
        let c = map.cells()[i];
        if c == LETHAL {
            255
        } else {
            c
        }
    })
}

/// Evaluates a continuous field at every cell center, row-major.
pub fn sample_field(spec: &GridSpec, field: impl Fn(WorldPoint) -> f64) -> Vec<f64> {
    (0..spec.len())
        .map(|i| field(spec.cell_center(spec.cell_of(i))))
        .collect()
}

pub fn write_field_csv<W: Write>(mut out: W, spec: &GridSpec, samples: &[f64]) -> std::io::Result<()> {
    write_header(&mut out, spec)?;
    for row in samples.chunks(spec.width) {
        let line: Vec<String> = row.iter().map(|v| fmt6(*v)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// `[0, 1]` field as a heatmap, 1 drawn at 255.
pub fn write_field_pgm<W: Write>(out: W, spec: &GridSpec, samples: &[f64]) -> std::io::Result<()> {
    write_pgm(out, spec, |i| (255.0 * samples[i].clamp(0.0, 1.0)).round() as u8)
}

/// Reads the sample grid written by [`write_field_csv`].
pub fn read_field_csv<R: BufRead>(input: R) -> Result<(GridSpec, Vec<f64>), DumpError> {
    let text: Vec<String> = input.lines().collect::<Result<_, _>>()?;
    let bad = |line: usize, msg: &str| DumpError::Parse {
        line,
        msg: msg.to_string(),
    };
    if text.first().map(|s| s.trim()) != Some(GRID_HEADER) {
        return Err(bad(1, "missing grid header"));
    }
    let meta: Vec<&str> = text
        .get(1)
        .ok_or_else(|| bad(2, "missing grid description"))?
        .split(',')
        .collect();
    if meta.len() != 5 {
        return Err(bad(2, "grid description needs 5 fields"));
    }
    let f = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(2, "bad number"));
    let u = |s: &str| s.trim().parse::<usize>().map_err(|_| bad(2, "bad integer"));
    let spec = GridSpec::new(
        WorldPoint::new(f(meta[0])?, f(meta[1])?),
        f(meta[2])?,
        u(meta[3])?,
        u(meta[4])?,
    )
    .map_err(|e| bad(2, &e.to_string()))?;
    let mut samples = Vec::with_capacity(spec.len());
    for (i, line) in text.iter().skip(2).take(spec.height).enumerate() {
        for v in line.split(',') {
            samples.push(v.trim().parse::<f64>().map_err(|_| bad(i + 3, "bad sample"))?);
        }
    }
    if samples.len() != spec.len() {
        return Err(bad(text.len(), "sample count does not match the grid"));
    }
    Ok((spec, samples))
}

/// Sample at the cell containing `p`, if on the grid.
pub fn field_value_at(spec: &GridSpec, samples: &[f64], p: WorldPoint) -> Option<f64> {
    spec.world_to_grid(p).ok().map(|c: CellIndex| samples[spec.linear(c)])
}
