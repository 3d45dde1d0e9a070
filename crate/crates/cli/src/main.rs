//! `socialnav` command line: run scenarios, render cost fields, plan on dumps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod render;

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use socialnav::dump::{read_costmap_csv, sample_field, write_field_csv, write_field_pgm};
use socialnav::planner::DEFAULT_COST_WEIGHT;
use socialnav::sim::trace::write_atomic;
use socialnav::sim::{builtin_scenario, compute_metrics, run_with, write_artifacts, Metrics, RunOptions, Scenario};
use socialnav::social::InteractionSpec;
use socialnav::{astar, GridSpec, PersonEstimate, PlanError, PlanRequest, SocialParams, SocialScene, WorldPoint};

const EXIT_ERROR: u8 = 1;
const EXIT_TIME_LIMIT: u8 = 2;
const EXIT_NO_PATH: u8 = 3;

#[derive(Parser)]
#[command(name = "socialnav", version, about = "Human-aware navigation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its trace and metrics.
    Simulate(SimulateArgs),
    /// Sample the cost field of a single person or interaction.
    Costfield(CostfieldArgs),
    /// Plan on a costmap CSV dump.
    Plan(PlanArgs),
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// Scenario JSON file. A missing file whose stem names a shipped
    /// scenario (e.g. `experiment1_slalom.json`) loads that scenario.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory for the run artifacts.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the grid resolution (m), keeping the extent.
    #[arg(long)]
    resolution: Option<f64>,
    /// Also write `costmap.pgm` and `trajectory.svg`.
    #[arg(long)]
    render: bool,
    /// Write every distinct fused costmap under `costmaps/`.
    #[arg(long)]
    dump_costmaps: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FieldKind {
    Walking,
    Standing,
    Handover,
    Seated,
    Interaction,
}

#[derive(clap::Args)]
struct CostfieldArgs {
    #[arg(long, value_enum)]
    kind: FieldKind,
    /// Walking speed, m/s.
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
    /// Heading (or facing) in degrees; 90 is +y.
    #[arg(long, default_value_t = 90.0)]
    heading: f64,
    /// Importance of an interaction, in [0, 1].
    #[arg(long, default_value_t = 1.0)]
    importance: f64,
    /// Side of the square sampled around the origin, m.
    #[arg(long, default_value_t = 6.0)]
    extent: f64,
    #[arg(long, default_value_t = 0.05)]
    resolution: f64,
    /// Output directory for `field.csv` and `field.pgm`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct PlanArgs {
    /// Costmap CSV as written by `simulate --dump-costmaps`.
    #[arg(long)]
    costmap: PathBuf,
    /// Start as `x,y` in meters.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    start: WorldPoint,
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    goal: WorldPoint,
    #[arg(long, default_value_t = DEFAULT_COST_WEIGHT)]
    cost_weight: f64,
    /// Also write the path CSV to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_point(s: &str) -> Result<WorldPoint, String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected `x,y`, got `{s}`"))?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    let p = WorldPoint::new(num(x)?, num(y)?);
    if !p.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(p)
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    if !path.exists() {
        if let Some(s) = path.file_stem().and_then(|s| s.to_str()).and_then(builtin_scenario) {
            return Ok(s);
        }
    }
    Scenario::load(path).with_context(|| format!("loading {}", path.display()))
}

fn print_summary(m: &Metrics) {
    println!("scenario        {}", m.scenario);
    println!("seed            {}", m.seed);
    println!("outcome         {}", m.outcome);
    println!("duration        {} s ({} frames)", m.duration, m.frames);
    println!("path length     {} m", m.path_length);
    println!("replans         {}", m.replan_count);
    println!("violation time  {} s", m.violation_time);
    println!("interaction     {} frames inside a disc", m.interaction_frames);
    if let Some(e) = m.mean_track_error {
        println!("track error     {e} m");
    }
    for p in &m.persons {
        println!(
            "person {:<8} min distance {} m at t={} s, side {}",
            p.id,
            p.min_distance,
            p.closest_time,
            p.passing_side.as_deref().unwrap_or("-")
        );
    }
    for h in &m.handover {
        println!(
            "hand-over {:<5} distance {} m, bearing {} deg",
            h.person, h.distance, h.bearing_deg
        );
    }
}

fn cmd_simulate(args: &SimulateArgs) -> Result<u8> {
    let mut scenario = load_scenario(&args.scenario)?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if let Some(res) = args.resolution {
        scenario = scenario.with_resolution(res).context("--resolution")?;
    }
    let options = RunOptions {
        record_costmaps: args.dump_costmaps,
    };
    let trace = run_with(&scenario, options).context("simulation failed")?;
    let metrics = compute_metrics(&trace);
    let rendered = if args.render {
        let mut pgm = Vec::new();
        socialnav::dump::write_costmap_pgm(&mut pgm, &trace.final_costmap)?;
        Some((pgm, render::trajectory_svg(&trace)))
    } else {
        None
    };
    write_artifacts(&args.out, &trace, &metrics, args.dump_costmaps)
        .with_context(|| format!("writing artifacts to {}", args.out.display()))?;
    if let Some((pgm, svg)) = rendered {
        write_atomic(&args.out.join("costmap.pgm"), &pgm)?;
        write_atomic(&args.out.join("trajectory.svg"), svg.as_bytes())?;
    }
    print_summary(&metrics);
    Ok(if metrics.success { 0 } else { EXIT_TIME_LIMIT })
}

fn field_scene(args: &CostfieldArgs) -> Result<SocialScene> {
    let origin = WorldPoint::new(0.0, 0.0);
    let heading = args.heading.to_radians();
    let person = match args.kind {
        FieldKind::Walking => {
            if !(args.speed > 0.0) {
                bail!("--speed must be positive for a walking person");
            }
            PersonEstimate::walking(origin, WorldPoint::from_polar(args.speed, heading))
        }
        FieldKind::Standing => PersonEstimate::standing(origin, heading),
        FieldKind::Handover => PersonEstimate {
            handover_target: true,
            ..PersonEstimate::standing(origin, heading)
        },
        FieldKind::Seated => PersonEstimate::seated(origin, heading),
        FieldKind::Interaction => {
            // Entities one meter either side of the origin along the heading.
            let half = WorldPoint::from_polar(1.0, heading);
            let spec = InteractionSpec::new(origin - half, origin + half, args.importance)
                .context("--importance must lie in [0, 1]")?;
            return Ok(SocialScene {
                persons: Vec::new(),
                interactions: vec![spec],
            });
        }
    };
    Ok(SocialScene {
        persons: vec![person],
        interactions: Vec::new(),
    })
}

fn cmd_costfield(args: &CostfieldArgs) -> Result<u8> {
    if !(args.extent > 0.0) {
        bail!("--extent must be positive");
    }
    let scene = field_scene(args)?;
    let half = args.extent / 2.0;
    let spec = GridSpec::covering(WorldPoint::new(-half, -half), args.extent, args.extent, args.resolution)
        .context("--resolution")?;
    let params = SocialParams::default();
    let samples = sample_field(&spec, |e| scene.cost(e, &params));
    let (mut csv, mut pgm) = (Vec::new(), Vec::new());
    write_field_csv(&mut csv, &spec, &samples)?;
    write_field_pgm(&mut pgm, &spec, &samples)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_atomic(&args.out.join("field.csv"), &csv)?;
    write_atomic(&args.out.join("field.pgm"), &pgm)?;
    let peak = samples.iter().copied().fold(0.0, f64::max);
    println!(
        "{}x{} samples at {} m, peak cost {:.6}, written to {}",
        spec.width,
        spec.height,
        spec.resolution,
        peak,
        args.out.display()
    );
    Ok(0)
}

fn cmd_plan(args: &PlanArgs) -> Result<u8> {
    let file = File::open(&args.costmap).with_context(|| format!("opening {}", args.costmap.display()))?;
    let map = read_costmap_csv(BufReader::new(file)).with_context(|| format!("reading {}", args.costmap.display()))?;
    let req = PlanRequest {
        start: args.start,
        goal: args.goal,
        cost_weight: args.cost_weight,
    };
    let path = match astar(&map, &req) {
        Ok(p) => p,
        Err(PlanError::NoPath) => {
            eprintln!("no path from the start to the goal");
            return Ok(EXIT_NO_PATH);
        }
        Err(e) => return Err(e).context("planning"),
    };
    let mut csv = Vec::new();
    path.write_csv(&mut csv)?;
    if let Some(out) = &args.out {
        write_atomic(out, &csv).with_context(|| format!("writing {}", out.display()))?;
    }
    println!("# total_cost={}", socialnav::format::fmt6(path.total_cost));
    print!("{}", String::from_utf8(csv).expect("ascii csv"));
    Ok(0)
}

fn main() -> ExitCode {
    // Usage errors exit 1 like every other failure; 2 is reserved for a
    // run that hit its time limit.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Costfield(a) => cmd_costfield(a),
        Command::Plan(a) => cmd_plan(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
