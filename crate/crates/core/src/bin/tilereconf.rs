use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use tilereconf::fixtures::{bundled_map, gen_c_shape, gen_cc_shape, gen_obstacle_detour, gen_random_map};
use tilereconf::harness::frames::write_frames;
use tilereconf::harness::sweep::{run_sweep, SweepSpec};
use tilereconf::harness::{run_planner, validate_record, PlannerId, RunParams, RunRecord, EXIT_PARSE_ERROR};
use tilereconf::mapfile::{MapFile, MapFileError};
use tilereconf::planner::RobotState;
use tilereconf::Cell;

#[derive(Parser)]
#[command(
    name = "tilereconf",
    version,
    about = "Tile reconfiguration planners and benchmark harness"
)]
struct Cli {
    /// Seed for randomized planners and generators.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one planner on a map file and print or write its record.
    Solve(SolveArgs),
    /// Replay a record against its map with the independent checker.
    Validate {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        record: PathBuf,
        /// Write the report as JSON here instead of printing text.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a benchmark sweep described by a key/value spec file.
    Sweep {
        spec: PathBuf,
        #[arg(long, default_value = "sweep-out")]
        out: PathBuf,
    },
    /// Export one text and SVG frame per dropoff.
    Frames {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        record: PathBuf,
        #[arg(long, default_value = "frames")]
        out: PathBuf,
    },
    /// Generate an instance as a map file.
    Gen {
        #[command(subcommand)]
        family: GenFamily,
        #[arg(long, global = true)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long, default_value = "glc")]
    planner: PlannerId,
    #[arg(long)]
    label: Option<String>,
    #[arg(long, default_value_t = 0.1)]
    bias_base: f64,
    #[arg(long, default_value_t = 0.75)]
    bias_max: f64,
    #[arg(long, default_value_t = 1)]
    rad: usize,
    #[arg(long, default_value_t = 10_000)]
    max_nodes: usize,
    #[arg(long)]
    cost_threshold: Option<u64>,
    /// Seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long, default_value_t = 500)]
    checkpoint_every: usize,
    /// Seed the tree with the cheaper greedy solution.
    #[arg(long)]
    init_solution: bool,
    /// Robot start cell as `x,y`; by default the first pickup is free.
    #[arg(long, value_parser = parse_cell)]
    robot: Option<Cell>,
    /// Include wall time in the record.
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write replay frames to this directory.
    #[arg(long)]
    frames: Option<PathBuf>,
}

#[derive(Subcommand)]
enum GenFamily {
    Random {
        #[arg(long, default_value_t = 30)]
        width: i32,
        #[arg(long, default_value_t = 30)]
        height: i32,
        #[arg(long, default_value_t = 15)]
        tiles: usize,
        #[arg(long, default_value_t = 0.3)]
        density: f64,
    },
    Detour {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
    },
    CShape {
        #[arg(long)]
        n: usize,
    },
    CcShape {
        #[arg(long)]
        n: usize,
    },
    /// One of the five bundled benchmark maps.
    Bundled {
        #[arg(long)]
        index: usize,
    },
}

fn parse_cell(s: &str) -> Result<Cell, String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let x = x.trim().parse().map_err(|e| format!("{e}"))?;
    let y = y.trim().parse().map_err(|e| format!("{e}"))?;
    Ok(Cell::new(x, y))
}

/// Errors that map to the parse-error exit code.
#[derive(Debug)]
struct InputError(String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn read_map(path: &Path) -> Result<MapFile> {
    MapFile::read(path).map_err(|e| match e {
        MapFileError::Io(io) => anyhow::Error::new(io).context(format!("reading {}", path.display())),
        other => InputError(format!("{}: {other}", path.display())).into(),
    })
}

fn read_record(path: &Path) -> Result<RunRecord> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(text.trim()).map_err(|e| InputError(format!("{}: {e}", path.display())).into())
}

fn emit(out: Option<&Path>, body: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, body).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn solve(args: SolveArgs, seed: u64) -> Result<i32> {
    let mf = read_map(&args.map)?;
    let label = args.label.clone().unwrap_or_else(|| {
        args.map
            .file_stem()
            .map_or("map".into(), |s| s.to_string_lossy().into_owned())
    });
    let params = RunParams {
        bias_base: args.bias_base,
        bias_max: args.bias_max,
        rad: args.rad,
        max_nodes: args.max_nodes,
        cost_threshold: args.cost_threshold,
        time_limit: args.time_limit,
        checkpoint_every: args.checkpoint_every,
        init_solution: args.init_solution,
        step_budget: None,
    };
    let robot = RobotState { position: args.robot };
    let record = match mf.instance() {
        Ok(inst) => run_planner(&inst, &label, args.planner, &params, seed, robot, args.timing),
        Err(e) => {
            eprintln!("infeasible: {e}");
            return Ok(tilereconf::harness::Status::Infeasible.exit_code());
        }
    };
    emit(args.out.as_deref(), &(record.to_json_line() + "\n"))?;
    if let Some(dir) = &args.frames {
        write_frames(&mf, &record.sequence, dir)?;
    }
    if let Some(m) = &record.message {
        eprintln!("{}: {m}", serde_json::to_string(&record.status)?.trim_matches('"'));
    }
    Ok(record.status.exit_code())
}

fn run(cli: Cli) -> Result<i32> {
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Solve(args) => solve(args, seed),
        Command::Validate { map, record, out } => {
            let mf = read_map(&map)?;
            let rec = read_record(&record)?;
            let report = validate_record(&mf, &rec);
            match out {
                Some(p) => emit(Some(&p), &(serde_json::to_string_pretty(&report)? + "\n"))?,
                None => print!("{}", report.summary()),
            }
            Ok(if report.passed { 0 } else { 1 })
        }
        Command::Sweep { spec, out } => {
            let mut spec = SweepSpec::read(&spec).map_err(|e| InputError(e.to_string()))?;
            if let Some(s) = cli.seed {
                spec.master_seed = s;
            }
            let result = run_sweep(&spec)?;
            for p in result.write(&out)? {
                println!("{}", p.display());
            }
            Ok(0)
        }
        Command::Frames { map, record, out } => {
            let mf = read_map(&map)?;
            let rec = read_record(&record)?;
            let report = validate_record(&mf, &rec);
            if let Some(i) = report.first_failure {
                bail!("record fails validation at step {i}:\n{}", report.summary());
            }
            let n = write_frames(&mf, &rec.sequence, &out)?;
            println!("{n} frames written to {}", out.display());
            Ok(0)
        }
        Command::Gen { family, out } => {
            let spec = match family {
                GenFamily::Random {
                    width,
                    height,
                    tiles,
                    density,
                } => gen_random_map(width, height, tiles, density, seed),
                GenFamily::Detour { n, k } => gen_obstacle_detour(n, k),
                GenFamily::CShape { n } => gen_c_shape(n),
                GenFamily::CcShape { n } => gen_cc_shape(n),
                GenFamily::Bundled { index } => bundled_map(index),
            }?;
            emit(out.as_deref(), &spec.to_map_file().to_text())?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<InputError>().is_some() {
                ExitCode::from(EXIT_PARSE_ERROR as u8)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
