mod config;
mod failure;
mod report;
mod tasks;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use streetsim::canonical;
use streetsim::geo::GeoCoordinate;
use streetsim::parallel::{with_workers, Execution};
use streetsim::world::{generate_world, load_world, save_world, GeneratorParams, World};

use config::{ProviderKind, Run, RunConfig, Task};
use failure::{config_error, CliResult, WithCode, CONFIG, IO};

#[derive(Parser)]
#[command(name = "streetsim", version, about = "Street-graph simulation and benchmark runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create, check or summarize world files.
    #[command(subcommand)]
    World(WorldCommand),
    /// Run one task and write its records and aggregate.
    Run(RunArgs),
    /// Turn a run directory into CSV tables.
    Report {
        /// Directory written by `run`.
        records: PathBuf,
        /// Where to put the CSV files; defaults to the records directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum WorldCommand {
    /// Generate a seeded world file.
    Generate(GenerateArgs),
    /// Check a world file against the schema and its invariants.
    Validate { world: PathBuf },
    /// Print node, place and instance counts per region.
    Stats { world: PathBuf },
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Full generator parameters (TOML); overrides the shorthand flags.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, default_value_t = 400)]
    nodes: usize,
    /// Area centre as `lat,lng`.
    #[arg(long, default_value = "22.3,114.17")]
    center: String,
    /// Region grid as `COLSxROWS`.
    #[arg(long, default_value = "3x3")]
    regions: String,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    world: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    task: Option<Task>,
    #[arg(long, value_enum)]
    provider: Option<ProviderKind>,
    /// Base URL of the external provider.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long)]
    workers: Option<usize>,
    /// VLN success radius in metres.
    #[arg(long = "threshold-m")]
    threshold_m: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::World(WorldCommand::Generate(a)) => world_generate(a),
        Command::World(WorldCommand::Validate { world }) => world_validate(&world),
        Command::World(WorldCommand::Stats { world }) => world_stats(&world),
        Command::Run(a) => run(a),
        Command::Report { records, out } => {
            let out = out.unwrap_or_else(|| records.clone());
            report::report(&records, &out).map(|files| {
                for f in files {
                    println!("wrote {}", out.join(f).display());
                }
            })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}

fn read_world(path: &Path) -> CliResult<World> {
    let bytes = fs::read(path)
        .with_context(|| format!("reading {}", path.display()))
        .code(IO)?;
    load_world(&bytes)
        .with_context(|| format!("{}", path.display()))
        .code(CONFIG)
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .code(IO)?;
    }
    fs::write(path, bytes)
        .with_context(|| format!("writing {}", path.display()))
        .code(IO)
}

fn parse_center(s: &str) -> CliResult<GeoCoordinate> {
    let (lat, lng) = s
        .split_once(',')
        .ok_or_else(|| config_error(format!("--center {s:?} is not lat,lng")))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| config_error(format!("--center {s:?} is not lat,lng")))
    };
    GeoCoordinate::new(parse(lat)?, parse(lng)?).code(CONFIG)
}

fn parse_grid(s: &str) -> CliResult<[usize; 2]> {
    let bad = || config_error(format!("--regions {s:?} is not COLSxROWS"));
    let (c, r) = s.split_once('x').ok_or_else(bad)?;
    Ok([c.parse().map_err(|_| bad())?, r.parse().map_err(|_| bad())?])
}

fn world_generate(a: GenerateArgs) -> CliResult<()> {
    let params = match &a.params {
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading {}", p.display()))
                .code(IO)?;
            toml::from_str::<GeneratorParams>(&text)
                .with_context(|| format!("{}", p.display()))
                .code(CONFIG)?
        }
        None => {
            let mut p = GeneratorParams::city(parse_center(&a.center)?, a.nodes);
            p.region_grid = parse_grid(&a.regions)?;
            p
        }
    };
    let w = generate_world(a.seed, &params)?;
    write_file(&a.out, &save_world(&w))?;
    println!(
        "wrote {}: {} nodes, {} places, {} instances, {} regions",
        a.out.display(),
        w.nodes().len(),
        w.places().len(),
        w.instances().len(),
        w.regions().len()
    );
    Ok(())
}

fn world_validate(path: &Path) -> CliResult<()> {
    let w = read_world(path)?;
    println!("ok {} (digest {})", path.display(), w.digest());
    Ok(())
}

fn world_stats(path: &Path) -> CliResult<()> {
    let w = read_world(path)?;
    println!(
        "{:<16} {:>7} {:>7} {:>9}",
        "region", "nodes", "places", "instances"
    );
    for r in w.regions() {
        let nodes = w.nodes_in(&r.polygon).len();
        let places = w.places().iter().filter(|p| r.polygon.contains(p.coord)).count();
        let inst = w.instances().iter().filter(|o| r.polygon.contains(o.coord)).count();
        println!("{:<16} {nodes:>7} {places:>7} {inst:>9}", r.name);
    }
    println!(
        "{:<16} {:>7} {:>7} {:>9}",
        "total",
        w.nodes().len(),
        w.places().len(),
        w.instances().len()
    );
    Ok(())
}

fn run(a: RunArgs) -> CliResult<()> {
    let file = match &a.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    let flags = RunConfig {
        world: a.world,
        seed: a.seed,
        task: a.task,
        out: a.out,
        workers: a.workers,
        provider: a.provider,
        endpoint: a.endpoint,
        threshold_m: a.threshold_m,
        ..RunConfig::default()
    };
    let run = Run::resolve(file.merge(flags))?;
    let w = read_world(&run.world)?;
    let exec = if run.workers == Some(1) {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let output = with_workers(run.workers, || tasks::run_task(&run, &w, exec))?;

    let manifest = serde_json::json!({
        "task": run.task,
        "seed": run.seed,
        "provider": run.provider,
        "world_digest": w.digest(),
    });
    write_file(&run.out.join("run.json"), canonical::to_string(&manifest).as_bytes())?;
    let mut records = output.records.join("\n");
    if !records.is_empty() {
        records.push('\n');
    }
    write_file(&run.out.join("records.jsonl"), records.as_bytes())?;
    write_file(
        &run.out.join("aggregate.json"),
        canonical::to_string(&output.aggregate).as_bytes(),
    )?;
    for (name, bytes) in &output.extra_files {
        write_file(&run.out.join(name), bytes)?;
    }
    for line in &output.summary {
        println!("{line}");
    }
    println!("{} task written to {}", run.task, run.out.display());
    Ok(())
}
