//! `iodsub`: solve angles-only orbit-plane problems by subdivision of the
//! projective plane.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pplane_iod::engine::run;
use pplane_iod::io::{
    load_config, load_scenario, read_to_string, to_json, write_string, ConfigFile, IoError, ScenarioFile,
    SolutionsDoc, StatsDoc, TriangulationDoc,
};
use pplane_iod::oracles::Registry;
use pplane_iod::render::render_svg;
use pplane_iod::synthgen::{random_scenario, Kind};

#[derive(Parser)]
#[command(name = "iodsub", version, about = "Orbit-plane search over the projective plane")]
struct Cli {
    /// Worker threads for the subdivision (0 = all cores).
    #[arg(long, global = true, env = "IODSUB_THREADS", default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the subdivision and write solutions.json, stats.json,
    /// triangulation.json and triangulation.svg into the output directory.
    ///
    /// Exit status: 0 when at least one solution was polished, 2 when none
    /// was found, 1 on input errors.
    Solve(SolveArgs),
    /// Write a synthetic scenario with known solutions.
    Generate(GenerateArgs),
    /// Re-render the SVG of a saved triangulation.json.
    Render(RenderArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Scenario file (JSON with `p`, `u`, optional `known_solutions`).
    #[arg(long)]
    scenario: PathBuf,
    /// Configuration file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Certify polished solutions with the Krawczyk test.
    #[arg(long)]
    certify: bool,
    /// Write triangulation.svg (default).
    #[arg(long, overrides_with = "no_svg")]
    svg: bool,
    /// Skip triangulation.svg.
    #[arg(long = "no-svg")]
    no_svg: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Single,
    Two,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(value_enum)]
    kind: KindArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output scenario file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    /// A triangulation.json written by `solve`.
    #[arg(long)]
    triangulation: PathBuf,
    /// Output SVG file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{0}")]
    Other(String),
}

fn at(path: &Path, e: IoError) -> CliError {
    match e {
        IoError::Read { .. } => CliError::Io(e),
        e => CliError::Other(format!("{}: {e}", path.display())),
    }
}

fn solve(a: &SolveArgs) -> Result<bool, CliError> {
    let scenario = load_scenario(&a.scenario).map_err(|e| at(&a.scenario, e))?;
    let file = match &a.config {
        Some(p) => load_config(p).map_err(|e| at(p, e))?,
        None => ConfigFile::default(),
    };
    let mut cfg = file.to_engine_config(&Registry::default())?;
    cfg.certify |= a.certify;
    let result = run(&scenario, &cfg).map_err(IoError::from)?;

    std::fs::create_dir_all(&a.out)
        .map_err(|source| IoError::Write { path: a.out.display().to_string(), source })?;
    write_string(&a.out.join("solutions.json"), &to_json(&SolutionsDoc::new(&result)))?;
    write_string(&a.out.join("stats.json"), &to_json(&StatsDoc::new(&result.stats, result.length_scale)))?;
    let tri = TriangulationDoc::new(&result.leaves, &scenario.known_solutions, &result.solutions);
    write_string(&a.out.join("triangulation.json"), &to_json(&tri))?;
    if !a.no_svg {
        let svg = render_svg(
            result.leaves.iter().map(|l| (&l.triangle, l.status)),
            &tri.solutions,
            &scenario.known_solutions,
        );
        write_string(&a.out.join("triangulation.svg"), &svg)?;
    }
    let found = result.solutions.iter().filter(|s| s.polished).count();
    eprintln!(
        "{} leaves, {} accepted, {} solution(s), {} bottleneck solves",
        result.stats.leaves,
        result.accepted().count(),
        found,
        result.stats.bottleneck_calls
    );
    Ok(found > 0)
}

fn generate(a: &GenerateArgs) -> Result<(), CliError> {
    let kind = match a.kind {
        KindArg::Single => Kind::Single,
        KindArg::Two => Kind::Two,
    };
    let s = random_scenario(kind, a.seed).map_err(|e| CliError::Other(e.to_string()))?;
    write_string(&a.out, &ScenarioFile::from_scenario(&s).to_json())?;
    Ok(())
}

fn render(a: &RenderArgs) -> Result<(), CliError> {
    let doc: TriangulationDoc = serde_json::from_str(&read_to_string(&a.triangulation)?)
        .map_err(|e| CliError::Other(format!("{}: {e}", a.triangulation.display())))?;
    let leaves = doc.to_leaves().map_err(|e| at(&a.triangulation, e))?;
    let svg = render_svg(leaves.iter().map(|(t, s)| (t, *s)), &doc.solutions, &doc.known_solutions);
    write_string(&a.out, &svg)?;
    Ok(())
}

fn set_threads(n: usize) {
    if n > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn report(e: &CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    set_threads(cli.threads);
    match &cli.command {
        Command::Solve(a) => match solve(a) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(2),
            Err(e) => report(&e),
        },
        Command::Generate(a) => match generate(a) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => report(&e),
        },
        Command::Render(a) => match render(a) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => report(&e),
        },
    }
}
