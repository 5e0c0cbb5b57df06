//! Command-line front end.
//!
//! Exit codes: 0 every check passed, 1 a property check failed, 2 usage or
//! scenario error, 3 numeric infeasibility (expired flow, radius, truncation).

pub mod commands;
pub mod report;
pub mod scenario;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use report::RunReport;
use scenario::Scenario;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Environment variable capping the worker pool size.
pub const WORKERS_ENV: &str = "RICCI_UNION_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "ricci-union", version, about = "Coupled distances, heat semigroups and Lipschitz checks on unions of Ricci flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Table,
    Records,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Directory for report.json, timings.json and field snapshots.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Tolerance of the command's primary check.
    #[arg(long)]
    tol: Option<f64>,
    /// Nodes per axis (torus) or subdivision level (sphere).
    #[arg(long)]
    grid: Option<usize>,
    /// Averages per slice.
    #[arg(long)]
    j: Option<usize>,
    /// Time slices per interval.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Metric axioms and the evolution inequality for the coupled distance.
    VerifyCoupling(Common),
    /// Evolve initial data by iterated sphere averages.
    HeatEvolve(Common),
    /// Track the Lipschitz constant of the heat solution on a time grid.
    LipschitzReport(Common),
    /// Reproduce a bundled worked example.
    Reproduce {
        #[command(subcommand)]
        example: Example,
    },
}

#[derive(Debug, Subcommand)]
enum Example {
    /// Two flat 2-tori with L = sqrt(L0^2 + 8(2pi)^2 t).
    Torus(Common),
    /// Round 2-spheres and the candidate profiles.
    Sphere(Common),
    /// Flat n-tori for several n.
    TorusN {
        #[command(flatten)]
        common: Common,
        /// Dimensions to check.
        #[arg(long, value_delimiter = ',', default_values_t = vec![1usize, 2, 3])]
        dim: Vec<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PrimaryTol {
    Margin,
    Oracle,
    Monotone,
}

/// Map an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InequalityFailed(_) => EXIT_FAIL,
        Error::Scenario(_) | Error::InvalidParameter(_) | Error::Io(_) => EXIT_USAGE,
        Error::FlowExpired { .. }
        | Error::Radius { .. }
        | Error::CouplingRadius { .. }
        | Error::Singular(_)
        | Error::Truncation { .. }
        | Error::Domain(_) => EXIT_NUMERIC,
    }
}

fn load(common: &Common, bundled: Option<&str>, primary: PrimaryTol) -> Result<Scenario> {
    let text = match (&common.scenario, bundled) {
        (Some(path), _) => std::fs::read_to_string(path)
            .map_err(|e| Error::Scenario(format!("cannot read {}: {e}", path.display())))?,
        (None, Some(text)) => text.to_string(),
        (None, None) => return Err(Error::Scenario("--scenario is required".into())),
    };
    let mut sc = Scenario::parse(&text)?;
    if let Some(seed) = common.seed {
        sc.seed = seed;
    }
    if let Some(g) = common.grid {
        sc.semigroup.grid = Some(g);
    }
    if let Some(j) = common.j {
        sc.semigroup.j = j;
    }
    if let Some(m) = common.m {
        sc.semigroup.m = m;
    }
    if let Some(tol) = common.tol {
        if !(tol >= 0.0 && tol.is_finite()) {
            return Err(Error::InvalidParameter(format!("--tol must be finite and nonnegative, got {tol}")));
        }
        match primary {
            PrimaryTol::Margin => sc.tolerances.margin = tol,
            PrimaryTol::Oracle => sc.tolerances.oracle = tol,
            PrimaryTol::Monotone => sc.tolerances.monotone = tol,
        }
    }
    sc.validate()?;
    Ok(sc)
}

fn emit(report: &RunReport, common: &Common) -> Result<()> {
    if let Some(dir) = &common.out {
        std::fs::write(dir.join("report.json"), report.to_json())?;
        std::fs::write(dir.join("timings.json"), report.timings_json())?;
    }
    match common.format {
        Format::Table => print!("{}", report.table()),
        Format::Records => print!("{}", report.records()),
    }
    Ok(())
}

fn prepare_out(common: &Common) -> Result<Option<&Path>> {
    match &common.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            Ok(Some(dir.as_path()))
        }
        None => Ok(None),
    }
}

fn execute(command: Command) -> Result<i32> {
    let (report, common) = match command {
        Command::VerifyCoupling(c) => {
            let sc = load(&c, None, PrimaryTol::Margin)?;
            prepare_out(&c)?;
            (commands::verify_coupling(&sc)?, c)
        }
        Command::HeatEvolve(c) => {
            let sc = load(&c, None, PrimaryTol::Oracle)?;
            let out = prepare_out(&c)?;
            (commands::heat_evolve(&sc, out)?, c)
        }
        Command::LipschitzReport(c) => {
            let sc = load(&c, None, PrimaryTol::Monotone)?;
            prepare_out(&c)?;
            (commands::lipschitz_report(&sc)?, c)
        }
        Command::Reproduce { example } => match example {
            Example::Torus(c) => {
                let sc = load(&c, Some(scenario::TORUS_PAPER), PrimaryTol::Margin)?;
                prepare_out(&c)?;
                (commands::reproduce_torus(&sc)?, c)
            }
            Example::Sphere(c) => {
                let sc = load(&c, Some(scenario::SPHERE_CANDIDATES), PrimaryTol::Margin)?;
                prepare_out(&c)?;
                (commands::reproduce_sphere(&sc)?, c)
            }
            Example::TorusN { common, dim } => {
                if dim.is_empty() || dim.contains(&0) {
                    return Err(Error::InvalidParameter("--dim needs positive dimensions".into()));
                }
                let sc = load(&common, Some(scenario::TORUS_N), PrimaryTol::Margin)?;
                prepare_out(&common)?;
                (commands::reproduce_torus_n(&sc, &dim)?, common)
            }
        },
    };
    emit(&report, &common)?;
    Ok(report.exit_code)
}

fn configure_workers() {
    if let Some(n) = std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            // a second call in the same process keeps the first pool
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    configure_workers();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
