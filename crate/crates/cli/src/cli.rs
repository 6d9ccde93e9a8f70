//! Command-line front end. [`run`] takes the argument list and output
//! streams explicitly and returns the process exit code.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use cascade_core::io::{self, render_points, render_report, render_vertices, Phase1Report, RunReport, SortingSpec, Timings, VertexReport};
use cascade_core::{
    efficient_extreme_points, enumerate_vertices, parse_scalar, run_batch_with, DmSlacks, EfficiencyOracle, Error, RVector, Rational,
};
use clap::{Parser, Subcommand};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "cascade-opt", version, about = "Multilevel multiobjective LP solver (exact rational arithmetic)")]
pub struct Cli {
    /// Print JSON instead of tables.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the extreme points of the feasible set.
    Vertices { file: PathBuf },
    /// List one level's efficient extreme points.
    Efficient {
        file: PathBuf,
        /// 1-based level.
        #[arg(long)]
        level: usize,
    },
    /// Show per-level efficient sets and the maximal compromise faces.
    Compromises { file: PathBuf },
    /// Run both phases without pauses.
    Solve {
        file: PathBuf,
        /// 1-based sorting-set index (default: the file's choice, else the first face).
        #[arg(long)]
        sorting_set: Option<usize>,
        /// JSON list of {"l": [...], "r": [...]} for levels 1..P-1.
        #[arg(long)]
        slacks: Option<PathBuf>,
        /// JSON list of per-level starting points (null for the default).
        #[arg(long)]
        init: Option<PathBuf>,
        /// Restrict every level to the sorting-set face.
        #[arg(long)]
        strict_sp: bool,
        /// Upper bound on slack variables.
        #[arg(long = "bigM", value_parser = parse_rational)]
        big_m: Option<Rational>,
        /// Write the JSON run report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Start the HTTP session API.
    Serve {
        #[arg(long, env = "CASCADE_OPT_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Drop sessions idle for this many seconds (0 keeps them forever).
        #[arg(long, default_value_t = 3600)]
        idle_timeout: u64,
    },
}

fn parse_rational(text: &str) -> Result<Rational, String> {
    parse_scalar(text).map_err(|e| e.to_string())
}

enum Failure {
    Usage(String),
    Domain(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Parses `args` (program name first) and executes the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Domain(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_DOMAIN
        }
    }
}

fn read_json<D: serde::de::DeserializeOwned>(path: &Path) -> Result<D, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    io::from_json(&text).map_err(|e| Error::Parse(format!("{}: {}", path.display(), e.root())))
}

fn emit(out: &mut dyn Write, json: bool, value: &impl serde::Serialize, table: impl FnOnce() -> String) -> Outcome {
    let text = if json { io::to_json(value) + "\n" } else { table() };
    out.write_all(text.as_bytes()).map_err(|e| Failure::Domain(Error::Parse(format!("writing output: {e}"))))
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Outcome {
    match &cli.command {
        Command::Vertices { file } => {
            let (problem, _) = io::read_problem::<Rational>(file)?;
            let vertices = enumerate_vertices(&problem.polytope())?;
            let report: Vec<VertexReport<Rational>> = vertices.iter().map(VertexReport::from).collect();
            emit(out, cli.json, &report, || render_vertices(&report))
        }
        Command::Efficient { file, level } => {
            let (problem, _) = io::read_problem::<Rational>(file)?;
            if *level == 0 || *level > problem.num_levels() {
                return Err(Failure::Usage(format!("--level must be in 1..={}", problem.num_levels())));
            }
            let poly = problem.polytope();
            let vertices = enumerate_vertices(&poly)?;
            let oracle = EfficiencyOracle::new(&poly, &vertices);
            let eff: Vec<RVector> =
                efficient_extreme_points(&oracle, &problem.level_objectives(level - 1))?.into_iter().map(|v| v.coords).collect();
            emit(out, cli.json, &eff, || render_points(&format!("Efficient extreme points, level {level}"), &eff))
        }
        Command::Compromises { file } => {
            let (problem, _) = io::read_problem::<Rational>(file)?;
            let report = Phase1Report::from(&problem.geometry()?);
            emit(out, cli.json, &report, || {
                let mut text = io::render_phase1(&report);
                if report.maximal_faces.is_empty() {
                    text += "(none)\n";
                }
                text
            })
        }
        Command::Solve { file, sorting_set, slacks, init, strict_sp, big_m, report } => {
            let (problem, mut config) = io::read_problem::<Rational>(file)?;
            if let Some(i) = sorting_set {
                if *i == 0 {
                    return Err(Failure::Usage("--sorting-set is 1-based".into()));
                }
                config.sorting_choice = Some(SortingSpec::Index(*i));
            }
            if let Some(path) = slacks {
                config.slacks = read_json::<Vec<DmSlacks<Rational>>>(path)?;
            }
            if let Some(path) = init {
                config.initial_points = read_json::<Vec<Option<RVector>>>(path)?;
            }
            if *strict_sp {
                config.strict_sp = Some(true);
            }
            if let Some(m) = big_m {
                config.big_m = Some(m.clone());
            }
            let batch = config.to_batch()?;
            let problem = Arc::new(problem);

            let t0 = Instant::now();
            let geometry = Arc::new(problem.geometry().map_err(|e| e.in_step("phase 1 (compromise set)"))?);
            let phase1_us = t0.elapsed().as_micros() as u64;
            let t1 = Instant::now();
            let run = run_batch_with(problem.clone(), geometry, &batch)?;
            let timings = Timings { phase1_us, phase2_us: t1.elapsed().as_micros() as u64 };

            let doc = RunReport::from_run(&problem, &run, timings);
            if let Some(path) = report {
                std::fs::write(path, io::to_json(&doc) + "\n")
                    .map_err(|e| Error::Parse(format!("writing report {}: {e}", path.display())))?;
            }
            emit(out, cli.json, &doc, || render_report(&doc))
        }
        Command::Serve { port, host, idle_timeout } => {
            let idle = (*idle_timeout > 0).then(|| Duration::from_secs(*idle_timeout));
            let store = Arc::new(crate::api::SessionStore::new(idle));
            let addr = SocketAddr::new(*host, *port);
            let serve_error = |e: std::io::Error| Failure::Domain(Error::InvalidParameter(format!("cannot serve on {addr}: {e}")));
            let runtime = tokio::runtime::Runtime::new().map_err(serve_error)?;
            runtime.block_on(crate::server::serve(addr, store)).map_err(serve_error)
        }
    }
}

