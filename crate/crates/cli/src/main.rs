//! `subeq` command-line front end.

mod checks;
mod commands;
mod input;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use subeq::Error;

/// Outcome of a command that ran to completion.
pub enum Verdict {
    Positive,
    Negative,
}

#[derive(Parser)]
#[command(name = "subeq", version, about = "Subequation oracles, Garding operators and a monotone Dirichlet solver")]
struct Cli {
    /// Seed for every randomized step; echoed in JSON output.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads for the data-parallel kernels (1 runs sequentially).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Classification tolerance.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Print the reference formulas behind the command and exit.
    #[arg(long, global = true)]
    paper_anchors: bool,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Query the registry of fibers and operators.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
    /// Classify a jet or matrix against a fiber.
    Membership(JetArgs),
    /// Classify a jet or matrix against the Dirichlet dual of a fiber.
    Dual(JetArgs),
    /// Canonical operator value of a pure second-order fiber at a matrix.
    Canonical {
        #[arg(long)]
        key: String,
        #[arg(long)]
        matrix: String,
    },
    /// Garding eigenvalues of a hyperbolic polynomial at a matrix.
    Garding {
        #[arg(long)]
        op: String,
        #[arg(long)]
        matrix: String,
    },
    /// Signed distance from a jet to the fiber boundary.
    Distance {
        #[command(flatten)]
        jet: JetArgs,
        /// Number of sampled search directions.
        #[arg(long, default_value_t = 64)]
        directions: usize,
    },
    /// Strict pseudoconvexity of a level-set domain at boundary points (CSV).
    Pseudoconvex {
        /// Domain as JSON, inline or `@path`.
        #[arg(long)]
        domain: String,
        #[arg(long)]
        key: String,
        /// Seed points as a JSON array of points, inline or `@path`; each is
        /// projected onto the boundary.
        #[arg(long)]
        points: Option<String>,
        /// Random seed points drawn when `--points` is absent.
        #[arg(long, default_value_t = 8)]
        samples: usize,
        /// Largest `t` tried before answering no.
        #[arg(long, default_value_t = 1e6)]
        t_cap: f64,
    },
    /// Solve a Dirichlet problem from a JSON config.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run a named property suite with fixed seeds.
    Check {
        suite: Suite,
        /// Samples per oracle or operator.
        #[arg(long)]
        samples: Option<usize>,
    },
}

#[derive(Subcommand)]
enum CatalogAction {
    List {
        /// Emit JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    Describe { key: String },
}

#[derive(clap::Args)]
struct JetArgs {
    #[arg(long)]
    key: String,
    /// Symmetric matrix as JSON rows or `diag(a,b,...)`; read as the jet (0, 0, A).
    #[arg(long, conflicts_with = "jet", required_unless_present = "jet")]
    matrix: Option<String>,
    /// Jet as JSON `{"r":..,"p":[..],"A":[[..]]}`.
    #[arg(long)]
    jet: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Suite {
    DualityInvolution,
    GardingIdentities,
    Monotonicity,
    Comparison,
    Utp,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse(_) | Error::UnknownKey(_) => 2,
        Error::NotConverged { .. } | Error::UnstableStep { .. } => 4,
        Error::HypothesisViolation(_) => 5,
        _ => 3,
    }
}

fn run(cli: Cli) -> subeq::Result<Verdict> {
    let exec = input::exec(cli.threads)?;
    let ctx = commands::Ctx { seed: cli.seed, tol: cli.tol, exec };
    if cli.paper_anchors {
        commands::anchors(command_name(&cli.cmd));
        return Ok(Verdict::Positive);
    }
    match cli.cmd {
        Command::Catalog { action: CatalogAction::List { json } } => commands::catalog_list(json),
        Command::Catalog { action: CatalogAction::Describe { key } } => commands::catalog_describe(&key),
        Command::Membership(a) => commands::membership(&ctx, &a.key, a.matrix.as_deref(), a.jet.as_deref(), false),
        Command::Dual(a) => commands::membership(&ctx, &a.key, a.matrix.as_deref(), a.jet.as_deref(), true),
        Command::Canonical { key, matrix } => commands::canonical(&ctx, &key, &matrix),
        Command::Garding { op, matrix } => commands::garding(&ctx, &op, &matrix),
        Command::Distance { jet, directions } => {
            commands::distance(&ctx, &jet.key, jet.matrix.as_deref(), jet.jet.as_deref(), directions)
        }
        Command::Pseudoconvex { domain, key, points, samples, t_cap } => {
            commands::pseudoconvex(&ctx, &domain, &key, points.as_deref(), samples, t_cap)
        }
        Command::Solve { config, out_dir } => commands::solve(&ctx, &config, &out_dir),
        Command::Check { suite, samples } => checks::run(&ctx, suite, samples),
    }
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Catalog { .. } => "catalog",
        Command::Membership(_) => "membership",
        Command::Dual(_) => "dual",
        Command::Canonical { .. } => "canonical",
        Command::Garding { .. } => "garding",
        Command::Distance { .. } => "distance",
        Command::Pseudoconvex { .. } => "pseudoconvex",
        Command::Solve { .. } => "solve",
        Command::Check { .. } => "check",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Verdict::Positive) => ExitCode::SUCCESS,
        Ok(Verdict::Negative) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
