mod commands;
mod output;
mod reproduce;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use riskdiff::{Method, SearchConfig, SizeConfig};
use serde_json::{json, Value};

use output::Format;

/// Exact and asymptotic inference on a risk difference in noninferiority
/// trials.
#[derive(Debug, Parser)]
#[command(name = "riskdiff", version)]
pub struct Cli {
    /// Worker threads for the parallel grid evaluations (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Output file (a directory for `reproduce`); standard output otherwise.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Number of P_T grid points in nuisance maximizations.
    #[arg(long = "grid-pt", global = true)]
    grid_pt: Option<usize>,

    /// Step of the delta grid the command scans (CZ scan, maximal-size grid,
    /// or power-curve grid).
    #[arg(long = "grid-delta", global = true)]
    grid_delta: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Chan's exact, Chan & Zhang, asymptotic score and Wald p-values.
    Pvalue(PvalueArgs),
    /// Confidence intervals by the EC, CZ, MN and Wald methods.
    Ci(CiArgs),
    /// Operating characteristics.
    Opchar {
        #[command(subcommand)]
        which: Opchar,
    },
    /// Regenerate the published numeric artifacts into a directory.
    Reproduce(ReproduceArgs),
    /// Cross-check the production routines against brute-force oracles.
    Verify(VerifyArgs),
}

#[derive(Debug, Subcommand)]
enum Opchar {
    /// Maximal size of each method's critical region.
    Maxsize(MaxsizeArgs),
    /// Rejection probabilities along delta at a fixed P_T.
    Power(PowerArgs),
    /// Monte Carlo mean of the exact correction term.
    EcExpectation(EcExpectationArgs),
}

#[derive(Debug, Args)]
struct TableArgs {
    /// Treatment successes.
    #[arg(long)]
    xt: u32,
    /// Treatment arm size.
    #[arg(long)]
    nt: u32,
    /// Control successes.
    #[arg(long)]
    xc: u32,
    /// Control arm size.
    #[arg(long)]
    nc: u32,
}

#[derive(Debug, Args)]
struct DesignArgs {
    /// Treatment arm size.
    #[arg(long)]
    nt: u32,
    /// Control arm size.
    #[arg(long)]
    nc: u32,
}

#[derive(Debug, Args)]
struct PvalueArgs {
    #[command(flatten)]
    table: TableArgs,
    /// Noninferiority margin.
    #[arg(long)]
    delta0: f64,
}

#[derive(Debug, Args)]
struct CiArgs {
    #[command(flatten)]
    table: TableArgs,
    /// Two-sided level is 1 - alpha.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Margin anchoring the EC score and the consistency checks.
    #[arg(long, default_value_t = 0.0)]
    delta0: f64,
    /// Methods, comma separated.
    #[arg(long, value_delimiter = ',', default_values = ["ec", "cz", "mn", "wald"])]
    method: Vec<String>,
}

#[derive(Debug, Args)]
struct MaxsizeArgs {
    #[command(flatten)]
    design: DesignArgs,
    #[arg(long)]
    delta0: f64,
    /// The test rejects when p <= alpha / 2.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_delimiter = ',', default_values = ["ec", "cz", "mn", "wald"])]
    method: Vec<String>,
}

#[derive(Debug, Args)]
struct PowerArgs {
    #[command(flatten)]
    design: DesignArgs,
    /// Treatment success probability held fixed along the curve.
    #[arg(long)]
    pt: f64,
    #[arg(long)]
    delta0: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_delimiter = ',', default_values = ["ec", "cz", "mn", "wald"])]
    method: Vec<String>,
}

#[derive(Debug, Args)]
struct EcExpectationArgs {
    #[arg(long)]
    pt: f64,
    #[arg(long)]
    pc: f64,
    #[arg(long)]
    delta0: f64,
    /// Treatment arm size; with --nc, a single design instead of the
    /// doubling sequence N = 10, 20, ..., 640 with equal arms.
    #[arg(long, requires = "nc")]
    nt: Option<u32>,
    #[arg(long, requires = "nt")]
    nc: Option<u32>,
    #[arg(long, default_value_t = 10_000)]
    nsims: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    /// Replicates per cell of the correction-term grid.
    #[arg(long, default_value_t = 10_000)]
    nsims: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Random restricted-MLE cases.
    #[arg(long, default_value_t = 1000)]
    nsims: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Methods whose maximal sizes are checked on the example designs.
    #[arg(long, value_delimiter = ',', default_values = ["ec", "cz", "mn", "wald"])]
    method: Vec<String>,
}

/// How a run failed, mapped onto the exit status.
#[derive(Debug)]
pub enum Failure {
    /// Arguments outside the domain of the computation (exit 2).
    Usage(String),
    /// The computation or the output could not be completed (exit 1).
    Compute(String),
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Compute(format!("i/o error: {e}"))
    }
}

impl From<riskdiff::Error> for Failure {
    fn from(e: riskdiff::Error) -> Self {
        Failure::Compute(e.to_string())
    }
}

pub type Outcome = Result<(), Failure>;

/// Grid settings shared by the subcommands.
#[derive(Debug, Clone, Copy)]
pub struct Grids {
    pub search: SearchConfig,
    pub size: SizeConfig,
    pub power_step: f64,
}

impl Grids {
    fn from_cli(cli: &Cli) -> Result<Self, Failure> {
        let mut search = SearchConfig::default();
        let mut size = SizeConfig::default();
        let mut power_step = 0.01;
        if let Some(n) = cli.grid_pt {
            if n < 2 {
                return Err(Failure::Usage(format!("--grid-pt must be at least 2, got {n}")));
            }
            search.pt_points = n;
            size.pt_points = n;
        }
        if let Some(step) = cli.grid_delta {
            if !(step > 0.0 && step <= 0.5) {
                return Err(Failure::Usage(format!("--grid-delta must lie in (0, 0.5], got {step}")));
            }
            search.delta_step = step;
            size.delta_step = step;
            power_step = step;
        }
        Ok(Grids { search, size, power_step })
    }

    pub fn to_json(&self) -> Value {
        json!({ "search": self.search, "size": self.size, "power_step": self.power_step })
    }
}

pub fn parse_methods(names: &[String]) -> Result<Vec<Method>, Failure> {
    let mut out = Vec::new();
    for name in names {
        let m: Method = name.trim().parse().map_err(|e: riskdiff::Error| Failure::Usage(e.to_string()))?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(Failure::Usage("no method given".into()));
    }
    Ok(out)
}

fn run(cli: &Cli) -> Outcome {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Compute(format!("thread pool: {e}")))?;
    }
    let grids = Grids::from_cli(cli)?;
    let base = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "threads": cli.threads,
        "format": cli.format,
        "grids": grids.to_json(),
    });
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Pvalue(a) => commands::pvalue(a, &grids, base, cli.format, out),
        Command::Ci(a) => commands::ci(a, &grids, base, cli.format, out),
        Command::Opchar { which } => match which {
            Opchar::Maxsize(a) => commands::maxsize(a, &grids, base, cli.format, out),
            Opchar::Power(a) => commands::power(a, &grids, base, cli.format, out),
            Opchar::EcExpectation(a) => commands::ec_expectation(a, &grids, base, cli.format, out),
        },
        Command::Reproduce(a) => reproduce::run(a, &grids, base, out),
        Command::Verify(a) => verify::run(a, &grids, base, cli.format, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("riskdiff: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(msg)) => {
            eprintln!("riskdiff: {msg}");
            ExitCode::from(1)
        }
    }
}
