//! `kmax`: certification front end.
//!
//! Exit status is 0 when every check passes, 1 when a check fails and 2 on
//! malformed input or usage.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "kmax", version, about = "Order-statistic bounds, map families, Orlicz norms and embeddings")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Root seed for every random stream.
    #[arg(long, global = true, default_value_t = 0xC0FFEE, value_parser = parse_u64)]
    pub seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Monte Carlo trials.
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Tabulation tolerance for numerically conjugated Orlicz functions.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check the marginal and pair conditions of a map family.
    VerifyFamily {
        #[command(flatten)]
        family: FamilySource,
        /// Required pair constant; defaults to the measured one.
        #[arg(long)]
        cg: Option<f64>,
    },
    /// Write a built-in family as JSON.
    EmitFamily {
        #[arg(long)]
        builtin: String,
    },
    /// Certify both order-statistic bounds for a matrix.
    CheckBounds {
        /// Matrix CSV: one row per index, one column per atom.
        matrix: PathBuf,
        /// JSON array of atom weights; uniform when absent.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[command(flatten)]
        family: FamilySource,
        #[arg(long, value_delimiter = ',', required = true)]
        ell: Vec<usize>,
        /// Pair constant; defaults to the one measured on the family.
        #[arg(long)]
        cg: Option<f64>,
    },
    /// Orlicz function utilities.
    #[command(subcommand)]
    Orlicz(OrliczCommand),
    /// Parameter sweeps written in long format.
    #[command(subcommand)]
    Sweep(SweepCommand),
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct FamilySource {
    /// `affine:q`, `sym:n` or `product:NxM`.
    #[arg(long)]
    pub builtin: Option<String>,
    /// Family JSON file.
    #[arg(long = "family")]
    pub file: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum OrliczCommand {
    /// Luxemburg norm of a vector.
    Norm {
        #[command(flatten)]
        function: FunctionSource,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        x: Vec<f64>,
    },
    /// Conjugate function as JSON.
    Conjugate {
        #[command(flatten)]
        function: FunctionSource,
    },
    /// The function whose norm matches the expected top-`ell` sum of a law.
    FromRv {
        #[arg(long)]
        dist: String,
        #[arg(long)]
        ell: usize,
        /// Emit the conjugate side instead.
        #[arg(long)]
        star: bool,
    },
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct FunctionSource {
    /// `power:p`, `power:p:coef` or `hinge:theta`.
    #[arg(long = "fn")]
    pub spec: Option<String>,
    /// Orlicz function JSON file.
    #[arg(long = "function")]
    pub file: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum SweepCommand {
    /// Expected top-`ell` sums against the matching Orlicz norm.
    Ratio {
        #[arg(long, value_delimiter = ',', default_value = "constant,two-point,uniform,exponential")]
        dist: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        ell: Vec<usize>,
        /// Unit vectors per `(dist, n)` cell.
        #[arg(long, default_value_t = 1)]
        x_count: usize,
    },
    /// Distortion of the sign-vector embedding.
    Embed {
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// `ones` or `power:p`.
        #[arg(long, default_value = "ones")]
        weights: String,
        #[arg(long, default_value_t = kmax_core::embedding::DEFAULT_DELTA)]
        delta: f64,
        /// Sphere points used while selecting sign vectors.
        #[arg(long, default_value_t = 64)]
        probes: usize,
    },
}

fn parse_u64(s: &str) -> Result<u64, String> {
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| format!("`{s}`: {e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.global.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.global.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if e.is_broken_pipe() => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
