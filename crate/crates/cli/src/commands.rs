use std::fmt;
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::Path;

use kmax_core::embedding::embed_sweep;
use kmax_core::family::{builtin, verify_conditions, FamilyJson};
use kmax_core::io::{load_bivariate, write_csv, write_json};
use kmax_core::order_stats::{check_bounds, BoundRow};
use kmax_core::orlicz::{conjugate_with, mstar_from_rv, luxemburg_norm, ConjugateOptions, OrliczFunction, OrliczJson};
use kmax_core::rv::{ratio_sweep, Distribution};
use kmax_core::{ConditionReport, Error as CoreError, ExpectationMode, MapFamily};
use serde::Serialize;

use crate::{Cli, Command, FamilySource, Format, FunctionSource, Global, OrliczCommand, SweepCommand};

const DEFAULT_MC_TRIALS: u64 = 100_000;
const DEFAULT_SWEEP_TRIALS: u64 = 20_000;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(CoreError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(CoreError::BoundViolation(_) | CoreError::ReductionViolation(_)) => 1,
            _ => 2,
        }
    }

    pub fn is_broken_pipe(&self) -> bool {
        matches!(self, CliError::Core(CoreError::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => f.write_str(msg),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Core(e.into())
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Runs one subcommand; `Ok(false)` means a check failed.
pub fn run(cli: &Cli) -> Result<bool> {
    let g = &cli.global;
    match &cli.command {
        Command::VerifyFamily { family, cg } => verify_family(g, family, *cg),
        Command::EmitFamily { builtin: spec } => {
            let json = builtin(spec)?.to_json()?;
            emit_json(g, &json)?;
            Ok(true)
        }
        Command::CheckBounds { matrix, weights, family, ell, cg } => {
            bounds(g, matrix, weights.as_deref(), family, ell, *cg)
        }
        Command::Orlicz(cmd) => orlicz(g, cmd),
        Command::Sweep(cmd) => sweep(g, cmd),
    }
}

fn load_family(src: &FamilySource) -> Result<MapFamily> {
    match (&src.builtin, &src.file) {
        (Some(spec), _) => Ok(builtin(spec)?),
        (None, Some(path)) => {
            let json: FamilyJson = serde_json::from_reader(File::open(path)?).map_err(CoreError::from)?;
            Ok(MapFamily::from_json(json)?)
        }
        (None, None) => Err(CliError::Usage("give --builtin or --family".into())),
    }
}

#[derive(Serialize)]
struct ConditionRow {
    n: usize,
    atoms: usize,
    family_size: u64,
    marginal_ok: bool,
    marginal_deviation: f64,
    best_cg: f64,
    best_cg_exact: Option<String>,
    cardinality_ok: Option<bool>,
    exact: bool,
    required_cg: f64,
    pass: bool,
}

fn verify_family(g: &Global, src: &FamilySource, cg: Option<f64>) -> Result<bool> {
    let family = load_family(src)?;
    let report: ConditionReport = verify_conditions(&family)?;
    let required = cg.unwrap_or(report.best_cg);
    let pass = report.passes(required);
    eprintln!(
        "{}: n={} atoms={} |G|={} C_G={}",
        if pass { "pass" } else { "FAIL" },
        report.n,
        report.atoms,
        report.family_size,
        report.best_cg_exact.clone().unwrap_or_else(|| report.best_cg.to_string()),
    );
    match g.format.unwrap_or(Format::Json) {
        Format::Json => emit_json(g, &report)?,
        Format::Csv => emit_csv(
            g,
            &[ConditionRow {
                n: report.n,
                atoms: report.atoms,
                family_size: report.family_size,
                marginal_ok: report.marginal_ok,
                marginal_deviation: report.marginal_deviation,
                best_cg: report.best_cg,
                best_cg_exact: report.best_cg_exact.clone(),
                cardinality_ok: report.cardinality_ok,
                exact: report.exact,
                required_cg: required,
                pass,
            }],
        )?,
    }
    Ok(pass)
}

fn bounds(
    g: &Global,
    matrix: &Path,
    weights: Option<&Path>,
    src: &FamilySource,
    ells: &[usize],
    cg: Option<f64>,
) -> Result<bool> {
    if ells.contains(&0) {
        return Err(CliError::Usage("ell must be at least 1".into()));
    }
    let a = load_bivariate(matrix, weights)?;
    let family = load_family(src)?;
    let cg = match cg {
        Some(cg) => cg,
        None if family.is_explicit() => verify_conditions(&family)?.best_cg,
        None => return Err(CliError::Usage("family is not enumerated; pass --cg".into())),
    };
    let mode = if family.is_explicit() {
        ExpectationMode::Exact
    } else {
        ExpectationMode::MonteCarlo {
            trials: g.trials.unwrap_or(DEFAULT_MC_TRIALS),
            seed: g.seed,
        }
    };
    let mut rows: Vec<BoundRow> = Vec::with_capacity(ells.len());
    let mut all = true;
    for &ell in ells {
        let report = match check_bounds(&a, &family, ell, cg, mode) {
            Ok(r) => r,
            Err(CoreError::BoundViolation(r)) => *r,
            Err(e) => return Err(e.into()),
        };
        eprintln!("{report}");
        all &= report.passed();
        rows.push(report.row());
    }
    match g.format.unwrap_or(Format::Csv) {
        Format::Csv => emit_csv(g, &rows)?,
        Format::Json => emit_json(g, &rows)?,
    }
    Ok(all)
}

/// `power:p[:coef]` or `hinge:theta`.
fn parse_function(spec: &str) -> Result<OrliczFunction> {
    let bad = || CliError::Usage(format!("bad function `{spec}`; expected power:p[:coef] or hinge:theta"));
    let parts: Vec<&str> = spec.split(':').collect();
    let nums = parts[1..]
        .iter()
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(match (parts[0], nums.as_slice()) {
        ("power", [p]) => OrliczFunction::power(*p, 1.0)?,
        ("power", [p, coef]) => OrliczFunction::power(*p, *coef)?,
        ("hinge", [theta]) => OrliczFunction::hinge(*theta)?,
        _ => return Err(bad()),
    })
}

fn load_function(src: &FunctionSource) -> Result<OrliczFunction> {
    match (&src.spec, &src.file) {
        (Some(spec), _) => parse_function(spec),
        (None, Some(path)) => {
            let json: OrliczJson = serde_json::from_reader(File::open(path)?).map_err(CoreError::from)?;
            Ok(OrliczFunction::from_json(&json)?)
        }
        (None, None) => Err(CliError::Usage("give --fn or --function".into())),
    }
}

fn conjugate_options(g: &Global) -> Result<ConjugateOptions> {
    let mut opts = ConjugateOptions::default();
    if let Some(tol) = g.tol {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(CliError::Usage(format!("--tol must be positive, got {tol}")));
        }
        opts.tol = tol;
    }
    Ok(opts)
}

#[derive(Serialize)]
struct NormRow {
    norm: f64,
}

#[derive(Serialize)]
struct GridRow {
    s: f64,
    value: f64,
}

fn emit_function(g: &Global, m: &OrliczFunction) -> Result<()> {
    let json = m.to_json();
    match g.format.unwrap_or(Format::Json) {
        Format::Json => emit_json(g, &json),
        Format::Csv => {
            let grid = json
                .grid
                .ok_or_else(|| CliError::Usage(format!("a {} function has no grid to write as CSV", json.kind)))?;
            let rows: Vec<GridRow> = grid.iter().map(|&[s, value]| GridRow { s, value }).collect();
            emit_csv(g, &rows)
        }
    }
}

fn orlicz(g: &Global, cmd: &OrliczCommand) -> Result<bool> {
    match cmd {
        OrliczCommand::Norm { function, x } => {
            let m = load_function(function)?;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(CliError::Usage("vector entries must be finite".into()));
            }
            let row = NormRow { norm: luxemburg_norm(&m, x) };
            match g.format.unwrap_or(Format::Json) {
                Format::Json => emit_json(g, &row)?,
                Format::Csv => emit_csv(g, &[row])?,
            }
        }
        OrliczCommand::Conjugate { function } => {
            let m = load_function(function)?;
            emit_function(g, &conjugate_with(&m, &conjugate_options(g)?))?;
        }
        OrliczCommand::FromRv { dist, ell, star } => {
            if *ell == 0 {
                return Err(CliError::Usage("ell must be at least 1".into()));
            }
            let dist = Distribution::preset(dist)?;
            let mstar = mstar_from_rv(dist.quantile(), *ell)?;
            let m = if *star { mstar } else { conjugate_with(&mstar, &conjugate_options(g)?) };
            emit_function(g, &m)?;
        }
    }
    Ok(true)
}

/// Drops repeated values, keeping first occurrences, and warns about them.
fn dedup(flag: &str, values: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(values.len());
    for &v in values {
        if out.contains(&v) {
            eprintln!("warning: duplicate --{flag} value {v} ignored");
        } else {
            out.push(v);
        }
    }
    out
}

fn sweep(g: &Global, cmd: &SweepCommand) -> Result<bool> {
    match cmd {
        SweepCommand::Ratio { dist, n, ell, x_count } => {
            if n.contains(&0) || ell.contains(&0) || *x_count == 0 {
                return Err(CliError::Usage("--n, --ell and --x-count must be positive".into()));
            }
            let dists = dist.iter().map(|d| Distribution::preset(d)).collect::<kmax_core::Result<Vec<_>>>()?;
            let rows = ratio_sweep(
                &dists,
                &dedup("n", n),
                &dedup("ell", ell),
                *x_count,
                g.trials.unwrap_or(DEFAULT_SWEEP_TRIALS),
                g.seed,
            )?;
            match g.format.unwrap_or(Format::Csv) {
                Format::Csv => emit_csv(g, &rows)?,
                Format::Json => emit_json(g, &rows)?,
            }
        }
        SweepCommand::Embed { n, samples, weights, delta, probes } => {
            if n.contains(&0) || *samples == 0 {
                return Err(CliError::Usage("--n and --samples must be positive".into()));
            }
            let rows = embed_sweep(&dedup("n", n), weights, *delta, *probes, *samples, g.seed)?;
            match g.format.unwrap_or(Format::Csv) {
                Format::Csv => emit_csv(g, &rows)?,
                Format::Json => emit_json(g, &rows)?,
            }
        }
    }
    Ok(true)
}

/// Serialised in memory first so that write failures surface as plain I/O errors.
fn emit(g: &Global, bytes: Vec<u8>) -> Result<()> {
    match &g.out {
        Some(path) => fs::write(path, bytes)?,
        None => io::stdout().lock().write_all(&bytes)?,
    }
    Ok(())
}

fn emit_json<T: Serialize + ?Sized>(g: &Global, value: &T) -> Result<()> {
    let mut buf = Vec::new();
    write_json(&mut buf, value)?;
    emit(g, buf)
}

fn emit_csv<T: Serialize>(g: &Global, rows: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    emit(g, buf)
}
