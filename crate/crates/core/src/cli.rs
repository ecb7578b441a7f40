//! Command-line front end: `estimate`, `simulate` and `oracle`.
//!
//! Input CSV layout (header required, any column order):
//! `delta,s,a,z,y,pi,w1..wp,m1..mq`. `delta` and `pi` may be omitted (all
//! rows selected, no survey weights). An empty `y` cell means the outcome is
//! unobserved, as it must be for target rows.
//!
//! Exit codes: 0 ok, 2 input error, 3 estimator error, 4 scenario abort.

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::data::{validate_dataset, Dataset, EffectSpec, Observation};
use crate::error::{Error, Result};
use crate::estimate::{
    estimate_effects, survey_weights, Estimate, EstimatorKind, EstimatorOptions,
};
use crate::nuisance::{Designs, MisspecSet};
use crate::sim::{oracle_for, parse_grid, run_grid, DgmParams, Population, ScenarioSpec};

#[derive(Debug, Parser)]
#[command(
    name = "transmed",
    version,
    about = "Transported stochastic direct and indirect effects"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for replications (speed only, never results).
    #[arg(long, global = true, env = "TM_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate effects from a CSV dataset.
    Estimate(EstimateArgs),
    /// Run a grid of simulation scenarios.
    Simulate(SimulateArgs),
    /// Print exact truths for the simulation mechanism.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        self == Switch::On
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightMode {
    /// Survey weights when every selected row has `pi`.
    Auto,
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DesignMode {
    /// Full-factorial when all covariates and mediators are binary and the
    /// largest design stays small, main effects otherwise.
    Auto,
    Main,
    Saturated,
}

/// Estimator switches shared by `estimate` and `simulate`. In `simulate`
/// they override the scenario file when given.
#[derive(Debug, Clone, Args)]
pub struct EstimatorArgs {
    #[arg(long, value_parser = parse_estimator)]
    pub estimator: Option<EstimatorKind>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long, value_enum)]
    pub weighted_fluct: Option<Switch>,
    #[arg(long, value_enum)]
    pub g_empirical: Option<Switch>,
}

fn parse_estimator(s: &str) -> std::result::Result<EstimatorKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[arg(long, default_value_t = 1)]
    pub a_prime: u8,
    #[arg(long, default_value_t = 0)]
    pub a_star: u8,
    /// Outcome bounds; the observed range when omitted.
    #[arg(long, allow_hyphen_values = true)]
    pub y_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub y_max: Option<f64>,
    #[arg(long, value_enum, default_value_t = WeightMode::Auto)]
    pub weights: WeightMode,
    #[arg(long, value_enum, default_value_t = DesignMode::Auto)]
    pub designs: DesignMode,
    /// Components to fit intercept-only, e.g. `q` or `c,e,r`.
    #[arg(long, default_value = "none")]
    pub misspecify: String,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// TOML scenario file.
    #[arg(long)]
    pub scenarios: PathBuf,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    /// Coefficient override `key=value`, e.g. `y.m=0`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long, default_value_t = 1)]
    pub a_prime: u8,
    #[arg(long, default_value_t = 0)]
    pub a_star: u8,
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::ScenarioAborted { .. } => 4,
        Error::AllZeroWeights
        | Error::SingularDesign
        | Error::FoldTooSmall { .. }
        | Error::Component { .. } => 3,
        _ => 2,
    }
}

/// Parses arguments, runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Estimate(a) => cmd_estimate(cli, a),
        Command::Simulate(a) => cmd_simulate(cli, a),
        Command::Oracle(a) => cmd_oracle(cli, a),
    }
}

fn header_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

fn numbered_columns(headers: &csv::StringRecord, prefix: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    while let Some(i) = header_index(headers, &format!("{prefix}{}", out.len() + 1)) {
        out.push(i);
    }
    if out.is_empty() {
        return Err(Error::MissingColumn(format!("{prefix}1")));
    }
    Ok(out)
}

fn parse_number(row: usize, field: &str, cell: &str) -> Result<f64> {
    cell.trim().parse::<f64>().map_err(|_| Error::InvalidValue {
        row,
        msg: format!("`{field}` is not a number: `{cell}`"),
    })
}

fn parse_code(row: usize, field: &'static str, cell: &str) -> Result<u8> {
    let v = parse_number(row, field, cell)?;
    if v == 0.0 || v == 1.0 {
        Ok(v as u8)
    } else {
        Err(Error::NonBinaryCode {
            row,
            field,
            value: v,
        })
    }
}

/// Reads the documented CSV layout. Without `bounds` the outcome range is
/// the observed one. The result is validated.
pub fn read_dataset<R: Read>(reader: R, bounds: Option<(f64, f64)>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| header_index(&headers, name);
    let need = |name: &str| col(name).ok_or_else(|| Error::MissingColumn(name.to_string()));
    let (s_i, a_i, z_i, y_i) = (need("s")?, need("a")?, need("z")?, need("y")?);
    let (delta_i, pi_i) = (col("delta"), col("pi"));
    let (w_i, m_i) = (
        numbered_columns(&headers, "w")?,
        numbered_columns(&headers, "m")?,
    );

    let mut rows = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let get = |i: usize| rec.get(i).unwrap_or("");
        let opt = |i: Option<usize>, field: &str| -> Result<Option<f64>> {
            match i.map(get) {
                None | Some("") => Ok(None),
                Some(c) => parse_number(row, field, c).map(Some),
            }
        };
        rows.push(Observation {
            delta: match delta_i {
                Some(i) => parse_code(row, "delta", get(i))?,
                None => 1,
            },
            s: parse_code(row, "s", get(s_i))?,
            a: parse_code(row, "a", get(a_i))?,
            z: parse_code(row, "z", get(z_i))?,
            w: w_i
                .iter()
                .map(|&i| parse_number(row, "w", get(i)))
                .collect::<Result<_>>()?,
            m: m_i
                .iter()
                .map(|&i| parse_number(row, "m", get(i)))
                .collect::<Result<_>>()?,
            y: opt(Some(y_i), "y")?,
            pi: opt(pi_i, "pi")?,
        });
    }
    let bounds = match bounds {
        Some(b) => b,
        None => rows
            .iter()
            .filter_map(|r| r.y)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| {
                (lo.min(y), hi.max(y))
            }),
    };
    validate_dataset(Dataset::new(rows, bounds))
}

/// Writes `data` in the layout [`read_dataset`] reads.
pub fn write_dataset<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = ["delta", "s", "a", "z", "y", "pi"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=data.p()).map(|i| format!("w{i}")));
    header.extend((1..=data.q()).map(|i| format!("m{i}")));
    wtr.write_record(&header)?;
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
    for r in &data.rows {
        let mut rec = vec![
            r.delta.to_string(),
            r.s.to_string(),
            r.a.to_string(),
            r.z.to_string(),
            opt(r.y),
            opt(r.pi),
        ];
        rec.extend(r.w.iter().chain(&r.m).map(|v| v.to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Serialises flat records as CSV or a JSON array.
pub fn render<T: Serialize>(records: &[T], format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Csv => {
            let mut wtr = csv::Writer::from_writer(Vec::new());
            for r in records {
                wtr.serialize(r)?;
            }
            wtr.into_inner().map_err(|e| Error::Io(e.into_error()))
        }
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(records)
                .map_err(|e| Error::Io(std::io::Error::other(e)))?;
            out.push(b'\n');
            Ok(out)
        }
    }
}

fn emit(bytes: &[u8], output: Option<&Path>) -> Result<()> {
    match output {
        Some(p) => std::fs::write(p, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

/// One line of the effect table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectRow {
    pub quantity: &'static str,
    pub estimate: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl EffectRow {
    fn new(quantity: &'static str, e: &Estimate) -> Self {
        EffectRow {
            quantity,
            estimate: e.theta,
            se: e.se,
            ci_lo: e.ci.0,
            ci_hi: e.ci.1,
        }
    }
}

fn all_binary(data: &Dataset) -> bool {
    data.rows
        .iter()
        .all(|r| r.w.iter().chain(&r.m).all(|&x| x == 0.0 || x == 1.0))
}

pub fn choose_designs(data: &Dataset, mode: DesignMode) -> Designs {
    let (p, q) = (data.p(), data.q());
    match mode {
        DesignMode::Main => Designs::main_effects(p, q),
        DesignMode::Saturated => Designs::saturated(p, q),
        // The widest design (`c`) has 2^(2 + p + q) columns.
        DesignMode::Auto if all_binary(data) && p + q <= 6 => Designs::saturated(p, q),
        DesignMode::Auto => Designs::main_effects(p, q),
    }
}

pub fn cmd_estimate(cli: &Cli, args: &EstimateArgs) -> Result<()> {
    let bounds = match (args.y_min, args.y_max) {
        (Some(lo), Some(hi)) => Some((lo, hi)),
        (None, None) => None,
        _ => {
            return Err(Error::Config(
                "give both --y-min and --y-max or neither".into(),
            ))
        }
    };
    let file = std::fs::File::open(&args.input)?;
    let data = read_dataset(file, bounds)?;
    let selected_have_pi = data.rows.iter().all(|r| r.delta == 0 || r.pi.is_some());
    let gamma = match args.weights {
        WeightMode::On => survey_weights(&data)?,
        WeightMode::Auto if selected_have_pi => survey_weights(&data)?,
        _ => vec![1.0; data.len()],
    };
    let e = &args.estimator;
    let opts = EstimatorOptions {
        estimator: e.estimator.unwrap_or(EstimatorKind::OneStep),
        tmle_weighted_fluctuation: e.weighted_fluct.is_none_or(Switch::on),
        folds: e.folds.unwrap_or(1),
        seed: cli.seed.unwrap_or(0),
        g_empirical: e.g_empirical.is_some_and(Switch::on),
        misspecified: args.misspecify.parse::<MisspecSet>()?,
        ..EstimatorOptions::default()
    };
    let designs = choose_designs(&data, args.designs);
    let spec = EffectSpec::new(args.a_prime, args.a_star)?;
    let est = estimate_effects(&data, &designs, spec, &opts, &gamma)?;
    let rows = [
        EffectRow::new("theta_ps", &est.theta_ps),
        EffectRow::new("theta_pp", &est.theta_pp),
        EffectRow::new("theta_ss", &est.theta_ss),
        EffectRow::new("sde", &est.sde),
        EffectRow::new("sie", &est.sie),
    ];
    emit(&render(&rows, cli.format)?, cli.output.as_deref())
}

fn apply_overrides(specs: &mut [ScenarioSpec], e: &EstimatorArgs) -> Result<()> {
    for s in specs.iter_mut() {
        if let Some(k) = e.estimator {
            s.estimators = vec![k];
        }
        if let Some(f) = e.folds {
            s.folds = f;
        }
        if let Some(w) = e.weighted_fluct {
            s.tmle_weighted_fluctuation = w.on();
        }
        if let Some(g) = e.g_empirical {
            s.g_empirical = g.on();
        }
        s.validate()?;
    }
    Ok(())
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(e.to_string()))
}

pub fn cmd_simulate(cli: &Cli, args: &SimulateArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.scenarios)?;
    let mut specs = parse_grid(&text, cli.seed)?;
    apply_overrides(&mut specs, &args.estimator)?;
    let pool = thread_pool(cli.threads)?;
    let total = specs.len();
    let mut done = 0;
    let rows = pool.install(|| {
        run_grid(&specs, |s, _| {
            done += 1;
            eprintln!("[{done}/{total}] {} (n={}, reps={})", s.label, s.n, s.reps);
        })
    })?;
    emit(&render(&rows, cli.format)?, cli.output.as_deref())
}

pub fn cmd_oracle(cli: &Cli, args: &OracleArgs) -> Result<()> {
    let params = DgmParams::default().with_overrides(&args.set)?;
    let spec = EffectSpec::new(args.a_prime, args.a_star)?;
    let rows: Vec<_> = [Population::Full, Population::Sampled]
        .into_iter()
        .map(|p| oracle_for(&params, p, spec))
        .collect();
    emit(&render(&rows, cli.format)?, cli.output.as_deref())
}
