//! Command-line front end.
//!
//! Every command renders a flat, ordered report so that output is byte-stable
//! for fixed inputs. Options may also come from a TOML file given with
//! `--config`; flags on the command line take precedence.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::analytics::{beta_c_with, Strategy, Tolerances, DEFAULT_QUADRATURE_TOL, DEFAULT_SERIES_TOL};
use crate::bounds::{bounds_report, classify_against_mean_cycle, BoundsReport, CycleComparison};
use crate::distributions::{DistSpec, QueueParameters};
use crate::error::Error;
use crate::simulator::{estimate_beta_c, expected_arrivals_per_cycle, SimulationEstimate, HIGH_LOAD_RHO, MIN_CYCLES};
use crate::tables::{self, sig8, Status};

/// Exit status for bad arguments or configuration.
pub const EXIT_USAGE: i32 = 2;
/// Exit status when a table cell disagrees with its printed value and the
/// errata registry does not explain it.
pub const EXIT_MISMATCH: i32 = 3;
/// Exit status for numerical failures.
pub const EXIT_FAILURE: i32 = 1;

/// Cycles simulated per replication when `--cycles` is not given and ρ < 5.
pub const DEFAULT_CYCLES: u64 = 1_000_000;

#[derive(Debug, Parser)]
#[command(name = "busycycle", version, about = "Busy-cycle age/excess mean of the M/G/inf queue")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// E[Z], E[B], beta, beta_c and E[Z^2] for one queue.
    Metrics(QueueArgs),
    /// Every applicable bound on beta_c.
    Bounds(QueueArgs),
    /// Monte Carlo estimate of beta_c.
    Simulate(QueueArgs),
    /// Analytic value, simulation, bounds and verdicts side by side.
    Compare(QueueArgs),
    /// Recompute a published table and annotate each cell.
    Table(TableArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Plain,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyArg {
    Auto,
    ClosedForm,
    Quadrature,
}

#[derive(Debug, Args)]
pub struct QueueArgs {
    /// Arrival rate.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Service law as JSON, e.g. '{"type":"exponential","mean":0.5}'.
    #[arg(long)]
    pub dist: Option<String>,
    /// Traffic intensity; only 0 is accepted and means no service at all.
    #[arg(long, conflicts_with = "dist")]
    pub rho: Option<f64>,
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyArg>,
    #[arg(long)]
    pub series_tol: Option<f64>,
    #[arg(long)]
    pub quad_tol: Option<f64>,
    /// Cycles per replication.
    #[arg(long)]
    pub cycles: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent replications.
    #[arg(long)]
    pub reps: Option<u32>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// TOML file with the same keys as the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub which: u8,
    #[arg(long, value_enum, default_value = "plain")]
    pub format: Format,
}

/// Keys accepted in a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub lambda: Option<f64>,
    pub dist: Option<DistInput>,
    pub rho: Option<f64>,
    pub strategy: Option<StrategyArg>,
    pub series_tol: Option<f64>,
    pub quad_tol: Option<f64>,
    pub cycles: Option<u64>,
    pub seed: Option<u64>,
    pub reps: Option<u32>,
    pub format: Option<Format>,
}

/// A distribution in a config file, either as a JSON string or a table.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum DistInput {
    Json(String),
    Spec(DistSpec),
}

/// Fully resolved options for the queue commands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: QueueParameters,
    pub strategy: Strategy,
    pub tolerances: Tolerances,
    pub cycles: u64,
    pub cycles_explicit: bool,
    pub seed: u64,
    pub reps: u32,
    pub format: Format,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl QueueArgs {
    pub fn resolve(&self) -> Result<RunConfig, Error> {
        let file = match &self.config {
            Some(path) => {
                let text =
                    std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
                toml::from_str::<FileConfig>(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
            }
            None => FileConfig::default(),
        };

        let lambda = self.lambda.or(file.lambda).ok_or_else(|| usage("--lambda is required"))?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(usage(format!("--lambda must be positive, got {lambda}")));
        }
        // a flag on the command line overrides both dist and rho from the file
        let (dist, rho) = if self.dist.is_some() || self.rho.is_some() {
            (self.dist.as_ref().map(|s| DistSpec::parse(s)).transpose()?, self.rho)
        } else {
            let dist = match file.dist {
                Some(DistInput::Json(s)) => Some(DistSpec::parse(&s)?),
                Some(DistInput::Spec(d)) => Some(d),
                None => None,
            };
            (dist, file.rho)
        };
        let params = match (dist, rho) {
            (Some(_), Some(_)) => return Err(usage("give either a distribution or --rho 0, not both")),
            (Some(d), None) => d.queue(lambda)?,
            (None, Some(0.0)) => QueueParameters::idle_only(lambda)?,
            (None, Some(r)) => return Err(usage(format!("--rho only accepts 0 (no service), got {r}"))),
            (None, None) => return Err(usage("--dist is required (or --rho 0 for a queue without service)")),
        };

        let strategy = match self.strategy.or(file.strategy).unwrap_or(StrategyArg::Auto) {
            StrategyArg::Auto => Strategy::Auto,
            StrategyArg::ClosedForm => Strategy::ClosedForm,
            StrategyArg::Quadrature => Strategy::Quadrature,
        };
        let tolerances = Tolerances {
            series: self.series_tol.or(file.series_tol).unwrap_or(DEFAULT_SERIES_TOL),
            quadrature: self.quad_tol.or(file.quad_tol).unwrap_or(DEFAULT_QUADRATURE_TOL),
        };
        for (name, t) in [("series-tol", tolerances.series), ("quad-tol", tolerances.quadrature)] {
            if !(t > 0.0 && t < 1.0) {
                return Err(usage(format!("--{name} must lie in (0, 1), got {t}")));
            }
        }
        let explicit = self.cycles.or(file.cycles);
        let cycles = explicit.unwrap_or_else(|| default_cycles(params.traffic_intensity()));
        Ok(RunConfig {
            params,
            strategy,
            tolerances,
            cycles,
            cycles_explicit: explicit.is_some(),
            seed: self.seed.or(file.seed).unwrap_or(1),
            reps: self.reps.or(file.reps).unwrap_or(1),
            format: self.format.or(file.format).unwrap_or(Format::Plain),
        })
    }
}

/// Default cycles per replication. Above ρ = 5 the count shrinks like
/// `e^{5−ρ}` so that the expected number of simulated arrivals stays flat.
pub fn default_cycles(rho: f64) -> u64 {
    if rho < HIGH_LOAD_RHO {
        DEFAULT_CYCLES
    } else {
        let scaled = DEFAULT_CYCLES as f64 * (HIGH_LOAD_RHO - rho).exp();
        (scaled as u64).max(MIN_CYCLES)
    }
}

/// Ordered key/value report.
#[derive(Debug, Default)]
pub struct Report {
    fields: Vec<(String, Value)>,
}

impl Report {
    fn put(&mut self, key: impl Into<String>, value: impl Into<Value>) {
        self.fields.push((key.into(), value.into()));
    }

    pub fn render(&self, format: Format) -> String {
        let mut out = String::new();
        match format {
            Format::Json => {
                out.push_str("{\n");
                for (i, (k, v)) in self.fields.iter().enumerate() {
                    let sep = if i + 1 < self.fields.len() { "," } else { "" };
                    let _ = writeln!(out, "  {}: {}{}", json!(k), v, sep);
                }
                out.push_str("}\n");
            }
            Format::Csv => {
                out.push_str("key,value\n");
                for (k, v) in &self.fields {
                    let _ = writeln!(out, "{},{}", k, plain_value(v));
                }
            }
            Format::Plain => {
                let width = self.fields.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
                for (k, v) in &self.fields {
                    let line = format!("{k:<width$}  {}", plain_value(v));
                    let _ = writeln!(out, "{}", line.trim_end());
                }
            }
        }
        out
    }
}

fn plain_value(v: &Value) -> String {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() => sig8(x),
            _ => n.to_string(),
        },
        Value::String(s) => s.clone(),
        Value::Null => "-".to_string(),
        other => other.to_string(),
    }
}

fn num(x: f64) -> Value {
    // NaN and infinities have no JSON form
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

fn put_queue(r: &mut Report, params: &QueueParameters) {
    r.put("lambda", num(params.arrival_rate()));
    r.put("distribution", params.service().name());
    r.put("alpha", num(params.service().mean()));
    r.put("rho", num(params.traffic_intensity()));
}

fn verdict_str(v: CycleComparison) -> &'static str {
    match v {
        CycleComparison::BelowEZ => "beta_c <= E[Z]",
        CycleComparison::AboveEZ => "beta_c >= E[Z]",
        CycleComparison::Indeterminate => "indeterminate",
    }
}

fn put_bounds(r: &mut Report, b: &BoundsReport) {
    for lb in &b.lower_bounds {
        r.put(format!("lower[{}]", lb.label), num(lb.value));
    }
    for ub in &b.upper_bounds {
        r.put(format!("upper[{}]", ub.label), num(ub.value));
    }
    r.put("tightest_lower", num(b.tightest.0));
    r.put("tightest_upper", num(b.tightest.1));
    r.put("gap_ratio", b.gap_ratio.map(num).unwrap_or(Value::Null));
    r.put("consistent", b.consistent);
}

fn put_verdict(r: &mut Report, params: &QueueParameters) {
    let v = match params.service().scv() {
        Ok(scv) if params.traffic_intensity() > 0.0 => {
            match classify_against_mean_cycle(params.traffic_intensity(), scv) {
                Ok(v) => verdict_str(v).into(),
                Err(_) => Value::Null,
            }
        }
        _ => Value::Null,
    };
    r.put("verdict_vs_mean_cycle", v);
}

fn put_simulation(r: &mut Report, s: &SimulationEstimate) {
    r.put("beta_c_hat", num(s.beta_c_hat));
    r.put("std_error", num(s.std_error));
    r.put("ci95_low", num(s.ci95.0));
    r.put("ci95_high", num(s.ci95.1));
    r.put("e_z_hat", num(s.e_z_hat));
    r.put("e_z2_hat", num(s.e_z2_hat));
    r.put("e_z2_std_error", num(s.e_z2_std_error));
    r.put("idle_mean", num(s.idle_mean));
    r.put("idle_std_error", num(s.idle_std_error));
    r.put("busy_mean", num(s.busy_mean));
    r.put("busy_std_error", num(s.busy_std_error));
    r.put("n_cycles", s.n_cycles);
    r.put("replications", s.replications);
    r.put("seed", s.seed);
}

fn simulate_checked(cfg: &RunConfig, err: &mut dyn Write) -> Result<SimulationEstimate, Error> {
    let rho = cfg.params.traffic_intensity();
    if rho >= HIGH_LOAD_RHO {
        let _ = writeln!(
            err,
            "warning: rho = {} is high; about {} arrivals per cycle{}",
            sig8(rho),
            sig8(expected_arrivals_per_cycle(&cfg.params)),
            if cfg.cycles_explicit { String::new() } else { format!(", default cycles reduced to {}", cfg.cycles) }
        );
    }
    estimate_beta_c(&cfg.params, cfg.cycles, cfg.seed, cfg.reps)
}

pub fn run_metrics(cfg: &RunConfig) -> Result<Report, Error> {
    let m = beta_c_with(&cfg.params, cfg.strategy, cfg.tolerances)?;
    let mut r = Report::default();
    put_queue(&mut r, &cfg.params);
    r.put("e_z", num(m.e_z));
    r.put("e_b", num(m.e_b));
    r.put("beta", num(m.beta));
    r.put("beta_c", num(m.beta_c));
    r.put("e_z2", num(m.z_second_moment));
    r.put("method", m.method.as_str());
    r.put("error_estimate", num(m.error_estimate));
    Ok(r)
}

pub fn run_bounds(cfg: &RunConfig) -> Result<Report, Error> {
    let m = beta_c_with(&cfg.params, cfg.strategy, cfg.tolerances)?;
    let mut r = Report::default();
    put_queue(&mut r, &cfg.params);
    r.put("beta_c", num(m.beta_c));
    r.put("e_z", num(m.e_z));
    if cfg.params.traffic_intensity() > 0.0 {
        let b = bounds_report(&cfg.params, Some(m.beta_c))?;
        put_bounds(&mut r, &b);
        r.put("sandwich", b.contains(m.beta_c));
    }
    put_verdict(&mut r, &cfg.params);
    Ok(r)
}

pub fn run_simulate(cfg: &RunConfig, err: &mut dyn Write) -> Result<Report, Error> {
    let s = simulate_checked(cfg, err)?;
    let mut r = Report::default();
    put_queue(&mut r, &cfg.params);
    put_simulation(&mut r, &s);
    Ok(r)
}

pub fn run_compare(cfg: &RunConfig, err: &mut dyn Write) -> Result<Report, Error> {
    let m = beta_c_with(&cfg.params, cfg.strategy, cfg.tolerances)?;
    let s = simulate_checked(cfg, err)?;
    let mut r = Report::default();
    put_queue(&mut r, &cfg.params);
    r.put("beta_c", num(m.beta_c));
    r.put("method", m.method.as_str());
    r.put("e_z", num(m.e_z));
    put_simulation(&mut r, &s);
    r.put("analytic_in_ci95", s.ci95.0 <= m.beta_c && m.beta_c <= s.ci95.1);
    r.put("analytic_minus_sim_in_se", num((m.beta_c - s.beta_c_hat) / s.std_error));
    if cfg.params.traffic_intensity() > 0.0 {
        let b = bounds_report(&cfg.params, Some(m.beta_c))?;
        put_bounds(&mut r, &b);
        r.put("sandwich", b.contains(m.beta_c));
        let violations: Vec<String> =
            b.violations(m.beta_c).iter().map(|(side, lb)| format!("{side} {}", lb.label)).collect();
        r.put("violations", violations.join("; "));
    }
    put_verdict(&mut r, &cfg.params);
    Ok(r)
}

/// Renders a table; the status is [`EXIT_MISMATCH`] if any cell is unexplained.
pub fn run_table(args: &TableArgs) -> Result<(String, i32), Error> {
    let cells = tables::table(args.which)?;
    let text = match args.format {
        Format::Csv => tables::to_csv(&cells),
        Format::Json => tables::to_json(&cells),
        Format::Plain => tables::to_plain(&cells),
    };
    let code = if cells.iter().any(|c| c.status == Status::Mismatch) { EXIT_MISMATCH } else { 0 };
    Ok((text, code))
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::RateMismatch { .. } => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

/// Runs a parsed command, writing the report to `out` and diagnostics to
/// `err`. Returns the process exit status.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match &cli.command {
        Command::Table(args) => run_table(args),
        Command::Metrics(a) | Command::Bounds(a) | Command::Simulate(a) | Command::Compare(a) => {
            a.resolve().and_then(|cfg| {
                let report = match &cli.command {
                    Command::Metrics(_) => run_metrics(&cfg),
                    Command::Bounds(_) => run_bounds(&cfg),
                    Command::Simulate(_) => run_simulate(&cfg, err),
                    _ => run_compare(&cfg, err),
                }?;
                Ok((report.render(cfg.format), 0))
            })
        }
    };
    match result {
        Ok((text, code)) => {
            if out.write_all(text.as_bytes()).is_err() {
                return EXIT_FAILURE;
            }
            code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
