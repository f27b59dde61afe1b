//! `dhsim` command-line front end.
//!
//! Exit codes: 0 success, 1 runtime or validation failure, 2 usage error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{CacheConfig, LatencyKind, LatencySpec, DEFAULT_BASE_LATENCY_MS, GB, MB};
use crate::delay_model::{check_moments, LatencyModel};
use crate::engine::{fill_improvements, simulate, simulate_policies, SimReport};
use crate::error::{Error, Result};
use crate::policies::{AdmissionMode, PolicyKind, DEFAULT_CALA_WEIGHT, DEFAULT_MAD_ALPHA};
use crate::trace::Trace;
use crate::tracegen::{
    empirical_popularity, gen_synthetic, write_popularity_csv, ArrivalProcess, SyntheticSpec,
    DEFAULT_PARETO_SHAPE,
};

const POLICY_NAMES: &str = "lru, va-stoch, va-det, lac, cala, mad, hist-va";

#[derive(Debug, Parser)]
#[command(name = "dhsim", version, about = "Delayed-hit cache simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic Zipf trace.
    GenTrace(GenTraceArgs),
    /// Run one or more policies over a trace.
    Simulate(SimulateArgs),
    /// Vary one parameter across policies and repetitions.
    Sweep(SweepArgs),
    /// Compare closed-form aggregate-delay moments with Monte Carlo.
    ValidateMoments(ValidateMomentsArgs),
    /// Per-object popularity and inter-arrival report for a trace.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArrivalArg {
    Poisson,
    Pareto,
}

#[derive(Debug, Args)]
pub struct GenTraceArgs {
    #[arg(long, default_value_t = 100)]
    pub objects: usize,
    #[arg(long, default_value_t = 100_000)]
    pub requests: usize,
    #[arg(long, value_enum, default_value_t = ArrivalArg::Poisson)]
    pub arrival: ArrivalArg,
    /// Zipf exponent.
    #[arg(long, default_value_t = 1.0)]
    pub zipf: f64,
    /// Total request rate per ms (Pareto gaps match its mean).
    #[arg(long, default_value_t = 1.0)]
    pub rate: f64,
    #[arg(long, default_value_t = DEFAULT_PARETO_SHAPE)]
    pub pareto_shape: f64,
    #[arg(long, default_value = "1MB", value_parser = parse_size)]
    pub min_size: u64,
    #[arg(long, default_value = "100MB", value_parser = parse_size)]
    pub max_size: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output trace CSV.
    #[arg(short = 'o', long = "output")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Comma-separated policies.
    #[arg(long = "policy", value_delimiter = ',', value_parser = parse_policy_name, default_value = "va-stoch,lru")]
    pub policies: Vec<String>,
    /// Cache capacity, e.g. 500MB or 256GB.
    #[arg(long, default_value = "500MB", value_parser = parse_size)]
    pub cache: u64,
    #[arg(long, value_parser = parse_latency_kind, default_value = "exp")]
    pub latency: LatencyKind,
    /// Constant part of the miss latency, ms.
    #[arg(long = "L", default_value_t = DEFAULT_BASE_LATENCY_MS)]
    pub base_latency: f64,
    /// Per-byte part of the miss latency, ms/byte (default L / 1e8).
    #[arg(long = "c")]
    pub per_byte: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub omega: f64,
    /// Estimator window, in requests (K/M suffixes allowed).
    #[arg(long, default_value = "10000", value_parser = parse_count)]
    pub window: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_parser = parse_admission, default_value = "always")]
    pub admission: AdmissionMode,
    #[arg(long, default_value_t = DEFAULT_CALA_WEIGHT, value_parser = parse_unit_closed)]
    pub cala_weight: f64,
    #[arg(long, default_value_t = DEFAULT_MAD_ALPHA, value_parser = parse_unit_half_open)]
    pub mad_alpha: f64,
}

impl RunArgs {
    fn policy_kinds(&self) -> Result<Vec<PolicyKind>> {
        self.policies
            .iter()
            .map(|p| Ok(PolicyKind::parse_with(p, self.cala_weight, self.mad_alpha)?))
            .collect()
    }

    fn base_config(&self) -> CacheConfig {
        let mut latency = LatencySpec::new(self.latency, self.base_latency);
        if let Some(c) = self.per_byte {
            latency = latency.with_per_byte(c);
        }
        CacheConfig {
            capacity: self.cache,
            window_size: self.window,
            omega: self.omega,
            policy: PolicyKind::Lru,
            latency,
            seed: self.seed,
            admission: self.admission,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub trace: PathBuf,
    #[command(flatten)]
    pub run: RunArgs,
    /// Write the report CSV here instead of stdout.
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,
    /// Also write full reports (with the episode log) as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SweepAxis {
    Omega,
    Window,
    CacheSize,
    BaseLatency,
}

impl SweepAxis {
    fn name(&self) -> &'static str {
        match self {
            SweepAxis::Omega => "omega",
            SweepAxis::Window => "window",
            SweepAxis::CacheSize => "cache_size",
            SweepAxis::BaseLatency => "base_latency",
        }
    }

    fn parse_value(&self, s: &str) -> std::result::Result<f64, String> {
        match self {
            SweepAxis::Window => parse_count(s).map(|v| v as f64),
            SweepAxis::CacheSize => parse_size(s).map(|v| v as f64),
            SweepAxis::Omega | SweepAxis::BaseLatency => s
                .trim()
                .parse::<f64>()
                .map_err(|_| format!("invalid number '{s}'")),
        }
    }

    fn default_values(&self) -> &'static str {
        match self {
            SweepAxis::Omega => "0,0.5,1,2",
            SweepAxis::Window => "1K,10K,100K",
            SweepAxis::CacheSize => "100MB,500MB,1GB",
            SweepAxis::BaseLatency => "1,5,10,50",
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub trace: PathBuf,
    #[arg(long, value_enum)]
    pub axis: SweepAxis,
    /// Comma-separated axis values (defaults depend on the axis).
    #[arg(long, value_delimiter = ',')]
    pub values: Vec<String>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub reps: u64,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateMomentsArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.1,1,5")]
    pub lambdas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,4")]
    pub zs: Vec<f64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_latency_kind, default_value = "det,exp")]
    pub models: Vec<LatencyKind>,
    /// Monte Carlo samples per grid point.
    #[arg(long, default_value_t = 1_000_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub trace: PathBuf,
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,
}

/// Long-format sweep record: the axis point followed by the run report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub axis_value: f64,
    pub repetition: u64,
    pub policy: String,
    pub seed: u64,
    #[serde(rename = "C_bytes")]
    pub c_bytes: u64,
    #[serde(rename = "S")]
    pub s: usize,
    pub omega: f64,
    #[serde(rename = "L_ms")]
    pub l_ms: f64,
    pub c_ms_per_byte: f64,
    pub latency_model: String,
    pub total_latency_ms: f64,
    pub hits: u64,
    pub delayed_hits: u64,
    pub misses: u64,
    pub improvement_vs_lru: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub lambda: f64,
    pub z: f64,
    pub model: String,
    pub analytic_mean: f64,
    pub analytic_var: f64,
    pub mc_mean: f64,
    pub mc_var: f64,
    pub se_mean: f64,
    pub se_var: f64,
    pub n_samples: u64,
}

/// Parses `500MB`, `256GB`, `10KB` or plain bytes. MB and GB are decimal.
pub fn parse_size(s: &str) -> std::result::Result<u64, String> {
    let t = s.trim();
    let upper = t.to_ascii_uppercase();
    let (num, mult) = if let Some(n) = upper.strip_suffix("GB") {
        (n, GB as f64)
    } else if let Some(n) = upper.strip_suffix("MB") {
        (n, MB as f64)
    } else if let Some(n) = upper.strip_suffix("KB") {
        (n, 1e3)
    } else if let Some(n) = upper.strip_suffix('B') {
        (n, 1.0)
    } else {
        (upper.as_str(), 1.0)
    };
    let v: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("invalid size '{s}' (e.g. 500MB, 256GB, 1024)"))?;
    let bytes = (v * mult).round();
    if !(bytes >= 1.0 && bytes.is_finite()) {
        return Err(format!("size '{s}' must be at least one byte"));
    }
    Ok(bytes as u64)
}

/// Parses counts like `10000`, `10K` or `1M`.
pub fn parse_count(s: &str) -> std::result::Result<usize, String> {
    let t = s.trim().to_ascii_uppercase();
    let (num, mult) = if let Some(n) = t.strip_suffix('K') {
        (n, 1e3)
    } else if let Some(n) = t.strip_suffix('M') {
        (n, 1e6)
    } else {
        (t.as_str(), 1.0)
    };
    let v: f64 = num.parse().map_err(|_| format!("invalid count '{s}'"))?;
    let n = (v * mult).round();
    if !(n >= 1.0 && n.is_finite()) {
        return Err(format!("count '{s}' must be at least 1"));
    }
    Ok(n as usize)
}

fn parse_policy_name(s: &str) -> std::result::Result<String, String> {
    s.parse::<PolicyKind>()
        .map(|_| s.trim().to_owned())
        .map_err(|_| format!("unknown policy '{s}', valid policies: {POLICY_NAMES}"))
}

fn parse_latency_kind(s: &str) -> std::result::Result<LatencyKind, String> {
    s.parse()
}

fn parse_admission(s: &str) -> std::result::Result<AdmissionMode, String> {
    s.parse()
}

fn parse_unit_closed(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("invalid number '{s}'"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn parse_unit_half_open(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("invalid number '{s}'"))?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is outside (0, 1]"))
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return e.exit_code();
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}

fn execute(cmd: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::GenTrace(a) => cmd_gen_trace(&a, stdout),
        Command::Simulate(a) => cmd_simulate(&a, stdout),
        Command::Sweep(a) => cmd_sweep(&a, stdout),
        Command::ValidateMoments(a) => cmd_validate_moments(&a, stdout, stderr),
        Command::Report(a) => cmd_report(&a, stdout),
    }
}

fn with_output<F>(path: Option<&Path>, stdout: &mut dyn Write, f: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            f(&mut w)?;
            w.flush()?;
            Ok(())
        }
        None => f(stdout),
    }
}

fn write_rows<T: Serialize>(rows: &[T], w: &mut dyn Write) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn cmd_gen_trace(a: &GenTraceArgs, stdout: &mut dyn Write) -> Result<i32> {
    let arrival = match a.arrival {
        ArrivalArg::Poisson => ArrivalProcess::Poisson { rate: a.rate },
        ArrivalArg::Pareto => ArrivalProcess::pareto_matching_rate(a.pareto_shape, a.rate),
    };
    let spec = SyntheticSpec {
        n_objects: a.objects,
        n_requests: a.requests,
        zipf_alpha: a.zipf,
        arrival,
        size_range: (a.min_size, a.max_size),
        seed: a.seed,
    };
    let trace = gen_synthetic(&spec)?;
    trace.save(&a.output)?;
    let rows = empirical_popularity(&trace)?;
    writeln!(
        stdout,
        "wrote {} requests for {} objects to {} (footprint {} bytes, horizon {:.3} ms)",
        trace.len(),
        rows.len(),
        a.output.display(),
        trace.footprint(),
        trace.events().last().map_or(0.0, |e| e.time)
    )?;
    for r in rows.iter().take(5) {
        writeln!(
            stdout,
            "  object {:>6}  count {:>7}  mean gap {:>10.3} ms  size {} bytes",
            r.object_id,
            r.count,
            r.mean_interarrival_ms.unwrap_or(f64::NAN),
            r.size_bytes
        )?;
    }
    Ok(0)
}

pub fn cmd_simulate(a: &SimulateArgs, stdout: &mut dyn Write) -> Result<i32> {
    let trace = Trace::load(&a.trace)?;
    let reports = simulate_policies(&trace, &a.run.base_config(), &a.run.policy_kinds()?)?;
    let rows: Vec<_> = reports.iter().map(SimReport::row).collect();
    with_output(a.output.as_deref(), stdout, |w| write_rows(&rows, w))?;
    if let Some(path) = &a.json {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, &reports)?;
        w.flush()?;
    }
    Ok(0)
}

/// Runs the cross product of axis values, policies and repetitions. Rows are
/// sorted by axis value, policy label and repetition.
pub fn run_sweep(
    trace: &Trace,
    axis: SweepAxis,
    values: &[f64],
    run: &RunArgs,
    reps: u64,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one axis value".into()));
    }
    let policies = run.policy_kinds()?;
    if policies.is_empty() {
        return Err(Error::Config("sweep needs at least one policy".into()));
    }
    let base = run.base_config();
    let mut jobs = Vec::new();
    for (vi, &v) in values.iter().enumerate() {
        for rep in 0..reps {
            let mut cfg = base.clone();
            cfg.seed = base.seed + rep;
            match axis {
                SweepAxis::Omega => cfg.omega = v,
                SweepAxis::Window => cfg.window_size = v as usize,
                SweepAxis::CacheSize => cfg.capacity = v as u64,
                SweepAxis::BaseLatency => {
                    cfg.latency.base_ms = v;
                    cfg.latency.per_byte_ms = run
                        .per_byte
                        .unwrap_or_else(|| LatencySpec::default_per_byte(v));
                }
            }
            jobs.push((vi, v, rep, cfg));
        }
    }
    let groups = jobs
        .par_iter()
        .map(|(vi, v, rep, cfg)| {
            let mut reports = policies
                .iter()
                .map(|&p| {
                    let mut c = cfg.clone();
                    c.policy = p;
                    simulate(trace, &c)
                })
                .collect::<Result<Vec<_>>>()?;
            fill_improvements(&mut reports)?;
            Ok(reports
                .into_iter()
                .map(|r| (*vi, *v, *rep, r.row()))
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<_> = groups.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        a.1.total_cmp(&b.1)
            .then(a.0.cmp(&b.0))
            .then(a.3.policy.cmp(&b.3.policy))
            .then(a.2.cmp(&b.2))
    });
    Ok(rows
        .into_iter()
        .map(|(_, v, rep, r)| SweepRow {
            axis: axis.name().to_owned(),
            axis_value: v,
            repetition: rep,
            policy: r.policy,
            seed: r.seed,
            c_bytes: r.c_bytes,
            s: r.s,
            omega: r.omega,
            l_ms: r.l_ms,
            c_ms_per_byte: r.c_ms_per_byte,
            latency_model: r.latency_model,
            total_latency_ms: r.total_latency_ms,
            hits: r.hits,
            delayed_hits: r.delayed_hits,
            misses: r.misses,
            improvement_vs_lru: r.improvement_vs_lru,
        })
        .collect())
}

pub fn cmd_sweep(a: &SweepArgs, stdout: &mut dyn Write) -> Result<i32> {
    let raw: Vec<String> = if a.values.is_empty() {
        a.axis
            .default_values()
            .split(',')
            .map(str::to_owned)
            .collect()
    } else {
        a.values.clone()
    };
    let values = raw
        .iter()
        .map(|s| a.axis.parse_value(s))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(Error::Config)?;
    let trace = Trace::load(&a.trace)?;
    let rows = match a.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(|| run_sweep(&trace, a.axis, &values, &a.run, a.reps))?,
        None => run_sweep(&trace, a.axis, &values, &a.run, a.reps)?,
    };
    with_output(a.output.as_deref(), stdout, |w| write_rows(&rows, w))?;
    Ok(0)
}

/// Validates every grid point; returns the rows and whether each passed.
pub fn validate_moments_grid(
    lambdas: &[f64],
    zs: &[f64],
    models: &[LatencyKind],
    n: usize,
    seed: u64,
) -> Result<Vec<(MomentRow, bool)>> {
    let mut out = Vec::new();
    let mut point = 0u64;
    for &kind in models {
        for &lambda in lambdas {
            for &z in zs {
                let model = match kind {
                    LatencyKind::Deterministic => LatencyModel::deterministic(z)?,
                    LatencyKind::Exponential => LatencyModel::exponential(z)?,
                };
                let check = check_moments(lambda, &model, n, seed.wrapping_add(point))?;
                point += 1;
                out.push((
                    MomentRow {
                        lambda,
                        z,
                        model: kind.name().to_owned(),
                        analytic_mean: check.analytic.mean,
                        analytic_var: check.analytic.variance,
                        mc_mean: check.empirical.mean,
                        mc_var: check.empirical.variance,
                        se_mean: check.empirical.se_mean,
                        se_var: check.empirical.se_variance,
                        n_samples: check.empirical.n_samples,
                    },
                    check.passed(),
                ));
            }
        }
    }
    Ok(out)
}

pub fn cmd_validate_moments(
    a: &ValidateMomentsArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32> {
    if a.n == 0 {
        return Err(Error::Config("--n must be at least 1".into()));
    }
    let results = validate_moments_grid(&a.lambdas, &a.zs, &a.models, a.n, a.seed)?;
    let rows: Vec<MomentRow> = results.iter().map(|(r, _)| r.clone()).collect();
    with_output(a.output.as_deref(), stdout, |w| write_rows(&rows, w))?;
    let failures: Vec<_> = results.iter().filter(|(_, ok)| !ok).collect();
    if failures.is_empty() {
        return Ok(0);
    }
    writeln!(
        stderr,
        "{} grid point(s) outside tolerance:",
        failures.len()
    )?;
    for (r, _) in failures {
        writeln!(
            stderr,
            "  model={} lambda={} z={}: mean {} vs {} (se {}), var {} vs {}",
            r.model, r.lambda, r.z, r.mc_mean, r.analytic_mean, r.se_mean, r.mc_var, r.analytic_var
        )?;
    }
    Ok(1)
}

pub fn cmd_report(a: &ReportArgs, stdout: &mut dyn Write) -> Result<i32> {
    let trace = Trace::load(&a.trace)?;
    let rows = empirical_popularity(&trace)?;
    with_output(a.output.as_deref(), stdout, |w| {
        write_popularity_csv(&rows, w)
    })?;
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_suffixes() {
        assert_eq!(parse_size("500MB").unwrap(), 500_000_000);
        assert_eq!(parse_size("256GB").unwrap(), 256_000_000_000);
        assert_eq!(parse_size("256 gb").unwrap(), 256_000_000_000);
        assert_eq!(parse_size("1.5KB").unwrap(), 1500);
        assert_eq!(parse_size("19").unwrap(), 19);
        assert!(parse_size("abc").is_err());
        assert!(parse_size("0").is_err());
    }

    #[test]
    fn count_suffixes() {
        assert_eq!(parse_count("10K").unwrap(), 10_000);
        assert_eq!(parse_count("100k").unwrap(), 100_000);
        assert_eq!(parse_count("1M").unwrap(), 1_000_000);
        assert_eq!(parse_count("7").unwrap(), 7);
        assert!(parse_count("0").is_err());
    }

    #[test]
    fn unknown_policy_is_a_usage_error() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            ["dhsim", "simulate", "t.csv", "--policy", "lfu"],
            &mut out,
            &mut err,
        );
        assert_eq!(code, 2);
        let msg = String::from_utf8(err).unwrap();
        assert!(msg.contains("va-stoch") && msg.contains("lfu"), "{msg}");
    }

    #[test]
    fn missing_output_is_a_usage_error() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(
            run(["dhsim", "gen-trace", "--seed", "1"], &mut out, &mut err),
            2
        );
    }

    #[test]
    fn missing_trace_file_is_a_runtime_error() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(
            ["dhsim", "simulate", "/nonexistent/trace.csv"],
            &mut out,
            &mut err,
        );
        assert_eq!(code, 1);
    }
}
