//! Command-line orchestration: simulate, verify, sweep and rate-fit.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use lohe_core::config::{parse_config, SimConfig};
use lohe_core::observe::fit_decay_rate;
use lohe_core::output::{read_column, write_records};
use lohe_core::simulate::run_simulation;
use lohe_core::verify::{run_scenario, ScenarioSpec, TheoremId, Verdict, VerificationReport};
use lohe_core::LoheError;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAIL: i32 = 2;
pub const EXIT_HYPOTHESIS: i32 = 3;
pub const EXIT_FAULT: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "lohe-lab", version, about = "Lohe aggregation simulations and theorem checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a configuration and write the trajectory CSV plus a summary JSON.
    Simulate(RunArgs),
    /// Check one result on a configuration and write its report JSON.
    Verify(VerifyArgs),
    /// Run the configuration's sweep grid, one report per point plus an index.
    Sweep(VerifyArgs),
    /// Fit an exponential decay rate to one column of a trajectory CSV.
    RateFit(RateFitArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: the config's output path, else the working directory).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Overrides `verify.theorem` in the config.
    #[arg(long)]
    theorem: Option<String>,
}

#[derive(Debug, Args)]
struct RateFitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    column: String,
    /// Trailing fraction of the samples used by the fit.
    #[arg(long, default_value_t = 0.6)]
    window: f64,
}

/// A failure carrying the exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<LoheError> for Failure {
    fn from(e: LoheError) -> Self {
        Self {
            code: error_code(&e),
            message: e.to_string(),
        }
    }
}

/// Numerical faults exit with 4; everything else is a usage or configuration error.
pub fn error_code(e: &LoheError) -> i32 {
    match e {
        LoheError::IntegrationFault { .. }
        | LoheError::ReductionViolation { .. }
        | LoheError::PhaseAliasing { .. } => EXIT_FAULT,
        _ => EXIT_USAGE,
    }
}

pub fn verdict_code(verdict: Verdict) -> i32 {
    match verdict {
        Verdict::Pass => EXIT_PASS,
        Verdict::Fail => EXIT_FAIL,
        Verdict::HypothesisNotMet => EXIT_HYPOTHESIS,
    }
}

/// Combines per-point exit codes of a sweep: fault, then fail, then hypothesis-not-met.
pub fn combine_codes(codes: impl IntoIterator<Item = i32>) -> i32 {
    let rank = |c: i32| match c {
        EXIT_FAULT => 4,
        EXIT_USAGE => 3,
        EXIT_FAIL => 2,
        EXIT_HYPOTHESIS => 1,
        _ => 0,
    };
    codes.into_iter().max_by_key(|&c| rank(c)).unwrap_or(EXIT_PASS)
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<SimConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    let mut config =
        parse_config(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(config)
}

fn out_dir(args: &RunArgs, config: &SimConfig) -> Result<PathBuf, Failure> {
    let dir = args
        .out
        .clone()
        .or_else(|| config.output.path.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)
        .map_err(|e| Failure::usage(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("serializable report");
    fs::write(path, text + "\n")
        .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
}

fn write_csv(path: &Path, records: &[lohe_core::observe::ObservableRecord], tuples: &[[usize; 4]]) -> Result<(), Failure> {
    let file = fs::File::create(path)
        .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?;
    write_records(std::io::BufWriter::new(file), records, tuples)?;
    Ok(())
}

fn parse_theorem(cli: Option<&str>) -> Result<Option<TheoremId>, Failure> {
    cli.map(|t| t.parse::<TheoremId>().map_err(|e| Failure::usage(e.to_string())))
        .transpose()
}

fn simulate_into(config: &SimConfig, dir: &Path, stem: &str) -> Result<(), Failure> {
    let tuples = config.cross_ratio_tuples();
    match run_simulation(config) {
        Ok(out) => {
            write_csv(&dir.join(format!("{stem}.csv")), &out.records, &tuples)?;
            write_json(&dir.join(format!("{stem}_summary.json")), &out.summary)
        }
        Err(failure) => {
            if !failure.records.is_empty() {
                write_csv(&dir.join(format!("{stem}.partial.csv")), &failure.records, &tuples)?;
            }
            Err(failure.error.into())
        }
    }
}

fn simulate(args: &RunArgs) -> Result<i32, Failure> {
    let config = load_config(&args.config, args.seed)?;
    let dir = out_dir(args, &config)?;
    simulate_into(&config, &dir, "trajectory")?;
    Ok(EXIT_PASS)
}

fn verify_report(config: SimConfig, theorem: Option<TheoremId>) -> Result<VerificationReport, Failure> {
    let spec = ScenarioSpec::from_config(config, theorem).map_err(|e| Failure::usage(e.to_string()))?;
    Ok(run_scenario(&spec)?)
}

fn verify(args: &VerifyArgs) -> Result<i32, Failure> {
    let theorem = parse_theorem(args.theorem.as_deref())?;
    let config = load_config(&args.run.config, args.run.seed)?;
    let dir = out_dir(&args.run, &config)?;
    let mut report = verify_report(config, theorem)?;
    let path = dir.join("report.json");
    report.artifacts.push(path.display().to_string());
    write_json(&path, &report)?;
    summarize(&report);
    Ok(verdict_code(report.verdict))
}

fn summarize(report: &VerificationReport) {
    let failed: Vec<&str> = report
        .failed_checks()
        .iter()
        .map(|c| c.name.as_str())
        .chain(report.hypothesis.gates.iter().filter(|g| !g.passed).map(|g| g.name.as_str()))
        .collect();
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{}: {:?}", report.theorem_id, report.verdict);
    if !failed.is_empty() {
        let _ = writeln!(err, "  failing: {}", failed.join(", "));
    }
}

#[derive(Debug, Serialize)]
struct SweepEntry {
    index: usize,
    value: f64,
    exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    verdict: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct SweepIndex {
    parameter: lohe_core::config::SweepParameter,
    theorem: Option<TheoremId>,
    exit_code: i32,
    points: Vec<SweepEntry>,
}

fn sweep(args: &VerifyArgs) -> Result<i32, Failure> {
    let theorem = parse_theorem(args.theorem.as_deref())?;
    let config = load_config(&args.run.config, args.run.seed)?;
    let theorem = theorem.or_else(|| config.verify.as_ref().and_then(|v| v.theorem));
    let grid = config
        .sweep
        .clone()
        .ok_or_else(|| Failure::usage("config has no `sweep` block"))?;
    let dir = out_dir(&args.run, &config)?;
    // Points are validated up front so a bad grid fails before any run.
    let points: Vec<SimConfig> = grid
        .values
        .iter()
        .map(|&v| config.with_parameter(grid.parameter, v))
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::usage(e.to_string()))?;

    use rayon::prelude::*;
    let entries: Vec<SweepEntry> = points
        .into_par_iter()
        .enumerate()
        .map(|(index, point)| {
            let value = grid.values[index];
            let stem = format!("point_{index:03}");
            let outcome = match theorem {
                Some(t) => verify_report(point, Some(t)).and_then(|mut r| {
                    let path = dir.join(format!("{stem}.json"));
                    r.artifacts.push(path.display().to_string());
                    write_json(&path, &r)?;
                    Ok((Some(r.verdict), path))
                }),
                None => simulate_into(&point, &dir, &stem).map(|_| (None, dir.join(format!("{stem}.csv")))),
            };
            match outcome {
                Ok((verdict, path)) => SweepEntry {
                    index,
                    value,
                    exit_code: verdict.map_or(EXIT_PASS, verdict_code),
                    verdict,
                    file: path.file_name().map(|f| f.to_string_lossy().into_owned()),
                    error: None,
                },
                Err(f) => SweepEntry {
                    index,
                    value,
                    exit_code: f.code,
                    verdict: None,
                    file: None,
                    error: Some(f.message),
                },
            }
        })
        .collect();
    let code = combine_codes(entries.iter().map(|e| e.exit_code));
    for e in entries.iter().filter(|e| e.error.is_some()) {
        eprintln!("point {} ({}): {}", e.index, e.value, e.error.as_deref().unwrap_or(""));
    }
    write_json(
        &dir.join("index.json"),
        &SweepIndex {
            parameter: grid.parameter,
            theorem,
            exit_code: code,
            points: entries,
        },
    )?;
    Ok(code)
}

#[derive(Debug, Serialize)]
struct RateFitOutput<'a> {
    column: &'a str,
    rate: f64,
    intercept: f64,
    r2: f64,
    samples: usize,
}

fn rate_fit(args: &RateFitArgs) -> Result<i32, Failure> {
    let file = fs::File::open(&args.input)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", args.input.display())))?;
    let (t, y) = read_column(file, &args.column).map_err(|e| Failure::usage(e.to_string()))?;
    let fit = fit_decay_rate(&t, &y, args.window).map_err(|e| Failure::usage(e.to_string()))?;
    let out = RateFitOutput {
        column: &args.column,
        rate: fit.rate,
        intercept: fit.intercept,
        r2: fit.r2,
        samples: fit.samples,
    };
    println!("{}", serde_json::to_string_pretty(&out).expect("serializable fit"));
    Ok(EXIT_PASS)
}

/// Worker-pool size from `RUN_THREADS` (positive integer), defaulting to the core count.
fn thread_pool() -> Result<rayon::ThreadPool, Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var("RUN_THREADS") {
        let n: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure::usage(format!("RUN_THREADS must be a positive integer, got `{raw}`")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Failure::usage(format!("cannot start worker pool: {e}")))
}

/// Runs the CLI on `argv` (including the program name) and returns the exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    let result = thread_pool().and_then(|pool| {
        pool.install(|| match &cli.command {
            Command::Simulate(a) => simulate(a),
            Command::Verify(a) => verify(a),
            Command::Sweep(a) => sweep(a),
            Command::RateFit(a) => rate_fit(a),
        })
    });
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_codes_follow_precedence() {
        assert_eq!(combine_codes([0, 3, 2]), EXIT_FAIL);
        assert_eq!(combine_codes([0, 3, 0]), EXIT_HYPOTHESIS);
        assert_eq!(combine_codes([2, 4, 3]), EXIT_FAULT);
        assert_eq!(combine_codes([0, 0]), EXIT_PASS);
        assert_eq!(combine_codes([]), EXIT_PASS);
    }

    #[test]
    fn faults_map_to_four() {
        let fault = LoheError::IntegrationFault {
            time: 1.0,
            reason: "non-finite state".into(),
        };
        assert_eq!(error_code(&fault), EXIT_FAULT);
        assert_eq!(error_code(&LoheError::InvalidInput("x".into())), EXIT_USAGE);
    }
}
