//! Command-line front end.
//!
//! Exit codes: 0 success, 2 validation error, 3 capacity error, 4 internal
//! invariant breach. Configuration can come from flags or a single JSON
//! file (`--config`); explicit flags win over config values.

use crate::core::dist::OutcomeDistribution;
use crate::core::forecast::{expected_measure, run_forecaster, ForecasterSpec};
use crate::core::rng::RngStream;
use crate::core::seq::Transcript;
use crate::error::{Error, Result};
use crate::experiments::{self, ExperimentParams, GapFamily};
use crate::forecasters::truthful;
use crate::measures::{self, Interval, MeasureName, MeasureReport, Mode};
use crate::opt_search::{opt_exact, opt_restricted, GridSpec};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

#[derive(Parser, Debug)]
#[command(
    name = "caliblab",
    about = "Calibration measures, forecasters, and truthfulness experiments",
    version
)]
struct Cli {
    /// Worker threads; 1 is always bit-exact, larger counts stay bit-exact
    /// wherever order-fixed reduction is used (everywhere in this binary).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// JSON config file supplying defaults for the subcommand's flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a calibration measure on a transcript file.
    Measure(MeasureArgs),
    /// Exact expected measure of a forecaster under a distribution.
    Expected(ExpectedArgs),
    /// Search the grid-valued forecaster tables for the minimum expected
    /// measure.
    Opt(OptArgs),
    /// Truthful-vs-strategic gap experiment on a named family.
    Gap(GapArgs),
    /// Horizon sweep of the round-based forecaster's smooth calibration
    /// error.
    Scaling(ScalingArgs),
    /// One row per measure: truthful and strategic arm values with a
    /// verdict.
    Table(TableArgs),
    /// Variance/epoch diagnostics of a transcript under a distribution.
    Diagnostics(DiagnosticsArgs),
}

#[derive(Args, Debug, Default)]
struct MeasureArgs {
    /// Transcript JSON file {"x":[...],"p":[...]}.
    #[arg(long)]
    input: Option<PathBuf>,
    /// ece | smce | ssce | caldist | intce | kce | ucal
    #[arg(long)]
    measure: Option<String>,
    /// exact | mc (mc is available for ssce only)
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct ExpectedArgs {
    /// Distribution JSON file.
    #[arg(long)]
    dist: Option<PathBuf>,
    /// Forecaster JSON file; defaults to the truthful forecaster.
    #[arg(long)]
    forecaster: Option<PathBuf>,
    #[arg(long)]
    measure: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct OptArgs {
    #[arg(long)]
    dist: Option<PathBuf>,
    #[arg(long)]
    measure: Option<String>,
    /// Comma-separated grid of allowed prediction values.
    #[arg(long)]
    grid: Option<String>,
    /// Search the (step, ones-count) restricted class instead; an upper
    /// bound on the exact optimum, reported as such.
    #[arg(long)]
    restricted: bool,
    #[arg(long)]
    cap: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct GapArgs {
    /// triple | halfhalf
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    measure: Option<String>,
    #[arg(long = "T")]
    t: Option<usize>,
    #[arg(long)]
    reps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct ScalingArgs {
    /// Comma-separated horizons, e.g. 96,384,1536,6144.
    #[arg(long = "T-list")]
    t_list: Option<String>,
    #[arg(long)]
    reps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct TableArgs {
    #[arg(long = "T")]
    t: Option<usize>,
    #[arg(long)]
    reps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct DiagnosticsArgs {
    #[arg(long)]
    dist: Option<PathBuf>,
    /// Transcript JSON; when absent, a path is sampled truthfully with
    /// --seed.
    #[arg(long)]
    transcript: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Restrict the variance process to a closed interval "lo,hi".
    #[arg(long)]
    interval: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Flat JSON config schema; unknown fields are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FileConfig {
    input: Option<PathBuf>,
    dist: Option<PathBuf>,
    forecaster: Option<PathBuf>,
    transcript: Option<PathBuf>,
    measure: Option<String>,
    mode: Option<String>,
    family: Option<String>,
    grid: Option<String>,
    interval: Option<String>,
    t: Option<usize>,
    t_list: Option<String>,
    reps: Option<u64>,
    samples: Option<u64>,
    seed: Option<u64>,
    cap: Option<u64>,
    restricted: Option<bool>,
    out_dir: Option<PathBuf>,
    output: Option<PathBuf>,
}

fn load_config(path: &Option<PathBuf>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let body = std::fs::read_to_string(p)
                .map_err(|e| Error::validation(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&body)
                .map_err(|e| Error::validation(format!("config {}: {e}", p.display())))
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf, what: &str) -> Result<T> {
    let body = std::fs::read_to_string(path)
        .map_err(|e| Error::validation(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&body).map_err(|e| Error::validation(format!("{what}: {e}")))
}

fn emit(output: &Option<PathBuf>, value: &impl Serialize) -> Result<()> {
    let body = serde_json::to_string_pretty(value).expect("serializable");
    match output {
        Some(path) => std::fs::write(path, body.as_bytes())
            .map_err(|e| Error::validation(format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{body}");
            Ok(())
        }
    }
}

fn parse_grid(raw: &str) -> Result<GridSpec> {
    let values: Vec<f64> = raw
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::validation(format!("grid entry `{s}`: {e}")))
        })
        .collect::<Result<_>>()?;
    GridSpec::new(values)
}

fn require<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| Error::validation(format!("missing required option `{flag}`")))
}

fn cmd_measure(args: MeasureArgs, cfg: &FileConfig) -> Result<()> {
    let input = require(args.input.or_else(|| cfg.input.clone()), "--input")?;
    let name_raw = require(args.measure.or_else(|| cfg.measure.clone()), "--measure")?;
    let name = MeasureName::from_str(&name_raw)?;
    let mode = args
        .mode
        .or_else(|| cfg.mode.clone())
        .unwrap_or_else(|| "exact".into());
    let transcript: Transcript = read_json(&input, "transcript")?;
    if name == MeasureName::Caldist && transcript.len() > 10 {
        return Err(Error::validation("caldist exact capped at T=10"));
    }
    let report: MeasureReport = match mode.as_str() {
        "exact" => measures::measure_exact(name, &transcript)?,
        "mc" => {
            if name != MeasureName::Ssce {
                return Err(Error::validation(format!(
                    "mode mc is only available for ssce, not {name_raw}"
                )));
            }
            let samples = args.samples.or(cfg.samples).unwrap_or(100_000);
            let seed = args.seed.or(cfg.seed).unwrap_or(0);
            measures::ssce_mc(&transcript, samples, RngStream::new(seed, 0))?
        }
        other => return Err(Error::validation(format!("unknown mode `{other}`"))),
    };
    emit(&args.output.or_else(|| cfg.output.clone()), &report)
}

#[derive(Serialize)]
struct ExpectedOut {
    measure: MeasureName,
    value: f64,
    mode: Mode,
}

fn cmd_expected(args: ExpectedArgs, cfg: &FileConfig) -> Result<()> {
    let dist_path = require(args.dist.or_else(|| cfg.dist.clone()), "--dist")?;
    let name = MeasureName::from_str(&require(
        args.measure.or_else(|| cfg.measure.clone()),
        "--measure",
    )?)?;
    let d: OutcomeDistribution = read_json(&dist_path, "distribution")?;
    let forecaster = match args.forecaster.or_else(|| cfg.forecaster.clone()) {
        Some(path) => {
            let spec: ForecasterSpec = read_json(&path, "forecaster")?;
            spec.resolve(Some(&d))?
        }
        None => truthful(&d),
    };
    let value = expected_measure(&d, &forecaster, measures::measure_fn(name))?;
    emit(
        &args.output.or_else(|| cfg.output.clone()),
        &ExpectedOut {
            measure: name,
            value,
            mode: Mode::Exact,
        },
    )
}

#[derive(Serialize)]
struct OptOut {
    value: f64,
    argmin_table: Vec<f64>,
    grid: Vec<f64>,
    measure: MeasureName,
    restricted: bool,
}

fn cmd_opt(args: OptArgs, cfg: &FileConfig) -> Result<()> {
    let dist_path = require(args.dist.or_else(|| cfg.dist.clone()), "--dist")?;
    let name = MeasureName::from_str(&require(
        args.measure.or_else(|| cfg.measure.clone()),
        "--measure",
    )?)?;
    let grid = parse_grid(&require(args.grid.or_else(|| cfg.grid.clone()), "--grid")?)?;
    let d: OutcomeDistribution = read_json(&dist_path, "distribution")?;
    let cap = args.cap.or(cfg.cap);
    let restricted = args.restricted || cfg.restricted.unwrap_or(false);
    let m = measures::measure_fn(name);
    let (value, argmin) = if restricted {
        opt_restricted(&d, m, &grid, cap)?
    } else {
        opt_exact(&d, m, &grid, cap)?
    };
    let argmin_table = match argmin {
        crate::core::forecast::Forecaster::Table { predictions, .. } => predictions,
        _ => unreachable!("search returns tables"),
    };
    emit(
        &args.output.or_else(|| cfg.output.clone()),
        &OptOut {
            value,
            argmin_table,
            grid: grid.values().to_vec(),
            measure: name,
            restricted,
        },
    )
}

fn cmd_gap(args: GapArgs, cfg: &FileConfig) -> Result<()> {
    let family_raw = require(args.family.or_else(|| cfg.family.clone()), "--family")?;
    let name = MeasureName::from_str(&require(
        args.measure.or_else(|| cfg.measure.clone()),
        "--measure",
    )?)?;
    let family = GapFamily::from_name(&family_raw, name)?;
    let params = ExperimentParams {
        seed: args.seed.or(cfg.seed).unwrap_or(0),
        t: args.t.or(cfg.t),
        reps: args.reps.or(cfg.reps),
        samples: args.samples.or(cfg.samples),
        out_dir: args.out_dir.or_else(|| cfg.out_dir.clone()),
        ..Default::default()
    };
    let report = experiments::run_gap(family, name, &params)?;
    emit(&args.output.or_else(|| cfg.output.clone()), &report)
}

fn cmd_scaling(args: ScalingArgs, cfg: &FileConfig) -> Result<()> {
    let t_list = match args.t_list.or_else(|| cfg.t_list.clone()) {
        Some(raw) => Some(
            raw.split(',')
                .map(|s| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|e| Error::validation(format!("horizon `{s}`: {e}")))
                })
                .collect::<Result<Vec<usize>>>()?,
        ),
        None => None,
    };
    let params = ExperimentParams {
        seed: args.seed.or(cfg.seed).unwrap_or(0),
        reps: args.reps.or(cfg.reps),
        t_list,
        out_dir: args.out_dir.or_else(|| cfg.out_dir.clone()),
        ..Default::default()
    };
    let report = experiments::run_alg1_scaling(&params)?;
    emit(&args.output.or_else(|| cfg.output.clone()), &report)
}

#[derive(Serialize)]
struct TableRow {
    measure: String,
    truthful_value: f64,
    strategic_value: f64,
    verdict: String,
}

#[derive(Serialize)]
struct TableOut {
    t: usize,
    reps: u64,
    seed: u64,
    rows: Vec<TableRow>,
}

fn verdict(truthful: f64, strategic: f64, stderr: f64) -> String {
    if truthful > 4.0 * stderr && strategic <= 0.05 * truthful {
        "gap".into()
    } else if truthful <= 2.0 * strategic + 4.0 * stderr {
        "no-gap".into()
    } else {
        "partial".into()
    }
}

fn cmd_table(args: TableArgs, cfg: &FileConfig) -> Result<()> {
    let t = args.t.or(cfg.t).unwrap_or(120);
    if !t.is_multiple_of(6) {
        return Err(Error::validation(format!(
            "table horizon must be divisible by 6 to fit both families, got {t}"
        )));
    }
    let reps = args.reps.or(cfg.reps).unwrap_or(500);
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let mut rows = Vec::new();
    // bias-profile measures on the block family, regret measure on the
    // half-half family, subsampled measure on the block family
    let plan: Vec<(MeasureName, GapFamily)> = vec![
        (MeasureName::Ece, GapFamily::TripleBlock),
        (MeasureName::Smce, GapFamily::TripleBlockZero),
        (MeasureName::Intce, GapFamily::TripleBlockZero),
        (MeasureName::KceLaplace, GapFamily::TripleBlockZero),
        (MeasureName::UcalVshaped, GapFamily::HalfHalf),
        (MeasureName::Ssce, GapFamily::TripleBlockZero),
    ];
    for (i, (name, family)) in plan.into_iter().enumerate() {
        let params = ExperimentParams {
            seed: seed.wrapping_add(i as u64 * (1 << 32)),
            t: Some(t),
            reps: Some(reps),
            ..Default::default()
        };
        let rep = experiments::run_gap(family, name, &params)?;
        let truthful_arm = rep.arms.iter().find(|a| a.arm == "truthful").expect("arm");
        let strategic_arm = rep.arms.iter().find(|a| a.arm == "strategic").expect("arm");
        rows.push(TableRow {
            measure: name.as_str().into(),
            truthful_value: truthful_arm.mean,
            strategic_value: strategic_arm.mean,
            verdict: verdict(truthful_arm.mean, strategic_arm.mean, truthful_arm.stderr),
        });
        if name == MeasureName::Ece {
            // swap-regret bounds ride on the same arms: lower ECE²/T scales
            // the gap down but keeps zero at zero, upper 2·ECE preserves it
            rows.push(TableRow {
                measure: "msr_bounds".into(),
                truthful_value: truthful_arm.mean * truthful_arm.mean / t as f64,
                strategic_value: strategic_arm.mean * strategic_arm.mean / t as f64,
                verdict: verdict(
                    truthful_arm.mean * truthful_arm.mean / t as f64,
                    strategic_arm.mean * strategic_arm.mean / t as f64,
                    truthful_arm.stderr,
                ),
            });
        }
        if name == MeasureName::Smce {
            // distance from calibration is exact only at tiny horizons;
            // report its certified lower bound smCE/2 on both arms
            rows.push(TableRow {
                measure: "caldist_lower".into(),
                truthful_value: truthful_arm.mean / 2.0,
                strategic_value: strategic_arm.mean / 2.0,
                verdict: verdict(
                    truthful_arm.mean / 2.0,
                    strategic_arm.mean / 2.0,
                    truthful_arm.stderr,
                ),
            });
        }
    }
    emit(
        &args.output.or_else(|| cfg.output.clone()),
        &TableOut {
            t,
            reps,
            seed,
            rows,
        },
    )
}

fn cmd_diagnostics(args: DiagnosticsArgs, cfg: &FileConfig) -> Result<()> {
    let dist_path = require(args.dist.or_else(|| cfg.dist.clone()), "--dist")?;
    let d: OutcomeDistribution = read_json(&dist_path, "distribution")?;
    let transcript = match args.transcript.or_else(|| cfg.transcript.clone()) {
        Some(path) => read_json(&path, "transcript")?,
        None => {
            let seed = args.seed.or(cfg.seed).unwrap_or(0);
            let x = d.sample(RngStream::new(seed, 0));
            run_forecaster(&truthful(&d), &x)?
        }
    };
    let interval = match args.interval.or_else(|| cfg.interval.clone()) {
        Some(raw) => {
            let parts: Vec<&str> = raw.split(',').collect();
            if parts.len() != 2 {
                return Err(Error::validation(format!(
                    "interval must be `lo,hi`, got `{raw}`"
                )));
            }
            let lo: f64 = parts[0]
                .trim()
                .parse()
                .map_err(|e| Error::validation(format!("interval lo: {e}")))?;
            let hi: f64 = parts[1]
                .trim()
                .parse()
                .map_err(|e| Error::validation(format!("interval hi: {e}")))?;
            Some(Interval::new(lo, hi)?)
        }
        None => None,
    };
    let report = measures::diagnostics(&d, &transcript, interval)?;
    emit(&args.output.or_else(|| cfg.output.clone()), &report)
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Error::validation("--threads must be at least 1"));
        }
        // ignore the error when a pool was already installed (tests)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let cfg = load_config(&cli.config)?;
    match cli.command {
        Command::Measure(args) => cmd_measure(args, &cfg),
        Command::Expected(args) => cmd_expected(args, &cfg),
        Command::Opt(args) => cmd_opt(args, &cfg),
        Command::Gap(args) => cmd_gap(args, &cfg),
        Command::Scaling(args) => cmd_scaling(args, &cfg),
        Command::Table(args) => cmd_table(args, &cfg),
        Command::Diagnostics(args) => cmd_diagnostics(args, &cfg),
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Validation(_) | Error::Inconsistency(_) => 2,
        Error::Capacity(_) => 3,
        Error::Internal(_) => 4,
    }
}

pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::parse_from(args);
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

/// Exposed for the schema round-trip tests.
pub fn measure_names_for_table() -> Vec<&'static str> {
    vec![
        "ece",
        "msr_bounds",
        "smce",
        "caldist_lower",
        "intce",
        "kce_laplace",
        "ucal_vshaped",
        "ssce",
    ]
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableOutSchema {
    pub t: usize,
    pub reps: u64,
    pub seed: u64,
    pub rows: Vec<TableRowSchema>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableRowSchema {
    pub measure: String,
    pub truthful_value: f64,
    pub strategic_value: f64,
    pub verdict: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptOutSchema {
    pub value: f64,
    pub argmin_table: Vec<f64>,
    pub grid: Vec<f64>,
    pub measure: MeasureName,
    pub restricted: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedOutSchema {
    pub measure: MeasureName,
    pub value: f64,
    pub mode: Mode,
}

/// BTreeMap-backed derived stats keep the JSON key order deterministic.
pub type DerivedMap = BTreeMap<String, f64>;
