//! Command-line front end.
//!
//! ```text
//! maritime-mec run      --config default --slots 1000 --seed 7 --out out/run
//! maritime-mec sweep    --param control_v --values 0.01,0.1,1 --reps 10 --out out/v
//! maritime-mec compare  --reps 10 --out out/cmp
//! maritime-mec validate --instances 100 --seed 1
//! ```
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 validation failure.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::oracle;
use crate::scenario::{ArrivalPmf, Policy, ScenarioConfig};
use crate::sim::{CsvSink, RunSummary, Simulation};

#[derive(Debug, Parser)]
#[command(name = "maritime-mec", version, about = "Maritime MEC resource allocation simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One simulation; writes slots.csv and summary.json.
    Run(RunArgs),
    /// Grid of runs over one parameter; writes sweep.csv.
    Sweep(SweepArgs),
    /// Every policy on identical seeds; writes compare.csv.
    Compare(CompareArgs),
    /// Certify JCORA against the brute-force oracle.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// Scenario file (TOML), or `default`.
    #[arg(long, default_value = "default")]
    pub config: String,
    /// Overrides `sim.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `sim.horizon_slots`.
    #[arg(long)]
    pub slots: Option<u64>,
    /// Overrides `control.policy`.
    #[arg(long, value_parser = parse_policy)]
    pub policy: Option<Policy>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    #[value(name = "control_v")]
    ControlV,
    /// Total number of TUs, spread evenly over the MISs.
    #[value(name = "tus")]
    Tus,
    /// Mean arrivals per TU per slot.
    #[value(name = "arrival_mean")]
    ArrivalMean,
    /// Maximum charge per slot, J.
    #[value(name = "e_max")]
    EMax,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::ControlV => "control_v",
            SweepParam::Tus => "tus",
            SweepParam::ArrivalMean => "arrival_mean",
            SweepParam::EMax => "e_max",
        }
    }

    /// Applies `value` to `cfg`.
    pub fn apply(self, cfg: &mut ScenarioConfig, value: f64) -> Result<()> {
        let bad = |reason: &str| Err(Error::field(self.name(), reason));
        if !value.is_finite() || value < 0.0 {
            return bad("must be finite and nonnegative");
        }
        match self {
            SweepParam::ControlV => cfg.control.control_v = value,
            SweepParam::Tus => {
                if value.fract() != 0.0 {
                    return bad("must be an integer");
                }
                cfg.set_total_tus(value as usize);
            }
            SweepParam::ArrivalMean => match cfg.traffic.arrival_pmf {
                // uniform over {0..g_max} has mean g_max / 2
                ArrivalPmf::Uniform => cfg.traffic.max_arrivals = (2.0 * value).round() as u64,
                ArrivalPmf::TruncatedPoisson => cfg.traffic.poisson_mean = value,
            },
            SweepParam::EMax => cfg.energy.max_charge_j_per_slot = value,
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long, value_enum)]
    pub param: SweepParam,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
    /// Replications per value; seeds are `seed, seed + 1, ...`.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub reps: u64,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub reps: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[arg(long, default_value_t = 100)]
    pub instances: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Where to write validation.json; nothing is written when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_policy(s: &str) -> std::result::Result<Policy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// One row of `sweep.csv` and `compare.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub param: String,
    pub value: f64,
    pub seed: u64,
    pub policy: String,
    pub avg_throughput: f64,
    pub avg_latency: Option<f64>,
    pub avg_queue: f64,
    pub avg_energy: f64,
    #[serde(rename = "final_Z_over_T")]
    pub final_z_over_t: f64,
    pub violation_rate: f64,
}

impl ResultRow {
    fn new(param: &str, value: f64, summary: &RunSummary) -> Self {
        Self {
            param: param.to_string(),
            value,
            seed: summary.seed,
            policy: summary.policy.clone(),
            avg_throughput: summary.avg_throughput_bps,
            avg_latency: summary.avg_latency_slots,
            avg_queue: summary.avg_queue_tasks,
            avg_energy: summary.avg_energy_j,
            final_z_over_t: summary.max_final_z_over_t,
            violation_rate: summary.violation_rate,
        }
    }
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    seed: u64,
    config: &'a ScenarioConfig,
    summary: &'a RunSummary,
}

/// Loads `default` or a TOML file, then applies the flag overrides.
pub fn resolve_config(args: &ConfigArgs) -> Result<ScenarioConfig> {
    let mut cfg = if args.config == "default" {
        ScenarioConfig::default()
    } else {
        ScenarioConfig::load(&args.config)?
    };
    if let Some(seed) = args.seed {
        cfg.sim.seed = seed;
    }
    if let Some(slots) = args.slots {
        cfg.sim.horizon_slots = slots;
    }
    if let Some(policy) = args.policy {
        cfg.control.policy = policy;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn prepare_dir(dir: &Path, cfg: &ScenarioConfig) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("resolved_config.toml");
    fs::write(&path, cfg.to_toml_string()).map_err(|e| Error::io(&path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_rows(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn run(args: &RunArgs) -> Result<RunSummary> {
    let cfg = resolve_config(&args.cfg)?;
    let dir = &args.cfg.out;
    prepare_dir(dir, &cfg)?;
    let slots_path = dir.join("slots.csv");
    let mut sink = CsvSink::new(create(&slots_path)?);
    let summary = Simulation::new(cfg.clone())?.run(&mut sink)?;
    sink.flush()?;
    let path = dir.join("summary.json");
    let doc = SummaryFile {
        seed: cfg.sim.seed,
        config: &cfg,
        summary: &summary,
    };
    let mut out = create(&path)?;
    serde_json::to_writer_pretty(&mut out, &doc)?;
    writeln!(out).map_err(|e| Error::io(&path, e))?;
    out.flush().map_err(|e| Error::io(&path, e))?;
    Ok(summary)
}

fn run_many(jobs: Vec<(String, f64, ScenarioConfig)>) -> Result<Vec<ResultRow>> {
    jobs.into_par_iter()
        .map(|(param, value, cfg)| {
            let summary = Simulation::new(cfg)?.run(&mut crate::sim::NullSink)?;
            Ok(ResultRow::new(&param, value, &summary))
        })
        .collect()
}

/// Rows ordered by value, then seed.
pub fn sweep(args: &SweepArgs) -> Result<Vec<ResultRow>> {
    let base = resolve_config(&args.cfg)?;
    if args.values.is_empty() {
        return Err(Error::field("values", "must not be empty"));
    }
    let mut jobs = Vec::new();
    for &value in &args.values {
        for rep in 0..args.reps {
            let mut cfg = base.clone();
            args.param.apply(&mut cfg, value)?;
            cfg.sim.seed = base.sim.seed + rep;
            cfg.validate()?;
            jobs.push((args.param.name().to_string(), value, cfg));
        }
    }
    prepare_dir(&args.cfg.out, &base)?;
    let rows = run_many(jobs)?;
    write_rows(&args.cfg.out.join("sweep.csv"), &rows)?;
    Ok(rows)
}

/// Rows ordered by seed, then policy.
pub fn compare(args: &CompareArgs) -> Result<Vec<ResultRow>> {
    let base = resolve_config(&args.cfg)?;
    let mut jobs = Vec::new();
    for rep in 0..args.reps {
        for policy in Policy::ALL {
            let mut cfg = base.clone();
            cfg.sim.seed = base.sim.seed + rep;
            cfg.control.policy = policy;
            jobs.push(("policy".to_string(), 0.0, cfg));
        }
    }
    prepare_dir(&args.cfg.out, &base)?;
    let rows = run_many(jobs)?;
    write_rows(&args.cfg.out.join("compare.csv"), &rows)?;
    Ok(rows)
}

pub fn validate(args: &ValidateArgs) -> Result<oracle::CertificationReport> {
    let report = oracle::certify(args.instances, args.seed);
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("validation.json");
        let mut out = create(&path)?;
        serde_json::to_writer_pretty(&mut out, &report)?;
        out.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(report)
}

/// Runs a parsed command and returns the process exit code.
pub fn execute(cli: &Cli) -> i32 {
    let outcome = match &cli.command {
        Command::Run(a) => run(a).map(|s| {
            println!(
                "{}: {} slots, throughput {:.4e} bit/s, queue {:.1} tasks",
                s.policy, s.slots, s.avg_throughput_bps, s.avg_queue_tasks
            );
            0
        }),
        Command::Sweep(a) => sweep(a).map(|rows| {
            println!("{} rows written to {}", rows.len(), a.cfg.out.join("sweep.csv").display());
            0
        }),
        Command::Compare(a) => compare(a).map(|rows| {
            println!("{} rows written to {}", rows.len(), a.cfg.out.join("compare.csv").display());
            0
        }),
        Command::Validate(a) => validate(a).map(|r| {
            println!(
                "certified {}/{} instances ({} joint searches)",
                r.certified, r.instances, r.joint_checked
            );
            for f in &r.failures {
                eprintln!("instance {}: {}", f.index, f.mismatches.join("; "));
            }
            if r.all_certified() {
                0
            } else {
                2
            }
        }),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        1
    })
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli),
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            code
        }
    }
}
