use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use mdr_core::cost::{prob_cost_within, s_str, s_str_estimated, CostParams, NTildeLaw};
use mdr_core::harness::{format_g, planning_table, run_to_csv, write_plan_csv, Experiment};
use mdr_core::selfcheck::run_checks;
use mdr_core::{lambda0, Error, ExperimentConfig};

#[derive(Parser)]
#[command(name = "mdr-efe", version, about = "Stratified versus i.i.d. MDR-EFE under a sampling budget")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the method comparison and write the TMR report as CSV.
    Run(RunArgs),
    /// Largest stratified size that fits a budget with probability 1 - alpha.
    Plan(PlanArgs),
    /// Planned sizes for every (gamma, C, w) of a configuration, as CSV.
    PlanTable(TableArgs),
    /// Run the statistical self-checks.
    Selftest {
        /// Include the desk-scale method comparison (takes minutes).
        #[arg(long)]
        full: bool,
    },
    /// Print a preset configuration as JSON.
    Dump {
        #[arg(long, default_value = "desk")]
        preset: String,
    },
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["config", "preset"])))]
struct ConfigSource {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in configuration: `desk` or `table1`.
    #[arg(long)]
    preset: Option<String>,
}

impl ConfigSource {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::from_file(path),
            (None, Some(name)) => {
                ExperimentConfig::preset(name).ok_or_else(|| Error::InvalidConfig(format!("unknown preset {name:?}")))
            }
            (None, None) => unreachable!("clap requires one source"),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: ConfigSource,
    /// Overrides the configured base seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Keep the finished cells of an interrupted run with the same settings.
    #[arg(long)]
    resume: bool,
    /// Suppress progress output.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Args)]
#[command(group(ArgGroup::new("p").required(true).args(["prevalence", "prevalence_estimate"])))]
struct PlanArgs {
    /// Budget C in units of one analyzed observation.
    #[arg(long)]
    budget: u64,
    /// Price of a raw draw relative to an analyzed observation.
    #[arg(long)]
    price_ratio: f64,
    /// Case fraction a of the stratified sample.
    #[arg(long, default_value_t = 0.5)]
    ratio: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Known case prevalence.
    #[arg(long)]
    prevalence: Option<f64>,
    /// Estimated case prevalence.
    #[arg(long)]
    prevalence_estimate: Option<f64>,
}

#[derive(Args)]
struct TableArgs {
    #[command(flatten)]
    source: ConfigSource,
    /// Output CSV (standard output if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidConfig(_) | Error::InvalidParameter(_) | Error::InvalidMaf(_) | Error::IndexOutOfRange { .. } => 2,
        Error::NoFeasibleSize { .. } => 3,
        _ => 1,
    }
}

fn run(args: RunArgs) -> Result<(), Error> {
    let mut config = args.source.load()?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let experiment = Experiment::new(config)?;
    let quiet = args.quiet;
    let report = run_to_csv(&experiment, &args.out, args.resume, |done, total| {
        if !quiet {
            eprintln!("cell {done}/{total} done");
        }
    })?;
    if !report.failures.is_empty() {
        eprintln!("{} arm replicates could not be analyzed and count as misses", report.failures.len());
        for f in report.failures.iter().take(10) {
            eprintln!("  {} gamma={} C={} w={} d={}: {}", f.variant, f.gamma, f.budget, f.w, f.replicate, f.reason);
        }
    }
    if !quiet {
        eprintln!("wrote {} rows to {}", report.rows.len(), args.out.display());
    }
    Ok(())
}

fn plan(args: PlanArgs) -> Result<(), Error> {
    let params = CostParams::new(args.budget, args.price_ratio, args.ratio, args.alpha)?;
    let (p, n) = match (args.prevalence, args.prevalence_estimate) {
        (Some(p), _) => (p, s_str(&params, p)?),
        (None, Some(p)) => (p, s_str_estimated(&params, p)?),
        (None, None) => unreachable!("clap requires one prevalence"),
    };
    let law = NTildeLaw::for_design(n, args.ratio, p)?;
    let mut out = io::stdout().lock();
    writeln!(out, "s_str={n}")?;
    writeln!(out, "P(cost <= C)={}", prob_cost_within(n, &params, p)?)?;
    writeln!(out, "E[draws]={}", law.mean())?;
    if let Some(limit) = params.draw_limit(n).filter(|&t| t != u64::MAX) {
        writeln!(out, "draw_limit={limit}")?;
    }
    for level in [0.05, 0.5, 1.0 - args.alpha] {
        writeln!(out, "draws_q{}={}", format_g(level), law.quantile(level))?;
    }
    writeln!(out, "lambda0={}", lambda0(args.ratio, args.price_ratio, p))?;
    Ok(())
}

fn plan_table(args: TableArgs) -> Result<(), Error> {
    let rows = planning_table(&args.source.load()?)?;
    match args.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            write_plan_csv(&mut w, &rows)?;
            w.flush()?;
        }
        None => write_plan_csv(io::stdout().lock(), &rows)?,
    }
    Ok(())
}

fn selftest(full: bool) -> Result<bool, Error> {
    let results = run_checks(full)?;
    for r in &results {
        println!("{} {:<22} {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    Ok(results.iter().all(|r| r.passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Plan(args) => plan(args),
        Command::PlanTable(args) => plan_table(args),
        Command::Selftest { full } => match selftest(full) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::FAILURE,
            Err(e) => Err(e),
        },
        Command::Dump { preset } => ExperimentConfig::preset(&preset)
            .map(|c| println!("{}", c.to_json()))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown preset {preset:?}"))),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
