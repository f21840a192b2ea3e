//! `pivotk`: tables, sweeps, advice, simulation, replay and the property
//! battery. Exit codes: 0 success, 1 invalid input, 2 property failure.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use pivotk_core::report::{
    cmd_advise, cmd_sweep, cmd_table_coalition, cmd_table_cost, cmd_table_main, cmd_verify,
    AnalysisConfig, Fault, OutputFormat, Report, SweepKind, VerifyOptions,
};
use pivotk_core::simulator::{
    read_traces_jsonl, replay, simulate_records, write_traces_jsonl, AdversaryPolicy,
};
use pivotk_core::{Execution, SystemInstance};

#[derive(Parser)]
#[command(
    name = "pivotk",
    version,
    about = "Withholding incentives for coded multi-proposer inclusion"
)]
struct Cli {
    /// JSON configuration; omitted fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `mc.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Run data-parallel loops on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Table => OutputFormat::Table,
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Delay,
    Ratchet,
    Race,
    Coalition,
    Bounds,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyName {
    FullInclude,
    FullWithhold,
    MinimalSabotage,
}

#[derive(Subcommand)]
enum Command {
    /// Delay, ratchet and within-slot probabilities with the static bounty.
    TableMain,
    /// Unilateral safety and coalition-sufficient bounties.
    TableCoalition,
    /// Bounty cost in USD per MEV tier.
    TableCost,
    /// Per-kappa series over the sweep range.
    Sweep {
        #[arg(long, value_enum, default_value_t = Kind::Delay)]
        kind: Kind,
    },
    /// Run the property battery; exits 2 on any failure.
    Verify {
        /// Plant a known fault to check that the battery catches it.
        #[arg(long)]
        inject_fault: Option<String>,
        /// Comma-separated suite names.
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<String>>,
        /// Overrides `mc.verify_paths`.
        #[arg(long)]
        paths: Option<u64>,
    },
    /// Recommendation for one operating point.
    Advise {
        /// Overrides `advise_kappa`.
        #[arg(long)]
        kappa: Option<u32>,
    },
    /// Simulate traces and write them as JSON lines.
    Simulate {
        /// Threshold in bundles; defaults to the first configured instance.
        #[arg(long)]
        kappa: Option<u32>,
        /// Overrides `output.policy`.
        #[arg(long, value_enum)]
        policy: Option<PolicyName>,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        /// Output file; defaults to `output.traces`, then stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run recorded traces and require bit-exact agreement.
    Replay { path: PathBuf },
    /// Print the effective configuration as JSON.
    ShowConfig,
}

/// Distinguishes property failures from input errors for the exit code.
struct PropertyFailure;

fn load_config(cli: &Cli) -> Result<AnalysisConfig> {
    let cfg = match &cli.config {
        Some(path) => AnalysisConfig::load(path)?,
        None => AnalysisConfig::default(),
    };
    Ok(cfg.with_seed(cli.seed))
}

fn emit(report: &Report, cli: &Cli, cfg: &AnalysisConfig) -> Result<()> {
    let text = report.render(cli.format.into(), cfg)?;
    io::stdout().write_all(text.as_bytes())?;
    Ok(())
}

fn run(cli: &Cli) -> Result<std::result::Result<(), PropertyFailure>> {
    let mut cfg = load_config(cli)?;
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match &cli.command {
        Command::TableMain => emit(&cmd_table_main(&cfg)?, cli, &cfg)?,
        Command::TableCoalition => emit(&cmd_table_coalition(&cfg)?, cli, &cfg)?,
        Command::TableCost => emit(&cmd_table_cost(&cfg)?, cli, &cfg)?,
        Command::Sweep { kind } => {
            let kind = match kind {
                Kind::Delay => SweepKind::Delay,
                Kind::Ratchet => SweepKind::Ratchet,
                Kind::Race => SweepKind::Race,
                Kind::Coalition => SweepKind::Coalition,
                Kind::Bounds => SweepKind::Bounds,
            };
            emit(&cmd_sweep(&cfg, kind, exec)?, cli, &cfg)?;
        }
        Command::Advise { kappa } => {
            if let Some(k) = kappa {
                cfg.advise_kappa = *k;
            }
            emit(&cmd_advise(&cfg)?, cli, &cfg)?;
        }
        Command::Verify {
            inject_fault,
            only,
            paths,
        } => {
            if let Some(p) = paths {
                cfg.mc.verify_paths = *p;
            }
            let options = VerifyOptions {
                exec,
                inject_fault: inject_fault
                    .as_deref()
                    .map(str::parse::<Fault>)
                    .transpose()?,
                only: only.clone(),
            };
            let report = cmd_verify(&cfg, &options)?;
            let text = match cli.format {
                Format::Json => {
                    let doc = serde_json::json!({ "seed": report.seed, "passed": report.passed,
                        "config": cfg, "suites": report.suites });
                    serde_json::to_string_pretty(&doc)? + "\n"
                }
                _ => report.summary(),
            };
            io::stdout().write_all(text.as_bytes())?;
            if !report.passed {
                return Ok(Err(PropertyFailure));
            }
        }
        Command::Simulate {
            kappa,
            policy,
            trials,
            out,
        } => {
            if *trials == 0 {
                bail!("--trials must be at least 1");
            }
            let instance = match kappa {
                Some(k) => SystemInstance::new(cfg.n, cfg.m, cfg.s, k * cfg.s)?,
                None => cfg.instances()?[0],
            };
            let policy = match policy {
                Some(PolicyName::FullInclude) => AdversaryPolicy::FullInclude,
                Some(PolicyName::FullWithhold) => AdversaryPolicy::FullWithhold,
                Some(PolicyName::MinimalSabotage) => AdversaryPolicy::MinimalSabotage,
                None => cfg.output.policy.clone(),
            };
            let records = simulate_records(
                &instance,
                &cfg.cartel()?,
                &policy,
                &cfg.econ_params()?,
                cfg.output.mechanism,
                *trials,
                cfg.mc.seed,
                exec,
            )?;
            let target = out
                .clone()
                .or_else(|| cfg.output.traces.as_ref().map(PathBuf::from));
            match target {
                Some(path) => {
                    let file = File::create(&path)
                        .with_context(|| format!("creating {}", path.display()))?;
                    write_traces_jsonl(&records, BufWriter::new(file))?;
                    let delayed = records.iter().filter(|r| r.trace.delayed).count();
                    eprintln!(
                        "wrote {} traces ({delayed} delayed) to {}",
                        records.len(),
                        path.display()
                    );
                }
                None => write_traces_jsonl(&records, io::stdout().lock())?,
            }
        }
        Command::Replay { path } => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let records = read_traces_jsonl(BufReader::new(file))?;
            match replay(&records) {
                Ok(n) => println!("replayed {n} traces: all match"),
                Err(e) => {
                    eprintln!("replay mismatch: {e}");
                    return Ok(Err(PropertyFailure));
                }
            }
        }
        Command::ShowConfig => println!("{}", serde_json::to_string_pretty(&cfg)?),
    }
    Ok(Ok(()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(PropertyFailure)) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
