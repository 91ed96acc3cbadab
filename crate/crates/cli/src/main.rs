//! `limithit`: price-limit hit analytics over A-share style tick data.
//!
//! Subcommands: validate, hits, summary, intraday, fit, prehit, synth.
//! Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
//! failure.

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

mod commands;
mod config;
mod pipeline;
mod reports;

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Data(String),
    Numerical(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

const USAGE: &str = "\
limithit -- price-limit hit analytics for A-share style tick data

usage: limithit <command> [options]

commands:
  validate            ingest inputs, report row/session defects and totals
  hits                emit per-day hit records (hits.csv)
  summary             emit counter, pooled-statistics and per-stock tables
  intraday            emit first-hit occurrence counts per intraday bin
  fit --target T      histogram + truncated-normal fits (OLS and MLE);
                      T: hit_prob | daily_hits | duration | span | per_stock_means
  prehit              emit velocity profiles and event-study series
  synth <scenario>    generate a corpus + manifest from a scenario JSON
  synth --demo        generate the bundled demo corpus
                      (--stocks N, --days N, --seed N)

options:
  --config <file>     key=value configuration file
  --set key=value     override one configuration key (repeatable)
  --ticks <file>      tick CSV input (same as --set ticks=...)
  --sidecar <file>    sidecar CSV input
  --out <dir>         output directory (default: out)
  --threads <n>       worker threads; outputs are identical for any n
  --help              this text

config keys and defaults are printed by `limithit validate`.
";

struct Args {
    command: String,
    config_file: Option<PathBuf>,
    overrides: Vec<(String, String)>,
    scenario: Option<PathBuf>,
    demo: bool,
    demo_stocks: usize,
    demo_days: usize,
    demo_seed: u64,
    fit_target: Option<String>,
}

fn parse_args(argv: &[String]) -> Result<Args, CliError> {
    let mut args = Args {
        command: String::new(),
        config_file: None,
        overrides: Vec::new(),
        scenario: None,
        demo: false,
        demo_stocks: 50,
        demo_days: 250,
        demo_seed: 1,
        fit_target: None,
    };
    let mut it = argv.iter().peekable();
    let Some(cmd) = it.next() else {
        return Err(CliError::Usage("missing command".into()));
    };
    args.command = cmd.clone();
    while let Some(arg) = it.next() {
        let mut value_of = |name: &str| -> Result<String, CliError> {
            it.next()
                .cloned()
                .ok_or_else(|| CliError::Usage(format!("{name} needs a value")))
        };
        match arg.as_str() {
            "--config" => args.config_file = Some(PathBuf::from(value_of("--config")?)),
            "--set" => {
                let kv = value_of("--set")?;
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got `{kv}`")))?;
                args.overrides.push((k.to_string(), v.to_string()));
            }
            "--ticks" => args.overrides.push(("ticks".into(), value_of("--ticks")?)),
            "--sidecar" => args.overrides.push(("sidecar".into(), value_of("--sidecar")?)),
            "--out" => args.overrides.push(("out_dir".into(), value_of("--out")?)),
            "--threads" => args.overrides.push(("threads".into(), value_of("--threads")?)),
            "--target" => args.fit_target = Some(value_of("--target")?),
            "--demo" => args.demo = true,
            "--stocks" => {
                args.demo_stocks = value_of("--stocks")?
                    .parse()
                    .map_err(|_| CliError::Usage("--stocks expects a number".into()))?
            }
            "--days" => {
                args.demo_days = value_of("--days")?
                    .parse()
                    .map_err(|_| CliError::Usage("--days expects a number".into()))?
            }
            "--seed" => {
                args.demo_seed = value_of("--seed")?
                    .parse()
                    .map_err(|_| CliError::Usage("--seed expects a number".into()))?
            }
            "--help" | "-h" => {
                print!("{USAGE}");
                std::process::exit(0);
            }
            other if !other.starts_with('-') && args.command == "synth" && args.scenario.is_none() => {
                args.scenario = Some(PathBuf::from(other));
            }
            other => return Err(CliError::Usage(format!("unknown argument `{other}`"))),
        }
    }
    Ok(args)
}

fn run() -> Result<(), CliError> {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    if argv.is_empty() || argv[0] == "--help" || argv[0] == "-h" || argv[0] == "help" {
        print!("{USAGE}");
        return Ok(());
    }
    let args = parse_args(&argv)?;
    let cfg = RunConfig::load(args.config_file.as_deref(), &args.overrides)?;
    match args.command.as_str() {
        "validate" => commands::cmd_validate(&cfg),
        "hits" => commands::cmd_hits(&cfg),
        "summary" => commands::cmd_summary(&cfg),
        "intraday" => commands::cmd_intraday(&cfg),
        "fit" => {
            let target = args
                .fit_target
                .as_deref()
                .ok_or_else(|| CliError::Usage("fit needs --target".into()))?;
            commands::cmd_fit(&cfg, target)
        }
        "prehit" => commands::cmd_prehit(&cfg),
        "synth" => commands::cmd_synth(
            &cfg,
            args.scenario.as_deref(),
            args.demo.then_some((args.demo_stocks, args.demo_days, args.demo_seed)),
        ),
        other => Err(CliError::Usage(format!("unknown command `{other}`"))),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("limithit: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
