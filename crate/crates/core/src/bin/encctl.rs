//! Command-line front end: closed-loop runs with CSV output, controller
//! conversions, the parameter budget report, and a packed-vs-no-packing
//! latency comparison.
//!
//! Exit codes: 0 success, 2 configuration error, 3 budget refusal, 4 error
//! thresholds breached under --assert.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use encctl::harness::{
    self, check_params, conversion_report, error_limits, run_rgsw_loop, run_rgsw_nopack_loop,
    RunConfig, Scheme,
};
use encctl::Error;

#[derive(Parser)]
#[command(name = "encctl", version, about = "Encrypted linear feedback control simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a closed-loop run and write the trajectory as CSV
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the scheme from the config (rgsw-packed, rgsw-nopack, bgv, baseline)
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV output path (overrides the config's `output`)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit 4 when the run breaches the scheme's error ceilings
        #[arg(long, action = clap::ArgAction::SetTrue)]
        assert: bool,
    },
    /// Emit the integer-state and input-output conversions as JSON
    Convert {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the parameter budget report
    CheckParams {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare per-step latency of the packed and no-packing pipelines
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 30)]
        steps: usize,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_ASSERT: u8 = 4;

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::BudgetRefusal(_) => EXIT_BUDGET,
        _ => EXIT_CONFIG,
    }
}

fn cmd_run(
    config: PathBuf,
    scheme: Option<String>,
    steps: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    assert_limits: bool,
) -> Result<u8, Error> {
    let mut cfg = RunConfig::from_file(&config)?;
    if let Some(s) = scheme {
        cfg.scheme = s.parse::<Scheme>()?;
    }
    if let Some(s) = steps {
        cfg.steps = s;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let log = harness::run(&cfg)?;
    let out_path = out.or_else(|| cfg.output.as_ref().map(PathBuf::from));
    if let Some(path) = &out_path {
        log.write_csv(path)?;
        println!("wrote {} rows to {}", log.len(), path.display());
    }
    print!("{}", log.summary());
    if assert_limits {
        if let Some((max_limit, mean_limit)) = error_limits(cfg.scheme) {
            if log.max_err() > max_limit || log.mean_err() > mean_limit {
                eprintln!(
                    "error thresholds breached: max {} (limit {max_limit}), mean {} (limit {mean_limit})",
                    log.max_err(),
                    log.mean_err()
                );
                return Ok(EXIT_ASSERT);
            }
        }
    }
    Ok(0)
}

fn cmd_convert(config: PathBuf, out: Option<PathBuf>) -> Result<u8, Error> {
    let cfg = RunConfig::from_file(&config)?;
    let report = conversion_report(&cfg)?;
    let text = serde_json::to_string_pretty(&report).expect("json serialization");
    match out {
        Some(path) => {
            std::fs::write(&path, text)?;
            println!("wrote conversions to {}", path.display());
        }
        None => println!("{text}"),
    }
    Ok(0)
}

fn cmd_check_params(config: PathBuf) -> Result<u8, Error> {
    let cfg = RunConfig::from_file(&config)?;
    let report = check_params(&cfg)?;
    print!("{}", report.render());
    println!(
        "overall: {}",
        if report.passes() { "PASS" } else { "FAIL" }
    );
    Ok(0)
}

fn cmd_bench(config: PathBuf, steps: usize) -> Result<u8, Error> {
    let mut cfg = RunConfig::from_file(&config)?;
    cfg.steps = steps;
    cfg.scheme = Scheme::RgswPacked;
    let packed = run_rgsw_loop(&cfg)?;
    let nopack = run_rgsw_nopack_loop(&cfg)?;
    println!("steps per mode: {steps}, seed: {}", cfg.seed);
    println!(
        "rgsw-packed : median {:.3} ms, mean {:.3} ms",
        packed.median_latency_ms(),
        packed.mean_latency_ms()
    );
    println!(
        "rgsw-nopack : median {:.3} ms, mean {:.3} ms",
        nopack.median_latency_ms(),
        nopack.mean_latency_ms()
    );
    println!(
        "nopack/packed median ratio: {:.2}",
        nopack.median_latency_ms() / packed.median_latency_ms()
    );
    Ok(0)
}

fn main() -> ExitCode {
    harness::init_threads_from_env();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            scheme,
            steps,
            seed,
            out,
            assert,
        } => cmd_run(config, scheme, steps, seed, out, assert),
        Command::Convert { config, out } => cmd_convert(config, out),
        Command::CheckParams { config } => cmd_check_params(config),
        Command::Bench { config, steps } => cmd_bench(config, steps),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
