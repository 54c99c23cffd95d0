use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use madc::model::build_instance;
use madc::report::{maxlink_instance, maxlink_target, simulate, RunError};
use madc_cli::sweep::{run_sweep, write_csv, write_rows, SweepSpec};
use madc_cli::table::bounds_table;
use madc_cli::{fmt_rational, verify, CliError, Format, Mode, Selection};

#[derive(Parser, Debug)]
#[command(
    name = "madc",
    version,
    about = "Multi-access coded distributed computing: simulator and load bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form loads for one topology
    Bounds(BoundsArgs),
    /// Run map, shuffle, decode (and delivery) on one instance
    Simulate(SimulateArgs),
    /// Evaluate bounds over a parameter grid and write CSV or JSON
    Sweep(SweepArgs),
    /// Run the property suites up to a given number of mappers
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[arg(long)]
    lambda: usize,
    #[arg(long)]
    alpha: usize,
    /// Single computation load; all valid loads if omitted
    #[arg(long)]
    r: Option<usize>,
    #[arg(long, value_enum, default_value_t = Mode::Comm)]
    mode: Mode,
    /// Write to a file instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    lambda: usize,
    #[arg(long)]
    alpha: usize,
    #[arg(long)]
    r: usize,
    /// Number of files
    #[arg(long, conflicts_with = "maxlink")]
    n: Option<usize>,
    /// Number of reduce functions
    #[arg(long)]
    q: Option<usize>,
    /// Bits per intermediate value
    #[arg(long)]
    t: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Place files by the max-link LP optimum and run delivery too
    #[arg(long)]
    maxlink: bool,
    /// Write the transcript summary as JSON
    #[arg(long)]
    transcript: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// `a..b`, `a,b,c` or a single value
    #[arg(long)]
    lambda: Selection,
    #[arg(long, default_value = "all")]
    alpha: Selection,
    #[arg(long, default_value = "all")]
    r: Selection,
    #[arg(long, value_enum, default_value_t = Mode::Comm)]
    mode: Mode,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(2..))]
    max_lambda: u64,
}

/// Failures split by exit code: bad parameters (2) vs. a run that did not
/// verify (1).
enum Failure {
    Usage(anyhow::Error),
    Verify(anyhow::Error),
}

impl From<CliError> for Failure {
    fn from(e: CliError) -> Self {
        match e {
            CliError::Io { .. } | CliError::Csv { .. } | CliError::Json { .. } => Failure::Verify(e.into()),
            _ => Failure::Usage(e.into()),
        }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Model(_) | RunError::Bounds(_) => Failure::Usage(e.into()),
            _ => Failure::Verify(e.into()),
        }
    }
}

fn cmd_bounds(args: BoundsArgs) -> Result<(), Failure> {
    let rows = bounds_table(args.lambda, args.alpha, args.r, args.mode)?;
    match &args.output {
        Some(path) => write_rows(&rows, path, args.format)?,
        None => {
            let stdout = io::stdout().lock();
            match args.format {
                Format::Csv => write_csv(&rows, stdout)
                    .context("writing stdout")
                    .map_err(Failure::Verify)?,
                Format::Json => {
                    serde_json::to_writer_pretty(stdout, &rows)
                        .context("writing stdout")
                        .map_err(Failure::Verify)?;
                    println!();
                }
            }
        }
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<bool, Failure> {
    let instance = if args.maxlink {
        maxlink_instance(args.lambda, args.alpha, args.r, args.q, args.t, args.seed)?
    } else {
        build_instance(args.lambda, args.alpha, args.r, args.n, args.q, args.t, args.seed).map_err(RunError::from)?
    };
    let inst = instance.clone();
    println!(
        "instance: lambda={} alpha={} r={} N={} Q={} T={} K={} seed={}",
        inst.num_mappers,
        inst.access_degree,
        inst.computation_load,
        inst.num_files,
        inst.num_functions,
        inst.iv_bits,
        inst.num_reducers(),
        inst.seed
    );
    if let Some(p) = &inst.level_profile {
        println!("level profile: {p:?}");
    }

    let (report, transcript) = simulate(instance, args.maxlink)?;
    let sizes: std::collections::BTreeSet<usize> = transcript.shuffle_messages.iter().map(|m| m.bits()).collect();
    println!("messages: {} (bits per message: {sizes:?})", report.num_messages);
    println!("decode: all reducers match the map output");
    println!(
        "L: measured {} formula {}",
        fmt_rational(&report.comm_load),
        fmt_rational(&report.comm_load_formula)
    );
    let mut ok = report.passed();
    if let (Some(j), Some(jf)) = (&report.download_cost, &report.download_cost_formula) {
        println!("J: measured {} formula {}", fmt_rational(j), fmt_rational(jf));
    }
    if let (Some(m), Some(mf)) = (&report.maxlink, &report.maxlink_formula) {
        println!("max(L, J): measured {} formula {}", fmt_rational(m), fmt_rational(mf));
        let target = maxlink_target(args.lambda, args.alpha, args.r).map_err(RunError::from)?;
        println!("max-link bound at LP optimum: {}", fmt_rational(&target));
        ok &= *m == target;
    }
    if let Some(eq) = report.equalized {
        println!("links equalized: {eq}");
    }

    if let Some(path) = &args.transcript {
        let write = || -> anyhow::Result<()> {
            let mut out = BufWriter::new(File::create(path)?);
            serde_json::to_writer_pretty(&mut out, &transcript.summary())?;
            out.write_all(b"\n")?;
            out.flush()?;
            Ok(())
        };
        write()
            .with_context(|| format!("writing transcript to {}", path.display()))
            .map_err(Failure::Verify)?;
    }
    println!("{}", if ok { "PASS" } else { "FAIL" });
    Ok(ok)
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Failure> {
    let spec = SweepSpec {
        lambdas: args.lambda,
        alphas: args.alpha,
        rs: args.r,
        mode: args.mode,
        output: args.output,
        format: args.format,
    };
    let n = run_sweep(&spec)?;
    eprintln!("wrote {n} rows to {}", spec.output.display());
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> bool {
    let results = verify::run_all(args.max_lambda as usize);
    for s in &results {
        println!("{s}");
    }
    let ok = results.iter().all(|s| s.passed());
    println!("{}", if ok { "ALL PASS" } else { "FAILED" });
    ok
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Bounds(a) => cmd_bounds(a).map(|()| true),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a).map(|()| true),
        Command::Verify(a) => Ok(cmd_verify(a)),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Verify(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
