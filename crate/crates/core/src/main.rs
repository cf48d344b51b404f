use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mala_lab::finite_chain;
use mala_lab::sweep::{self, Experiment, SweepConfig};
use mala_lab::verify::{self, VerifyOptions};
use mala_lab::Result;

#[derive(Parser, Debug)]
#[command(name = "mala-lab", version, about = "MALA sampling experiments and self-checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// key=value config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true, env = "SEED")]
    seed: Option<u64>,

    /// Output CSV (stdout when absent)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Extra config overrides, `key=value`
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the oracle and finite-chain self-check suite
    Verify {
        /// Corrupt the acceptance ratio (negative control)
        #[arg(long, hide = true)]
        corrupt_acceptance: bool,
    },
    SweepAccept,
    SweepGap,
    SweepCollapse,
    /// Mixing-step counts (lower bounds, from the sliced-TV proxy)
    Mix,
    /// Exact checks on random finite chains
    FiniteSelftest {
        #[arg(long, default_value_t = 500)]
        instances: usize,
        #[arg(long, default_value_t = 10)]
        max_states: usize,
        #[arg(long, default_value_t = 50)]
        steps: usize,
    },
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn load_config(cli: &Cli, experiment: Experiment) -> Result<SweepConfig> {
    let mut text = match &cli.config {
        Some(p) => fs::read_to_string(p)?,
        None => String::new(),
    };
    for o in &cli.overrides {
        text.push('\n');
        text.push_str(o);
    }
    let mut cfg = SweepConfig::parse(experiment, &text)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_path = Some(out.clone());
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| mala_lab::Error::Resource(e.to_string()))?;
    }
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Verify { corrupt_acceptance } => {
            let report = verify::run_verify(seed, VerifyOptions { corrupt_acceptance: *corrupt_acceptance })?;
            report.write_csv(output(cli.out.as_deref())?)?;
            let failures = report.failures();
            if failures.is_empty() {
                eprintln!("verify: {} checks passed", report.rows.len());
                return Ok(ExitCode::SUCCESS);
            }
            for f in failures {
                eprintln!("FAILED {} measured={} bound={} slack={}", f.check, f.measured, f.bound, f.slack);
            }
            Ok(ExitCode::FAILURE)
        }
        Command::FiniteSelftest { instances, max_states, steps } => {
            let report = finite_chain::random_suite(*instances, *max_states, *steps, seed)?;
            report.write_csv(output(cli.out.as_deref())?)?;
            for (check, slack) in report.worst_by_check() {
                eprintln!("{check}: worst slack {slack:.3e}");
            }
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        cmd => {
            let experiment = match cmd {
                Command::SweepAccept => Experiment::Accept,
                Command::SweepGap => Experiment::Gap,
                Command::SweepCollapse => Experiment::Collapse,
                _ => Experiment::Mix,
            };
            let cfg = load_config(cli, experiment)?;
            let rows = sweep::run_sweep(&cfg)?;
            sweep::write_rows(&rows, output(cfg.output_path.as_deref())?)?;
            if experiment == Experiment::Mix {
                eprintln!("mix: step counts are lower bounds on the mixing time (sliced-TV proxy); compare trends only");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
