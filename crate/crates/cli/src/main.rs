use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use vmg_core::game_core::seeded_rng;
use vmg_core::harness::{
    fit_regret_slope, generate_env, load_trace_csv, run_experiment, verify_env, EnvDocument, EnvKind, EXIT_CONFIG,
};

/// Value-incentivized model-based learning simulator.
#[derive(Parser)]
#[command(name = "vmg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of an experiment config; exits 0 on success, 1 on a bad config, 2 if any run failed.
    Run { config: PathBuf },
    /// Fit log cumulative regret against log round over the second half of a trace.
    Fit { trace: PathBuf },
    /// Generate and save a seeded environment.
    GenEnv {
        /// matrix, symmetric, markov_finite or markov_infinite
        #[arg(long)]
        kind: EnvKind,
        #[arg(long)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Re-check every invariant of a saved environment.
    Verify { env: PathBuf },
}

fn exec(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Run { config } => {
            let outcome = run_experiment(&config)?;
            let failed = outcome.summary.runs.iter().filter(|r| r.error.is_some()).count();
            println!(
                "{} runs, {} failed; summary at {}",
                outcome.summary.runs.len(),
                failed,
                outcome.summary_path.display()
            );
            Ok(outcome.exit_code as u8)
        }
        Command::Fit { trace } => {
            let t = load_trace_csv(&trace).with_context(|| format!("reading {}", trace.display()))?;
            let fit = fit_regret_slope(&t)?;
            println!("{}", serde_json::to_string(&fit)?);
            Ok(0)
        }
        Command::GenEnv { kind, seed, output } => {
            let env = generate_env(kind, &mut seeded_rng(seed))?;
            let doc = EnvDocument::from_environment(&env, Some(seed));
            doc.save(&output).with_context(|| format!("writing {}", output.display()))?;
            println!("{}", verify_env(&doc)?);
            Ok(0)
        }
        Command::Verify { env } => {
            let doc = EnvDocument::load(&env)?;
            println!("ok: {}", verify_env(&doc)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG as u8);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match exec(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG as u8)
        }
    }
}
