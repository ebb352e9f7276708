use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sche::config::{env_overrides, parse_config_with, Command};
use sche::runner::{load_config_text, run, RunOptions};
use sche::Error;

#[derive(Parser, Debug)]
#[command(name = "sche", version, about = "Stochastic Cahn-Hilliard solver and experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Configuration file (`key = value`), or any output file with a metadata header.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the `seed` key.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads for ensemble loops (default: all cores).
    #[arg(long, global = true, env = "SCHE_THREADS")]
    threads: Option<usize>,

    /// Byte-reproducible output (no timestamps or wall-clock values).
    #[arg(long, global = true)]
    deterministic: bool,

    /// Also write SVG line charts.
    #[arg(long, global = true)]
    svg: bool,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Single trajectory with snapshots and a final checkpoint.
    Simulate {
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Strong error against a fine-step reference over a step-size ladder.
    ConvergeTime,
    /// Strong error against a fine-grid reference over a grid ladder.
    ConvergeSpace,
    /// Time averages of test functionals (single trajectory and/or ensemble).
    Ergodic,
    /// Invariant suite; prints PASS/FAIL per check.
    Verify,
}

fn fail(kind: &str, e: &Error) -> ExitCode {
    // Single machine-readable line on stderr, then the full message.
    let msg = e.to_string().replace('\n', " | ");
    eprintln!("error: kind={kind} message=\"{}\"", msg.replace('"', "'"));
    ExitCode::from(if kind == "config" { 2 } else { 1 })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let (command, resume) = match &cli.command {
        Cmd::Simulate { resume } => (Command::Simulate, resume.clone()),
        Cmd::ConvergeTime => (Command::ConvergeTime, None),
        Cmd::ConvergeSpace => (Command::ConvergeSpace, None),
        Cmd::Ergodic => (Command::Ergodic, None),
        Cmd::Verify => (Command::Verify, None),
    };

    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail("threads", &Error::InvalidParameter(e.to_string()));
        }
    }

    let text = match &cli.config {
        Some(p) => match load_config_text(p) {
            Ok(t) => t,
            Err(e) => return fail("io", &e),
        },
        None => String::new(),
    };
    let mut overrides = env_overrides(|k| std::env::var(k).ok());
    if let Some(s) = cli.seed {
        overrides.push(("seed".into(), s.to_string()));
    }
    let cfg = match parse_config_with(&text, &overrides, Some(command)) {
        Ok(c) => c,
        Err(e) => return fail("config", &e),
    };

    let opts = RunOptions {
        out_dir: cli.out.clone(),
        svg: cli.svg,
        deterministic: cli.deterministic,
        resume,
    };
    match run(&cfg, &opts) {
        Ok(outcome) => {
            for m in &outcome.messages {
                println!("{m}");
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if outcome.success {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: kind=verify message=\"invariant suite reported failures\"");
                ExitCode::from(1)
            }
        }
        Err(e) => fail("run", &e),
    }
}
