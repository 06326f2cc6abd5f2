use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stochabs::pipeline::{self, RunOptions, Stage, Status, SweepAxis};
use stochabs::scenario::Loaded;

#[derive(Parser)]
#[command(name = "stochabs", version, about = "Compositional abstractions of interconnected stochastic systems")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the pipeline on a scenario file.
    Run {
        scenario: PathBuf,
        /// Comma-separated subset of verify,compose,bound,abstract,synthesize,simulate.
        #[arg(long)]
        stages: Option<String>,
        /// Treat boundary verdicts as failures.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        runs: Option<usize>,
        /// Artifact directory (default `out/<scenario name>`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Error surface along N, epsilon or delta.
    Sweep {
        scenario: PathBuf,
        #[arg(long)]
        over: String,
        /// Output CSV (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(cmd: Cmd) -> stochabs::Result<ExitCode> {
    match cmd {
        Cmd::Run { scenario, stages, strict, seed, runs, out } => {
            let loaded = Loaded::from_file(&scenario)?;
            let stages = match stages {
                Some(s) => pipeline::parse_stages(&s)?,
                None => Stage::ALL.into_iter().collect(),
            };
            let out = out.unwrap_or_else(|| PathBuf::from("out").join(&loaded.scenario.name));
            let opts = RunOptions { stages, strict, seed, runs, out: Some(out.clone()) };
            let rep = pipeline::run(&loaded, &opts)?;
            for w in &rep.warnings {
                eprintln!("warning: {w}");
            }
            for f in &rep.failures {
                eprintln!("failure: {f}");
            }
            let status = rep.status(strict);
            println!("{}: {:?}, {} artifacts in {}", loaded.scenario.name, status, rep.files.len(), out.display());
            Ok(if status == Status::Failed { ExitCode::from(1) } else { ExitCode::SUCCESS })
        }
        Cmd::Sweep { scenario, over, out } => {
            let loaded = Loaded::from_file(&scenario)?;
            let csv = pipeline::sweep(&loaded, over.parse::<SweepAxis>()?)?;
            match out {
                Some(p) => std::fs::write(p, csv)?,
                None => print!("{csv}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
