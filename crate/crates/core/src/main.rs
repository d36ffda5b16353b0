use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, CommandFactory, Parser, Subcommand};

use nonmono::harness::{self, aggregate_plotdata, default_out_root, run_dir_name, run_to_dir};
use nonmono::hierarchy::LearnerSettings;
use nonmono::selftest;
use nonmono::types::{config_from_pairs, parse_config_pairs, validate_config, AgentKind, RunConfig, Task};

#[derive(Parser)]
#[command(name = "nonmono", about = "Multi-mode exploration agents on toy continuous-control tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one configured run.
    Run(RunArgs),
    /// Run several seeds, one directory each.
    Suite {
        #[command(flatten)]
        run: RunArgs,
        /// Number of seeds, starting at --seed.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        /// Concurrent runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Aggregate run directories into plot-ready CSV.
    Plotdata {
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
    /// Run the built-in invariant checks.
    Selftest,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long)]
    task: Option<Task>,
    #[arg(long)]
    agent: Option<AgentKind>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<u64>,
    /// key=value config file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    no_reward_mod: bool,
    #[arg(long)]
    no_loss_mod: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

fn build_config(args: &RunArgs) -> Result<RunConfig, Failure> {
    let mut pairs = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading {}", p.display()))
                .map_err(Failure::Runtime)?;
            parse_config_pairs(&text).map_err(|e| Failure::Usage(e.into()))?
        }
        None => Default::default(),
    };
    if let Some(t) = args.task {
        pairs.insert("task".into(), t.as_str().into());
    }
    if let Some(a) = args.agent {
        pairs.insert("agent".into(), a.as_str().into());
    }
    if let Some(s) = args.seed {
        pairs.insert("seed".into(), s.to_string());
    }
    if let Some(s) = args.steps {
        pairs.insert("total_steps".into(), s.to_string());
    }
    if args.no_reward_mod {
        pairs.insert("reward_mod".into(), "false".into());
    }
    if args.no_loss_mod {
        pairs.insert("loss_mod".into(), "false".into());
    }
    let cfg = config_from_pairs(&pairs).map_err(|e| Failure::Usage(e.into()))?;
    validate_config(cfg).map_err(|e| Failure::Usage(e.into()))
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let settings = LearnerSettings::default();
    match cli.command {
        Command::Run(args) => {
            let cfg = build_config(&args)?;
            let dir = args.out.clone().unwrap_or_else(|| default_out_root().join(run_dir_name(&cfg)));
            let log = run_to_dir(cfg, &settings, &dir).map_err(|e| Failure::Runtime(e.into()))?;
            let c = &log.counters.total_steps;
            println!(
                "{}: random={} onpolicy={} exploit={} final_success={:.3}",
                dir.display(),
                c.random,
                c.onpolicy,
                c.exploit,
                log.final_success()
            );
            Ok(())
        }
        Command::Suite { run, seeds, jobs } => {
            let cfg = build_config(&run)?;
            let root = run.out.clone().unwrap_or_else(default_out_root);
            let list: Vec<u64> = (0..seeds).map(|k| cfg.seed + k).collect();
            let dirs = harness::suite(&cfg, &list, &root, jobs, &settings).map_err(|e| Failure::Runtime(e.into()))?;
            for d in dirs {
                println!("{}", d.display());
            }
            Ok(())
        }
        Command::Plotdata { out, dirs } => aggregate_plotdata(&dirs, &out).map_err(|e| Failure::Runtime(e.into())),
        Command::Selftest => {
            let results = selftest::run_all();
            let mut ok = true;
            for r in &results {
                println!("{} {} ({})", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
                ok &= r.passed;
            }
            if ok {
                Ok(())
            } else {
                Err(Failure::Runtime(anyhow::anyhow!("selftest failed")))
            }
        }
    }
}

fn usage() -> String {
    Cli::command().render_usage().to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            if !e.to_string().contains("Usage") {
                eprintln!("\n{}", usage());
            }
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}\n\n{}", usage());
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
