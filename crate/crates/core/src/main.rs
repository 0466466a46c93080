use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use stabgame::cli::{self, SweepConfig};
use stabgame::disentangler::SelectionMode;
use stabgame::strategy::StrategyKind;

/// Stabilizer-circuit entanglement control laboratory.
///
/// Every global flag can also be set through an environment variable with
/// the `STABGAME_` prefix, e.g. `STABGAME_SEED=7`.
#[derive(Parser, Debug)]
#[command(name = "stabgame", version, about)]
struct Cli {
    /// Sweep configuration file (TOML, version 1).
    #[arg(long, global = true, env = "STABGAME_CONFIG")]
    config: Option<PathBuf>,

    /// Base seed; trajectory i uses seed ^ i.
    #[arg(long, global = true, env = "STABGAME_SEED")]
    seed: Option<u64>,

    /// Number of worker threads.
    #[arg(long, global = true, env = "STABGAME_WORKERS")]
    workers: Option<usize>,

    /// Lookup-table file, read before and written after a run.
    #[arg(long, global = true, env = "STABGAME_LOOKUP")]
    lookup: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, env = "STABGAME_OUT")]
    out: Option<PathBuf>,

    /// Command spawning an external policy; implies the external strategy.
    #[arg(long, global = true, env = "STABGAME_POLICY_CMD")]
    policy_cmd: Option<String>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Execute the sweep described by --config.
    Run,
    /// Summarize the results in --out.
    Analyze,
    /// Record per-turn profiles of the first sweep cell as JSON lines.
    Frames {
        #[arg(long, default_value_t = 1000)]
        turns: u64,
        #[arg(long, default_value_t = 1)]
        stride: u64,
    },
    /// Precompute optimal gates by sampling random states.
    LookupBuild {
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 12)]
        n: usize,
        #[arg(long, default_value = "identity")]
        mode: String,
    },
    /// Run quick internal consistency checks.
    Selftest,
}

fn load_config(args: &Cli) -> Result<SweepConfig> {
    let path = args.config.as_ref().context("--config is required for this command")?;
    let mut cfg = SweepConfig::load(path)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    if let Some(cmd) = &args.policy_cmd {
        cfg.policy_cmd = Some(cmd.clone());
        cfg.strategy = StrategyKind::External;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<ExitCode> {
    let args = Cli::parse();
    match &args.cmd {
        Cmd::Run => {
            let cfg = load_config(&args)?;
            let s = cli::cmd_run(&cfg, args.lookup.as_deref())?;
            println!("cells computed: {}, skipped: {}, failed: {}", s.computed, s.skipped, s.failed);
            if s.failed > 0 {
                return Ok(ExitCode::from(2));
            }
        }
        Cmd::Analyze => {
            let dir = match (&args.out, &args.config) {
                (Some(out), _) => out.clone(),
                (None, Some(_)) => load_config(&args)?.out,
                (None, None) => bail!("analyze needs --out or --config"),
            };
            let rows = cli::cmd_analyze(&dir)?;
            println!("summarized {} cells into {}", rows.len(), dir.join(cli::analyze::SUMMARY_FILE).display());
        }
        Cmd::Frames { turns, stride } => {
            let cfg = load_config(&args)?;
            let frames = cli::cmd_frames(&cfg, *turns, *stride, &cfg.out)?;
            println!("wrote {} frames to {}", frames.len(), cfg.out.join(cli::frames::FRAMES_FILE).display());
        }
        Cmd::LookupBuild { samples, n, mode } => {
            let path = args.lookup.clone().context("--lookup PATH is required")?;
            let mode: SelectionMode = mode.parse()?;
            let table = cli::cmd_lookup_build(*samples, *n, args.seed.unwrap_or(0), mode, &path)?;
            println!("{} keys, {} queries -> {}", table.len(), table.total_hits(), path.display());
        }
        Cmd::Selftest => {
            let checks = cli::cmd_selftest();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if checks.iter().any(|c| !c.passed) {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
