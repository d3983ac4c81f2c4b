use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use srspmd_cli::{cost_compare, run, ExperimentConfig, Pipeline};

#[derive(Parser)]
#[command(name = "srspmd", version, about = "Fleet sizing and dispatch experiments for self-repositioning shared mobility devices")]
struct Cli {
    /// TOML experiment config; defaults apply when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, 0 for all cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct SimFlags {
    /// Batch interval, seconds.
    #[arg(long)]
    tb: Option<f64>,
    /// Maximum wait, seconds.
    #[arg(long)]
    tw: Option<f64>,
    /// Maximum walk to the vehicle, meters.
    #[arg(long)]
    dwalk: Option<f64>,
    /// Look-ahead window, seconds.
    #[arg(long)]
    tla: Option<f64>,
    /// Fixed fleet size for the online model.
    #[arg(long)]
    fleet: Option<usize>,
    /// Relocation speeds, km/h, comma separated.
    #[arg(long, value_delimiter = ',')]
    vr: Option<Vec<f64>>,
    /// Relocation speed on upgraded paths, km/h.
    #[arg(long)]
    vrstar: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Every pipeline listed in the config.
    Run(SimFlags),
    /// Minimum fleet with full knowledge of the day.
    Oracle(SimFlags),
    /// Batched online dispatch.
    Online(SimFlags),
    /// Online dispatch with a look-ahead window.
    Lookahead(SimFlags),
    /// Two-tier path upgrade evaluation.
    Upgrade(SimFlags),
    /// Utilization against daily demand sampled from bus OD counts.
    Demand(SimFlags),
    /// Descriptive statistics of the trip data.
    Stats(SimFlags),
    /// Capital cost of an autonomous fleet against a conventional one.
    Cost {
        #[arg(long)]
        autonomous: u64,
        #[arg(long)]
        conventional: u64,
        #[arg(long)]
        unit_conventional: Option<f64>,
        #[arg(long)]
        unit_autonomous: Option<f64>,
    },
}

fn apply(cfg: &mut ExperimentConfig, f: &SimFlags) {
    if let Some(v) = f.tb {
        cfg.sim.t_b = v;
        cfg.lookahead.t_b = v;
    }
    if let Some(v) = f.tw {
        cfg.sim.t_w = v;
    }
    if let Some(v) = f.dwalk {
        cfg.sim.d_walk = v;
    }
    if let Some(v) = f.tla {
        cfg.lookahead.t_la = v;
    }
    if let Some(v) = f.fleet {
        cfg.sim.fleet = Some(v);
    }
    if let Some(v) = &f.vr {
        cfg.speeds_kmh = v.clone();
    }
    if let Some(v) = f.vrstar {
        cfg.upgrade.upgraded_kmh = v;
    }
}

fn main_inner() -> Result<()> {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = &cli.out {
        cfg.out = v.clone();
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = cli.jobs {
        cfg.jobs = v;
    }
    let (flags, pipeline) = match &cli.command {
        Command::Cost {
            autonomous,
            conventional,
            unit_conventional,
            unit_autonomous,
        } => {
            let mut model = cfg.cost;
            if let Some(v) = unit_conventional {
                model.unit_cost_conventional = *v;
            }
            if let Some(v) = unit_autonomous {
                model.unit_cost_autonomous = *v;
            }
            model.validate()?;
            let line = serde_json::to_string(&cost_compare(*autonomous, *conventional, &model))?;
            let _ = writeln!(std::io::stdout().lock(), "{line}");
            return Ok(());
        }
        Command::Run(f) => (f, None),
        Command::Oracle(f) => (f, Some(Pipeline::Oracle)),
        Command::Online(f) => (f, Some(Pipeline::Online)),
        Command::Lookahead(f) => (f, Some(Pipeline::Lookahead)),
        Command::Upgrade(f) => (f, Some(Pipeline::Upgrade)),
        Command::Demand(f) => (f, Some(Pipeline::Demand)),
        Command::Stats(f) => (f, Some(Pipeline::Stats)),
    };
    apply(&mut cfg, flags);
    if let Some(p) = pipeline {
        cfg.pipelines = vec![p];
    }
    let bundle = run(&cfg)?;
    // Output may be cut short by a closed pipe; that is not an error.
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "config_hash={} seed={}", bundle.config_hash, bundle.seed);
    for f in &bundle.files {
        let _ = writeln!(stdout, "{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
