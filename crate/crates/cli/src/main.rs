use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use encircle_core::harness::{
    catalog_with_overrides, evaluate, export_results, find_scenario, run_episode, scenario_catalog, ExportFormat, Greedy,
    Metrics, PursuerPolicy, ScenarioSpec, TrialRecord, UniformRandom, BASE_SEED,
};
use encircle_core::policy::{Policy, Variant};
use encircle_core::training::{run_training, write_log, TrainConfig};
use encircle_core::world::trajectory::{read_trajectory, TrajectoryWriter};
use encircle_core::world::{Role, Status, WorldConfig};

#[derive(Parser)]
#[command(name = "encircle", version, about = "Multi-robot multi-target encirclement lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy and write its log and checkpoints.
    Train(TrainArgs),
    /// Evaluate a checkpoint (or the uniform-random baseline) on scenarios.
    Eval(EvalArgs),
    /// Summarize a trajectory dump step by step.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Training configuration (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for `log.csv` and `step_<N>.ckpt` files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Scenario name from the catalog, or `all`.
    #[arg(long, default_value = "all")]
    scenario: String,
    /// Policy checkpoint; the uniform-random baseline is used when omitted.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Expected variant of the checkpoint.
    #[arg(long)]
    variant: Option<Variant>,
    /// TOML file with `[[scenario]]` tables that extend or replace catalog rows.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trials per scenario.
    #[arg(long)]
    episodes: Option<usize>,
    /// Base evaluation seed; trial i uses seed + i.
    #[arg(long, default_value_t = BASE_SEED)]
    seed: u64,
    /// Per-trial results file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: ExportFormat,
    /// Directory receiving one trajectory dump per trial.
    #[arg(long)]
    trajectories: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    /// Trajectory dump written by `eval --trajectories`.
    #[arg(long)]
    trajectories: PathBuf,
    /// Write the summary here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train(args) => train(args),
        Command::Eval(args) => eval(args),
        Command::Replay(args) => replay(args),
    }
}

fn train(args: TrainArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => TrainConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => TrainConfig::default(),
    };
    if let Some(v) = args.variant {
        cfg.policy.variant = v;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let run = run_training(&cfg, Some(&args.out))?;
    write_log(&run.log, BufWriter::new(File::create(args.out.join("log.csv"))?))?;
    let successes = run.log.iter().filter(|r| r.success).count();
    println!(
        "trained {} for {} steps: {} episodes ({} successful), {} updates",
        cfg.policy.variant, cfg.total_steps, run.episodes, successes, run.updates
    );
    for path in &run.checkpoints {
        println!("checkpoint {}", path.display());
    }
    Ok(())
}

fn load_catalog(config: Option<&Path>) -> Result<Vec<ScenarioSpec>> {
    Ok(match config {
        Some(path) => catalog_with_overrides(&std::fs::read_to_string(path)?)?,
        None => scenario_catalog(),
    })
}

fn eval(args: EvalArgs) -> Result<()> {
    let catalog = load_catalog(args.config.as_deref())?;
    let mut scenarios = if args.scenario == "all" {
        catalog.clone()
    } else {
        vec![find_scenario(&catalog, &args.scenario)?]
    };
    if let Some(n) = args.episodes {
        if n == 0 {
            bail!("--episodes must be at least 1");
        }
        scenarios.iter_mut().for_each(|s| s.trials = n);
    }
    let policy = match &args.checkpoint {
        Some(path) => Some(Policy::load(path, args.variant).with_context(|| format!("loading {}", path.display()))?),
        None if args.variant.is_some() => bail!("--variant needs --checkpoint"),
        None => None,
    };
    let mut controller: Box<dyn PursuerPolicy + '_> = match &policy {
        Some(p) => Box::new(Greedy(p)),
        None => Box::new(UniformRandom::new(9, args.seed)),
    };

    let base = WorldConfig::default();
    let mut records: Vec<TrialRecord> = Vec::new();
    for sc in &scenarios {
        let trials = match &args.trajectories {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                (0..sc.trials as u64)
                    .map(|i| {
                        let seed = args.seed + i;
                        let file = File::create(dir.join(format!("{}_{seed}.jsonl", sc.name)))?;
                        let mut tw = TrajectoryWriter::new(BufWriter::new(file));
                        let record = run_episode(controller.as_mut(), sc, &base, seed, Some(&mut tw))?;
                        tw.into_inner().flush()?;
                        Ok(record)
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            None => evaluate(controller.as_mut(), sc, &base, args.seed)?.1,
        };
        print_metrics(&sc.name, &controller.name(), &Metrics::from_records(&trials));
        records.extend(trials);
    }
    if let Some(path) = &args.out {
        export_results(&records, BufWriter::new(File::create(path)?), args.format)?;
    }
    Ok(())
}

fn print_metrics(scenario: &str, policy: &str, m: &Metrics) {
    println!(
        "{scenario} [{policy}] trials={} success_rate={:.2} travel_time_s={:.2}±{:.2} (all episodes) collision_ratio={:.3}",
        m.trials, m.success_rate, m.mean_travel_time_s, m.std_travel_time_s, m.collision_ratio
    );
}

fn replay(args: ReplayArgs) -> Result<()> {
    let steps = read_trajectory(BufReader::new(File::open(&args.trajectories)?))?;
    let mut out: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    writeln!(out, "t,active_pursuers,collided_pursuers,active_evaders,encircled_evaders")?;
    for s in &steps {
        let count = |role: Role, status: Status| s.robots.iter().filter(|r| r.role == role && r.status == status).count();
        writeln!(
            out,
            "{},{},{},{},{}",
            s.t,
            count(Role::Pursuer, Status::Active),
            count(Role::Pursuer, Status::Inactive),
            count(Role::Evader, Status::Active),
            count(Role::Evader, Status::Encircled),
        )?;
    }
    out.flush()?;
    Ok(())
}
