use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use avalab_core::analysis::{safety_holds, PropertyKind, Verdict};
use avalab_core::ids::PayloadId;
use avalab_core::scenario::{self, AdversaryKind, Protocol, ScenarioConfig};
use avalab_core::sweep::{self, SweepConfig};
use avalab_core::trace::{self, Event, Record};

/// Exit status when a safety property fails.
const EXIT_UNSAFE: u8 = 1;
/// Exit status for bad input: config, flags or trace.
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "avalab", version, about = "Seeded Avalanche-family simulations, sweeps and trace replays")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and check its trace.
    Run(RunArgs),
    /// Expected delay against the malicious fraction, as CSV.
    Sweep(SweepArgs),
    /// Re-check a stored trace without simulating.
    Replay {
        trace: PathBuf,
    },
    /// Run the targeted delay attack (or the gossip attack with --gamma)
    /// and report what happened to the victim's target.
    AttackDemo(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    protocol: Option<Protocol>,
    /// Malicious fraction for the gossip attack.
    #[arg(long)]
    gamma: Option<f64>,
    /// Where run.jsonl, summary.csv and verdicts.json go.
    #[arg(long, env = "AVALAB_OUT_DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 15)]
    beta1: u32,
    /// Gamma values; defaults to 0, 0.05, .., 0.5.
    #[arg(long, value_delimiter = ',')]
    gamma: Vec<f64>,
    /// Monte Carlo runs per gamma.
    #[arg(long, default_value_t = 100_000)]
    runs: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Full simulations per gamma for the sim_mean column.
    #[arg(long, default_value_t = 0)]
    sim_seeds: u32,
    #[arg(long, env = "AVALAB_OUT_DIR")]
    out_dir: Option<PathBuf>,
}

fn load(args: &RunArgs) -> Result<ScenarioConfig> {
    let mut cfg = match &args.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(h) = args.horizon {
        cfg.horizon = h;
    }
    if let Some(p) = args.protocol {
        cfg.protocol = p;
    }
    if let Some(g) = args.gamma {
        cfg.adversary.gamma = g;
    }
    if args.out_dir.is_some() {
        cfg.outputs.dir = args.out_dir.clone();
    }
    cfg.validate().context("invalid config after flag overrides")?;
    Ok(cfg)
}

fn print_verdicts(verdicts: &[Verdict]) {
    for v in verdicts {
        let kind = match v.kind {
            PropertyKind::Safety => "safety".to_string(),
            PropertyKind::Liveness { horizon } => format!("liveness@{horizon}"),
        };
        let status = if v.holds { "holds" } else { "VIOLATED" };
        println!("  {:<20} {:<16} {status}", v.property, kind);
        if let Some(first) = v.witness.get(1) {
            println!("    first witness at t={}: {}", first.t, serde_json::to_string(&first.ev).unwrap_or_default());
        }
    }
}

fn finish(cfg: &ScenarioConfig, out: &scenario::RunOutput) -> Result<ExitCode> {
    println!("seed {}", cfg.seed);
    println!("protocol {} adversary {:?} horizon {}", cfg.protocol.name(), cfg.adversary.kind, cfg.horizon);
    println!("events {}", out.events);
    print_verdicts(&out.verdicts);
    for (p, checks, violations) in &out.shadow {
        if *violations > 0 {
            println!("  shadow: party {p} {violations}/{checks} dominance violations");
        }
    }
    if let Some(dir) = &cfg.outputs.dir {
        scenario::write_outputs(dir, &out.records, &out.verdicts)
            .with_context(|| format!("writing outputs to {}", dir.display()))?;
        println!("outputs in {}", dir.display());
    }
    Ok(exit_for(&out.verdicts))
}

fn exit_for(verdicts: &[Verdict]) -> ExitCode {
    if safety_holds(verdicts) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_UNSAFE)
    }
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let cfg = load(&args)?;
    let out = scenario::run(&cfg);
    finish(&cfg, &out)
}

fn attack_demo(args: RunArgs) -> Result<ExitCode> {
    let mut cfg = load(&args)?;
    if args.config.is_none() {
        cfg.network.f = 1;
        cfg.horizon = args.horizon.unwrap_or(120.0);
        match args.gamma {
            Some(_) => {
                cfg.adversary.kind = AdversaryKind::GossipAttack;
                cfg.workload.count = 40;
            }
            None => {
                cfg.adversary.kind = AdversaryKind::DelayAttack;
                cfg.workload.count = 1;
            }
        }
    }
    if cfg.adversary.kind == AdversaryKind::None {
        bail!("attack-demo needs an adversary; the config sets adversary.kind = none");
    }
    cfg.validate().context("invalid config")?;
    let out = scenario::run(&cfg);
    let victim = cfg.victim();
    let target = PayloadId::new(victim, 0);
    let polls = out
        .records
        .iter()
        .filter(|r| matches!(&r.ev, Event::PollEnd { party, .. } if *party == victim))
        .count();
    let crafted = out
        .records
        .iter()
        .filter(|r| matches!(r.ev, Event::AdversaryCraft { .. }))
        .count();
    let delivered: Vec<&Record> = out
        .records
        .iter()
        .filter(|r| matches!(&r.ev, Event::Deliver { payload, .. } if *payload == target))
        .collect();
    println!("victim {victim} target {target}: {crafted} crafted transactions, {polls} victim polls");
    match delivered.iter().find_map(|r| match &r.ev {
        Event::Deliver {
            party,
            polls_since_seen,
            ..
        } if *party == victim => Some((r.t, *polls_since_seen)),
        _ => None,
    }) {
        Some((t, p)) => println!("victim delivered the target at t={t} after {p} polls"),
        None => println!("victim did not deliver the target"),
    }
    println!("{} of {} honest parties delivered the target", delivered.len(), cfg.honest().len());
    finish(&cfg, &out)
}

fn run_sweep(args: SweepArgs) -> Result<ExitCode> {
    let gammas = if args.gamma.is_empty() {
        sweep::grid(0.5, 0.05)
    } else {
        args.gamma
    };
    let mut cfg = SweepConfig::new(gammas, args.beta1, args.runs, args.seed);
    cfg.sim_seeds = args.sim_seeds;
    let rows = sweep::sweep(&cfg)?;
    let csv = sweep::to_csv(&rows);
    match &args.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join("sweep.csv");
            std::fs::write(&path, csv)?;
            println!("seed {}", args.seed);
            println!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn replay(path: &Path) -> Result<ExitCode> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let records = trace::read_jsonl(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))?;
    let verdicts = scenario::check(&records)?;
    if let Some(h) = trace::header(&records) {
        println!("seed {}", h.seed);
        println!("protocol {} adversary {} horizon {}", h.protocol, h.adversary, h.horizon);
    }
    print_verdicts(&verdicts);
    Ok(exit_for(&verdicts))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Run(a) => run(a),
        Cmd::Sweep(a) => run_sweep(a),
        Cmd::Replay { trace } => replay(&trace),
        Cmd::AttackDemo(a) => attack_demo(a),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
