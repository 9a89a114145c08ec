use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use forgiving_tree::experiments::{config_from_kv, grid_from_kv, lower_bound_experiment, parse_kv, run_grid};
use forgiving_tree::sim::{self, trace, write_csv, RefereeLevel, RunStatus, SimulationConfig, StrategyKind};

#[derive(Parser)]
#[command(name = "ft", version, about = "Run delete-and-repair experiments on self-healing trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write per-round metrics as CSV.
    Run(RunArgs),
    /// Delete the center of a star and evaluate the degree/stretch trade-off.
    Lowerbound {
        #[arg(long)]
        delta: usize,
        #[arg(long, default_value = "ft")]
        strategy: StrategyKind,
    },
    /// Run every cell of an experiment grid.
    Grid {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `out` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// Key-value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// path, star, balanced_kary[:k], random_recursive, star_of_stars or file:<path>
    #[arg(long)]
    tree: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    delta: Option<usize>,
    /// random, max_degree, heir_hunter, diameter_greedy or scripted:<path>
    #[arg(long)]
    adversary: Option<String>,
    /// ft, surrogate, line or binary_tree
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rounds: Option<usize>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the event trace as JSON lines to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    referee: Option<RefereeLevel>,
}

enum Failure {
    Usage(String),
    Violation,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violation) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(args) => run(args),
        Command::Lowerbound { delta, strategy } => {
            let r = lower_bound_experiment(delta, strategy).map_err(|e| Failure::Usage(e.to_string()))?;
            println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
            let ok = r.satisfied && (strategy != StrategyKind::ForgivingTree || r.ft_bound_ok);
            if ok {
                Ok(())
            } else {
                Err(Failure::Violation)
            }
        }
        Command::Grid { config, out } => {
            let kv = read_kv(&config)?;
            let grid = grid_from_kv(&kv).map_err(Failure::Usage)?;
            let dir = out.or_else(|| kv.get("out").map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("grid_out"));
            let cells = run_grid(&grid, &dir).map_err(|e| Failure::Usage(e.to_string()))?;
            let failed: Vec<_> = cells.iter().filter(|c| !c.passed).collect();
            eprintln!("{} cells, {} failed; aggregate in {}", cells.len(), failed.len(), dir.join("aggregate.csv").display());
            for c in &failed {
                eprintln!("  {}: {}", c.file, c.violation);
            }
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure::Violation)
            }
        }
    }
}

fn read_kv(path: &Path) -> Result<std::collections::BTreeMap<String, String>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    parse_kv(&text).map_err(Failure::Usage)
}

fn build_config(args: &RunArgs) -> Result<(SimulationConfig, Option<PathBuf>), Failure> {
    let mut kv = match &args.config {
        Some(p) => read_kv(p)?,
        None => Default::default(),
    };
    let out = args.out.clone().or_else(|| kv.remove("out").map(PathBuf::from));
    let mut set = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            kv.insert(k.to_string(), v);
        }
    };
    set("tree", args.tree.clone());
    set("n", args.n.map(|v| v.to_string()));
    set("delta", args.delta.map(|v| v.to_string()));
    set("adversary", args.adversary.clone());
    set("strategy", args.strategy.clone());
    set("seed", args.seed.map(|v| v.to_string()));
    set("rounds", args.rounds.map(|v| v.to_string()));
    let mut config = config_from_kv(&kv).map_err(Failure::Usage)?;
    if let Some(r) = args.referee {
        config.referee = r;
    }
    config.trace |= args.trace.is_some();
    Ok((config, out))
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let (config, out) = build_config(&args)?;
    let report = sim::run(&config).map_err(|e| Failure::Usage(e.to_string()))?;
    let csv = write_csv(&report.records);
    match &out {
        Some(p) => std::fs::write(p, csv).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?,
        None => print!("{csv}"),
    }
    if let Some(p) = &args.trace {
        let f = std::fs::File::create(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
        trace::write_jsonl(&report.trace, std::io::BufWriter::new(f)).map_err(|e| Failure::Usage(e.to_string()))?;
        eprintln!("trace hash {}", report.trace_hash);
    }
    eprintln!(
        "{} on {} ({} nodes), {} adversary: {} rounds, max degree increase {}, max diameter {}",
        config.strategy,
        config.tree,
        report.tree_stats.n,
        config.adversary.name(),
        report.records.len(),
        report.max_degree_increase(),
        report.max_diameter()
    );
    match report.status {
        RunStatus::Completed => Ok(()),
        RunStatus::Violation { round, violations, dump } => {
            eprintln!("referee violation in round {round}:");
            for v in &violations {
                eprintln!("  {v}");
            }
            eprintln!("{dump}");
            Err(Failure::Violation)
        }
    }
}
