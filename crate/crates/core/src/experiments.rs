//! Tree generators, the star lower-bound experiment and batch grids.

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{bfs_spanning_tree, Graph, GraphError, NodeId, RootedTree, TreeStats};
use crate::sim::{self, rng_for, write_csv, AdversarySpec, RefereeLevel, RunReport, RunStatus, SimError, SimulationConfig, StrategyKind};

/// How the initial network is built. Generated trees use ids `0..n` with
/// root 0; for a file the original graph is kept and a BFS tree is grown
/// from `root` (lowest id when absent).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeSpec {
    Path { n: usize },
    /// A center with `delta` leaves.
    Star { delta: usize },
    /// Complete k-ary tree in heap order.
    BalancedKary { k: usize, n: usize },
    /// Node `i` attaches to a uniform earlier node.
    RandomRecursive { n: usize },
    /// A center with `arms` children, each with `leaves` leaves.
    StarOfStars { arms: usize, leaves: usize },
    FromFile { path: PathBuf, root: Option<u32> },
}

impl TreeSpec {
    pub const KINDS: [&'static str; 4] = ["path", "star", "balanced_kary", "random_recursive"];

    /// Builds a spec from a generator name and a size. `n` is ignored by the
    /// star (which takes `delta`) and by files.
    pub fn from_parts(kind: &str, n: Option<usize>, delta: Option<usize>) -> Result<TreeSpec, String> {
        let need_n = || n.ok_or_else(|| format!("tree {kind:?} needs n"));
        let (name, arg) = kind.split_once(':').map_or((kind, None), |(a, b)| (a, Some(b)));
        let spec = match name {
            "path" => TreeSpec::Path { n: need_n()? },
            "star" => TreeSpec::Star { delta: delta.or(n.map(|n| n.saturating_sub(1))).ok_or("star needs delta or n")? },
            "balanced_kary" | "kary" => {
                let k = arg.map_or(Ok(3), |a| a.parse().map_err(|_| format!("bad arity {a:?}")))?;
                TreeSpec::BalancedKary { k, n: need_n()? }
            }
            "random_recursive" | "random" => TreeSpec::RandomRecursive { n: need_n()? },
            "star_of_stars" => TreeSpec::StarOfStars { arms: delta.ok_or("star_of_stars needs delta")?, leaves: n.unwrap_or(2) },
            "file" => TreeSpec::FromFile { path: PathBuf::from(arg.ok_or("use file:<path>")?), root: None },
            _ => return Err(format!("unknown tree generator {kind:?}")),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), String> {
        match *self {
            TreeSpec::Path { n } | TreeSpec::RandomRecursive { n } if n == 0 => Err("n must be at least 1".into()),
            TreeSpec::BalancedKary { k, n } if k < 2 || n == 0 => Err("balanced_kary needs k >= 2 and n >= 1".into()),
            TreeSpec::StarOfStars { arms: 0, .. } => Err("star_of_stars needs at least one arm".into()),
            _ => Ok(()),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            TreeSpec::Path { .. } => "path",
            TreeSpec::Star { .. } => "star",
            TreeSpec::BalancedKary { .. } => "balanced_kary",
            TreeSpec::RandomRecursive { .. } => "random_recursive",
            TreeSpec::StarOfStars { .. } => "star_of_stars",
            TreeSpec::FromFile { .. } => "file",
        }
    }
}

impl fmt::Display for TreeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeSpec::Path { n } | TreeSpec::RandomRecursive { n } => write!(f, "{}{n}", self.kind()),
            TreeSpec::Star { delta } => write!(f, "star{}", delta + 1),
            TreeSpec::BalancedKary { k, n } => write!(f, "kary{k}_{n}"),
            TreeSpec::StarOfStars { arms, leaves } => write!(f, "star_of_stars{arms}x{leaves}"),
            TreeSpec::FromFile { path, .. } => write!(f, "{}", path.file_stem().map_or("file".into(), |s| s.to_string_lossy())),
        }
    }
}

fn from_parent_fn(n: usize, parent: impl Fn(usize) -> usize) -> RootedTree {
    let parents: BTreeMap<NodeId, Option<NodeId>> =
        (0..n).map(|i| (NodeId(i as u32), (i > 0).then(|| NodeId(parent(i) as u32)))).collect();
    RootedTree::from_parents(parents).expect("generated parent maps are trees")
}

/// The rooted tree of a generated spec; files go through [`generate`].
pub fn generate_tree(spec: &TreeSpec, seed: u64) -> Result<RootedTree, GraphError> {
    Ok(match *spec {
        TreeSpec::Path { n } => from_parent_fn(n, |i| i - 1),
        TreeSpec::Star { delta } => from_parent_fn(delta + 1, |_| 0),
        TreeSpec::BalancedKary { k, n } => from_parent_fn(n, |i| (i - 1) / k),
        TreeSpec::RandomRecursive { n } => {
            let mut rng = rng_for(seed, 0x7ee);
            let parents: Vec<usize> = (0..n).map(|i| if i == 0 { 0 } else { rng.gen_range(0..i) }).collect();
            from_parent_fn(n, |i| parents[i])
        }
        TreeSpec::StarOfStars { arms, leaves } => from_parent_fn(1 + arms * (1 + leaves), |i| if i <= arms { 0 } else { 1 + (i - arms - 1) / leaves }),
        TreeSpec::FromFile { .. } => return generate(spec, seed).map(|(_, t)| t),
    })
}

/// The original graph and its rooted spanning tree.
pub fn generate(spec: &TreeSpec, seed: u64) -> Result<(Graph, RootedTree), GraphError> {
    spec.validate().map_err(|msg| GraphError::Parse { line: 0, msg })?;
    match spec {
        TreeSpec::FromFile { path, root } => {
            let g = Graph::load(path)?;
            let root = match root {
                Some(r) => NodeId(*r),
                None => g.vertices().next().ok_or(GraphError::Empty)?,
            };
            let t = bfs_spanning_tree(&g, root)?;
            Ok((g, t))
        }
        _ => {
            let t = generate_tree(spec, seed)?;
            Ok((t.to_graph(), t))
        }
    }
}

/// `ceil(log2 x)`, with 0 for x <= 1.
pub fn ceil_log2(x: usize) -> usize {
    if x <= 1 {
        0
    } else {
        (usize::BITS - (x - 1).leading_zeros()) as usize
    }
}

/// Largest diameter the forgiving tree may reach on a tree with these stats:
/// two root paths of `h0 * (ceil(log2 Delta) + 1)` hops each.
pub fn diameter_bound(stats: &TreeStats) -> usize {
    2 * stats.height * (ceil_log2(stats.max_degree) + 1)
}

/// Least-squares slope of `y` against `log2 n`.
pub fn log_slope(points: &[(usize, f64)]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|&(n, _)| (n as f64).log2()).collect();
    let m = points.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(points).map(|(x, p)| (x - mx) * (p.1 - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Outcome of deleting the center of a star.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LowerBoundReport {
    pub delta: usize,
    pub strategy: StrategyKind,
    /// Degree-increase cap the inequality is evaluated with: the measured
    /// increase, but at least 3.
    pub alpha: f64,
    pub alpha_measured: i64,
    pub beta: f64,
    pub lhs: f64,
    pub satisfied: bool,
    pub ft_bound_ok: bool,
}

/// Builds a star on `delta + 1` nodes, deletes the center and measures the
/// degree increase and diameter stretch of one repair.
pub fn lower_bound_experiment(delta: usize, strategy: StrategyKind) -> Result<LowerBoundReport, SimError> {
    if delta < 3 {
        return Err(SimError::Config(format!("delta must be at least 3, got {delta}")));
    }
    let mut config = SimulationConfig::new(TreeSpec::Star { delta }, strategy, AdversarySpec::Scripted(vec![NodeId(0)]), 0);
    config.rounds = Some(1);
    let report = sim::run(&config)?;
    if let RunStatus::Violation { violations, .. } = &report.status {
        return Err(SimError::Config(format!("repair failed: {}", violations[0])));
    }
    let alpha_measured = report.max_degree_increase();
    let alpha = (alpha_measured as f64).max(3.0);
    let beta = report.records[0].diameter as f64 / report.g0_diameter as f64;
    let lhs = alpha.powf(2.0 * beta + 1.0);
    Ok(LowerBoundReport {
        delta,
        strategy,
        alpha,
        alpha_measured,
        beta,
        lhs,
        satisfied: lhs >= delta as f64,
        ft_bound_ok: beta <= 2.0 * (delta as f64).ln() / alpha.ln() + 2.0,
    })
}

/// Every combination of the listed parameters is one run.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentGrid {
    pub trees: Vec<String>,
    pub sizes: Vec<usize>,
    pub adversaries: Vec<AdversarySpec>,
    pub strategies: Vec<StrategyKind>,
    pub seeds: Vec<u64>,
    pub rounds: Option<usize>,
    pub referee: RefereeLevel,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        ExperimentGrid {
            trees: TreeSpec::KINDS.iter().map(|s| s.to_string()).collect(),
            sizes: vec![64, 128, 256, 512],
            adversaries: AdversarySpec::all(),
            strategies: vec![StrategyKind::ForgivingTree],
            seeds: (0..20).collect(),
            rounds: None,
            referee: RefereeLevel::Full,
        }
    }
}

impl ExperimentGrid {
    pub fn cells(&self) -> Result<Vec<SimulationConfig>, String> {
        let mut out = Vec::new();
        for tree in &self.trees {
            for &n in &self.sizes {
                let spec = TreeSpec::from_parts(tree, Some(n), Some(n.saturating_sub(1)))?;
                for adv in &self.adversaries {
                    for &strategy in &self.strategies {
                        for &seed in &self.seeds {
                            let mut c = SimulationConfig::new(spec.clone(), strategy, adv.clone(), seed);
                            c.rounds = self.rounds;
                            c.referee = self.referee;
                            out.push(c);
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Maxima of one grid cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellSummary {
    pub file: String,
    pub tree: String,
    pub n: usize,
    pub adversary: String,
    pub strategy: StrategyKind,
    pub seed: u64,
    pub passed: bool,
    pub violation: String,
    pub rounds: usize,
    pub max_degree_increase: i64,
    pub max_diameter: usize,
    pub max_messages_per_node: usize,
    pub max_bits_per_node: u64,
    pub max_recovery_latency: u32,
    pub tree_diameter: usize,
    pub g0_diameter: usize,
    pub diameter_bound: usize,
}

impl CellSummary {
    pub const CSV_HEADER: &'static str = "file,tree,n,adversary,strategy,seed,passed,rounds,max_degree_increase,max_diameter,max_messages_per_node,max_bits_per_node,max_recovery_latency,tree_diameter,g0_diameter,stretch_vs_tree,stretch_vs_g0,diameter_bound,violation";

    pub fn from_report(file: String, config: &SimulationConfig, report: &RunReport) -> CellSummary {
        let violation = match &report.status {
            RunStatus::Completed => String::new(),
            RunStatus::Violation { round, violations, .. } => format!("round {round}: {}", violations[0]),
        };
        CellSummary {
            file,
            tree: config.tree.kind().to_string(),
            n: report.tree_stats.n,
            adversary: config.adversary.name().to_string(),
            strategy: config.strategy,
            seed: config.seed,
            passed: report.passed(),
            violation,
            rounds: report.records.len(),
            max_degree_increase: report.max_degree_increase(),
            max_diameter: report.max_diameter(),
            max_messages_per_node: report.max_messages_per_node(),
            max_bits_per_node: report.records.iter().map(|r| r.max_bits_per_node).max().unwrap_or(0),
            max_recovery_latency: report.max_latency(),
            tree_diameter: report.tree_stats.diameter,
            g0_diameter: report.g0_diameter,
            diameter_bound: diameter_bound(&report.tree_stats),
        }
    }

    pub fn csv_row(&self) -> String {
        let ratio = |d: usize| if d == 0 { 0.0 } else { self.max_diameter as f64 / d as f64 };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.4},{:.4},{},{}",
            self.file,
            self.tree,
            self.n,
            self.adversary,
            self.strategy,
            self.seed,
            self.passed,
            self.rounds,
            self.max_degree_increase,
            self.max_diameter,
            self.max_messages_per_node,
            self.max_bits_per_node,
            self.max_recovery_latency,
            self.tree_diameter,
            self.g0_diameter,
            ratio(self.tree_diameter),
            ratio(self.g0_diameter),
            self.diameter_bound,
            self.violation.replace(',', ";"),
        )
    }
}

fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(tmp, path)
}

/// Runs every cell, writing one per-round CSV per cell and `aggregate.csv`.
/// Cells run on all available cores; a violating cell is recorded, not fatal.
pub fn run_grid(grid: &ExperimentGrid, out_dir: &Path) -> Result<Vec<CellSummary>, SimError> {
    let cells = grid.cells().map_err(SimError::Config)?;
    std::fs::create_dir_all(out_dir).map_err(|e| SimError::Config(e.to_string()))?;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(cells.len().max(1));
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results: Vec<Result<(usize, CellSummary), SimError>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        let Some(config) = cells.get(i) else { break };
                        done.push(run_cell(config, out_dir).map(|c| (i, c)));
                    }
                    done
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("grid worker panicked")).collect()
    });
    let mut summaries: Vec<(usize, CellSummary)> = results.into_iter().collect::<Result<_, _>>()?;
    summaries.sort_by_key(|(i, _)| *i);
    let summaries: Vec<CellSummary> = summaries.into_iter().map(|(_, c)| c).collect();
    let mut agg = format!("{}\n", CellSummary::CSV_HEADER);
    for c in &summaries {
        agg.push_str(&c.csv_row());
        agg.push('\n');
    }
    write_atomic(&out_dir.join("aggregate.csv"), &agg).map_err(|e| SimError::Config(e.to_string()))?;
    Ok(summaries)
}

fn run_cell(config: &SimulationConfig, out_dir: &Path) -> Result<CellSummary, SimError> {
    let report = sim::run(config)?;
    let file = format!("{}_{}_{}_s{}.csv", config.tree, config.adversary.name(), config.strategy, config.seed);
    write_atomic(&out_dir.join(&file), &write_csv(&report.records)).map_err(|e| SimError::Config(e.to_string()))?;
    Ok(CellSummary::from_report(file, config, &report))
}

/// `key = value` lines; `#` starts a comment.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected key = value", i + 1))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn parse_field<T: FromStr>(kv: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, String> {
    kv.get(key).map(|v| v.parse::<T>().map_err(|_| format!("bad value {v:?} for {key}"))).transpose()
}

fn parse_list<T: FromStr>(kv: &BTreeMap<String, String>, key: &str) -> Result<Option<Vec<T>>, String>
where
    T::Err: fmt::Display,
{
    kv.get(key)
        .map(|v| v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| s.parse::<T>().map_err(|e| format!("{key}: {e}"))).collect())
        .transpose()
}

const RUN_KEYS: [&str; 10] = ["tree", "n", "delta", "adversary", "strategy", "seed", "rounds", "referee", "trace", "out"];

/// A single-run config from `key = value` text. Unset keys fall back to a
/// 64-node random recursive tree, random adversary, forgiving tree, seed 0.
pub fn config_from_kv(kv: &BTreeMap<String, String>) -> Result<SimulationConfig, String> {
    if let Some(k) = kv.keys().find(|k| !RUN_KEYS.contains(&k.as_str())) {
        return Err(format!("unknown key {k:?}"));
    }
    let n = parse_field::<usize>(kv, "n")?;
    let delta = parse_field::<usize>(kv, "delta")?;
    let tree = TreeSpec::from_parts(kv.get("tree").map_or("random_recursive", |s| s.as_str()), n.or(Some(64)), delta)?;
    let mut c = SimulationConfig::new(
        tree,
        parse_field(kv, "strategy")?.unwrap_or(StrategyKind::ForgivingTree),
        parse_field(kv, "adversary")?.unwrap_or(AdversarySpec::Random),
        parse_field(kv, "seed")?.unwrap_or(0),
    );
    c.rounds = parse_field(kv, "rounds")?;
    c.referee = parse_field(kv, "referee")?.unwrap_or_default();
    c.trace = parse_field(kv, "trace")?.unwrap_or(false);
    Ok(c)
}

/// A grid from `key = value` text; lists are comma separated and `seeds`
/// also accepts `a..b`.
pub fn grid_from_kv(kv: &BTreeMap<String, String>) -> Result<ExperimentGrid, String> {
    const KEYS: [&str; 8] = ["trees", "sizes", "adversaries", "strategies", "seeds", "rounds", "referee", "out"];
    if let Some(k) = kv.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(format!("unknown key {k:?}"));
    }
    let mut g = ExperimentGrid::default();
    if let Some(t) = parse_list::<String>(kv, "trees")? {
        g.trees = t;
    }
    if let Some(s) = parse_list(kv, "sizes")? {
        g.sizes = s;
    }
    if let Some(a) = parse_list(kv, "adversaries")? {
        g.adversaries = a;
    }
    if let Some(s) = parse_list(kv, "strategies")? {
        g.strategies = s;
    }
    if let Some(s) = kv.get("seeds") {
        g.seeds = match s.split_once("..") {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|_| format!("bad seed range {s:?}"))?;
                let b: u64 = b.trim().parse().map_err(|_| format!("bad seed range {s:?}"))?;
                (a..b).collect()
            }
            None => parse_list(kv, "seeds")?.unwrap_or_default(),
        };
    }
    g.rounds = parse_field(kv, "rounds")?;
    g.referee = parse_field(kv, "referee")?.unwrap_or_default();
    Ok(g)
}
