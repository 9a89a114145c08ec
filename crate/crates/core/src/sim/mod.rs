//! The delete-and-repair round loop.
//!
//! Each round the adversary removes one node, its neighbours are notified,
//! and repair messages are exchanged in synchronous steps until none are in
//! flight. Messages within a step are delivered in a seeded random order.
//! A node's actual edges are the union of what it and its peers want, so the
//! network graph is always a function of node-local state.

pub mod message;
pub mod referee;
pub mod trace;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::Adversary;
use crate::baselines::{BinaryTree, Line, Surrogate};
use crate::experiments::TreeSpec;
use crate::graph::{diameter_fast, Graph, NodeId, RootedTree, TreeStats};
use crate::protocol::ForgivingTree;

pub use message::{id_bits, Message, Payload};
pub use referee::{RefereeLevel, Violation};
pub use trace::{TraceEvent, TraceKind, TraceLog};

/// Steps after which a round is declared non-quiescent.
pub const MAX_STEPS: u32 = 64;
/// Per-round message budget: `BUDGET_PER_DEGREE * (deg_G0(v) + BUDGET_SLACK)`.
pub const BUDGET_PER_DEGREE: usize = 40;
pub const BUDGET_SLACK: usize = 8;

/// A repair strategy as run by every node.
pub trait Protocol: Sync {
    type Node: Clone + fmt::Debug + Send + Sync;

    fn name(&self) -> &'static str;

    /// Node states after preprocessing. Every node starts out wanting exactly
    /// its tree neighbours.
    fn init(&self, tree: &RootedTree) -> BTreeMap<NodeId, Self::Node>;

    /// Names a node holds from preprocessing beyond its tree neighbours.
    fn knowledge(&self, _node: &Self::Node) -> Vec<NodeId> {
        Vec::new()
    }

    /// What the neighbours of `v` are told when it is deleted.
    fn notice(&self, net: &Network<Self::Node>, v: NodeId) -> Payload;

    fn on_message(&self, ctx: &mut Ctx<'_>, node: &mut Self::Node, msg: &Message);

    /// Runs once at the end of every step in which the node received anything.
    fn flush(&self, ctx: &mut Ctx<'_>, node: &mut Self::Node);

    /// Protocol-specific invariants. `touched` lists nodes that handled a
    /// message this round.
    fn check(&self, _net: &Network<Self::Node>, _touched: &BTreeSet<NodeId>) -> Vec<Violation> {
        Vec::new()
    }

    /// Largest degree increase over the original graph the strategy promises.
    fn degree_cap(&self) -> Option<i64> {
        None
    }

    /// Every will with its heir, for adversaries that hunt heirs.
    fn heirs(&self, _net: &Network<Self::Node>) -> Vec<HeirTarget> {
        Vec::new()
    }
}

/// A will as seen by an adversary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HeirTarget {
    pub depth: usize,
    pub owner: NodeId,
    pub heir: NodeId,
    /// The heir already simulates a helper with a single child.
    pub heir_ready: bool,
}

/// A node's handle on the outside world while it handles a message.
pub struct Ctx<'a> {
    me: NodeId,
    wants: &'a mut BTreeSet<NodeId>,
    out: Vec<(NodeId, Payload)>,
    added: Vec<NodeId>,
    removed: Vec<NodeId>,
}

impl Ctx<'_> {
    pub fn me(&self) -> NodeId {
        self.me
    }

    pub fn send(&mut self, to: NodeId, payload: Payload) {
        self.out.push((to, payload));
    }

    pub fn wants(&self) -> &BTreeSet<NodeId> {
        self.wants
    }

    /// Replaces the wanted neighbour set, telling each affected peer.
    pub fn set_wants(&mut self, desired: BTreeSet<NodeId>) {
        let gone: Vec<NodeId> = self.wants.difference(&desired).copied().collect();
        let new: Vec<NodeId> = desired.difference(self.wants).copied().collect();
        for w in gone {
            self.out.push((w, Payload::EdgeDrop));
            self.removed.push(w);
        }
        for w in new {
            self.out.push((w, Payload::EdgeMake));
            self.added.push(w);
        }
        *self.wants = desired;
    }

    pub fn want(&mut self, peer: NodeId) {
        if peer != self.me && self.wants.insert(peer) {
            self.out.push((peer, Payload::EdgeMake));
            self.added.push(peer);
        }
    }
}

#[derive(Clone, Debug)]
pub struct Slot<N> {
    pub node: N,
    pub wants: BTreeSet<NodeId>,
    /// Names this node has learned; the only nodes it may contact besides its
    /// current neighbours.
    pub known: BTreeSet<NodeId>,
}

/// All live node states plus the actual graph. Cloning is cheap: node slots
/// are shared until written.
#[derive(Clone, Debug)]
pub struct Network<N> {
    slots: Vec<Option<Arc<Slot<N>>>>,
    graph: Graph,
    g0: Arc<Graph>,
    tree: Arc<RootedTree>,
    n0: usize,
}

impl<N: Clone> Network<N> {
    pub fn new(g0: Graph, tree: RootedTree, states: BTreeMap<NodeId, N>) -> Self {
        let size = tree.nodes().map(|v| v.index() + 1).max().unwrap_or(0);
        let mut slots: Vec<Option<Arc<Slot<N>>>> = vec![None; size];
        let graph = tree.to_graph();
        for (v, node) in states {
            let wants: BTreeSet<NodeId> = graph.neighbors(v).collect();
            let known = g0.neighbors(v).chain(wants.iter().copied()).collect();
            slots[v.index()] = Some(Arc::new(Slot { node, wants, known }));
        }
        let n0 = tree.len();
        Network { slots, graph, g0: Arc::new(g0), tree: Arc::new(tree), n0 }
    }

    /// Adds names to what `v` knows.
    pub fn learn(&mut self, v: NodeId, names: impl IntoIterator<Item = NodeId>) {
        if let Some(s) = self.slots.get_mut(v.index()).and_then(|s| s.as_mut()) {
            Arc::make_mut(s).known.extend(names);
        }
    }

    pub fn node(&self, v: NodeId) -> Option<&N> {
        self.slot(v).map(|s| &s.node)
    }

    pub fn slot(&self, v: NodeId) -> Option<&Slot<N>> {
        self.slots.get(v.index()).and_then(|s| s.as_deref())
    }

    /// Mutable access to one node, for fault injection in tests.
    pub fn node_mut(&mut self, v: NodeId) -> Option<&mut N> {
        self.slots.get_mut(v.index()).and_then(|s| s.as_mut()).map(|s| &mut Arc::make_mut(s).node)
    }

    pub fn is_alive(&self, v: NodeId) -> bool {
        self.slot(v).is_some()
    }

    pub fn alive(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.slots.iter().enumerate().filter(|(_, s)| s.is_some()).map(|(i, _)| NodeId(i as u32))
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &N)> + '_ {
        self.slots.iter().enumerate().filter_map(|(i, s)| s.as_ref().map(|s| (NodeId(i as u32), &s.node)))
    }

    pub fn alive_count(&self) -> usize {
        self.graph.vertex_count()
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn g0(&self) -> &Graph {
        &self.g0
    }

    pub fn tree(&self) -> &RootedTree {
        &self.tree
    }

    /// Node count before any deletion.
    pub fn initial_size(&self) -> usize {
        self.n0
    }
}

/// Everything that happened in one round.
#[derive(Clone, Debug, Default)]
pub struct RoundOutcome {
    pub deleted: NodeId,
    pub delivered: Vec<Message>,
    pub sent: BTreeMap<NodeId, usize>,
    pub received: BTreeMap<NodeId, usize>,
    pub bits: BTreeMap<NodeId, u64>,
    pub latency: u32,
    pub added: Vec<(NodeId, NodeId)>,
    pub dropped: Vec<(NodeId, NodeId)>,
    pub touched: BTreeSet<NodeId>,
    pub violations: Vec<Violation>,
}

impl RoundOutcome {
    pub fn max_messages_per_node(&self) -> usize {
        let mut per: BTreeMap<NodeId, usize> = self.sent.clone();
        for (v, r) in &self.received {
            *per.entry(*v).or_default() += r;
        }
        per.into_values().max().unwrap_or(0)
    }

    pub fn max_bits_per_node(&self) -> u64 {
        self.bits.values().copied().max().unwrap_or(0)
    }

    pub fn count(&self, kind: &str) -> usize {
        self.delivered.iter().filter(|m| m.payload.kind() == kind).count()
    }

    /// Most messages of `kind` sent by one node.
    pub fn max_per_sender(&self, kind: &str) -> usize {
        let mut per: BTreeMap<NodeId, usize> = BTreeMap::new();
        for m in self.delivered.iter().filter(|m| m.payload.kind() == kind) {
            *per.entry(m.sender).or_default() += 1;
        }
        per.into_values().max().unwrap_or(0)
    }
}

fn edge(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Deletes `v` and runs the repair to quiescence.
pub fn run_round<P: Protocol>(proto: &P, net: &mut Network<P::Node>, v: NodeId, rng: &mut ChaCha8Rng) -> RoundOutcome {
    let mut out = RoundOutcome { deleted: v, ..Default::default() };
    if !net.is_alive(v) {
        out.violations.push(Violation::new("adversary", format!("node {v} is not alive")));
        return out;
    }
    let bits_per_id = id_bits(net.n0);
    let notice = proto.notice(net, v);
    let neighbors: Vec<NodeId> = net.graph.neighbors(v).collect();
    let deg0 = net.g0.degree(v);
    let edges_before = net.graph.edge_count();
    net.slots[v.index()] = None;
    net.graph.remove_vertex(v);
    for &u in &neighbors {
        let s = Arc::make_mut(net.slots[u.index()].as_mut().unwrap());
        s.wants.remove(&v);
    }
    // initial presence of every pair touched this round
    let mut changed: BTreeMap<(NodeId, NodeId), bool> = BTreeMap::new();
    let mut queue: Vec<Message> = neighbors
        .iter()
        .map(|&u| Message { sender: v, recipient: u, size_bits: notice.size_bits(bits_per_id), payload: notice.clone(), depth: 1 })
        .collect();
    let mut step = 1;
    let mut total = 0usize;
    while !queue.is_empty() {
        if step > MAX_STEPS {
            out.violations.push(Violation::new("quiescence", format!("{} messages still in flight after {MAX_STEPS} steps", queue.len())));
            break;
        }
        queue.shuffle(rng);
        out.latency = step;
        let mut next = Vec::new();
        let mut touched = BTreeSet::new();
        for msg in std::mem::take(&mut queue) {
            total += 1;
            let r = msg.recipient;
            if msg.sender != v {
                *out.sent.entry(msg.sender).or_default() += 1;
                *out.bits.entry(msg.sender).or_default() += msg.size_bits;
            }
            if !net.is_alive(r) {
                out.violations.push(Violation::new("knowledge", format!("{} sent {} to dead node {r}", msg.sender, msg.payload.kind())));
                out.delivered.push(msg);
                continue;
            }
            *out.received.entry(r).or_default() += 1;
            *out.bits.entry(r).or_default() += msg.size_bits;
            {
                let s = Arc::make_mut(net.slots[r.index()].as_mut().unwrap());
                s.known.insert(msg.sender);
                s.known.extend(msg.payload.names());
            }
            dispatch(proto, net, r, step, &mut next, &mut changed, &mut out.violations, bits_per_id, |p, ctx, node| p.on_message(ctx, node, &msg));
            touched.insert(r);
            out.delivered.push(msg);
        }
        for &u in &touched {
            dispatch(proto, net, u, step, &mut next, &mut changed, &mut out.violations, bits_per_id, |p, ctx, node| p.flush(ctx, node));
        }
        out.touched.extend(touched);
        queue = next;
        step += 1;
    }
    for ((a, b), before) in changed {
        match (before, net.graph.has_edge(a, b)) {
            (false, true) => out.added.push((a, b)),
            (true, false) => out.dropped.push((a, b)),
            _ => {}
        }
    }
    let budget = BUDGET_PER_DEGREE * (deg0 + BUDGET_SLACK);
    if total > budget {
        out.violations.push(Violation::new("message_budget", format!("{total} messages exceed budget {budget} for degree {deg0}")));
    }
    if net.graph.edge_count() + neighbors.len() + out.dropped.len() != edges_before + out.added.len() {
        out.violations.push(Violation::new("conservation", "edge count does not reconcile with added/dropped edges".to_string()));
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn dispatch<P: Protocol>(
    proto: &P,
    net: &mut Network<P::Node>,
    u: NodeId,
    step: u32,
    next: &mut Vec<Message>,
    changed: &mut BTreeMap<(NodeId, NodeId), bool>,
    violations: &mut Vec<Violation>,
    bits_per_id: u64,
    f: impl FnOnce(&P, &mut Ctx<'_>, &mut P::Node),
) {
    let slot = Arc::make_mut(net.slots[u.index()].as_mut().unwrap());
    let Slot { node, wants, known } = slot;
    let mut ctx = Ctx { me: u, wants, out: Vec::new(), added: Vec::new(), removed: Vec::new() };
    f(proto, &mut ctx, node);
    let Ctx { out: sends, added, removed, .. } = ctx;
    let _ = known;
    for w in added {
        if !net.is_alive(w) {
            violations.push(Violation::new("knowledge", format!("{u} wants an edge to dead node {w}")));
            continue;
        }
        changed.entry(edge(u, w)).or_insert_with(|| net.graph.has_edge(u, w));
        net.graph.add_edge(u, w);
    }
    for w in removed {
        let peer_wants = net.slot(w).is_some_and(|s| s.wants.contains(&u));
        if !peer_wants {
            changed.entry(edge(u, w)).or_insert_with(|| net.graph.has_edge(u, w));
            net.graph.remove_edge(u, w);
        }
    }
    for (to, payload) in sends {
        if to == u {
            violations.push(Violation::new("knowledge", format!("{u} sent {} to itself", payload.kind())));
            continue;
        }
        if !net.graph.has_edge(u, to) && !net.slot(u).is_some_and(|s| s.known.contains(&to)) {
            violations.push(Violation::new("knowledge", format!("{u} sent {} to {to}, a name it never learned", payload.kind())));
        }
        next.push(Message { sender: u, recipient: to, size_bits: payload.size_bits(bits_per_id), payload, depth: step + 1 });
    }
}

/// Which repair strategy a run uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrategyKind {
    ForgivingTree,
    Surrogate,
    Line,
    BinaryTree,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [StrategyKind::ForgivingTree, StrategyKind::Surrogate, StrategyKind::Line, StrategyKind::BinaryTree];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::ForgivingTree => "ft",
            StrategyKind::Surrogate => "surrogate",
            StrategyKind::Line => "line",
            StrategyKind::BinaryTree => "binary_tree",
        }
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ft" | "forgiving_tree" | "forgiving-tree" => Ok(StrategyKind::ForgivingTree),
            "surrogate" => Ok(StrategyKind::Surrogate),
            "line" => Ok(StrategyKind::Line),
            "binary_tree" | "binary-tree" | "binary" => Ok(StrategyKind::BinaryTree),
            _ => Err(format!("unknown strategy {s:?}")),
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How the adversary is chosen, by name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdversarySpec {
    Random,
    MaxDegree,
    HeirHunter,
    /// Plies searched before each deletion; 1 is the plain greedy choice.
    DiameterGreedy { lookahead: usize },
    Scripted(Vec<NodeId>),
}

impl AdversarySpec {
    pub const NAMES: [&'static str; 4] = ["random", "max_degree", "heir_hunter", "diameter_greedy"];

    pub fn name(&self) -> &'static str {
        match self {
            AdversarySpec::Random => "random",
            AdversarySpec::MaxDegree => "max_degree",
            AdversarySpec::HeirHunter => "heir_hunter",
            AdversarySpec::DiameterGreedy { .. } => "diameter_greedy",
            AdversarySpec::Scripted(_) => "scripted",
        }
    }

    pub fn all() -> Vec<AdversarySpec> {
        vec![AdversarySpec::Random, AdversarySpec::MaxDegree, AdversarySpec::HeirHunter, AdversarySpec::DiameterGreedy { lookahead: 1 }]
    }
}

impl std::str::FromStr for AdversarySpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "random" => Ok(AdversarySpec::Random),
            "max_degree" | "max-degree" => Ok(AdversarySpec::MaxDegree),
            "heir_hunter" | "heir-hunter" => Ok(AdversarySpec::HeirHunter),
            "diameter_greedy" | "diameter-greedy" | "greedy" => Ok(AdversarySpec::DiameterGreedy { lookahead: 1 }),
            _ => {
                if let Some(path) = s.strip_prefix("scripted:") {
                    return crate::adversary::load_script(std::path::Path::new(path)).map(AdversarySpec::Scripted).map_err(|e| e.to_string());
                }
                match s.strip_prefix("diameter_greedy:").map(str::parse::<usize>) {
                    Some(Ok(lookahead)) if lookahead >= 1 => Ok(AdversarySpec::DiameterGreedy { lookahead }),
                    _ => Err(format!("unknown adversary {s:?}")),
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub seed: u64,
    pub tree: TreeSpec,
    pub adversary: AdversarySpec,
    pub strategy: StrategyKind,
    /// Maximum number of deletions; `None` runs to extinction.
    pub rounds: Option<usize>,
    pub referee: RefereeLevel,
    /// Keep every trace event in the report.
    pub trace: bool,
    /// Overrides the delivery-order seed; the adversary keeps `seed`.
    pub delivery_seed: Option<u64>,
}

impl SimulationConfig {
    pub fn new(tree: TreeSpec, strategy: StrategyKind, adversary: AdversarySpec, seed: u64) -> Self {
        SimulationConfig { seed, tree, adversary, strategy, rounds: None, referee: RefereeLevel::Full, trace: false, delivery_seed: None }
    }
}

/// Metrics of one delete/repair round.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub deleted: NodeId,
    pub max_degree_increase: i64,
    pub diameter: usize,
    pub max_messages_per_node: usize,
    pub max_bits_per_node: u64,
    pub recovery_latency: u32,
    pub edges_added: usize,
    pub edges_dropped: usize,
    /// Will portions (re)sent this round.
    #[serde(skip)]
    pub portions_sent: usize,
    /// Most will portions sent by a single owner this round.
    #[serde(skip)]
    pub portions_per_owner: usize,
    #[serde(skip)]
    pub messages: usize,
}

impl RoundRecord {
    pub const CSV_HEADER: &'static str =
        "round,deleted,max_degree_increase,diameter,max_messages_per_node,max_bits_per_node,recovery_latency,edges_added,edges_dropped";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.round,
            self.deleted,
            self.max_degree_increase,
            self.diameter,
            self.max_messages_per_node,
            self.max_bits_per_node,
            self.recovery_latency,
            self.edges_added,
            self.edges_dropped
        )
    }
}

pub fn write_csv(records: &[RoundRecord]) -> String {
    let mut s = String::from(RoundRecord::CSV_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

#[derive(Clone, Debug, PartialEq)]
pub enum RunStatus {
    Completed,
    Violation { round: usize, violations: Vec<Violation>, dump: String },
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub strategy: StrategyKind,
    pub records: Vec<RoundRecord>,
    pub status: RunStatus,
    pub tree_stats: TreeStats,
    /// Diameter of the original graph.
    pub g0_diameter: usize,
    pub trace_hash: String,
    pub trace: Vec<TraceEvent>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.status == RunStatus::Completed
    }

    pub fn max_degree_increase(&self) -> i64 {
        self.records.iter().map(|r| r.max_degree_increase).max().unwrap_or(0)
    }

    pub fn max_diameter(&self) -> usize {
        self.records.iter().map(|r| r.diameter).max().unwrap_or(0)
    }

    pub fn max_messages_per_node(&self) -> usize {
        self.records.iter().map(|r| r.max_messages_per_node).max().unwrap_or(0)
    }

    pub fn max_latency(&self) -> u32 {
        self.records.iter().map(|r| r.recovery_latency).max().unwrap_or(0)
    }

    pub fn max_portions(&self) -> usize {
        self.records.iter().map(|r| r.portions_sent).max().unwrap_or(0)
    }

    pub fn max_portions_per_owner(&self) -> usize {
        self.records.iter().map(|r| r.portions_per_owner).max().unwrap_or(0)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
    #[error("{0}")]
    Config(String),
}

/// Builds the tree, runs the configured strategy and adversary, and checks
/// every round with the referee.
pub fn run(config: &SimulationConfig) -> Result<RunReport, SimError> {
    let (g0, tree) = crate::experiments::generate(&config.tree, config.seed)?;
    Ok(match config.strategy {
        StrategyKind::ForgivingTree => run_with(&ForgivingTree, config, g0, tree),
        StrategyKind::Surrogate => run_with(&Surrogate, config, g0, tree),
        StrategyKind::Line => run_with(&Line, config, g0, tree),
        StrategyKind::BinaryTree => run_with(&BinaryTree, config, g0, tree),
    })
}

/// A fresh network after preprocessing: initial states, tree edges, and
/// every name each node learned along the way.
pub fn prepare<P: Protocol>(proto: &P, g0: Graph, tree: RootedTree) -> Network<P::Node> {
    let states = proto.init(&tree);
    let knowledge: Vec<(NodeId, Vec<NodeId>)> = states.iter().map(|(&v, s)| (v, proto.knowledge(s))).collect();
    let mut net = Network::new(g0, tree, states);
    for (v, names) in knowledge {
        net.learn(v, names);
    }
    net
}

/// Runs `proto` on an explicit original graph and spanning tree.
pub fn run_with<P: Protocol>(proto: &P, config: &SimulationConfig, g0: Graph, tree: RootedTree) -> RunReport {
    let tree_stats = tree.stats();
    let g0_diameter = diameter_fast(&g0).unwrap_or(0);
    let mut net = prepare(proto, g0, tree);
    let mut adversary = Adversary::new(&config.adversary, config.seed);
    let mut delivery = ChaCha8Rng::seed_from_u64(config.delivery_seed.unwrap_or(config.seed) ^ 0x005e_ed0f_de11_7e4e);
    let mut referee_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x7e7e));
    let mut log = TraceLog::new(config.trace);
    let mut records = Vec::new();
    let mut history = Vec::new();
    let mut status = RunStatus::Completed;
    let limit = config.rounds.unwrap_or(usize::MAX);
    let mut initial = proto.check(&net, &net.alive().collect());
    initial.extend(referee::generic(proto, &net));
    if !initial.is_empty() {
        status = RunStatus::Violation { round: 0, violations: initial, dump: String::new() };
    }
    while status == RunStatus::Completed && net.alive_count() > 0 && records.len() < limit {
        let round = records.len() + 1;
        let v = adversary.next(proto, &net, &history);
        history.push(v);
        let outcome = run_round(proto, &mut net, v, &mut delivery);
        log.round(round, &outcome, &net);
        let mut violations = outcome.violations.clone();
        violations.extend(referee::check_round(proto, &net, &outcome, config.referee, round, &mut referee_rng));
        let diameter = match diameter_fast(net.graph()) {
            Ok(d) => d,
            Err(_) if net.alive_count() == 0 => 0,
            Err(e) => {
                violations.push(Violation::new("connectivity", e.to_string()));
                0
            }
        };
        records.push(RoundRecord {
            round,
            deleted: v,
            max_degree_increase: referee::max_degree_increase(&net).max(0),
            diameter,
            max_messages_per_node: outcome.max_messages_per_node(),
            max_bits_per_node: outcome.max_bits_per_node(),
            recovery_latency: outcome.latency,
            edges_added: outcome.added.len(),
            edges_dropped: outcome.dropped.len(),
            portions_sent: outcome.count("will_portion"),
            portions_per_owner: outcome.max_per_sender("will_portion"),
            messages: outcome.delivered.len(),
        });
        if !violations.is_empty() {
            let dump = referee::dump(&net, &outcome);
            status = RunStatus::Violation { round, violations, dump };
        }
    }
    let (trace_hash, trace) = log.finish();
    RunReport { strategy: kind_of(proto.name()), records, status, tree_stats, g0_diameter, trace_hash, trace }
}

fn kind_of(name: &str) -> StrategyKind {
    name.parse().unwrap_or(StrategyKind::ForgivingTree)
}

/// Deterministic per-purpose generator.
pub fn rng_for(seed: u64, purpose: u64) -> ChaCha8Rng {
    let mut base = ChaCha8Rng::seed_from_u64(seed);
    ChaCha8Rng::seed_from_u64(base.gen::<u64>() ^ purpose)
}
