//! Deletion strategies. All of them see the whole network and every node's
//! state, and none of them mutate anything.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::hash::{Hash, Hasher};
use std::path::Path;
use std::sync::{LazyLock, Mutex};

use rand::seq::IteratorRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::{center, diameter_above, diameter_fast, GraphError, NodeId};
use crate::sim::{run_round, AdversarySpec, Network, Protocol};

/// Seed of the delivery order used when previewing a deletion.
const PREVIEW_SEED: u64 = 0x9e37_79b9;

#[derive(Clone, Debug)]
pub enum Adversary {
    /// Uniform over the surviving nodes.
    Random(ChaCha8Rng),
    /// A node of maximum current degree.
    MaxDegree,
    /// The heir of the deepest will, or its owner once that heir is ready;
    /// random when there is no will.
    HeirHunter(ChaCha8Rng),
    /// The node whose deletion maximises the next diameter, or with a longer
    /// lookahead the largest diameter reachable within that many deletions.
    DiameterGreedy { lookahead: usize },
    /// A fixed order; surviving nodes not listed follow by lowest id.
    Scripted { order: Vec<NodeId>, next: usize },
}

pub fn random_adversary(seed: u64) -> Adversary {
    Adversary::Random(ChaCha8Rng::seed_from_u64(seed))
}

pub fn max_degree_adversary() -> Adversary {
    Adversary::MaxDegree
}

pub fn heir_hunter_adversary(seed: u64) -> Adversary {
    Adversary::HeirHunter(ChaCha8Rng::seed_from_u64(seed))
}

pub fn diameter_greedy_adversary(lookahead: usize) -> Adversary {
    Adversary::DiameterGreedy { lookahead: lookahead.max(1) }
}

pub fn scripted_adversary(order: Vec<NodeId>) -> Adversary {
    Adversary::Scripted { order, next: 0 }
}

impl Adversary {
    pub fn new(spec: &AdversarySpec, seed: u64) -> Adversary {
        match spec {
            AdversarySpec::Random => random_adversary(seed),
            AdversarySpec::MaxDegree => max_degree_adversary(),
            AdversarySpec::HeirHunter => heir_hunter_adversary(seed),
            AdversarySpec::DiameterGreedy { lookahead } => diameter_greedy_adversary(*lookahead),
            AdversarySpec::Scripted(order) => scripted_adversary(order.clone()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Adversary::Random(_) => "random",
            Adversary::MaxDegree => "max_degree",
            Adversary::HeirHunter(_) => "heir_hunter",
            Adversary::DiameterGreedy { .. } => "diameter_greedy",
            Adversary::Scripted { .. } => "scripted",
        }
    }

    /// The next node to delete. Panics when no node is left.
    pub fn next<P: Protocol>(&mut self, proto: &P, net: &Network<P::Node>, _history: &[NodeId]) -> NodeId {
        assert!(net.alive_count() > 0, "no node left to delete");
        match self {
            Adversary::Random(rng) => net.alive().choose(rng).unwrap(),
            Adversary::MaxDegree => {
                let g = net.graph();
                net.alive().max_by_key(|&v| (g.degree(v), std::cmp::Reverse(v))).unwrap()
            }
            Adversary::HeirHunter(rng) => proto
                .heirs(net)
                .into_iter()
                .filter(|t| net.is_alive(t.heir) && net.is_alive(t.owner))
                .max_by_key(|t| (t.depth, std::cmp::Reverse(t.heir)))
                .map(|t| if t.heir_ready { t.owner } else { t.heir })
                .unwrap_or_else(|| net.alive().choose(rng).unwrap()),
            Adversary::DiameterGreedy { lookahead: 1 } => memoized(proto, net, 1, || greedy(proto, net)),
            Adversary::DiameterGreedy { lookahead } => memoized(proto, net, *lookahead, || deep_greedy(proto, net, *lookahead)),
            Adversary::Scripted { order, next } => {
                while *next < order.len() {
                    let v = order[*next];
                    *next += 1;
                    if net.is_alive(v) {
                        return v;
                    }
                }
                net.alive().next().unwrap()
            }
        }
    }
}

/// Greedy picks by state fingerprint. The pick depends only on the state, so
/// runs that revisit a state (other seeds on the same tree) reuse it.
static MEMO: LazyLock<Mutex<HashMap<(u64, usize), NodeId>>> = LazyLock::new(Default::default);
const MEMO_CAP: usize = 1 << 20;

struct HashWriter<'a>(&'a mut DefaultHasher);

impl fmt::Write for HashWriter<'_> {
    fn write_str(&mut self, s: &str) -> fmt::Result {
        self.0.write(s.as_bytes());
        Ok(())
    }
}

fn fingerprint<P: Protocol>(proto: &P, net: &Network<P::Node>) -> u64 {
    let mut h = DefaultHasher::new();
    proto.name().hash(&mut h);
    for (v, node) in net.nodes() {
        v.hash(&mut h);
        net.graph().neighbors(v).for_each(|w| w.hash(&mut h));
        write!(HashWriter(&mut h), "{node:?}").expect("hashing cannot fail");
    }
    h.finish()
}

fn memoized<P: Protocol>(proto: &P, net: &Network<P::Node>, lookahead: usize, pick: impl FnOnce() -> NodeId) -> NodeId {
    let key = (fingerprint(proto, net), lookahead);
    if let Some(&v) = MEMO.lock().unwrap().get(&key) {
        return v;
    }
    let v = pick();
    let mut memo = MEMO.lock().unwrap();
    if memo.len() >= MEMO_CAP {
        memo.clear();
    }
    memo.insert(key, v);
    v
}

fn greedy<P: Protocol>(proto: &P, net: &Network<P::Node>) -> NodeId {
    // after one local repair the old center usually certifies the new
    // diameter in a single search
    let hints: Vec<NodeId> = center(net.graph()).into_iter().collect();
    let mut best: Option<(usize, NodeId)> = None;
    for v in net.alive() {
        let mut preview = net.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(PREVIEW_SEED);
        run_round(proto, &mut preview, v, &mut rng);
        if preview.alive_count() == 0 {
            return v;
        }
        let floor = best.map(|(d, _)| d);
        // a disconnecting deletion is the worst possible outcome
        match floor.map_or_else(|| diameter_fast(preview.graph()).map(Some), |f| diameter_above(preview.graph(), f, &hints)) {
            Ok(Some(d)) => best = Some((d, v)),
            Ok(None) => {}
            Err(_) => best = Some((usize::MAX, v)),
        }
    }
    best.unwrap().1
}

fn preview<P: Protocol>(proto: &P, net: &Network<P::Node>, v: NodeId) -> Network<P::Node> {
    let mut copy = net.clone();
    run_round(proto, &mut copy, v, &mut ChaCha8Rng::seed_from_u64(PREVIEW_SEED));
    copy
}

fn diameter_or_max(g: &crate::graph::Graph) -> usize {
    if g.vertex_count() == 0 {
        return 0;
    }
    diameter_fast(g).unwrap_or(usize::MAX)
}

/// Largest diameter seen within `plies` further deletions.
fn horizon<P: Protocol>(proto: &P, net: &Network<P::Node>, plies: usize) -> usize {
    let here = diameter_or_max(net.graph());
    if plies == 0 || net.alive_count() <= 1 || here == usize::MAX {
        return here;
    }
    net.alive().map(|v| horizon(proto, &preview(proto, net, v), plies - 1)).max().unwrap_or(0).max(here)
}

fn deep_greedy<P: Protocol>(proto: &P, net: &Network<P::Node>, lookahead: usize) -> NodeId {
    let mut best: Option<((usize, usize), NodeId)> = None;
    for v in net.alive() {
        let next = preview(proto, net, v);
        let key = (horizon(proto, &next, lookahead - 1), diameter_or_max(next.graph()));
        if best.is_none_or(|(b, _)| key > b) {
            best = Some((key, v));
        }
    }
    best.unwrap().1
}

/// Reads a deletion order, one node id per line. Blank lines and lines
/// starting with `#` are skipped.
pub fn load_script(path: &Path) -> Result<Vec<NodeId>, GraphError> {
    let text = std::fs::read_to_string(path).map_err(|e| GraphError::Io(format!("{}: {e}", path.display())))?;
    parse_script(&text)
}

pub fn parse_script(text: &str) -> Result<Vec<NodeId>, GraphError> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| l.parse::<u32>().map(NodeId).map_err(|_| GraphError::Parse { line: i + 1, msg: format!("bad node id {l:?}") }))
        .collect()
}
