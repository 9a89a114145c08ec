//! End-of-round invariant checks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::IteratorRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{run_round, Network, Protocol, RoundOutcome};
use crate::graph::NodeId;
use crate::protocol::{make_leaf_will, make_will, RealNodeState, Vx, WillPortion};

/// Rounds between full checks at the sampled level.
pub const SAMPLE_EVERY: usize = 8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefereeLevel {
    #[default]
    Full,
    Sampled,
    Off,
}

impl std::str::FromStr for RefereeLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full" => Ok(RefereeLevel::Full),
            "sampled" => Ok(RefereeLevel::Sampled),
            "off" => Ok(RefereeLevel::Off),
            _ => Err(format!("unknown referee level {s:?} (full, sampled, off)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub invariant: String,
    pub detail: String,
}

impl Violation {
    pub fn new(invariant: &str, detail: String) -> Self {
        Violation { invariant: invariant.to_string(), detail }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.invariant, self.detail)
    }
}

pub fn max_degree_increase<N: Clone>(net: &Network<N>) -> i64 {
    let g = net.graph();
    g.vertices().map(|v| g.degree(v) as i64 - net.g0().degree(v) as i64).max().unwrap_or(0)
}

/// Checks every strategy must pass: connectivity, edges backed by wants, and
/// the strategy's degree cap.
pub fn generic<P: Protocol>(proto: &P, net: &Network<P::Node>) -> Vec<Violation> {
    let mut out = Vec::new();
    let g = net.graph();
    if g.vertex_count() > 0 && !g.is_connected() {
        out.push(Violation::new("connectivity", format!("graph with {} nodes is disconnected", g.vertex_count())));
    }
    for v in net.alive() {
        let wants = &net.slot(v).unwrap().wants;
        for &w in wants {
            if !net.is_alive(w) {
                out.push(Violation::new("knowledge", format!("{v} still wants dead node {w}")));
            } else if !g.has_edge(v, w) {
                out.push(Violation::new("edges", format!("{v} wants {w} but the edge is missing")));
            }
        }
        for w in g.neighbors(v) {
            if !wants.contains(&w) && !net.slot(w).is_some_and(|s| s.wants.contains(&v)) {
                out.push(Violation::new("edges", format!("edge {v}-{w} is wanted by neither end")));
            }
        }
        if let Some(cap) = proto.degree_cap() {
            let inc = g.degree(v) as i64 - net.g0().degree(v) as i64;
            if inc > cap {
                out.push(Violation::new("degree_cap", format!("{v} degree grew by {inc} > {cap}")));
            }
        }
    }
    out
}

/// The checks due after `round` at the given level.
pub fn check_round<P: Protocol>(
    proto: &P,
    net: &Network<P::Node>,
    outcome: &RoundOutcome,
    level: RefereeLevel,
    round: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Violation> {
    match level {
        RefereeLevel::Off => Vec::new(),
        RefereeLevel::Sampled => {
            let mut out = generic(proto, net);
            if round.is_multiple_of(SAMPLE_EVERY) {
                out.extend(proto.check(net, &outcome.touched));
            }
            out
        }
        RefereeLevel::Full => {
            let mut out = generic(proto, net);
            out.extend(proto.check(net, &outcome.touched));
            if out.is_empty() {
                out.extend(sandbox(proto, net, rng));
            }
            out
        }
    }
}

/// Deletes a random node on a copy of the network and checks the result, so
/// every round exercises the wills as they stand.
pub fn sandbox<P: Protocol>(proto: &P, net: &Network<P::Node>, rng: &mut ChaCha8Rng) -> Vec<Violation> {
    let Some(v) = net.alive().choose(rng) else { return Vec::new() };
    let mut copy = net.clone();
    let mut delivery = ChaCha8Rng::seed_from_u64(v.0 as u64);
    let outcome = run_round(proto, &mut copy, v, &mut delivery);
    let mut out = outcome.violations;
    out.extend(generic(proto, &copy));
    out.extend(proto.check(&copy, &outcome.touched));
    for x in &mut out {
        x.detail = format!("deleting {v} in sandbox: {}", x.detail);
        x.invariant = format!("sandbox/{}", x.invariant);
    }
    out
}

/// A short description of the nodes involved in a failed round.
pub fn dump<N: Clone + fmt::Debug>(net: &Network<N>, outcome: &RoundOutcome) -> String {
    let mut s = format!("deleted {}\n", outcome.deleted);
    for &v in outcome.touched.iter().take(16) {
        if let Some(node) = net.node(v) {
            s.push_str(&format!("{v}: {node:?}\n"));
        }
    }
    s
}

/// The virtual tree assembled from every node's claims.
#[derive(Clone, Debug, Default)]
pub struct VirtualTree {
    pub parent: BTreeMap<Vx, Option<Vx>>,
    pub children: BTreeMap<Vx, Vec<Vx>>,
}

impl VirtualTree {
    pub fn from_states(net: &Network<RealNodeState>) -> Self {
        let mut t = VirtualTree::default();
        for (_, s) in net.nodes() {
            t.parent.insert(s.real(), s.parent);
            t.children.insert(s.real(), s.children.clone());
            if let Some(h) = &s.helper {
                t.parent.insert(h.vertex(s.id), h.hparent);
                t.children.insert(h.vertex(s.id), h.hchildren.clone());
            }
        }
        t
    }

    pub fn roots(&self) -> Vec<Vx> {
        self.parent.iter().filter(|(_, p)| p.is_none()).map(|(v, _)| *v).collect()
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Actual edges implied by the virtual edges.
    pub fn image(&self) -> BTreeSet<(NodeId, NodeId)> {
        let mut out = BTreeSet::new();
        for (v, p) in &self.parent {
            if let Some(p) = p {
                let (a, b) = (v.sim(), p.sim());
                if a != b {
                    out.insert((a.min(b), a.max(b)));
                }
            }
        }
        out
    }

    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack: Vec<(Vx, usize)> = self.roots().into_iter().map(|r| (r, 0)).collect();
        while let Some((v, d)) = stack.pop() {
            best = best.max(d);
            for &c in self.children.get(&v).into_iter().flatten() {
                stack.push((c, d + 1));
            }
        }
        best
    }
}

/// All structural invariants of the forgiving tree.
pub fn forgiving_tree(net: &Network<RealNodeState>, _touched: &BTreeSet<NodeId>) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut bad = |inv: &str, d: String| out.push(Violation::new(inv, d));
    let t = VirtualTree::from_states(net);
    if t.is_empty() {
        return out;
    }

    for (_, s) in net.nodes() {
        if !s.flags_consistent() {
            bad("state_machine", format!("{} flags ishelper={} isreadyheir={} with {} hchildren", s.id, s.ishelper, s.isreadyheir, s.hchildren().len()));
        }
        for a in s.anomalies() {
            bad("anomaly", format!("{}: {a}", s.id));
        }
    }

    // links agree from both ends
    for (&v, &p) in &t.parent {
        if let Some(p) = p {
            match t.children.get(&p) {
                None => bad("virtual_tree", format!("{v} has parent {p}, which does not exist")),
                Some(cs) if !cs.contains(&v) => bad("virtual_tree", format!("{v} has parent {p}, which does not list it")),
                _ => {}
            }
        }
        for &c in &t.children[&v] {
            match t.parent.get(&c) {
                None => bad("virtual_tree", format!("{v} lists child {c}, which does not exist")),
                Some(&cp) if cp != Some(v) => bad("virtual_tree", format!("{v} lists child {c}, whose parent is {cp:?}")),
                _ => {}
            }
        }
    }
    let roots = t.roots();
    if roots.len() != 1 {
        bad("virtual_tree", format!("{} roots: {roots:?}", roots.len()));
    }

    // spanning and acyclic: preorder from the root with entry/exit times
    let mut time: BTreeMap<Vx, (usize, usize)> = BTreeMap::new();
    if let Some(&root) = roots.first() {
        let mut clock = 0;
        let mut stack = vec![(root, false)];
        while let Some((v, done)) = stack.pop() {
            if done {
                time.get_mut(&v).unwrap().1 = clock;
                continue;
            }
            if time.contains_key(&v) {
                bad("virtual_tree", format!("{v} reached twice"));
                continue;
            }
            time.insert(v, (clock, 0));
            clock += 1;
            stack.push((v, true));
            for &c in t.children.get(&v).into_iter().flatten() {
                stack.push((c, false));
            }
        }
    }
    if time.len() != t.len() {
        bad("virtual_tree", format!("{} of {} vertices reachable from the root", time.len(), t.len()));
    }
    let is_ancestor = |a: Vx, b: Vx| match (time.get(&a), time.get(&b)) {
        (Some(&(ai, ao)), Some(&(bi, _))) => ai <= bi && bi < ao,
        _ => false,
    };

    // helper degrees, simulation uniqueness, helper above its own real vertex
    let mut claimed: BTreeMap<NodeId, BTreeSet<Vx>> = BTreeMap::new();
    for (&v, cs) in &t.children {
        for x in cs.iter().chain(t.parent[&v].iter()).chain(std::iter::once(&v)) {
            if x.is_helper() {
                claimed.entry(x.sim()).or_default().insert(*x);
            }
        }
        if let Vx::Helper { sim, .. } = v {
            let parent = t.parent[&v];
            match cs.len() {
                2 => {}
                1 => {}
                n => bad("helper_degree", format!("helper {v} has {n} children")),
            }
            if parent.is_none() && v != roots[0] {
                bad("helper_degree", format!("helper {v} has no parent"));
            }
            if !is_ancestor(v, Vx::Real(sim)) && time.contains_key(&v) {
                bad("helper_position", format!("helper {v} is not an ancestor of {sim}"));
            }
        }
    }
    for (x, hs) in claimed {
        if hs.len() > 1 {
            bad("single_simulation", format!("{x} simulates {} helpers: {hs:?}", hs.len()));
        }
    }

    // children of real vertices are free real vertices or ready helpers
    for (_, s) in net.nodes() {
        for &c in &s.children {
            let ok = match c {
                Vx::Real(x) => net.node(x).is_some_and(|n| n.helper.is_none()),
                Vx::Helper { .. } => t.children.get(&c).is_some_and(|cc| cc.len() == 1),
            };
            if !ok {
                bad("real_children", format!("{} has child {c}, which is neither free nor a ready helper", s.id));
            }
        }
    }

    // homomorphism
    let image = t.image();
    let actual: BTreeSet<(NodeId, NodeId)> = net.graph().edges().collect();
    for e in image.difference(&actual) {
        bad("homomorphism", format!("virtual edge {}-{} has no actual edge", e.0, e.1));
    }
    for e in actual.difference(&image) {
        bad("homomorphism", format!("actual edge {}-{} is not the image of a virtual edge", e.0, e.1));
    }

    // wills and their distribution
    let wills: BTreeMap<NodeId, Vec<WillPortion>> = net.nodes().map(|(v, s)| (v, make_will(s))).collect();
    for (_, s) in net.nodes() {
        let leaves: BTreeSet<Vx> = s.sub_rt.leaves().into_iter().collect();
        let kids: BTreeSet<Vx> = s.children.iter().copied().collect();
        if leaves != kids {
            bad("will", format!("{} will leaves {leaves:?} differ from children {kids:?}", s.id));
            continue;
        }
        if let Err(e) = s.sub_rt.validate() {
            bad("will", format!("{}: {e}", s.id));
            continue;
        }
        for p in &wills[&s.id] {
            let held = net.node(p.recipient).and_then(|r| r.portion.as_ref());
            if held != Some(p) {
                bad("will_distribution", format!("{} holds {held:?}, expected {p:?}", p.recipient));
            }
        }
        if let Some(p) = &s.portion {
            let current = wills.get(&p.owner).and_then(|ps| ps.iter().find(|q| q.recipient == s.id));
            if current != Some(p) {
                bad("will_distribution", format!("{} holds a stale portion from {}", s.id, p.owner));
            }
        }
        if s.children.is_empty() && s.helper.is_some() {
            if let Ok(Some((to, lw))) = make_leaf_will(s) {
                let held = net.node(to).and_then(|r| r.leaf_wills.get(&s.id));
                if held != Some(&lw) {
                    bad("leaf_will", format!("{to} holds {held:?} for leaf {}, expected {lw:?}", s.id));
                }
            }
        }
        for (l, lw) in &s.leaf_wills {
            let current = net.node(*l).and_then(|ln| make_leaf_will(ln).ok().flatten());
            if current != Some((s.id, lw.clone())) {
                bad("leaf_will", format!("{} holds a stale leaf will from {l}", s.id));
            }
        }
    }
    out
}
