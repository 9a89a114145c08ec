//! Message handlers of a single node.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::will::make_will;
use super::{make_leaf_will, generate_sub_rt, HeirState, HelperLinks, HelperRole, LeafWill, RealNodeState, Vx, WillPortion};
use crate::graph::{NodeId, RootedTree};
use crate::sim::{referee, Ctx, HeirTarget, Message, Network, Payload, Protocol, Violation};

/// Something a node noticed that a correct run never produces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FtAnomaly {
    /// A will portion names a vertex this node does not host.
    ForeignPortion { owner: NodeId, leaf: Vx },
    /// A helper about to be bypassed does not have exactly one child.
    BypassNotReady { vertex: Vx, children: usize },
    /// A pointer update for a vertex this node does not host.
    UnknownTarget { target: Vx },
    /// A pointer update whose old value is not among the target's links.
    StaleLink { target: Vx, old: Vx },
    /// Asked to take on a second helper.
    DoubleHelper { held: Vx, offered: Vx },
    Will(String),
}

impl fmt::Display for FtAnomaly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FtAnomaly::ForeignPortion { owner, leaf } => write!(f, "portion from {owner} names foreign vertex {leaf}"),
            FtAnomaly::BypassNotReady { vertex, children } => write!(f, "bypass of {vertex} with {children} children"),
            FtAnomaly::UnknownTarget { target } => write!(f, "update for unknown vertex {target}"),
            FtAnomaly::StaleLink { target, old } => write!(f, "{target} has no link to {old}"),
            FtAnomaly::DoubleHelper { held, offered } => write!(f, "holding {held}, offered {offered}"),
            FtAnomaly::Will(e) => write!(f, "will: {e}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub(crate) struct Bookkeeping {
    sent_portions: BTreeMap<NodeId, WillPortion>,
    sent_leaf_will: Option<(NodeId, LeafWill)>,
    removals: Vec<Vx>,
    substitutions: Vec<(Vx, Vx)>,
    /// Deleted nodes still named in our links.
    dead: BTreeSet<NodeId>,
    pub(crate) anomalies: Vec<FtAnomaly>,
}

/// The forgiving tree as a [`Protocol`].
#[derive(Clone, Copy, Debug, Default)]
pub struct ForgivingTree;

/// A link change for the host of `target`.
struct Update {
    target: Vx,
    old: Vx,
    new: Option<Vx>,
    bypass: bool,
}

impl ForgivingTree {
    /// Node states after preprocessing, with every will already in place.
    pub fn init_states(tree: &RootedTree) -> BTreeMap<NodeId, RealNodeState> {
        let mut states: BTreeMap<NodeId, RealNodeState> =
            tree.nodes().map(|v| (v, RealNodeState::new(v, tree.parent(v), tree.children(v)))).collect();
        let ids: Vec<NodeId> = states.keys().copied().collect();
        for v in ids {
            for p in make_will(&states[&v]) {
                let r = p.recipient;
                states.get_mut(&v).unwrap().book.sent_portions.insert(r, p.clone());
                states.get_mut(&r).unwrap().portion = Some(p);
            }
        }
        states
    }
}

impl Protocol for ForgivingTree {
    type Node = RealNodeState;

    fn name(&self) -> &'static str {
        "ft"
    }

    fn init(&self, tree: &RootedTree) -> BTreeMap<NodeId, RealNodeState> {
        Self::init_states(tree)
    }

    fn knowledge(&self, node: &RealNodeState) -> Vec<NodeId> {
        node.portion.iter().flat_map(|p| p.names()).collect()
    }

    fn notice(&self, net: &Network<RealNodeState>, v: NodeId) -> Payload {
        let was_leaf = net.node(v).is_none_or(|s| s.children.is_empty());
        Payload::DeletionNotice { deleted: v, was_leaf, neighbors: Vec::new() }
    }

    fn on_message(&self, ctx: &mut Ctx<'_>, s: &mut RealNodeState, msg: &Message) {
        match &msg.payload {
            Payload::DeletionNotice { deleted, was_leaf, .. } => on_deletion(s, ctx, *deleted, *was_leaf),
            Payload::WillPortionDelivery { owner, portion } => match portion {
                Some(p) => s.portion = Some(p.clone()),
                None => {
                    if s.portion.as_ref().is_some_and(|p| p.owner == *owner) {
                        s.portion = None;
                    }
                }
            },
            Payload::LeafWill { leaf, will } => match will {
                Some(w) => {
                    s.leaf_wills.insert(*leaf, w.clone());
                }
                None => {
                    s.leaf_wills.remove(leaf);
                }
            },
            Payload::PointerUpdate { target, old, new } | Payload::Bypass { target, old, new } => apply(s, *target, *old, *new),
            Payload::EdgeMake | Payload::EdgeDrop => {}
        }
    }

    fn flush(&self, ctx: &mut Ctx<'_>, s: &mut RealNodeState) {
        flush(s, ctx);
    }

    fn check(&self, net: &Network<RealNodeState>, touched: &BTreeSet<NodeId>) -> Vec<Violation> {
        referee::forgiving_tree(net, touched)
    }

    fn degree_cap(&self) -> Option<i64> {
        Some(3)
    }

    fn heirs(&self, net: &Network<RealNodeState>) -> Vec<HeirTarget> {
        net.nodes()
            .filter_map(|(v, s)| {
                let h = s.heir()?;
                let heir_ready = net.node(h).is_some_and(|x| x.heir_state() == HeirState::Ready);
                Some(HeirTarget { depth: s.sub_rt.depth(), owner: v, heir: h, heir_ready })
            })
            .collect()
    }
}

fn on_deletion(s: &mut RealNodeState, ctx: &mut Ctx<'_>, v: NodeId, was_leaf: bool) {
    s.book.dead.insert(v);
    let lw = s.leaf_wills.remove(&v);
    if s.portion.as_ref().is_some_and(|p| p.owner == v) {
        let p = s.portion.take().unwrap();
        if !was_leaf {
            make_rt(s, ctx, p, v);
        }
    }
    if !was_leaf {
        // the heir of v tells us about anything we must change
        return;
    }
    let rv = Vx::Real(v);
    if s.children.contains(&rv) {
        s.children.retain(|&c| c != rv);
        s.book.removals.push(rv);
    } else if s.helper.as_ref().is_some_and(|h| h.hchildren.contains(&rv)) {
        fix_leaf_deletion(s, ctx, v, lw.and_then(|w| w.helper));
    } else if let Some(hl) = lw.and_then(|w| w.helper) {
        if hl.hchildren.contains(&rv) {
            splice_out(s, ctx, &hl, rv);
        }
    }
}

/// Replaces the deleted node by its reconstruction tree, from this node's
/// portion of the will.
fn make_rt(s: &mut RealNodeState, ctx: &mut Ctx<'_>, p: WillPortion, v: NodeId) {
    let me = s.id;
    let leaf = p.leaf;
    let new_h = Vx::Helper { sim: me, tag: v };
    let mut occupant = leaf;
    let mut ups = Vec::new();
    if leaf == s.real() {
        s.parent = p.nextparent;
        if let Some(h) = s.helper_vertex() {
            s.book.anomalies.push(FtAnomaly::DoubleHelper { held: h, offered: new_h });
        }
    } else if Some(leaf) == s.helper_vertex() {
        // our ready helper sat in the leaf slot: bypass it
        let h = s.helper.take().unwrap();
        if h.hchildren.len() != 1 {
            s.book.anomalies.push(FtAnomaly::BypassNotReady { vertex: leaf, children: h.hchildren.len() });
        }
        if let Some(&x) = h.hchildren.first() {
            occupant = x;
            ups.push(Update { target: x, old: leaf, new: p.nextparent, bypass: true });
            if let Some(np) = p.nextparent.filter(|np| *np != new_h && matches!(np, Vx::Helper { tag, .. } if *tag == v)) {
                ups.push(Update { target: np, old: leaf, new: Some(x), bypass: true });
            }
        }
    } else {
        s.book.anomalies.push(FtAnomaly::ForeignPortion { owner: v, leaf });
        return;
    }
    let resolve = |x: Vx| if x == leaf { occupant } else { x };
    s.helper = Some(HelperRole {
        tag: v,
        hparent: p.nexthparent.map(resolve),
        hchildren: p.nexthchildren.iter().map(|&c| resolve(c)).collect(),
    });
    if p.is_heir_portion {
        if let Some((pv, top)) = p.parent_update {
            ups.push(Update { target: pv, old: Vx::Real(v), new: Some(resolve(top)), bypass: false });
        }
        if let Some((hv, nbrs)) = &p.inherited_helper {
            for &n in nbrs {
                ups.push(Update { target: n, old: *hv, new: Some(new_h), bypass: false });
            }
        }
    }
    deliver(s, ctx, ups);
}

/// A leaf child of our helper died: short-circuit or prune the helper, then
/// take over the leaf's own helper if it had one.
fn fix_leaf_deletion(s: &mut RealNodeState, ctx: &mut Ctx<'_>, v: NodeId, inherited: Option<HelperLinks>) {
    let me = s.id;
    let rv = Vx::Real(v);
    let old = s.helper.take().unwrap();
    let h = old.vertex(me);
    let q = old.hparent;
    let others: Vec<Vx> = old.hchildren.iter().copied().filter(|&c| c != rv).collect();
    let new_h = Vx::Helper { sim: me, tag: v };
    let hv = inherited.as_ref().map(|l| l.id);
    let rename = |x: Vx| if Some(x) == hv { new_h } else { x };
    let mut ups = Vec::new();
    match others.as_slice() {
        [y] => {
            if Some(*y) != hv {
                ups.push(Update { target: *y, old: h, new: q.map(rename), bypass: true });
            }
            if let Some(qv) = q.filter(|&qv| Some(qv) != hv) {
                ups.push(Update { target: qv, old: h, new: Some(rename(*y)), bypass: true });
            }
        }
        [] => {
            if let Some(qv) = q.filter(|&qv| Some(qv) != hv) {
                ups.push(Update { target: qv, old: h, new: None, bypass: true });
            }
        }
        _ => s.book.anomalies.push(FtAnomaly::BypassNotReady { vertex: h, children: old.hchildren.len() }),
    }
    if let Some(hl) = inherited {
        // our old helper may have been adjacent to the inherited one
        let splice = |x: Vx| if x != h { Some(x) } else if Some(hl.id) == q { others.first().copied() } else { q };
        s.helper = Some(HelperRole {
            tag: v,
            hparent: hl.hparent.and_then(splice),
            hchildren: hl.hchildren.iter().filter_map(|&c| splice(c)).collect(),
        });
        for &n in hl.hparent.iter().chain(&hl.hchildren) {
            if n != h {
                ups.push(Update { target: n, old: hl.id, new: Some(new_h), bypass: false });
            }
        }
    }
    deliver(s, ctx, ups);
}

/// A leaf whose parent was its own helper died: remove that helper.
fn splice_out(s: &mut RealNodeState, ctx: &mut Ctx<'_>, hl: &HelperLinks, rv: Vx) {
    let others: Vec<Vx> = hl.hchildren.iter().copied().filter(|&c| c != rv).collect();
    let mut ups = Vec::new();
    match others.as_slice() {
        [y] => {
            ups.push(Update { target: *y, old: hl.id, new: hl.hparent, bypass: true });
            if let Some(hp) = hl.hparent {
                ups.push(Update { target: hp, old: hl.id, new: Some(*y), bypass: true });
            }
        }
        [] => {
            if let Some(hp) = hl.hparent {
                ups.push(Update { target: hp, old: hl.id, new: None, bypass: true });
            }
        }
        _ => s.book.anomalies.push(FtAnomaly::BypassNotReady { vertex: hl.id, children: hl.hchildren.len() }),
    }
    deliver(s, ctx, ups);
}

fn deliver(s: &mut RealNodeState, ctx: &mut Ctx<'_>, ups: Vec<Update>) {
    for u in ups {
        if u.target.sim() == s.id {
            apply(s, u.target, u.old, u.new);
        } else if u.bypass {
            ctx.send(u.target.sim(), Payload::Bypass { target: u.target, old: u.old, new: u.new });
        } else {
            ctx.send(u.target.sim(), Payload::PointerUpdate { target: u.target, old: u.old, new: u.new });
        }
    }
}

/// In the links of `target`, replaces `old` by `new` or drops it.
fn apply(s: &mut RealNodeState, target: Vx, old: Vx, new: Option<Vx>) {
    if target == s.real() {
        if s.parent == Some(old) {
            s.parent = new;
        } else if let Some(i) = s.children.iter().position(|&c| c == old) {
            match new {
                Some(n) => {
                    s.children[i] = n;
                    s.book.substitutions.push((old, n));
                }
                None => {
                    s.children.remove(i);
                    s.book.removals.push(old);
                }
            }
        } else {
            s.book.anomalies.push(FtAnomaly::StaleLink { target, old });
        }
    } else if Some(target) == s.helper_vertex() {
        let h = s.helper.as_mut().unwrap();
        if h.hparent == Some(old) {
            h.hparent = new;
        } else if let Some(i) = h.hchildren.iter().position(|&c| c == old) {
            match new {
                Some(n) => h.hchildren[i] = n,
                None => {
                    h.hchildren.remove(i);
                }
            }
        } else {
            s.book.anomalies.push(FtAnomaly::StaleLink { target, old });
        }
    } else {
        s.book.anomalies.push(FtAnomaly::UnknownTarget { target });
    }
}

fn flush(s: &mut RealNodeState, ctx: &mut Ctx<'_>) {
    let me = s.id;

    // bring the will in line with the children: removals first
    for r in std::mem::take(&mut s.book.removals) {
        if let Err(e) = s.sub_rt.remove_leaf(r) {
            s.book.anomalies.push(FtAnomaly::Will(e.to_string()));
        }
    }
    for (o, n) in std::mem::take(&mut s.book.substitutions) {
        if let Err(e) = s.sub_rt.substitute(o, n) {
            s.book.anomalies.push(FtAnomaly::Will(e.to_string()));
        }
    }
    let leaves: BTreeSet<Vx> = s.sub_rt.leaves().into_iter().collect();
    if leaves != s.children.iter().copied().collect() {
        s.book.anomalies.push(FtAnomaly::Will(format!("leaves {leaves:?} differ from children {:?}", s.children)));
        s.sub_rt = generate_sub_rt(&s.children);
    }

    // drop whatever we hold for others that no longer applies
    if let Some(p) = &s.portion {
        let parent_of_leaf = if p.leaf == s.real() {
            Some(s.parent)
        } else if Some(p.leaf) == s.helper_vertex() {
            Some(s.hparent())
        } else {
            None
        };
        if parent_of_leaf != Some(Some(Vx::Real(p.owner))) {
            s.portion = None;
        }
    }
    let mine: BTreeSet<Vx> = s.links().collect();
    let kids: BTreeSet<Vx> = s.children.iter().chain(s.hchildren()).copied().collect();
    s.leaf_wills.retain(|&l, lw| {
        let Some(hl) = &lw.helper else { return false };
        if hl.hchildren.contains(&Vx::Real(l)) {
            let executor = hl.hparent.map(Vx::sim).or_else(|| hl.hchildren.iter().find(|&&c| c != Vx::Real(l)).map(|c| c.sim()));
            executor == Some(me) && mine.contains(&hl.id)
        } else {
            kids.contains(&Vx::Real(l))
        }
    });

    // portions that changed
    let portions = make_will(s);
    let current: BTreeSet<NodeId> = portions.iter().map(|p| p.recipient).collect();
    s.book.sent_portions.retain(|r, _| current.contains(r));
    for p in portions {
        if s.book.sent_portions.get(&p.recipient) != Some(&p) {
            ctx.send(p.recipient, Payload::WillPortionDelivery { owner: me, portion: Some(p.clone()) });
            s.book.sent_portions.insert(p.recipient, p);
        }
    }

    // leaf will
    let lw = if s.children.is_empty() && s.helper.is_some() { make_leaf_will(s).ok().flatten() } else { None };
    if lw != s.book.sent_leaf_will {
        if let Some((old_to, _)) = &s.book.sent_leaf_will {
            let moved = lw.as_ref().is_none_or(|(to, _)| to != old_to);
            if moved && ctx.wants().contains(old_to) {
                ctx.send(*old_to, Payload::LeafWill { leaf: me, will: None });
            }
        }
        if let Some((to, w)) = &lw {
            ctx.send(*to, Payload::LeafWill { leaf: me, will: Some(w.clone()) });
        }
        s.book.sent_leaf_will = lw;
    }

    let named: BTreeSet<NodeId> = s.links().map(Vx::sim).filter(|&x| x != me).collect();
    s.book.dead.retain(|d| named.contains(d));
    ctx.set_wants(named.difference(&s.book.dead).copied().collect());
    s.sync_flags();
}
