//! Reconstruction trees and their distribution as wills.

use serde::{Deserialize, Serialize};

use super::{HelperLinks, HelperRole, LeafWill, RealNodeState, Vx, WillPortion};
use crate::graph::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotKind {
    /// Stands for one current child vertex of the owner.
    Leaf(Vx),
    /// A helper to be simulated by one of the children.
    Internal,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WillSlot {
    pub kind: SlotKind,
    pub simulator: NodeId,
    pub parent_slot: Option<usize>,
    pub child_slots: Vec<usize>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum WillError {
    #[error("vertex {0} is not a leaf of the will")]
    NotALeaf(Vx),
    #[error("node {0} has children; leaf wills are for leaves only")]
    NotLeafOwner(NodeId),
    #[error("node {0} simulates no helper")]
    NotHelper(NodeId),
    #[error("malformed will: {0}")]
    Malformed(String),
}

pub use WillError as SurgeryError;

/// The reconstruction tree of a node minus the heir's helper (its SubRT).
///
/// Leaves are the owner's children; every child except the heir simulates
/// exactly one internal slot.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Will {
    slots: Vec<WillSlot>,
    root_slot: Option<usize>,
    heir: Option<NodeId>,
    /// Child count when the will was generated; bounds its depth.
    generated_for: usize,
}

/// Builds a balanced binary search tree over `children`, which are sorted by
/// host id first. Each split point is simulated by the largest leaf of its left
/// half, so the largest child is left without an internal slot and becomes the
/// heir.
pub fn generate_sub_rt(children: &[Vx]) -> Will {
    let mut leaves = children.to_vec();
    leaves.sort_by_key(|v| (v.sim(), *v));
    let mut will = Will { generated_for: leaves.len(), ..Default::default() };
    if leaves.is_empty() {
        return will;
    }
    let root = will.build(&leaves, None);
    will.root_slot = Some(root);
    will.heir = leaves.last().map(|v| v.sim());
    will
}

impl Will {
    fn build(&mut self, leaves: &[Vx], parent: Option<usize>) -> usize {
        let idx = self.slots.len();
        if let [leaf] = leaves {
            self.slots.push(WillSlot { kind: SlotKind::Leaf(*leaf), simulator: leaf.sim(), parent_slot: parent, child_slots: vec![] });
            return idx;
        }
        let split = leaves.len().div_ceil(2);
        let sim = leaves[split - 1].sim();
        self.slots.push(WillSlot { kind: SlotKind::Internal, simulator: sim, parent_slot: parent, child_slots: vec![] });
        let l = self.build(&leaves[..split], Some(idx));
        let r = self.build(&leaves[split..], Some(idx));
        self.slots[idx].child_slots = vec![l, r];
        idx
    }

    pub fn is_empty(&self) -> bool {
        self.root_slot.is_none()
    }

    pub fn heir(&self) -> Option<NodeId> {
        self.heir
    }

    pub fn root_slot(&self) -> Option<usize> {
        self.root_slot
    }

    pub fn slots(&self) -> &[WillSlot] {
        &self.slots
    }

    pub fn slot(&self, i: usize) -> &WillSlot {
        &self.slots[i]
    }

    pub fn generated_for(&self) -> usize {
        self.generated_for
    }

    /// Leaf vertices left to right.
    pub fn leaves(&self) -> Vec<Vx> {
        let mut out = Vec::new();
        self.in_order(|s| {
            if let SlotKind::Leaf(v) = s.kind {
                out.push(v);
            }
        });
        out
    }

    /// Simulators in in-order sequence, leaves and internal slots interleaved.
    pub fn in_order_simulators(&self) -> Vec<(NodeId, bool)> {
        let mut out = Vec::new();
        self.in_order(|s| out.push((s.simulator, matches!(s.kind, SlotKind::Internal))));
        out
    }

    fn in_order(&self, mut f: impl FnMut(&WillSlot)) {
        let mut stack = Vec::new();
        let mut cur = self.root_slot;
        loop {
            while let Some(i) = cur {
                stack.push(i);
                cur = self.slots[i].child_slots.first().copied();
            }
            let Some(i) = stack.pop() else { break };
            f(&self.slots[i]);
            cur = self.slots[i].child_slots.get(1).copied();
        }
    }

    /// Longest root-to-leaf path in edges.
    pub fn depth(&self) -> usize {
        fn go(w: &Will, i: usize) -> usize {
            w.slots[i].child_slots.iter().map(|&c| 1 + go(w, c)).max().unwrap_or(0)
        }
        self.root_slot.map_or(0, |r| go(self, r))
    }

    pub fn leaf_slot(&self, v: Vx) -> Option<usize> {
        self.slots.iter().position(|s| s.kind == SlotKind::Leaf(v))
    }

    pub fn internal_slot_of(&self, sim: NodeId) -> Option<usize> {
        self.slots.iter().position(|s| s.kind == SlotKind::Internal && s.simulator == sim)
    }

    /// The vertex that slot `i` becomes once the will of `owner` executes.
    pub fn slot_vertex(&self, owner: NodeId, i: usize) -> Vx {
        match self.slots[i].kind {
            SlotKind::Leaf(v) => v,
            SlotKind::Internal => Vx::Helper { sim: self.slots[i].simulator, tag: owner },
        }
    }

    /// Removes a dead child. The leaf goes together with its parent slot and the
    /// sibling subtree moves up. The parent slot's simulator takes over the dead
    /// child's internal slot, or becomes the heir if the dead child was the
    /// heir (its helper just dropped from degree 3 to 2).
    pub fn remove_leaf(&mut self, dead: Vx) -> Result<(), WillError> {
        let leaf = self.leaf_slot(dead).ok_or(WillError::NotALeaf(dead))?;
        let Some(parent) = self.slots[leaf].parent_slot else {
            *self = Will { generated_for: self.generated_for, ..Default::default() };
            return Ok(());
        };
        let d = dead.sim();
        let sibling = *self.slots[parent].child_slots.iter().find(|&&c| c != leaf).unwrap();
        let grand = self.slots[parent].parent_slot;
        self.slots[sibling].parent_slot = grand;
        match grand {
            Some(g) => {
                for c in &mut self.slots[g].child_slots {
                    if *c == parent {
                        *c = sibling;
                    }
                }
            }
            None => self.root_slot = Some(sibling),
        }
        let freed = self.slots[parent].simulator;
        if self.heir == Some(d) {
            self.heir = Some(freed);
        } else if freed != d {
            let own = self.internal_slot_of(d).ok_or_else(|| WillError::Malformed(format!("{d} has no internal slot")))?;
            self.slots[own].simulator = freed;
        }
        self.compact(&[leaf, parent]);
        Ok(())
    }

    /// Puts `new` in place of the child vertex `old`; the host of `new` takes
    /// over every slot the host of `old` simulated, including the heir role.
    /// The shape is unchanged.
    pub fn substitute(&mut self, old: Vx, new: Vx) -> Result<(), WillError> {
        let leaf = self.leaf_slot(old).ok_or(WillError::NotALeaf(old))?;
        self.slots[leaf].kind = SlotKind::Leaf(new);
        let (from, to) = (old.sim(), new.sim());
        for s in &mut self.slots {
            if s.simulator == from {
                s.simulator = to;
            }
        }
        if self.heir == Some(from) {
            self.heir = Some(to);
        }
        Ok(())
    }

    fn compact(&mut self, removed: &[usize]) {
        let mut map = vec![usize::MAX; self.slots.len()];
        let mut next = 0;
        for (i, m) in map.iter_mut().enumerate() {
            if !removed.contains(&i) {
                *m = next;
                next += 1;
            }
        }
        let old = std::mem::take(&mut self.slots);
        self.slots = old
            .into_iter()
            .enumerate()
            .filter(|(i, _)| !removed.contains(i))
            .map(|(_, mut s)| {
                s.parent_slot = s.parent_slot.map(|p| map[p]);
                s.child_slots.iter_mut().for_each(|c| *c = map[*c]);
                s
            })
            .collect();
        self.root_slot = self.root_slot.map(|r| map[r]);
    }

    /// Structural check: full binary shape, one internal slot per non-heir
    /// child, each internal slot above its simulator's own leaf, and the depth
    /// budget respected.
    pub fn validate(&self) -> Result<(), WillError> {
        let bad = |m: String| Err(WillError::Malformed(m));
        let Some(root) = self.root_slot else {
            return if self.slots.is_empty() && self.heir.is_none() { Ok(()) } else { bad("empty will with slots or heir".into()) };
        };
        if self.slots[root].parent_slot.is_some() {
            return bad("root slot has a parent".into());
        }
        let leaves = self.leaves();
        let internal: Vec<usize> = (0..self.slots.len()).filter(|&i| self.slots[i].kind == SlotKind::Internal).collect();
        if leaves.len() + internal.len() != self.slots.len() || internal.len() + 1 != leaves.len() {
            return bad(format!("{} leaves, {} internal slots, {} total", leaves.len(), internal.len(), self.slots.len()));
        }
        for (i, s) in self.slots.iter().enumerate() {
            let arity = if s.kind == SlotKind::Internal { 2 } else { 0 };
            if s.child_slots.len() != arity {
                return bad(format!("slot {i} has {} children", s.child_slots.len()));
            }
            if s.child_slots.iter().any(|&c| self.slots[c].parent_slot != Some(i)) {
                return bad(format!("slot {i} child/parent mismatch"));
            }
        }
        let mut reps: Vec<NodeId> = leaves.iter().map(|v| v.sim()).collect();
        reps.sort();
        if reps.windows(2).any(|w| w[0] == w[1]) {
            return bad("two leaves share a host".into());
        }
        let heir = self.heir.ok_or_else(|| WillError::Malformed("no heir".into()))?;
        if reps.binary_search(&heir).is_err() {
            return bad(format!("heir {heir} is not a child"));
        }
        let mut sims: Vec<NodeId> = internal.iter().map(|&i| self.slots[i].simulator).collect();
        sims.sort();
        let expect: Vec<NodeId> = reps.iter().copied().filter(|&r| r != heir).collect();
        if sims != expect {
            return bad(format!("internal simulators {sims:?} != non-heir children {expect:?}"));
        }
        let leaf_of: std::collections::BTreeMap<NodeId, usize> = self
            .slots
            .iter()
            .enumerate()
            .filter_map(|(i, s)| match s.kind {
                SlotKind::Leaf(v) => Some((v.sim(), i)),
                SlotKind::Internal => None,
            })
            .collect();
        for &i in &internal {
            let sim = self.slots[i].simulator;
            let leaf = leaf_of[&sim];
            let mut cur = self.slots[leaf].parent_slot;
            while cur.is_some_and(|c| c != i) {
                cur = self.slots[cur.unwrap()].parent_slot;
            }
            if cur.is_none() {
                return bad(format!("internal slot of {sim} is not above its leaf"));
            }
        }
        let budget = ceil_log2(self.generated_for);
        if self.depth() > budget {
            return bad(format!("depth {} exceeds {budget}", self.depth()));
        }
        Ok(())
    }
}

pub(crate) fn ceil_log2(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

/// Computes the portion of `state`'s will for every child.
pub fn make_will(state: &RealNodeState) -> Vec<WillPortion> {
    portions(state.id, &state.sub_rt, state.parent, state.helper.as_ref())
}

pub(crate) fn portions(owner: NodeId, will: &Will, parent: Option<Vx>, helper: Option<&HelperRole>) -> Vec<WillPortion> {
    let (Some(root), Some(heir)) = (will.root_slot, will.heir) else {
        return Vec::new();
    };
    let me = Vx::Real(owner);
    let own_helper = helper.map(|h| h.vertex(owner));
    let heir_helper = Vx::Helper { sim: heir, tag: owner };
    let root_vertex = will.slot_vertex(owner, root);
    // what stands in the owner's place once the will executes
    let top = if helper.is_some() { root_vertex } else { heir_helper };
    let rename = |x: Vx| {
        if x == me {
            top
        } else if Some(x) == own_helper {
            heir_helper
        } else {
            x
        }
    };
    let root_parent = match helper {
        None => Some(heir_helper),
        Some(_) => parent.map(rename),
    };
    let parent_of = |i: usize| match will.slots[i].parent_slot {
        Some(p) => Some(will.slot_vertex(owner, p)),
        None => root_parent,
    };
    let mut out = Vec::new();
    for (i, s) in will.slots.iter().enumerate() {
        let SlotKind::Leaf(leaf) = s.kind else { continue };
        let r = leaf.sim();
        let mut p = WillPortion {
            owner,
            recipient: r,
            leaf,
            nextparent: parent_of(i),
            nexthparent: None,
            nexthchildren: Vec::new(),
            is_heir_portion: r == heir,
            parent_update: None,
            inherited_helper: None,
        };
        if r != heir {
            let h = will.internal_slot_of(r).expect("non-heir child without internal slot");
            p.nexthparent = parent_of(h);
            p.nexthchildren = will.slots[h].child_slots.iter().map(|&c| will.slot_vertex(owner, c)).collect();
        } else {
            match helper {
                None => {
                    p.nexthparent = parent;
                    p.nexthchildren = vec![root_vertex];
                }
                Some(h) => {
                    p.nexthparent = h.hparent.map(rename);
                    p.nexthchildren = h.hchildren.iter().map(|&c| rename(c)).collect();
                    let nbrs = h.links().filter(|&x| x != me).collect();
                    p.inherited_helper = Some((h.vertex(owner), nbrs));
                }
            }
            if let Some(pv) = parent.filter(|&pv| Some(pv) != own_helper) {
                p.parent_update = Some((pv, top));
            }
        }
        out.push(p);
    }
    out
}

/// The will a leaf leaves for the node that will inherit its helper, together
/// with that recipient. `Ok(None)` if nobody survives to receive it.
pub fn make_leaf_will(state: &RealNodeState) -> Result<Option<(NodeId, LeafWill)>, WillError> {
    if !state.children.is_empty() {
        return Err(WillError::NotLeafOwner(state.id));
    }
    let h = state.helper.as_ref().ok_or(WillError::NotHelper(state.id))?;
    let me = state.id;
    let hv = h.vertex(me);
    let recipient = match state.parent {
        // the node hosting our parent vertex gives up that helper and takes ours
        Some(p) if p.sim() != me => Some(p.sim()),
        // our parent is our own helper: whoever is next to it short-circuits it
        _ => h.hparent.map(Vx::sim).or_else(|| h.hchildren.iter().find(|&&c| c != state.real()).map(|c| c.sim())),
    };
    Ok(recipient.map(|r| {
        (r, LeafWill { leaf: me, helper: Some(HelperLinks { id: hv, hparent: h.hparent, hchildren: h.hchildren.clone() }) })
    }))
}
