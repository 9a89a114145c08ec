//! The Forgiving Tree repair protocol.
//!
//! Every surviving node runs the same state machine. A node owns one *real*
//! vertex of the virtual tree and may additionally simulate one *helper*
//! vertex. The actual network is the image of the virtual tree under the
//! simulation map, so a node's degree grows by at most the three links of its
//! helper.
//!
//! Wills are prepared ahead of time: each node with children splits its
//! reconstruction tree into per-child [`WillPortion`]s, and leaves that
//! simulate a helper hand a [`LeafWill`] to whoever will inherit that helper.

mod node;
mod will;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::NodeId;

pub use node::{ForgivingTree, FtAnomaly};
pub use will::{
    generate_sub_rt, make_leaf_will, make_will, SlotKind, SurgeryError, Will, WillSlot,
};

/// A vertex of the virtual tree.
///
/// Helper vertices are named by their simulator and by the deletion that
/// created (or last handed over) them, so a node that gives up one helper and
/// takes on another in the same round never confuses the two.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Vx {
    Real(NodeId),
    Helper { sim: NodeId, tag: NodeId },
}

impl Vx {
    /// The real node that hosts this vertex.
    pub fn sim(self) -> NodeId {
        match self {
            Vx::Real(v) | Vx::Helper { sim: v, .. } => v,
        }
    }

    pub fn is_helper(self) -> bool {
        matches!(self, Vx::Helper { .. })
    }

    pub fn names(self) -> impl Iterator<Item = NodeId> {
        let (a, b) = match self {
            Vx::Real(v) => (v, None),
            Vx::Helper { sim, tag } => (sim, Some(tag)),
        };
        std::iter::once(a).chain(b)
    }
}

impl fmt::Display for Vx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Vx::Real(v) => write!(f, "{v}"),
            Vx::Helper { sim, tag } => write!(f, "h{sim}@{tag}"),
        }
    }
}

/// The helper vertex a node currently simulates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HelperRole {
    pub tag: NodeId,
    pub hparent: Option<Vx>,
    pub hchildren: Vec<Vx>,
}

impl HelperRole {
    pub fn vertex(&self, me: NodeId) -> Vx {
        Vx::Helper { sim: me, tag: self.tag }
    }

    pub fn links(&self) -> impl Iterator<Item = Vx> + '_ {
        self.hparent.iter().chain(self.hchildren.iter()).copied()
    }
}

/// Heir status of a node with respect to helper duty.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeirState {
    /// No helper duty.
    Wait,
    /// Simulates a helper with a single child.
    Ready,
    /// Simulates a helper with two children.
    Deployed,
}

/// One child's slice of a will: what it must do if the owner is deleted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WillPortion {
    pub owner: NodeId,
    pub recipient: NodeId,
    /// The child vertex this portion belongs to (hosted by `recipient`).
    pub leaf: Vx,
    /// New parent of that child vertex once the will executes.
    pub nextparent: Option<Vx>,
    /// Parent and children of the helper the recipient will simulate.
    pub nexthparent: Option<Vx>,
    pub nexthchildren: Vec<Vx>,
    pub is_heir_portion: bool,
    /// Heir only: the owner's parent vertex and the vertex that replaces the
    /// owner below it.
    pub parent_update: Option<(Vx, Vx)>,
    /// Heir only: the owner's helper and the neighbours that must re-point to
    /// the heir's new helper.
    pub inherited_helper: Option<(Vx, Vec<Vx>)>,
}

impl WillPortion {
    pub fn names(&self) -> impl Iterator<Item = NodeId> + '_ {
        let vs = std::iter::once(self.leaf)
            .chain(self.nextparent)
            .chain(self.nexthparent)
            .chain(self.nexthchildren.iter().copied())
            .chain(self.parent_update.iter().flat_map(|(a, b)| [*a, *b]))
            .chain(self.inherited_helper.iter().flat_map(|(h, n)| std::iter::once(*h).chain(n.iter().copied())));
        std::iter::once(self.owner).chain(vs.flat_map(Vx::names))
    }

    pub fn vertex_count(&self) -> usize {
        1 + usize::from(self.nextparent.is_some())
            + usize::from(self.nexthparent.is_some())
            + self.nexthchildren.len()
            + 2 * usize::from(self.parent_update.is_some())
            + self.inherited_helper.as_ref().map_or(0, |(_, n)| 1 + n.len())
    }
}

/// Helper duty a leaf hands over before it is deleted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeafWill {
    pub leaf: NodeId,
    pub helper: Option<HelperLinks>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HelperLinks {
    pub id: Vx,
    pub hparent: Option<Vx>,
    pub hchildren: Vec<Vx>,
}

/// Per-node protocol state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RealNodeState {
    pub id: NodeId,
    pub parent: Option<Vx>,
    pub children: Vec<Vx>,
    pub sub_rt: Will,
    pub helper: Option<HelperRole>,
    pub ishelper: bool,
    pub isreadyheir: bool,
    /// Portion of the will of the real vertex that is parent of one of ours.
    pub portion: Option<WillPortion>,
    /// Leaf wills held on behalf of leaf children, keyed by leaf.
    pub leaf_wills: BTreeMap<NodeId, LeafWill>,
    pub(crate) book: node::Bookkeeping,
}

impl RealNodeState {
    pub fn new(id: NodeId, parent: Option<NodeId>, children: &[NodeId]) -> Self {
        let children: Vec<Vx> = children.iter().map(|&c| Vx::Real(c)).collect();
        let sub_rt = generate_sub_rt(&children);
        RealNodeState {
            id,
            parent: parent.map(Vx::Real),
            children,
            sub_rt,
            helper: None,
            ishelper: false,
            isreadyheir: false,
            portion: None,
            leaf_wills: BTreeMap::new(),
            book: Default::default(),
        }
    }

    pub fn real(&self) -> Vx {
        Vx::Real(self.id)
    }

    pub fn helper_vertex(&self) -> Option<Vx> {
        self.helper.as_ref().map(|h| h.vertex(self.id))
    }

    pub fn heir(&self) -> Option<NodeId> {
        self.sub_rt.heir()
    }

    pub fn hparent(&self) -> Option<Vx> {
        self.helper.as_ref().and_then(|h| h.hparent)
    }

    pub fn hchildren(&self) -> &[Vx] {
        self.helper.as_ref().map_or(&[], |h| h.hchildren.as_slice())
    }

    pub fn nextparent(&self) -> Option<Vx> {
        self.portion.as_ref().and_then(|p| p.nextparent)
    }

    pub fn nexthparent(&self) -> Option<Vx> {
        self.portion.as_ref().and_then(|p| p.nexthparent)
    }

    pub fn nexthchildren(&self) -> &[Vx] {
        self.portion.as_ref().map_or(&[], |p| p.nexthchildren.as_slice())
    }

    pub fn heir_state(&self) -> HeirState {
        match self.hchildren().len() {
            _ if self.helper.is_none() => HeirState::Wait,
            1 => HeirState::Ready,
            _ => HeirState::Deployed,
        }
    }

    /// Whether the flag pair agrees with the helper fields.
    pub fn flags_consistent(&self) -> bool {
        self.ishelper == self.helper.is_some()
            && self.isreadyheir == (self.heir_state() == HeirState::Ready)
            && (self.helper.is_some() || (self.hparent().is_none() && self.hchildren().is_empty()))
    }

    pub(crate) fn sync_flags(&mut self) {
        self.ishelper = self.helper.is_some();
        self.isreadyheir = self.heir_state() == HeirState::Ready;
    }

    /// Every virtual link of both vertices hosted here.
    pub fn links(&self) -> impl Iterator<Item = Vx> + '_ {
        self.parent
            .iter()
            .chain(self.children.iter())
            .copied()
            .chain(self.helper.iter().flat_map(|h| h.links()))
    }

    pub fn anomalies(&self) -> &[FtAnomaly] {
        &self.book.anomalies
    }
}
