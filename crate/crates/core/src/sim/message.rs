use serde::Serialize;

use crate::graph::NodeId;
use crate::protocol::{LeafWill, Vx, WillPortion};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Payload {
    /// Sent on behalf of a deleted node to each of its neighbours.
    DeletionNotice { deleted: NodeId, was_leaf: bool, neighbors: Vec<NodeId> },
    /// `None` withdraws an earlier portion.
    WillPortionDelivery { owner: NodeId, portion: Option<WillPortion> },
    /// `None` withdraws an earlier leaf will.
    LeafWill { leaf: NodeId, will: Option<LeafWill> },
    /// In the links of `target`, replace `old` by `new` (or drop it).
    PointerUpdate { target: Vx, old: Vx, new: Option<Vx> },
    /// A pointer update caused by short-circuiting a degree-2 helper.
    Bypass { target: Vx, old: Vx, new: Option<Vx> },
    EdgeMake,
    EdgeDrop,
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::DeletionNotice { .. } => "deletion_notice",
            Payload::WillPortionDelivery { .. } => "will_portion",
            Payload::LeafWill { .. } => "leaf_will",
            Payload::PointerUpdate { .. } => "pointer_update",
            Payload::Bypass { .. } => "bypass",
            Payload::EdgeMake => "edge_make",
            Payload::EdgeDrop => "edge_drop",
        }
    }

    /// Every node name carried in the payload.
    pub fn names(&self) -> Vec<NodeId> {
        let vx = |v: &Vx| v.names().collect::<Vec<_>>();
        match self {
            Payload::DeletionNotice { deleted, neighbors, .. } => std::iter::once(*deleted).chain(neighbors.iter().copied()).collect(),
            Payload::WillPortionDelivery { owner, portion } => {
                std::iter::once(*owner).chain(portion.iter().flat_map(|p| p.names().collect::<Vec<_>>())).collect()
            }
            Payload::LeafWill { leaf, will } => {
                let mut out = vec![*leaf];
                if let Some(h) = will.as_ref().and_then(|w| w.helper.as_ref()) {
                    out.extend(vx(&h.id));
                    h.hparent.iter().chain(&h.hchildren).for_each(|v| out.extend(vx(v)));
                }
                out
            }
            Payload::PointerUpdate { target, old, new } | Payload::Bypass { target, old, new } => {
                let mut out = vx(target);
                out.extend(vx(old));
                new.iter().for_each(|v| out.extend(vx(v)));
                out
            }
            Payload::EdgeMake | Payload::EdgeDrop => Vec::new(),
        }
    }

    /// Size with ids costing `id_bits` each and flags one bit.
    pub fn size_bits(&self, id_bits: u64) -> u64 {
        let vx = |v: &Vx| 1 + id_bits * v.names().count() as u64;
        let ovx = |v: &Option<Vx>| 1 + v.as_ref().map_or(0, vx);
        let tag = 3;
        tag + match self {
            Payload::DeletionNotice { neighbors, .. } => id_bits * (1 + neighbors.len() as u64) + 1,
            Payload::WillPortionDelivery { portion: None, .. } => id_bits + 1,
            Payload::WillPortionDelivery { portion: Some(p), .. } => {
                id_bits
                    + 1
                    + vx(&p.leaf)
                    + ovx(&p.nextparent)
                    + ovx(&p.nexthparent)
                    + p.nexthchildren.iter().map(vx).sum::<u64>()
                    + 1
                    + 1
                    + p.parent_update.as_ref().map_or(0, |(a, b)| vx(a) + vx(b))
                    + 1
                    + p.inherited_helper.as_ref().map_or(0, |(h, n)| vx(h) + n.iter().map(vx).sum::<u64>())
            }
            Payload::LeafWill { will, .. } => {
                id_bits
                    + 1
                    + will.as_ref().and_then(|w| w.helper.as_ref()).map_or(0, |h| {
                        vx(&h.id) + ovx(&h.hparent) + h.hchildren.iter().map(vx).sum::<u64>()
                    })
            }
            Payload::PointerUpdate { target, old, new } | Payload::Bypass { target, old, new } => vx(target) + vx(old) + ovx(new),
            Payload::EdgeMake | Payload::EdgeDrop => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Message {
    pub sender: NodeId,
    pub recipient: NodeId,
    pub payload: Payload,
    pub size_bits: u64,
    /// Length of the causal chain ending with this message.
    pub depth: u32,
}

/// Bits needed for one node id in a network of `n` nodes.
pub fn id_bits(n: usize) -> u64 {
    if n <= 1 {
        1
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as u64
    }
}
