//! Naive repair strategies. Each neighbour of the deleted node is told who
//! the other neighbours were and reconnects according to a fixed layout.

use std::collections::BTreeMap;

use crate::graph::{NodeId, RootedTree};
use crate::sim::{Ctx, Message, Network, Payload, Protocol};

/// Baseline nodes keep no state beyond their id; edges live in the harness.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PeerState {
    pub id: NodeId,
}

fn init(tree: &RootedTree) -> BTreeMap<NodeId, PeerState> {
    tree.nodes().map(|id| (id, PeerState { id })).collect()
}

fn notice<N: Clone>(net: &Network<N>, v: NodeId) -> Payload {
    Payload::DeletionNotice { deleted: v, was_leaf: false, neighbors: net.graph().neighbors(v).collect() }
}

/// Peers `me` should link to among `nbrs` (sorted ascending).
fn reconnect(ctx: &mut Ctx<'_>, msg: &Message, layout: impl Fn(&[NodeId], usize) -> Vec<usize>) {
    let Payload::DeletionNotice { neighbors, .. } = &msg.payload else { return };
    let mut nbrs = neighbors.clone();
    nbrs.sort();
    let Ok(i) = nbrs.binary_search(&ctx.me()) else { return };
    for j in layout(&nbrs, i) {
        ctx.want(nbrs[j]);
    }
}

/// The lowest-id neighbour takes over every edge of the deleted node.
#[derive(Clone, Copy, Debug, Default)]
pub struct Surrogate;

/// Neighbours are chained in ascending id order.
#[derive(Clone, Copy, Debug, Default)]
pub struct Line;

/// Neighbours form a complete binary tree in heap order by id.
#[derive(Clone, Copy, Debug, Default)]
pub struct BinaryTree;

pub fn surrogate_strategy() -> Surrogate {
    Surrogate
}

pub fn line_strategy() -> Line {
    Line
}

pub fn binary_tree_strategy() -> BinaryTree {
    BinaryTree
}

pub(crate) fn surrogate_layout(nbrs: &[NodeId], i: usize) -> Vec<usize> {
    if i == 0 {
        (1..nbrs.len()).collect()
    } else {
        vec![0]
    }
}

pub(crate) fn line_layout(nbrs: &[NodeId], i: usize) -> Vec<usize> {
    [i.checked_sub(1), Some(i + 1).filter(|&j| j < nbrs.len())].into_iter().flatten().collect()
}

pub(crate) fn binary_layout(nbrs: &[NodeId], i: usize) -> Vec<usize> {
    let up = (i > 0).then(|| (i - 1) / 2);
    up.into_iter().chain([2 * i + 1, 2 * i + 2].into_iter().filter(|&j| j < nbrs.len())).collect()
}

macro_rules! baseline {
    ($ty:ident, $name:literal, $layout:ident) => {
        impl Protocol for $ty {
            type Node = PeerState;

            fn name(&self) -> &'static str {
                $name
            }

            fn init(&self, tree: &RootedTree) -> BTreeMap<NodeId, PeerState> {
                init(tree)
            }

            fn notice(&self, net: &Network<PeerState>, v: NodeId) -> Payload {
                notice(net, v)
            }

            fn on_message(&self, ctx: &mut Ctx<'_>, _node: &mut PeerState, msg: &Message) {
                reconnect(ctx, msg, $layout);
            }

            fn flush(&self, _ctx: &mut Ctx<'_>, _node: &mut PeerState) {}
        }
    };
}

baseline!(Surrogate, "surrogate", surrogate_layout);
baseline!(Line, "line", line_layout);
baseline!(BinaryTree, "binary_tree", binary_layout);
