//! Undirected graphs, rooted spanning trees and exact distance metrics.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Identifier of a real (processor) node.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for NodeId {
    fn from(v: u32) -> Self {
        NodeId(v)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("vertex {0} is not in the graph")]
    MissingVertex(NodeId),
    #[error("graph is disconnected: vertex {0} is unreachable")]
    Disconnected(NodeId),
    #[error("graph is empty")]
    Empty,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(String),
}

/// Simple undirected graph without self-loops or parallel edges.
///
/// Adjacency lists are indexed by id and shared between clones until
/// written, so cloning a large graph to try out a few edits is cheap.
#[derive(Clone, Debug, Default)]
pub struct Graph {
    adj: Vec<Option<Arc<Vec<NodeId>>>>,
    vertex_count: usize,
    edge_count: usize,
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.vertex_count == other.vertex_count
            && self.edge_count == other.edge_count
            && self.vertices().all(|v| other.slot(v) == self.slot(v))
    }
}

impl Eq for Graph {}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_edges<I: IntoIterator<Item = (u32, u32)>>(edges: I) -> Self {
        let mut g = Graph::new();
        for (a, b) in edges {
            g.add_edge(NodeId(a), NodeId(b));
        }
        g
    }

    fn slot(&self, v: NodeId) -> Option<&[NodeId]> {
        self.adj.get(v.index()).and_then(|s| s.as_deref()).map(Vec::as_slice)
    }

    fn slot_mut(&mut self, v: NodeId) -> Option<&mut Vec<NodeId>> {
        self.adj.get_mut(v.index()).and_then(|s| s.as_mut()).map(Arc::make_mut)
    }

    pub fn add_vertex(&mut self, v: NodeId) {
        if self.adj.len() <= v.index() {
            self.adj.resize(v.index() + 1, None);
        }
        if self.adj[v.index()].is_none() {
            self.adj[v.index()] = Some(Arc::default());
            self.vertex_count += 1;
        }
    }

    /// Adds `a`–`b`, creating missing endpoints. Self-loops are ignored.
    pub fn add_edge(&mut self, a: NodeId, b: NodeId) -> bool {
        self.add_vertex(a);
        self.add_vertex(b);
        if a == b {
            return false;
        }
        let sa = self.slot_mut(a).unwrap();
        let Err(i) = sa.binary_search(&b) else { return false };
        sa.insert(i, b);
        let sb = self.slot_mut(b).unwrap();
        let i = sb.binary_search(&a).unwrap_err();
        sb.insert(i, a);
        self.edge_count += 1;
        true
    }

    pub fn remove_edge(&mut self, a: NodeId, b: NodeId) -> bool {
        if !self.has_edge(a, b) {
            return false;
        }
        for (x, y) in [(a, b), (b, a)] {
            let s = self.slot_mut(x).unwrap();
            let i = s.binary_search(&y).unwrap();
            s.remove(i);
        }
        self.edge_count -= 1;
        true
    }

    /// Removes `v` and returns its former neighbours.
    pub fn remove_vertex(&mut self, v: NodeId) -> BTreeSet<NodeId> {
        let Some(nbrs) = self.adj.get_mut(v.index()).and_then(Option::take) else { return BTreeSet::new() };
        self.vertex_count -= 1;
        self.edge_count -= nbrs.len();
        for &u in nbrs.iter() {
            let s = self.slot_mut(u).unwrap();
            let i = s.binary_search(&v).unwrap();
            s.remove(i);
        }
        nbrs.iter().copied().collect()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.slot(v).is_some()
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.slot(a).is_some_and(|s| s.binary_search(&b).is_ok())
    }

    /// Neighbours in ascending order.
    pub fn neighbors(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.slot(v).unwrap_or(&[]).iter().copied()
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.slot(v).map_or(0, |s| s.len())
    }

    /// Vertices in ascending order.
    pub fn vertices(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.adj.iter().enumerate().filter(|(_, s)| s.is_some()).map(|(i, _)| NodeId(i as u32))
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Edges as ordered pairs `(a, b)` with `a < b`.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.vertices().flat_map(move |a| self.neighbors(a).filter(move |&b| a < b).map(move |b| (a, b)))
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().flatten().map(|s| s.len()).max().unwrap_or(0)
    }

    /// BFS distances from `src`; unreachable vertices are absent.
    pub fn distances_from(&self, src: NodeId) -> BTreeMap<NodeId, usize> {
        let mut dist = BTreeMap::new();
        if !self.contains(src) {
            return dist;
        }
        dist.insert(src, 0);
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let du = dist[&u];
            for w in self.neighbors(u) {
                if let Entry::Vacant(e) = dist.entry(w) {
                    e.insert(du + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        match self.vertices().next() {
            None => true,
            Some(s) => self.distances_from(s).len() == self.vertex_count(),
        }
    }

    /// Parses the plain-text edge-list format: `a b` per line, `v <id>` for
    /// isolated vertices, `#` comments.
    pub fn parse(text: &str) -> Result<Graph, GraphError> {
        let mut g = Graph::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| {
                s.parse::<u32>().map_err(|e| GraphError::Parse {
                    line: i + 1,
                    msg: format!("bad vertex id {s:?}: {e}"),
                })
            };
            match toks.as_slice() {
                ["v", id] => g.add_vertex(NodeId(num(id)?)),
                [a, b] => {
                    let (a, b) = (num(a)?, num(b)?);
                    if a == b {
                        return Err(GraphError::Parse { line: i + 1, msg: "self-loop".into() });
                    }
                    g.add_edge(NodeId(a), NodeId(b));
                }
                _ => {
                    return Err(GraphError::Parse {
                        line: i + 1,
                        msg: format!("expected two ids or `v <id>`, got {line:?}"),
                    })
                }
            }
        }
        Ok(g)
    }

    pub fn load(path: &Path) -> Result<Graph, GraphError> {
        let text = std::fs::read_to_string(path).map_err(|e| GraphError::Io(e.to_string()))?;
        Graph::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in self.vertices() {
            if self.degree(v) == 0 {
                out.push_str(&format!("v {v}\n"));
            }
        }
        for (a, b) in self.edges() {
            out.push_str(&format!("{a} {b}\n"));
        }
        out
    }
}

/// A rooted tree with sorted children lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RootedTree {
    root: NodeId,
    parent: BTreeMap<NodeId, Option<NodeId>>,
    children: BTreeMap<NodeId, Vec<NodeId>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TreeStats {
    pub n: usize,
    pub diameter: usize,
    pub height: usize,
    pub max_degree: usize,
}

impl RootedTree {
    /// Builds a tree from a parent map. Exactly one entry must map to `None`.
    pub fn from_parents(parents: BTreeMap<NodeId, Option<NodeId>>) -> Result<RootedTree, GraphError> {
        let roots: Vec<NodeId> = parents.iter().filter(|(_, p)| p.is_none()).map(|(&v, _)| v).collect();
        let root = match roots.as_slice() {
            [r] => *r,
            [] => return Err(GraphError::Empty),
            [_, second, ..] => return Err(GraphError::Disconnected(*second)),
        };
        let mut children: BTreeMap<NodeId, Vec<NodeId>> = parents.keys().map(|&v| (v, Vec::new())).collect();
        for (&v, p) in &parents {
            if let Some(p) = p {
                children.get_mut(p).ok_or(GraphError::MissingVertex(*p))?.push(v);
            }
        }
        let tree = RootedTree { root, parent: parents, children };
        // every node must reach the root
        let depths = tree.depths();
        if let Some(v) = tree.parent.keys().find(|v| !depths.contains_key(v)) {
            return Err(GraphError::Disconnected(*v));
        }
        Ok(tree)
    }

    pub fn single(root: NodeId) -> RootedTree {
        RootedTree::from_parents(BTreeMap::from([(root, None)])).unwrap()
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.parent.get(&v).copied().flatten()
    }

    pub fn children(&self, v: NodeId) -> &[NodeId] {
        self.children.get(&v).map_or(&[], |c| c.as_slice())
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.parent.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn depths(&self) -> BTreeMap<NodeId, usize> {
        let mut depth = BTreeMap::from([(self.root, 0)]);
        let mut queue = VecDeque::from([self.root]);
        while let Some(u) = queue.pop_front() {
            for &c in self.children(u) {
                depth.insert(c, depth[&u] + 1);
                queue.push_back(c);
            }
        }
        depth
    }

    pub fn to_graph(&self) -> Graph {
        let mut g = Graph::new();
        for v in self.nodes() {
            g.add_vertex(v);
            if let Some(p) = self.parent(v) {
                g.add_edge(v, p);
            }
        }
        g
    }

    pub fn stats(&self) -> TreeStats {
        let g = self.to_graph();
        TreeStats {
            n: self.len(),
            diameter: diameter(&g).unwrap_or(0),
            height: self.depths().values().copied().max().unwrap_or(0),
            max_degree: g.max_degree(),
        }
    }
}

/// Breadth-first spanning tree, exploring neighbours in ascending id order.
pub fn bfs_spanning_tree(g: &Graph, root: NodeId) -> Result<RootedTree, GraphError> {
    if !g.contains(root) {
        return Err(GraphError::MissingVertex(root));
    }
    let mut parent = BTreeMap::from([(root, None)]);
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        for w in g.neighbors(u) {
            if let Entry::Vacant(e) = parent.entry(w) {
                e.insert(Some(u));
                queue.push_back(w);
            }
        }
    }
    if let Some(v) = g.vertices().find(|v| !parent.contains_key(v)) {
        return Err(GraphError::Disconnected(v));
    }
    RootedTree::from_parents(parent)
}

/// Exact diameter by BFS from every vertex.
pub fn diameter(g: &Graph) -> Result<usize, GraphError> {
    let csr = Csr::from_graph(g);
    if csr.len() == 0 {
        return Err(GraphError::Empty);
    }
    let mut best = 0;
    let mut dist = vec![u32::MAX; csr.len()];
    let mut queue = Vec::with_capacity(csr.len());
    for s in 0..csr.len() {
        let ecc = csr.bfs(s, &mut dist, &mut queue).ok_or_else(|| GraphError::Disconnected(csr.unreached(&dist)))?;
        best = best.max(ecc);
    }
    Ok(best)
}

/// Exact diameter using eccentricity bounds to skip most BFS runs.
///
/// Same result as [`diameter`]; on sparse near-tree graphs it usually needs a
/// handful of BFS passes instead of one per vertex.
pub fn diameter_fast(g: &Graph) -> Result<usize, GraphError> {
    Csr::from_graph(g).diameter(None, &[]).map(|d| d.unwrap_or(0))
}

/// The exact diameter if it exceeds `floor`, otherwise `None`. Cheaper than
/// [`diameter_fast`] when most graphs fall short of the floor, especially
/// when `hints` contains a vertex of near-minimum eccentricity.
pub fn diameter_above(g: &Graph, floor: usize, hints: &[NodeId]) -> Result<Option<usize>, GraphError> {
    let csr = Csr::from_graph(g);
    let hints: Vec<usize> = hints.iter().filter_map(|h| csr.ids.binary_search(h).ok()).collect();
    csr.diameter(Some(floor as u32), &hints)
}

/// A vertex of minimum eccentricity, lowest id first.
pub fn center(g: &Graph) -> Result<NodeId, GraphError> {
    let csr = Csr::from_graph(g);
    let mut dist = vec![u32::MAX; csr.len()];
    let mut queue = Vec::with_capacity(csr.len());
    let mut best: Option<(usize, usize)> = None;
    for s in 0..csr.len() {
        let ecc = csr.bfs(s, &mut dist, &mut queue).ok_or_else(|| GraphError::Disconnected(csr.unreached(&dist)))?;
        if best.is_none_or(|(e, _)| ecc < e) {
            best = Some((ecc, s));
        }
    }
    best.map(|(_, s)| csr.ids[s]).ok_or(GraphError::Empty)
}

/// Per-vertex `degree(v, now) - degree(v, before)` over the vertices of `now`.
pub fn degree_increase(now: &Graph, before: &Graph) -> BTreeMap<NodeId, i64> {
    now.vertices()
        .map(|v| (v, now.degree(v) as i64 - before.degree(v) as i64))
        .collect()
}

/// Compressed adjacency used by the distance routines.
pub(crate) struct Csr {
    ids: Vec<NodeId>,
    offsets: Vec<u32>,
    targets: Vec<u32>,
}

impl Csr {
    pub(crate) fn from_graph(g: &Graph) -> Csr {
        let ids: Vec<NodeId> = g.vertices().collect();
        let mut index = vec![u32::MAX; g.adj.len()];
        for (i, v) in ids.iter().enumerate() {
            index[v.index()] = i as u32;
        }
        let mut offsets = Vec::with_capacity(ids.len() + 1);
        let mut targets = Vec::with_capacity(g.edge_count() * 2);
        offsets.push(0);
        for &v in &ids {
            targets.extend(g.neighbors(v).map(|w| index[w.index()]));
            offsets.push(targets.len() as u32);
        }
        Csr { ids, offsets, targets }
    }

    pub(crate) fn len(&self) -> usize {
        self.ids.len()
    }

    fn nbrs(&self, u: usize) -> &[u32] {
        &self.targets[self.offsets[u] as usize..self.offsets[u + 1] as usize]
    }

    /// Fills `dist` from `s`; returns the eccentricity or `None` if some
    /// vertex is unreachable.
    fn bfs(&self, s: usize, dist: &mut [u32], queue: &mut Vec<u32>) -> Option<usize> {
        dist.fill(u32::MAX);
        queue.clear();
        dist[s] = 0;
        queue.push(s as u32);
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head] as usize;
            head += 1;
            let du = dist[u];
            for &w in self.nbrs(u) {
                if dist[w as usize] == u32::MAX {
                    dist[w as usize] = du + 1;
                    queue.push(w);
                }
            }
        }
        (queue.len() == self.len()).then(|| dist[*queue.last().unwrap() as usize] as usize)
    }

    fn unreached(&self, dist: &[u32]) -> NodeId {
        self.ids[dist.iter().position(|&d| d == u32::MAX).unwrap_or(0)]
    }

    /// Bounding-diameters: alternate between the vertex with the largest
    /// eccentricity upper bound and the one with the smallest lower bound,
    /// tightening both bounds for every vertex after each BFS.
    pub(crate) fn diameter(&self, floor: Option<u32>, hints: &[usize]) -> Result<Option<usize>, GraphError> {
        let n = self.len();
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut lo = vec![0u32; n];
        let mut hi = vec![u32::MAX; n];
        let mut open: Vec<usize> = (0..n).collect();
        let mut dist = vec![u32::MAX; n];
        let mut queue = Vec::with_capacity(n);
        let (mut d_lo, mut d_hi) = (0u32, u32::MAX);
        let mut pick_high = true;
        let cut = floor.unwrap_or(0);
        let mut hints = hints.iter().copied();
        // start from the hints, else from a max-degree vertex
        let mut next = hints.next().unwrap_or_else(|| (0..n).max_by_key(|&u| (self.nbrs(u).len(), std::cmp::Reverse(u))).unwrap());
        while d_lo != d_hi && !open.is_empty() {
            let s = next;
            let ecc = self.bfs(s, &mut dist, &mut queue).ok_or_else(|| GraphError::Disconnected(self.unreached(&dist)))? as u32;
            d_lo = d_lo.max(ecc);
            open.retain(|&w| {
                let d = dist[w];
                lo[w] = lo[w].max(d).max(ecc.saturating_sub(d));
                hi[w] = hi[w].min(ecc + d);
                d_lo = d_lo.max(lo[w]);
                !(lo[w] == hi[w] || hi[w] <= d_lo.max(cut) || w == s)
            });
            d_hi = open.iter().map(|&w| hi[w]).max().unwrap_or(d_lo).max(d_lo);
            if floor.is_some_and(|f| d_hi <= f) {
                return Ok(None);
            }
            if open.is_empty() {
                break;
            }
            next = if let Some(h) = hints.next() {
                h
            } else if pick_high {
                *open.iter().max_by_key(|&&w| (hi[w], std::cmp::Reverse(w))).unwrap()
            } else {
                *open.iter().min_by_key(|&&w| (lo[w], w)).unwrap()
            };
            pick_high = !pick_high;
        }
        Ok((floor.is_none_or(|f| d_lo > f)).then_some(d_lo as usize))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: u32) -> Graph {
        let mut g = Graph::from_edges((1..n).map(|i| (i - 1, i)));
        g.add_vertex(NodeId(0));
        g
    }

    #[test]
    fn bfs_tree_on_path() {
        let t = bfs_spanning_tree(&path(3), NodeId(0)).unwrap();
        assert_eq!(t.parent(NodeId(1)), Some(NodeId(0)));
        assert_eq!(t.parent(NodeId(2)), Some(NodeId(1)));
        assert_eq!(t.parent(NodeId(0)), None);
    }

    #[test]
    fn bfs_tree_on_star_is_depth_one() {
        let g = Graph::from_edges((1..=8).map(|i| (0, i)));
        let t = bfs_spanning_tree(&g, NodeId(0)).unwrap();
        assert!(t.depths().iter().all(|(&v, &d)| d == usize::from(v != NodeId(0))));
        assert_eq!(t.children(NodeId(0)).len(), 8);
    }

    #[test]
    fn disconnected_graph_is_rejected() {
        let mut g = path(3);
        g.add_vertex(NodeId(9));
        assert_eq!(bfs_spanning_tree(&g, NodeId(0)), Err(GraphError::Disconnected(NodeId(9))));
        assert_eq!(diameter(&g), Err(GraphError::Disconnected(NodeId(9))));
        assert!(diameter_fast(&g).is_err());
    }

    #[test]
    fn diameters() {
        let mut single = Graph::new();
        single.add_vertex(NodeId(4));
        assert_eq!(diameter(&single), Ok(0));
        assert_eq!(diameter(&path(5)), Ok(4));
        assert_eq!(diameter_fast(&path(5)), Ok(4));
        assert_eq!(diameter(&Graph::new()), Err(GraphError::Empty));
    }

    #[test]
    fn degree_increase_of_identical_graphs_is_zero() {
        let g = path(6);
        assert!(degree_increase(&g, &g).values().all(|&d| d == 0));
    }

    #[test]
    fn parse_format() {
        let g = Graph::parse("# comment\n0 1\n1 2\nv 7\n\n").unwrap();
        assert_eq!(g.vertex_count(), 4);
        assert_eq!(g.degree(NodeId(7)), 0);
        assert!(g.has_edge(NodeId(2), NodeId(1)));
        assert_eq!(Graph::parse(&g.to_text()).unwrap(), g);
        assert!(matches!(Graph::parse("0 1 2"), Err(GraphError::Parse { line: 1, .. })));
        assert!(matches!(Graph::parse("3 3"), Err(GraphError::Parse { .. })));
    }

    #[test]
    fn tree_stats() {
        let t = bfs_spanning_tree(&path(5), NodeId(2)).unwrap();
        let s = t.stats();
        assert_eq!((s.n, s.diameter, s.height, s.max_degree), (5, 4, 2, 2));
        assert!(s.height <= s.diameter && s.diameter <= 2 * s.height);
    }
}
