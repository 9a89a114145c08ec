use std::collections::{BTreeMap, VecDeque};

use forgiving_tree::experiments::{generate_tree, TreeSpec};
use forgiving_tree::graph::{
    bfs_spanning_tree, center, degree_increase, diameter, diameter_above, diameter_fast, Graph, GraphError, NodeId,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

/// Plain adjacency-matrix BFS, sharing no code with the library.
fn oracle_dist(n: usize, edges: &[(usize, usize)], src: usize) -> Vec<Option<usize>> {
    let mut adj = vec![vec![false; n]; n];
    for &(a, b) in edges {
        adj[a][b] = true;
        adj[b][a] = true;
    }
    let mut d = vec![None; n];
    d[src] = Some(0);
    let mut q = VecDeque::from([src]);
    while let Some(u) = q.pop_front() {
        for w in 0..n {
            if adj[u][w] && d[w].is_none() {
                d[w] = Some(d[u].unwrap() + 1);
                q.push_back(w);
            }
        }
    }
    d
}

/// Floyd-Warshall diameter.
fn oracle_diameter(n: usize, edges: &[(usize, usize)]) -> Option<usize> {
    const INF: usize = usize::MAX / 4;
    let mut d = vec![vec![INF; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for &(a, b) in edges {
        d[a][b] = 1;
        d[b][a] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    let m = d.iter().flatten().copied().max().unwrap_or(0);
    (m < INF).then_some(m)
}

/// A connected graph on `n` vertices: a random tree plus extra random edges.
fn connected(n: usize, extra: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (rng.gen_range(0..i), i)).collect();
    for _ in 0..extra {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b && !edges.contains(&(a, b)) && !edges.contains(&(b, a)) {
            edges.push((a, b));
        }
    }
    edges
}

fn build(n: usize, edges: &[(usize, usize)]) -> Graph {
    let mut g = Graph::from_edges(edges.iter().map(|&(a, b)| (a as u32, b as u32)));
    for v in 0..n {
        g.add_vertex(NodeId(v as u32));
    }
    g
}

#[test]
fn bfs_tree_depths_on_random_graph_match_independent_bfs() {
    let edges = connected(32, 40, 11);
    let g = build(32, &edges);
    assert_eq!(g.edge_count(), edges.len());
    for root in [0, 7, 31] {
        let t = bfs_spanning_tree(&g, NodeId(root)).unwrap();
        let want = oracle_dist(32, &edges, root as usize);
        for (v, d) in t.depths() {
            assert_eq!(Some(d), want[v.index()]);
        }
        for v in t.nodes() {
            if let Some(p) = t.parent(v) {
                assert!(g.has_edge(v, p));
            }
        }
    }
}

#[test]
fn balanced_binary_tree_of_31_has_diameter_8() {
    let t = generate_tree(&TreeSpec::BalancedKary { k: 2, n: 31 }, 0).unwrap();
    let edges: Vec<(usize, usize)> = t.nodes().filter_map(|v| t.parent(v).map(|p| (p.index(), v.index()))).collect();
    assert_eq!(oracle_diameter(31, &edges), Some(8));
    assert_eq!(diameter(&t.to_graph()), Ok(8));
    assert_eq!(t.stats().diameter, 8);
}

#[test]
fn degree_increase_of_identical_graph_is_zero() {
    let g = build(10, &connected(10, 5, 3));
    assert!(degree_increase(&g, &g).values().all(|&d| d == 0));
}

#[test]
fn file_format_round_trip() {
    let text = "# comment\n0 1\n1 2\nv 9\n";
    let g = Graph::parse(text).unwrap();
    assert_eq!(g.vertex_count(), 4);
    assert_eq!(Graph::parse(&g.to_text()).unwrap(), g);
    assert!(matches!(Graph::parse("0 0"), Err(GraphError::Parse { line: 1, .. })));
    assert!(matches!(Graph::parse("0 x"), Err(GraphError::Parse { .. })));
}

#[test]
fn center_of_path_is_its_middle() {
    let g = build(7, &(1..7).map(|i| (i - 1, i)).collect::<Vec<_>>());
    assert_eq!(center(&g), Ok(NodeId(3)));
}

proptest! {
    #[test]
    fn diameters_agree_with_floyd_warshall(n in 1usize..24, extra in 0usize..12, seed in any::<u64>()) {
        let edges = connected(n, extra, seed);
        let g = build(n, &edges);
        let want = oracle_diameter(n, &edges).unwrap();
        prop_assert_eq!(diameter(&g), Ok(want));
        prop_assert_eq!(diameter_fast(&g), Ok(want));
        for floor in [0, want.saturating_sub(1), want, want + 1] {
            let hint = [NodeId((seed % n as u64) as u32)];
            prop_assert_eq!(diameter_above(&g, floor, &hint).unwrap(), (want > floor).then_some(want));
        }
    }

    #[test]
    fn tree_diameter_matches_double_sweep(n in 2usize..60, seed in any::<u64>()) {
        let edges = connected(n, 0, seed);
        let d0 = oracle_dist(n, &edges, 0);
        let far = (0..n).max_by_key(|&v| d0[v]).unwrap();
        let sweep = oracle_dist(n, &edges, far).into_iter().flatten().max().unwrap();
        prop_assert_eq!(diameter_fast(&build(n, &edges)), Ok(sweep));
    }

    #[test]
    fn mutations_keep_graph_simple(ops in prop::collection::vec((0u32..12, 0u32..12, 0u8..3), 0..80)) {
        let mut g = Graph::new();
        let mut model: BTreeMap<u32, std::collections::BTreeSet<u32>> = BTreeMap::new();
        for (a, b, op) in ops {
            match op {
                0 => {
                    g.add_edge(NodeId(a), NodeId(b));
                    model.entry(a).or_default();
                    model.entry(b).or_default();
                    if a != b {
                        model.get_mut(&a).unwrap().insert(b);
                        model.get_mut(&b).unwrap().insert(a);
                    }
                }
                1 => {
                    g.remove_edge(NodeId(a), NodeId(b));
                    if let Some(s) = model.get_mut(&a) { s.remove(&b); }
                    if let Some(s) = model.get_mut(&b) { s.remove(&a); }
                }
                _ => {
                    g.remove_vertex(NodeId(a));
                    if let Some(s) = model.remove(&a) {
                        for w in s { model.get_mut(&w).unwrap().remove(&a); }
                    }
                }
            }
            for v in g.vertices() {
                prop_assert!(!g.has_edge(v, v));
                for w in g.neighbors(v) {
                    prop_assert!(g.contains(w) && g.has_edge(w, v));
                }
            }
        }
        let got: BTreeMap<u32, std::collections::BTreeSet<u32>> =
            g.vertices().map(|v| (v.0, g.neighbors(v).map(|w| w.0).collect())).collect();
        prop_assert_eq!(&got, &model);
        prop_assert_eq!(g.edge_count(), model.values().map(|s| s.len()).sum::<usize>() / 2);
    }
}

#[test]
fn disconnected_inputs_are_errors() {
    let g = build(4, &[(0, 1), (2, 3)]);
    assert!(matches!(bfs_spanning_tree(&g, NodeId(0)), Err(GraphError::Disconnected(_))));
    assert!(diameter_fast(&g).is_err());
    assert!(diameter_above(&g, 0, &[]).is_err());
}
