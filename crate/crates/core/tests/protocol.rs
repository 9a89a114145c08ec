use std::collections::{BTreeMap, BTreeSet};

use forgiving_tree::adversary::{heir_hunter_adversary, random_adversary};
use forgiving_tree::experiments::{diameter_bound, generate_tree, TreeSpec};
use forgiving_tree::graph::{diameter, NodeId, RootedTree};
use forgiving_tree::protocol::{make_will, ForgivingTree, HeirState, RealNodeState, Vx};
use forgiving_tree::sim::{
    self, referee, run_round, run_with, AdversarySpec, Network, Protocol, RefereeLevel, SimulationConfig, StrategyKind,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn n(i: u32) -> NodeId {
    NodeId(i)
}

fn h(sim: u32, tag: u32) -> Vx {
    Vx::Helper { sim: n(sim), tag: n(tag) }
}

fn star(center: u32, leaves: &[u32]) -> RootedTree {
    let mut parents: BTreeMap<NodeId, Option<NodeId>> = leaves.iter().map(|&l| (n(l), Some(n(center)))).collect();
    parents.insert(n(center), None);
    RootedTree::from_parents(parents).unwrap()
}

fn network(tree: &RootedTree) -> Network<RealNodeState> {
    sim::prepare(&ForgivingTree, tree.to_graph(), tree.clone())
}

#[test]
fn heir_is_the_largest_child() {
    let states = ForgivingTree::init_states(&star(0, &[2, 5, 7, 9]));
    assert_eq!(states[&n(0)].heir(), Some(n(9)));
    for c in [2, 5, 7, 9] {
        let s = &states[&n(c)];
        assert_eq!(s.heir(), None);
        assert_eq!(s.heir_state(), HeirState::Wait);
        assert!(s.flags_consistent());
        assert_eq!(s.portion.as_ref().unwrap().owner, n(0));
    }
}

#[test]
fn will_portions_of_four_children() {
    let states = ForgivingTree::init_states(&star(0, &[2, 5, 7, 9]));
    let by_leaf: BTreeMap<u32, _> = make_will(&states[&n(0)]).into_iter().map(|p| (p.recipient.0, p)).collect();
    assert_eq!(by_leaf.len(), 4);
    // balanced tree over 2,5 | 7,9: root helper hosted by 5, halves by 2 and 7
    let p2 = &by_leaf[&2];
    assert_eq!(p2.nextparent, Some(h(2, 0)));
    assert_eq!(p2.nexthparent, Some(h(5, 0)));
    assert_eq!(p2.nexthchildren, vec![Vx::Real(n(2)), Vx::Real(n(5))]);
    let p5 = &by_leaf[&5];
    assert_eq!(p5.nextparent, Some(h(2, 0)));
    assert_eq!(p5.nexthparent, Some(h(9, 0)));
    assert_eq!(p5.nexthchildren, vec![h(2, 0), h(7, 0)]);
    let p7 = &by_leaf[&7];
    assert_eq!(p7.nextparent, Some(h(7, 0)));
    assert_eq!(p7.nexthchildren, vec![Vx::Real(n(7)), Vx::Real(n(9))]);
    let p9 = &by_leaf[&9];
    assert!(p9.is_heir_portion);
    assert_eq!(p9.nextparent, Some(h(7, 0)));
    assert_eq!(p9.nexthparent, None);
    assert_eq!(p9.nexthchildren, vec![h(5, 0)]);
    assert!(by_leaf.values().filter(|p| p.is_heir_portion).count() == 1);
}

#[test]
fn deleting_a_star_center_builds_the_reconstruction_tree() {
    let tree = star(0, &[2, 5, 7, 9]);
    let mut net = network(&tree);
    let out = run_round(&ForgivingTree, &mut net, n(0), &mut ChaCha8Rng::seed_from_u64(1));
    assert!(out.violations.is_empty(), "{:?}", out.violations);
    let edges: BTreeSet<(u32, u32)> = net.graph().edges().map(|(a, b)| (a.0.min(b.0), a.0.max(b.0))).collect();
    assert_eq!(edges, BTreeSet::from([(2, 5), (5, 7), (5, 9), (7, 9)]));
    assert_eq!(diameter(net.graph()), Ok(2));
    assert_eq!(net.node(n(9)).unwrap().heir_state(), HeirState::Ready);
    assert_eq!(net.node(n(5)).unwrap().heir_state(), HeirState::Deployed);
    assert!(referee::generic(&ForgivingTree, &net).is_empty());
    assert!(ForgivingTree.check(&net, &net.alive().collect()).is_empty());
}

#[test]
fn a_single_node_can_be_deleted() {
    let tree = RootedTree::single(n(4));
    let mut net = network(&tree);
    let out = run_round(&ForgivingTree, &mut net, n(4), &mut ChaCha8Rng::seed_from_u64(0));
    assert!(out.violations.is_empty());
    assert_eq!(net.alive_count(), 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_trees_survive_random_deletions(size in 2usize..48, seed in any::<u64>(), hunt in any::<bool>()) {
        let adversary = if hunt { AdversarySpec::HeirHunter } else { AdversarySpec::Random };
        let config = SimulationConfig::new(TreeSpec::RandomRecursive { n: size }, StrategyKind::ForgivingTree, adversary, seed);
        let report = sim::run(&config).unwrap();
        prop_assert!(report.passed(), "{:?}", report.status);
        prop_assert_eq!(report.records.len(), size);
        prop_assert!(report.max_degree_increase() <= 3);
        prop_assert!(report.max_diameter() <= diameter_bound(&report.tree_stats));
    }

    #[test]
    fn final_state_does_not_depend_on_delivery_order(size in 2usize..40, seed in any::<u64>()) {
        let tree = generate_tree(&TreeSpec::RandomRecursive { n: size }, seed).unwrap();
        let mut adv = random_adversary(seed);
        let mut base = network(&tree);
        let order: Vec<NodeId> = (0..size / 2)
            .map(|_| {
                let v = adv.next(&ForgivingTree, &base, &[]);
                run_round(&ForgivingTree, &mut base, v, &mut ChaCha8Rng::seed_from_u64(0));
                v
            })
            .collect();
        for delivery in 1..4u64 {
            let mut net = network(&tree);
            let mut rng = ChaCha8Rng::seed_from_u64(delivery.wrapping_mul(seed | 1));
            for &v in &order {
                prop_assert!(run_round(&ForgivingTree, &mut net, v, &mut rng).violations.is_empty());
            }
            prop_assert_eq!(net.graph(), base.graph());
            for (v, s) in base.nodes() {
                prop_assert_eq!(net.node(v), Some(s));
            }
        }
    }
}

#[test]
fn delivery_seed_leaves_metrics_unchanged() {
    let mut config =
        SimulationConfig::new(TreeSpec::BalancedKary { k: 3, n: 121 }, StrategyKind::ForgivingTree, AdversarySpec::Random, 5);
    let a = sim::run(&config).unwrap();
    config.delivery_seed = Some(99);
    let b = sim::run(&config).unwrap();
    let strip = |r: &sim::RunReport| r.records.iter().map(|x| (x.deleted, x.diameter, x.max_degree_increase)).collect::<Vec<_>>();
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn heir_hunting_drives_ready_heirs_to_deployed() {
    let mut transitions = 0;
    for seed in 0..6 {
        let tree = generate_tree(&TreeSpec::RandomRecursive { n: 80 }, seed).unwrap();
        let mut net = network(&tree);
        let mut adv = heir_hunter_adversary(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut referee_rng = ChaCha8Rng::seed_from_u64(seed);
        let mut round = 0;
        while net.alive_count() > 0 {
            round += 1;
            let before: BTreeMap<NodeId, HeirState> = net.nodes().map(|(v, s)| (v, s.heir_state())).collect();
            let v = adv.next(&ForgivingTree, &net, &[]);
            let out = run_round(&ForgivingTree, &mut net, v, &mut rng);
            let bad = referee::check_round(&ForgivingTree, &net, &out, RefereeLevel::Full, round, &mut referee_rng);
            assert!(out.violations.is_empty() && bad.is_empty(), "{:?} {bad:?}", out.violations);
            transitions += net
                .nodes()
                .filter(|(v, s)| before.get(v) == Some(&HeirState::Ready) && s.heir_state() == HeirState::Deployed)
                .count();
        }
    }
    assert!(transitions > 0);
}

#[test]
fn degree_and_diameter_hold_under_every_adversary() {
    for adversary in AdversarySpec::all() {
        for tree in [TreeSpec::Star { delta: 40 }, TreeSpec::Path { n: 40 }, TreeSpec::BalancedKary { k: 3, n: 40 }] {
            let config = SimulationConfig::new(tree, StrategyKind::ForgivingTree, adversary.clone(), 3);
            let r = sim::run(&config).unwrap();
            assert!(r.passed(), "{} {}: {:?}", adversary.name(), config.tree, r.status);
            assert!(r.max_degree_increase() <= 3);
            assert!(r.max_diameter() <= diameter_bound(&r.tree_stats));
        }
    }
}

#[test]
fn run_with_accepts_explicit_trees() {
    let tree = star(10, &[11, 12, 13]);
    let config = SimulationConfig::new(TreeSpec::Star { delta: 3 }, StrategyKind::ForgivingTree, AdversarySpec::MaxDegree, 0);
    let r = run_with(&ForgivingTree, &config, tree.to_graph(), tree);
    assert!(r.passed());
    assert_eq!(r.records[0].deleted, n(10));
}

#[test]
fn ready_heir_becomes_deployed_when_its_grandparent_goes() {
    let parents = BTreeMap::from([(n(0), None), (n(1), Some(n(0))), (n(5), Some(n(0))), (n(2), Some(n(1))), (n(3), Some(n(1)))]);
    let tree = RootedTree::from_parents(parents).unwrap();
    let mut net = network(&tree);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(run_round(&ForgivingTree, &mut net, n(1), &mut rng).violations.is_empty());
    assert_eq!(net.node(n(3)).unwrap().heir_state(), HeirState::Ready);
    let out = run_round(&ForgivingTree, &mut net, n(0), &mut rng);
    assert!(out.violations.is_empty(), "{:?}", out.violations);
    assert_eq!(net.node(n(3)).unwrap().heir_state(), HeirState::Deployed);
    assert!(referee::generic(&ForgivingTree, &net).is_empty());
    assert!(ForgivingTree.check(&net, &net.alive().collect()).is_empty());
}
