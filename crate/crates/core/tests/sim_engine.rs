use forgiving_tree::adversary::random_adversary;
use forgiving_tree::experiments::{generate, TreeSpec};
use forgiving_tree::graph::{Graph, NodeId};
use forgiving_tree::protocol::ForgivingTree;
use forgiving_tree::sim::{
    self, run_round, trace, AdversarySpec, RefereeLevel, RoundRecord, SimulationConfig, StrategyKind,
    TraceKind, TraceLog,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn config(tree: TreeSpec, strategy: StrategyKind, adversary: AdversarySpec, seed: u64) -> SimulationConfig {
    SimulationConfig { trace: true, ..SimulationConfig::new(tree, strategy, adversary, seed) }
}

#[test]
fn csv_layout() {
    assert_eq!(
        RoundRecord::CSV_HEADER,
        "round,deleted,max_degree_increase,diameter,max_messages_per_node,max_bits_per_node,recovery_latency,edges_added,edges_dropped"
    );
    let r = sim::run(&config(TreeSpec::Path { n: 9 }, StrategyKind::ForgivingTree, AdversarySpec::Random, 2)).unwrap();
    let csv = sim::write_csv(&r.records);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 10);
    assert_eq!(lines[0], RoundRecord::CSV_HEADER);
    for (i, line) in lines[1..].iter().enumerate() {
        let fields: Vec<u64> = line.split(',').map(|f| f.parse().unwrap()).collect();
        assert_eq!(fields.len(), 9);
        assert_eq!(fields[0], i as u64 + 1);
    }
}

#[test]
fn single_node_run() {
    let r = sim::run(&config(TreeSpec::Path { n: 1 }, StrategyKind::ForgivingTree, AdversarySpec::MaxDegree, 0)).unwrap();
    assert!(r.passed());
    assert_eq!(r.records.len(), 1);
    let x = &r.records[0];
    assert_eq!((x.max_degree_increase, x.diameter, x.max_messages_per_node, x.recovery_latency, x.edges_added), (0, 0, 0, 0, 0));
}

#[test]
fn star_centre_deletion() {
    let mut c = config(TreeSpec::Star { delta: 8 }, StrategyKind::ForgivingTree, AdversarySpec::MaxDegree, 0);
    c.rounds = Some(1);
    let r = sim::run(&c).unwrap();
    assert!(r.passed());
    assert!(r.records[0].diameter <= 2 * 3);
    assert!(r.records[0].max_degree_increase <= 3);
}

#[test]
fn same_seed_same_trace_hash() {
    for (seed, strategy) in [(1, StrategyKind::ForgivingTree), (2, StrategyKind::Line), (3, StrategyKind::BinaryTree)] {
        let c = config(TreeSpec::RandomRecursive { n: 40 }, strategy, AdversarySpec::Random, seed);
        let a = sim::run(&c).unwrap();
        let b = sim::run(&c).unwrap();
        assert_eq!(a.trace_hash.len(), 64);
        assert_eq!(a.trace_hash, b.trace_hash);
        assert_eq!(a.trace, b.trace);
        let other = sim::run(&SimulationConfig { seed: seed + 10, ..c }).unwrap();
        assert_ne!(a.trace_hash, other.trace_hash);
    }
}

#[test]
fn trace_replay_reproduces_every_graph() {
    let spec = TreeSpec::RandomRecursive { n: 50 };
    let (g0, tree) = generate(&spec, 4).unwrap();
    let mut net = sim::prepare(&ForgivingTree, g0.clone(), tree);
    let mut log = TraceLog::new(true);
    let mut adv = random_adversary(4);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut snapshots: Vec<Graph> = Vec::new();
    let mut round = 0;
    while net.alive_count() > 0 {
        round += 1;
        let v = adv.next(&ForgivingTree, &net, &[]);
        let out = run_round(&ForgivingTree, &mut net, v, &mut rng);
        assert!(out.violations.is_empty());
        log.round(round, &out, &net);
        snapshots.push(net.graph().clone());
    }
    let (_, events) = log.finish();
    let mut g = g0;
    for (t, snap) in snapshots.iter().enumerate() {
        let before = g.edge_count();
        let deleted = events.iter().find(|e| e.round == t + 1 && e.kind == TraceKind::Delete).unwrap().actor;
        let lost = g.degree(deleted);
        let count = |k: TraceKind| events.iter().filter(|e| e.round == t + 1 && e.kind == k).count();
        trace::replay_round(&mut g, &events, t + 1);
        assert_eq!(&g, snap, "round {}", t + 1);
        assert_eq!(g.edge_count() + lost + count(TraceKind::EdgeDrop), before + count(TraceKind::EdgeMake));
    }
    assert_eq!(g.vertex_count(), 0);
}

#[test]
fn trace_is_json_lines() {
    let r = sim::run(&config(TreeSpec::Star { delta: 5 }, StrategyKind::ForgivingTree, AdversarySpec::MaxDegree, 0)).unwrap();
    let mut buf = Vec::new();
    trace::write_jsonl(&r.trace, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), r.trace.len());
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for key in ["round", "kind", "actor", "details"] {
            assert!(v.get(key).is_some(), "{line}");
        }
    }
    assert!(text.contains("\"kind\":\"delete\""));
    assert!(text.contains("\"kind\":\"send\""));
}

#[test]
fn trace_is_off_by_default() {
    let c = SimulationConfig::new(TreeSpec::Path { n: 5 }, StrategyKind::ForgivingTree, AdversarySpec::Random, 0);
    let r = sim::run(&c).unwrap();
    assert!(r.trace.is_empty());
    assert!(r.trace_hash.is_empty());
}

#[test]
fn leaf_deletion_under_a_plain_parent_is_quick() {
    let mut c = config(TreeSpec::Path { n: 6 }, StrategyKind::ForgivingTree, AdversarySpec::Scripted(vec![NodeId(5)]), 0);
    c.rounds = Some(1);
    let r = sim::run(&c).unwrap();
    assert!(r.passed());
    assert!(r.records[0].recovery_latency <= 2);
    assert_eq!(r.records[0].edges_added, 0);
}

#[test]
fn referee_levels_agree_on_healthy_runs() {
    for level in [RefereeLevel::Full, RefereeLevel::Sampled, RefereeLevel::Off] {
        let mut c = config(TreeSpec::BalancedKary { k: 3, n: 80 }, StrategyKind::ForgivingTree, AdversarySpec::HeirHunter, 6);
        c.referee = level;
        let r = sim::run(&c).unwrap();
        assert!(r.passed(), "{level:?}");
        assert_eq!(r.records.len(), 80);
    }
    assert_eq!("sampled".parse::<RefereeLevel>(), Ok(RefereeLevel::Sampled));
    assert!("loud".parse::<RefereeLevel>().is_err());
}

#[test]
fn deleting_a_dead_node_is_reported() {
    let (g0, tree) = generate(&TreeSpec::Path { n: 3 }, 0).unwrap();
    let mut net = sim::prepare(&ForgivingTree, g0, tree);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(run_round(&ForgivingTree, &mut net, NodeId(1), &mut rng).violations.is_empty());
    assert!(!run_round(&ForgivingTree, &mut net, NodeId(1), &mut rng).violations.is_empty());
}

#[test]
fn bad_configs_are_errors() {
    let c = SimulationConfig::new(TreeSpec::FromFile { path: "/nonexistent/graph.txt".into(), root: None }, StrategyKind::Line, AdversarySpec::Random, 0);
    assert!(sim::run(&c).is_err());
}
