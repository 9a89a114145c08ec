use forgiving_tree::experiments::{
    ceil_log2, grid_from_kv, log_slope, lower_bound_experiment, parse_kv, run_grid, config_from_kv, ExperimentGrid,
};
use forgiving_tree::sim::{AdversarySpec, RefereeLevel, StrategyKind};

#[test]
fn forgiving_tree_meets_the_lower_bound_inequality() {
    let r = lower_bound_experiment(256, StrategyKind::ForgivingTree).unwrap();
    assert!(r.alpha_measured <= 3);
    assert!(r.satisfied);
    assert!(r.ft_bound_ok);
    // 3^(2 beta + 1) >= 256 needs beta >= 2.02
    assert!(r.beta >= 2.0);
}

#[test]
fn surrogate_pays_in_degree() {
    let r = lower_bound_experiment(64, StrategyKind::Surrogate).unwrap();
    assert_eq!(r.alpha_measured, 62);
    assert_eq!(r.beta, 1.0);
    assert!(r.satisfied);
}

#[test]
fn small_and_invalid_deltas() {
    for s in [StrategyKind::ForgivingTree, StrategyKind::Line, StrategyKind::BinaryTree, StrategyKind::Surrogate] {
        let r = lower_bound_experiment(3, s).unwrap();
        assert!(r.alpha >= 3.0 && r.beta > 0.0 && r.lhs.is_finite());
        assert!(r.satisfied, "{s}");
    }
    assert!(lower_bound_experiment(2, StrategyKind::Line).is_err());
}

#[test]
fn ceil_log2_matches_doubling() {
    for x in 1..2000usize {
        let mut k = 0;
        while (1usize << k) < x {
            k += 1;
        }
        assert_eq!(ceil_log2(x), k, "{x}");
    }
}

#[test]
fn slope_of_a_line() {
    let pts: Vec<(usize, f64)> = [64, 128, 256, 512].iter().map(|&n| (n, 3.0 * (n as f64).log2() + 1.0)).collect();
    assert!((log_slope(&pts) - 3.0).abs() < 1e-9);
    assert_eq!(log_slope(&[(8, 1.0), (8, 2.0)]), 0.0);
}

#[test]
fn grid_writes_one_file_per_cell_and_an_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let grid = ExperimentGrid {
        trees: vec!["path".into(), "star".into()],
        sizes: vec![16],
        adversaries: vec![AdversarySpec::Random, AdversarySpec::MaxDegree],
        strategies: vec![StrategyKind::ForgivingTree],
        seeds: vec![1],
        rounds: None,
        referee: RefereeLevel::Full,
    };
    let cells = run_grid(&grid, dir.path()).unwrap();
    assert_eq!(cells.len(), 4);
    let files: Vec<String> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert_eq!(files.len(), 5);
    assert!(files.contains(&"aggregate.csv".to_string()));
    let agg = std::fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
    let mut lines = agg.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    for row in lines {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f[col("passed")], "true");
        // recompute the maxima from the per-round file
        let per_round = std::fs::read_to_string(dir.path().join(f[col("file")])).unwrap();
        let mut rows = per_round.lines();
        let h: Vec<&str> = rows.next().unwrap().split(',').collect();
        let data: Vec<Vec<i64>> = rows.map(|r| r.split(',').map(|x| x.parse().unwrap()).collect()).collect();
        assert_eq!(data.len().to_string(), f[col("rounds")]);
        for name in ["max_degree_increase", "max_messages_per_node", "max_bits_per_node"] {
            let j = h.iter().position(|x| *x == name).unwrap();
            assert_eq!(data.iter().map(|r| r[j]).max().unwrap().to_string(), f[col(name)], "{name}");
        }
        let j = h.iter().position(|x| *x == "diameter").unwrap();
        assert_eq!(data.iter().map(|r| r[j]).max().unwrap().to_string(), f[col("max_diameter")]);
        let j = h.iter().position(|x| *x == "recovery_latency").unwrap();
        assert_eq!(data.iter().map(|r| r[j]).max().unwrap().to_string(), f[col("max_recovery_latency")]);
    }
}

#[test]
fn kv_configs() {
    let kv = parse_kv("# demo\ntree = star\ndelta = 9 # leaves\nadversary = diameter_greedy:2\nstrategy = line\nseed=4\n").unwrap();
    let c = config_from_kv(&kv).unwrap();
    assert_eq!(c.adversary, AdversarySpec::DiameterGreedy { lookahead: 2 });
    assert_eq!(c.strategy, StrategyKind::Line);
    assert_eq!(c.seed, 4);
    assert!(parse_kv("just words").is_err());
    assert!(config_from_kv(&parse_kv("colour = red").unwrap()).is_err());
    assert!(config_from_kv(&parse_kv("seed = x").unwrap()).is_err());

    let g = grid_from_kv(&parse_kv("trees = path, star\nsizes = 8,16\nseeds = 2..5\nreferee = off").unwrap()).unwrap();
    assert_eq!(g.trees, vec!["path", "star"]);
    assert_eq!(g.sizes, vec![8, 16]);
    assert_eq!(g.seeds, vec![2, 3, 4]);
    assert_eq!(g.referee, RefereeLevel::Off);
    assert_eq!(g.cells().unwrap().len(), 2 * 2 * 4 * 3);
    assert!(grid_from_kv(&parse_kv("seeds = 5..x").unwrap()).is_err());
}
