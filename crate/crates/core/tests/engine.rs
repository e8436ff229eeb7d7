//! Scenario-level invariants of the event loop.

use oracle_sim::config::{
    AdversaryConfig, AggregationMode, LatencyMode, LatencyModelSpec, ScenarioConfig, StrategyKind, StrategyMix,
};
use oracle_sim::ledger::{AccountBook, LedgerPayload};
use oracle_sim::metrics::{rows_from_outcomes, write_csv};
use oracle_sim::sim::{run_scenario, EventKind, World};
use oracle_sim::types::{NodeId, TaskId};

fn small(strategy: StrategyKind, aggregation: AggregationMode) -> ScenarioConfig {
    ScenarioConfig {
        node_count: 12,
        source_count: 6,
        threshold: 5,
        diversity_k: 4,
        task_count: 60,
        aggregation,
        strategy,
        ..ScenarioConfig::default()
    }
}

fn csv_bytes(cfg: &ScenarioConfig) -> Vec<u8> {
    let r = run_scenario(cfg).unwrap();
    let mut buf = Vec::new();
    write_csv(&rows_from_outcomes(&r.label, &r.outcomes), &mut buf).unwrap();
    buf
}

#[test]
fn identical_configs_give_identical_runs() {
    let cfg = small(StrategyKind::Rl, AggregationMode::Tbls);
    let a = run_scenario(&cfg).unwrap();
    let b = run_scenario(&cfg).unwrap();
    assert_eq!(a.outcomes, b.outcomes);
    assert_eq!(a.ledger, b.ledger);
    assert_eq!(csv_bytes(&cfg), csv_bytes(&cfg));
    let other = ScenarioConfig { seed: 1, ..cfg.clone() };
    assert_ne!(csv_bytes(&cfg), csv_bytes(&other));
}

#[test]
fn events_are_causal() {
    for (strategy, mode) in [
        (StrategyKind::Rl, AggregationMode::Tbls),
        (StrategyKind::Simple { n: 2 }, AggregationMode::Threshold),
        (StrategyKind::Daon, AggregationMode::Threshold),
    ] {
        let cfg = ScenarioConfig { broadcast_latency: 0.05, submission_latency: 0.1, ..small(strategy, mode) };
        let mut world = World::new(&cfg).unwrap().with_trace(true);
        for task in 0..30 {
            let o = world.run_task(TaskId(task));
            let mut last = (0u32, f64::MIN);
            let mut first_data: Vec<Option<f64>> = vec![None; cfg.node_count];
            for e in o.trace.iter().filter(|e| !matches!(e.kind, EventKind::RetryTriggered { .. })) {
                if e.attempt != last.0 {
                    first_data = vec![None; cfg.node_count];
                    last = (e.attempt, f64::MIN);
                }
                assert!(e.time >= last.1, "events out of order");
                last.1 = e.time;
                match e.kind {
                    EventKind::DataArrived { node, .. } => {
                        first_data[node.0].get_or_insert(e.time);
                    }
                    EventKind::ContributionArrived { node } => {
                        let fetched = first_data[node.0].expect("contribution before any data");
                        assert!(e.time >= fetched + cfg.broadcast_latency - 1e-12);
                    }
                    _ => {}
                }
            }
            if o.success() {
                let lat = world.latency().round(TaskId(task), o.retries);
                let slowest = o.winners.iter().zip(&o.winning_sources).map(|(w, s)| lat[[w.0, s.0]]).fold(0.0, f64::max);
                assert!(o.completion_time >= slowest, "{strategy}: {} < {slowest}", o.completion_time);
            }
        }
    }
}

#[test]
fn accesses_match_selection_sizes() {
    let cfg = ScenarioConfig {
        strategy_mix: vec![
            StrategyMix { count: 3, strategy: StrategyKind::Simple { n: 1 } },
            StrategyMix { count: 3, strategy: StrategyKind::Simple { n: 3 } },
            StrategyMix { count: 3, strategy: StrategyKind::Daon },
        ],
        ..small(StrategyKind::Iot { k: 2 }, AggregationMode::Threshold)
    };
    let r = run_scenario(&cfg).unwrap();
    for o in &r.outcomes {
        let rounds = 1 + o.retries;
        for i in 0..3 {
            assert_eq!(o.accesses[i], rounds);
            assert_eq!(o.accesses[3 + i], 3 * rounds);
            assert_eq!(o.accesses[6 + i], 6 * rounds);
        }
        let iot: u32 = o.accesses[9..].iter().sum();
        // Two reputation picks per source among the three reputation nodes.
        assert_eq!(iot, 2 * 6 * rounds);
    }
}

#[test]
fn rl_nodes_query_one_source_per_round() {
    let r = run_scenario(&small(StrategyKind::Rl, AggregationMode::Tbls)).unwrap();
    for o in &r.outcomes {
        assert!(o.accesses.iter().all(|&a| a == 1 + o.retries));
    }
}

#[test]
fn ledger_matches_outcomes() {
    let cfg = ScenarioConfig {
        adversary: AdversaryConfig { malicious_node_fraction: 0.25, malicious_source_fraction: 0.0, collusion: false },
        ..small(StrategyKind::Simple { n: 2 }, AggregationMode::Tbls)
    };
    let r = run_scenario(&cfg).unwrap();
    assert_eq!(AccountBook::replay(&r.ledger), r.book);
    let callbacks = r.ledger.iter().filter(|e| matches!(e.payload, LedgerPayload::CallbackDelivered { .. })).count();
    assert_eq!(callbacks, r.outcomes.iter().filter(|o| o.success()).count());
    let requests = r.ledger.iter().filter(|e| matches!(e.payload, LedgerPayload::Requested { .. })).count();
    assert_eq!(requests, cfg.task_count);
    for node in 0..cfg.node_count {
        let wins = r.outcomes.iter().filter(|o| o.winners.contains(&NodeId(node))).count() as u64;
        assert_eq!(r.book.get(NodeId(node)).reward_count, wins);
    }
    let total: f64 = r.book.accounts.values().map(|a| a.token_balance).sum();
    let delivered = r.outcomes.iter().filter(|o| o.success()).count() as f64;
    assert!((total - delivered).abs() < 1e-9);
}

#[test]
fn full_trust_falls_to_half_bad_sources_but_diversity_holds() {
    let adversary = AdversaryConfig { malicious_node_fraction: 0.0, malicious_source_fraction: 0.5, collusion: true };
    let plain = ScenarioConfig { adversary: adversary.clone(), ..small(StrategyKind::Simple { n: 1 }, AggregationMode::Threshold) };
    let r = run_scenario(&plain).unwrap();
    assert!(r.outcomes.iter().any(|o| o.success() && !o.correct));

    let guarded = ScenarioConfig { adversary, ..small(StrategyKind::Simple { n: 1 }, AggregationMode::Tbls) };
    let r = run_scenario(&guarded).unwrap();
    assert!(r.outcomes.iter().all(|o| !o.success() || o.correct));
}

#[test]
fn lone_malicious_nodes_never_win_under_proof_checks() {
    let cfg = ScenarioConfig {
        adversary: AdversaryConfig { malicious_node_fraction: 0.4, malicious_source_fraction: 0.0, collusion: false },
        ..small(StrategyKind::Rl, AggregationMode::Tbls)
    };
    let world = World::new(&cfg).unwrap();
    let bad = world.adversary().nodes.clone();
    let r = run_scenario(&cfg).unwrap();
    for o in &r.outcomes {
        assert!(o.winners.iter().all(|w| !bad.contains(w)));
        assert!(!o.success() || o.correct);
    }
}

#[test]
fn iid_mode_runs() {
    let cfg = ScenarioConfig {
        latency: LatencyModelSpec { mode: LatencyMode::IidPerTask, ..LatencyModelSpec::default() },
        ..small(StrategyKind::Simple { n: 1 }, AggregationMode::Threshold)
    };
    let r = run_scenario(&cfg).unwrap();
    assert!(r.outcomes.iter().all(|o| o.success() && o.correct && o.retries == 0));
}
