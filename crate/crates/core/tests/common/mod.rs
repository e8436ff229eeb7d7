#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use oracle_sim::crypto::{CryptoSuite, MockBackend, NodeKeyPair, SignatureBackend, SourceKey};
use oracle_sim::tbls::{admit_contribution, AggregationPool, Contribution};
use oracle_sim::types::{DataValue, NodeId, SourceId, TaskId};

pub struct Fixture {
    pub suite: CryptoSuite,
    pub keys: Vec<NodeKeyPair>,
    pub sources: Vec<SourceKey>,
}

impl Fixture {
    pub fn new(n: usize, m: usize, t: usize) -> Self {
        let backend = MockBackend;
        let (keys, group_key) = backend.keygen(11, n, t).unwrap();
        let (sources, certificates) = backend.source_keygen(12, m);
        Self { suite: CryptoSuite { backend: Arc::new(backend), group_key, certificates }, keys, sources }
    }

    /// Honest contribution: the source proves `value` and the node signs it.
    pub fn contribution(&self, task: u64, node: usize, source: usize, value: DataValue, at: f64) -> Contribution {
        self.contribution_with(task, node, source, value, value, at)
    }

    /// The source proves `proven` while the node broadcasts `sent`.
    pub fn contribution_with(
        &self,
        task: u64,
        node: usize,
        source: usize,
        proven: DataValue,
        sent: DataValue,
        at: f64,
    ) -> Contribution {
        let b = &self.suite.backend;
        Contribution {
            task_id: TaskId(task),
            node_id: NodeId(node),
            source_id: SourceId(source),
            value: sent,
            proof: b.issue_source_proof(&self.sources[source], TaskId(task), NodeId(node), proven),
            partial: b.sign_partial(&self.keys[node], TaskId(task), sent),
            arrival_time: at,
        }
    }

    /// Pool with one contribution per `(source, value micros, arrival)`; node ids follow order.
    pub fn pool(&self, task: u64, entries: &[(usize, i64, f64)]) -> AggregationPool {
        let mut pool = AggregationPool::new(TaskId(task), true);
        for (node, &(source, value, at)) in entries.iter().enumerate() {
            let c = self.contribution(task, node, source, DataValue::from_micros(value), at);
            admit_contribution(&mut pool, c, &self.suite).unwrap();
        }
        pool
    }
}

/// Earliest completion over every `t`-subset on the pool's unique modal value
/// with at least `k` distinct sources, by exhaustive search.
pub fn brute_force_completion(pool: &AggregationPool, t: usize, k: usize) -> Option<f64> {
    let all: Vec<&Contribution> = pool.contributions().collect();
    let mut counts: BTreeMap<DataValue, usize> = BTreeMap::new();
    for c in &all {
        *counts.entry(c.value).or_default() += 1;
    }
    let top = *counts.values().max()?;
    let modal: Vec<DataValue> = counts.iter().filter(|(_, &c)| c == top).map(|(v, _)| *v).collect();
    if modal.len() != 1 {
        return None;
    }
    let value = modal[0];
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << all.len()) {
        if mask.count_ones() as usize != t {
            continue;
        }
        let members: Vec<&Contribution> =
            all.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, c)| *c).collect();
        if members.iter().any(|c| c.value != value) {
            continue;
        }
        let sources: BTreeSet<SourceId> = members.iter().map(|c| c.source_id).collect();
        if sources.len() < k {
            continue;
        }
        let done = members.iter().map(|c| c.arrival_time).fold(f64::MIN, f64::max);
        best = Some(best.map_or(done, |b: f64| b.min(done)));
    }
    best
}

/// Central differences of the batch loss over every parameter.
pub fn numeric_gradient(
    net: &oracle_sim::strategies::Mlp<f64>,
    x: &ndarray::Array2<f64>,
    actions: &[usize],
    targets: &[f64],
) -> Vec<f64> {
    let h = 1e-6;
    let base = net.flat_params();
    let mut probe = net.clone();
    (0..base.len())
        .map(|i| {
            let mut p = base.clone();
            p[i] = base[i] + h;
            probe.set_flat_params(&p);
            let up = probe.loss(x.view(), actions, targets);
            p[i] = base[i] - h;
            probe.set_flat_params(&p);
            let down = probe.loss(x.view(), actions, targets);
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest per-parameter relative error between two gradients.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}
