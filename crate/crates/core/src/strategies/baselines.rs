//! Non-learning selection baselines.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::Rng;

use crate::types::{DataValue, NodeId, SourceId};

/// `n` distinct sources uniformly at random, in ascending order.
pub fn simple_select<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Vec<SourceId> {
    let mut picked: Vec<SourceId> = rand::seq::index::sample(rng, m, n).into_iter().map(SourceId).collect();
    picked.sort();
    picked
}

/// Every source.
pub fn daon_select(m: usize) -> Vec<SourceId> {
    (0..m).map(SourceId).collect()
}

/// For each source, the `k` nodes with the lowest mean latency to it.
///
/// `mean_latency` is `(nodes, sources)`. Ties go to the lower node id.
pub fn iot_assign(mean_latency: &Array2<f64>, k: usize) -> BTreeMap<SourceId, Vec<NodeId>> {
    let (n, m) = mean_latency.dim();
    (0..m)
        .map(|j| {
            let mut nodes: Vec<usize> = (0..n).collect();
            nodes.sort_by(|&a, &b| mean_latency[[a, j]].total_cmp(&mean_latency[[b, j]]).then(a.cmp(&b)));
            (SourceId(j), nodes.into_iter().take(k).map(NodeId).collect())
        })
        .collect()
}

/// Sources each node queries under an assignment.
pub fn iot_node_sources(assignment: &BTreeMap<SourceId, Vec<NodeId>>, n: usize) -> Vec<Vec<SourceId>> {
    let mut out = vec![Vec::new(); n];
    for (&source, nodes) in assignment {
        for node in nodes {
            out[node.0].push(source);
        }
    }
    out
}

/// Most frequent value; ties go to the smaller value.
pub fn majority_value(values: &[DataValue]) -> Option<DataValue> {
    let mut counts: BTreeMap<DataValue, usize> = BTreeMap::new();
    for &v in values {
        *counts.entry(v).or_default() += 1;
    }
    let top = *counts.values().max()?;
    counts.into_iter().find(|&(_, c)| c == top).map(|(v, _)| v)
}
