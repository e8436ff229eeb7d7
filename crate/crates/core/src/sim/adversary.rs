//! Malicious nodes and sources.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{stream_rng, Stream};
use crate::config::AdversaryConfig;
use crate::types::{DataValue, NodeId, SourceId};

/// Added to the true value by every malicious source.
pub const SOURCE_OFFSET: DataValue = DataValue::from_micros(7_000_000);
/// Used by malicious nodes that lie on their own.
pub const NODE_OFFSET: DataValue = DataValue::from_micros(-5_000_000);

/// Which parties are malicious, fixed for a scenario.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryModel {
    pub nodes: BTreeSet<NodeId>,
    pub sources: BTreeSet<SourceId>,
    pub collusion: bool,
}

impl AdversaryModel {
    /// Draws `round(fraction * population)` members of each set.
    pub fn realize(cfg: &AdversaryConfig, n: usize, m: usize, seed: u64) -> Self {
        let mut rng = stream_rng(seed, Stream::Adversary, 0);
        let bad_nodes = crate::config::fraction_to_count(cfg.malicious_node_fraction, n).min(n);
        let bad_sources = crate::config::fraction_to_count(cfg.malicious_source_fraction, m).min(m);
        Self {
            nodes: rand::seq::index::sample(&mut rng, n, bad_nodes).into_iter().map(NodeId).collect(),
            sources: rand::seq::index::sample(&mut rng, m, bad_sources).into_iter().map(SourceId).collect(),
            collusion: cfg.collusion,
        }
    }

    pub fn honest() -> Self {
        Self::default()
    }
}

/// What a node learns from a source and what it then broadcasts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation {
    /// Value returned (and proven) by the source.
    pub source_value: DataValue,
    /// Value the node broadcasts.
    pub broadcast_value: DataValue,
}

impl Observation {
    /// The source's proof covers the broadcast value.
    pub fn proof_matches(&self) -> bool {
        self.source_value == self.broadcast_value
    }
}

/// Malicious sources answer `truth + SOURCE_OFFSET` with a valid proof.
/// Honest nodes forward what they received. Colluding malicious nodes push the
/// sources' wrong value (their proof is valid only when the source is also
/// malicious); non-colluding malicious nodes fabricate their own value.
pub fn apply_adversary(adv: &AdversaryModel, node: NodeId, source: SourceId, truth: DataValue) -> Observation {
    let source_value = if adv.sources.contains(&source) { truth.offset(SOURCE_OFFSET) } else { truth };
    let broadcast_value = if !adv.nodes.contains(&node) {
        source_value
    } else if adv.collusion {
        truth.offset(SOURCE_OFFSET)
    } else {
        truth.offset(NODE_OFFSET)
    };
    Observation { source_value, broadcast_value }
}
