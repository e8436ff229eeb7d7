//! Per-node advantage matrix used as the learning state.

use serde::{Deserialize, Serialize};

use crate::types::{NodeId, SourceId};

/// N x M integer matrix: how often each node won with each source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdvantageMatrix {
    nodes: usize,
    sources: usize,
    cells: Vec<i32>,
}

impl AdvantageMatrix {
    pub fn new(nodes: usize, sources: usize) -> Self {
        Self { nodes, sources, cells: vec![0; nodes * sources] }
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn sources(&self) -> usize {
        self.sources
    }

    pub fn get(&self, node: NodeId, source: SourceId) -> i32 {
        self.cells[node.0 * self.sources + source.0]
    }

    pub fn row(&self, node: NodeId) -> &[i32] {
        &self.cells[node.0 * self.sources..(node.0 + 1) * self.sources]
    }

    pub fn cells(&self) -> &[i32] {
        &self.cells
    }

    fn add(&mut self, node: NodeId, source: SourceId, delta: i32) {
        self.cells[node.0 * self.sources + source.0] += delta;
    }
}

/// Applies one finished round to the owner's matrix.
///
/// `winners` holds the public (node, source) pairs of the winning set; it is
/// empty when the round did not aggregate.
pub fn update_advantage(t: &mut AdvantageMatrix, self_id: NodeId, chosen: SourceId, winners: &[(NodeId, SourceId)]) {
    for &(node, source) in winners {
        t.add(node, source, 1);
    }
    let won = winners.iter().any(|&(node, _)| node == self_id);
    let contested = winners.iter().any(|&(_, source)| source == chosen);
    if !won && contested {
        t.add(self_id, chosen, -1);
    }
}

fn scale(entries: &[i32]) -> f64 {
    let peak = entries.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0).max(1);
    1.0 / peak as f64
}

/// Row-major flatten scaled into [-1, 1].
pub fn state_from_matrix<T: num_traits::FromPrimitive>(t: &AdvantageMatrix) -> Vec<T> {
    let s = scale(&t.cells);
    t.cells.iter().map(|&v| T::from_f64(v as f64 * s).expect("finite")).collect()
}

/// The owner's row only, scaled into [-1, 1].
pub fn state_from_row<T: num_traits::FromPrimitive>(t: &AdvantageMatrix, node: NodeId) -> Vec<T> {
    let row = t.row(node);
    let s = scale(row);
    row.iter().map(|&v| T::from_f64(v as f64 * s).expect("finite")).collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn owner_wins() {
        let mut t = AdvantageMatrix::new(3, 4);
        update_advantage(&mut t, NodeId(0), SourceId(2), &[(NodeId(0), SourceId(2)), (NodeId(1), SourceId(3))]);
        assert_eq!(t.get(NodeId(0), SourceId(2)), 1);
        assert_eq!(t.get(NodeId(1), SourceId(3)), 1);
    }

    #[test]
    fn owner_loses_on_contested_source() {
        let mut t = AdvantageMatrix::new(3, 4);
        update_advantage(&mut t, NodeId(0), SourceId(2), &[(NodeId(1), SourceId(2))]);
        assert_eq!(t.get(NodeId(0), SourceId(2)), -1);
        assert_eq!(t.get(NodeId(1), SourceId(2)), 1);
    }

    #[test]
    fn owner_loses_on_unused_source() {
        let mut t = AdvantageMatrix::new(3, 4);
        update_advantage(&mut t, NodeId(0), SourceId(2), &[(NodeId(1), SourceId(0))]);
        assert_eq!(t.get(NodeId(0), SourceId(2)), 0);
    }

    #[test]
    fn state_is_scaled() {
        let mut t = AdvantageMatrix::new(2, 2);
        for _ in 0..4 {
            update_advantage(&mut t, NodeId(0), SourceId(1), &[(NodeId(1), SourceId(1))]);
        }
        let s: Vec<f64> = state_from_matrix(&t);
        assert_eq!(s, vec![0.0, -1.0, 0.0, 1.0]);
        let r: Vec<f64> = state_from_row(&t, NodeId(1));
        assert_eq!(r, vec![0.0, 1.0]);
        let zero: Vec<f64> = state_from_matrix(&AdvantageMatrix::new(2, 2));
        assert_eq!(zero, vec![0.0; 4]);
    }

    proptest! {
        #[test]
        fn update_touches_only_owner_cell_and_winner_cells(
            n in 1usize..6,
            m in 1usize..6,
            seed_cells in proptest::collection::vec(-5i32..5, 36),
            owner in 0usize..6,
            chosen in 0usize..6,
            winners in proptest::collection::vec((0usize..6, 0usize..6), 0..6),
        ) {
            let owner = NodeId(owner % n);
            let chosen = SourceId(chosen % m);
            let mut winners: Vec<(NodeId, SourceId)> =
                winners.into_iter().map(|(a, b)| (NodeId(a % n), SourceId(b % m))).collect();
            winners.sort_by_key(|w| w.0);
            winners.dedup_by_key(|w| w.0);
            let mut t = AdvantageMatrix { nodes: n, sources: m, cells: seed_cells[..n * m].to_vec() };
            let before = t.clone();
            update_advantage(&mut t, owner, chosen, &winners);
            for i in 0..n {
                for j in 0..m {
                    let (node, source) = (NodeId(i), SourceId(j));
                    let wins = winners.contains(&(node, source)) as i32;
                    let mut expected = before.get(node, source) + wins;
                    if node == owner && source == chosen
                        && !winners.iter().any(|w| w.0 == owner)
                        && winners.iter().any(|w| w.1 == chosen)
                    {
                        expected -= 1;
                    }
                    prop_assert_eq!(t.get(node, source), expected);
                }
            }
        }
    }
}
