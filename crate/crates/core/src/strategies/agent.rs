//! Per-node double-Q learner over the advantage-matrix state.

use std::sync::Arc;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::advantage::{state_from_matrix, state_from_row, update_advantage, AdvantageMatrix};
use super::qnet::{compute_targets, Batch, QNetwork};
use super::replay::{Experience, ReplayBuffer};
use crate::config::{RlHyperparams, StateEncoding};
use crate::types::{NodeId, SourceId};

#[derive(Debug, Clone)]
pub struct DdqnAgent {
    node: NodeId,
    params: RlHyperparams,
    matrix: AdvantageMatrix,
    net: QNetwork<f32>,
    buffer: ReplayBuffer<f32>,
    rng: ChaCha8Rng,
    pending: Option<(Arc<[f32]>, usize)>,
    train_steps: u64,
    last_loss: Option<f32>,
}

impl DdqnAgent {
    pub fn new(node: NodeId, nodes: usize, sources: usize, params: &RlHyperparams, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input = match params.state_encoding {
            StateEncoding::FullMatrix => nodes * sources,
            StateEncoding::OwnRow => sources,
        };
        let net = QNetwork::new(input, &params.hidden_layers, sources, &mut rng);
        Self {
            node,
            params: params.clone(),
            matrix: AdvantageMatrix::new(nodes, sources),
            net,
            buffer: ReplayBuffer::new(params.memory_size),
            rng,
            pending: None,
            train_steps: 0,
            last_loss: None,
        }
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn matrix(&self) -> &AdvantageMatrix {
        &self.matrix
    }

    pub fn network(&self) -> &QNetwork<f32> {
        &self.net
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn last_loss(&self) -> Option<f32> {
        self.last_loss
    }

    pub fn state(&self) -> Arc<[f32]> {
        let s = match self.params.state_encoding {
            StateEncoding::FullMatrix => state_from_matrix(&self.matrix),
            StateEncoding::OwnRow => state_from_row(&self.matrix, self.node),
        };
        Arc::from(s)
    }

    /// Epsilon-greedy choice for the coming round.
    pub fn act(&mut self) -> SourceId {
        let state = self.state();
        let a = self.net.select_action(&state, self.params.exploration, &mut self.rng);
        self.pending = Some((state, a));
        SourceId(a)
    }

    /// Greedy choice for an arbitrary state.
    pub fn greedy(&self, state: &[f32]) -> SourceId {
        SourceId(self.net.policy(state))
    }

    /// Ends the round started by [`DdqnAgent::act`]: updates the matrix,
    /// stores the transition and trains once the buffer holds a batch.
    pub fn observe(&mut self, winners: &[(NodeId, SourceId)]) {
        let Some((state, action)) = self.pending.take() else {
            return;
        };
        update_advantage(&mut self.matrix, self.node, SourceId(action), winners);
        let reward = if winners.iter().any(|&(n, _)| n == self.node) { 1.0 } else { 0.0 };
        let next_state = self.state();
        self.buffer.push(Experience { state, action, reward, next_state });
        self.train();
    }

    fn train(&mut self) {
        let b = self.params.batch_size;
        let Some(idx) = self.buffer.sample(b, &mut self.rng) else {
            return;
        };
        let width = self.net.online.input_width();
        let mut states = Array2::<f32>::zeros((b, width));
        let mut next_states = Array2::<f32>::zeros((if self.params.bootstrap_targets { b } else { 0 }, width));
        let mut actions = Vec::with_capacity(b);
        let mut rewards = Vec::with_capacity(b);
        for (row, &i) in idx.iter().enumerate() {
            let e = self.buffer.get(i);
            states.row_mut(row).assign(&ndarray::ArrayView1::from(&e.state[..]));
            if self.params.bootstrap_targets {
                next_states.row_mut(row).assign(&ndarray::ArrayView1::from(&e.next_state[..]));
            }
            actions.push(e.action);
            rewards.push(e.reward);
        }
        let batch = Batch { states, actions, rewards, next_states };
        let targets = compute_targets(
            &batch,
            self.params.discount as f32,
            self.params.bootstrap_targets,
            &self.net.online,
            &self.net.target,
        );
        let loss = self.net.train_step(batch.states.view(), &batch.actions, &targets, self.params.learning_rate as f32);
        self.last_loss = Some(loss);
        self.train_steps += 1;
        if self.train_steps % self.params.target_sync_period as u64 == 0 {
            self.net.sync_target();
        }
    }
}
