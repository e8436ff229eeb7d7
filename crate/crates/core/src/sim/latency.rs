//! Node-to-source fetch latencies.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{round_index, stream_rng, Stream};
use crate::config::{LatencyDistribution, LatencyMode, LatencyModelSpec};
use crate::types::TaskId;

/// Gaussian draws are clamped to this many seconds.
pub const LATENCY_FLOOR: f64 = 0.01;

pub fn draw<R: Rng + ?Sized>(dist: &LatencyDistribution, rng: &mut R) -> f64 {
    match *dist {
        LatencyDistribution::Uniform { lo, hi } => rng.random_range(lo..hi),
        LatencyDistribution::Gaussian { mean, std } => {
            let normal = Normal::new(mean, std).expect("validated std");
            normal.sample(rng).max(LATENCY_FLOOR)
        }
    }
}

/// Latency lookup for every (node, source, round).
///
/// Each round's matrix comes from its own stream, so it does not depend on
/// which rounds were evaluated before it.
#[derive(Debug, Clone)]
pub struct LatencyTable {
    spec: LatencyModelSpec,
    nodes: usize,
    sources: usize,
    seed: u64,
    base: Option<Array2<f64>>,
}

impl LatencyTable {
    pub fn build(spec: &LatencyModelSpec, nodes: usize, sources: usize, seed: u64) -> Self {
        let base = match spec.mode {
            LatencyMode::FixedAffinity => {
                let mut rng = stream_rng(seed, Stream::Affinity, 0);
                Some(Array2::from_shape_simple_fn((nodes, sources), || draw(&spec.distribution, &mut rng)))
            }
            LatencyMode::IidPerTask => None,
        };
        Self { spec: spec.clone(), nodes, sources, seed, base }
    }

    pub fn spec(&self) -> &LatencyModelSpec {
        &self.spec
    }

    /// Per-pair base latencies in fixed-affinity mode.
    pub fn base(&self) -> Option<&Array2<f64>> {
        self.base.as_ref()
    }

    /// `(nodes, sources)` latencies for one round.
    pub fn round(&self, task: TaskId, attempt: u32) -> Array2<f64> {
        let mut rng = stream_rng(self.seed, Stream::Round, round_index(task.0, attempt));
        match &self.base {
            Some(base) => {
                let j = self.spec.jitter_fraction;
                base.mapv(|b| if j > 0.0 { b * (1.0 + rng.random_range(-j..=j)) } else { b })
            }
            None => {
                Array2::from_shape_simple_fn((self.nodes, self.sources), || draw(&self.spec.distribution, &mut rng))
            }
        }
    }

    pub fn latency(&self, node: usize, source: usize, task: TaskId, attempt: u32) -> f64 {
        self.round(task, attempt)[[node, source]]
    }

    /// True mean per pair in fixed-affinity mode; in iid mode, the average of
    /// `samples` rounds from a dedicated stream, as a history-based reputation
    /// would see it.
    pub fn mean_matrix(&self, samples: usize) -> Array2<f64> {
        if let Some(base) = &self.base {
            return base.clone();
        }
        let mut acc = Array2::<f64>::zeros((self.nodes, self.sources));
        for s in 0..samples.max(1) {
            let mut rng = stream_rng(self.seed, Stream::Calibration, s as u64);
            acc += &Array2::from_shape_simple_fn((self.nodes, self.sources), || draw(&self.spec.distribution, &mut rng));
        }
        acc / samples.max(1) as f64
    }
}
