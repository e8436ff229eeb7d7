//! Seeded discrete-event simulation of the oracle network.

pub mod adversary;
pub mod engine;
pub mod latency;
pub mod sweep;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use adversary::{apply_adversary, AdversaryModel, Observation};
pub use engine::{run_scenario, EventKind, ScenarioResult, TaskOutcome, TraceEvent, World};
pub use latency::LatencyTable;
pub use sweep::{run_sweep, SweepPoint, SweepSpec};

/// Independent random streams, one per purpose.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub(crate) enum Stream {
    Affinity = 1,
    Round = 2,
    Truth = 3,
    Selection = 4,
    Adversary = 5,
    Agent = 6,
    Calibration = 7,
}

/// A ChaCha stream keyed by `(seed, purpose)` and positioned at `index`, so a
/// draw never depends on how many draws other parts of the run made.
pub(crate) fn stream_rng(seed: u64, purpose: Stream, index: u64) -> ChaCha8Rng {
    let key = seed ^ (purpose as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

/// Stream index for one aggregation round of a task.
pub(crate) fn round_index(task: u64, attempt: u32) -> u64 {
    (task << 8) | attempt as u64
}
