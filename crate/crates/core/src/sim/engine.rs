//! Event loop driving tasks through selection, fetch, broadcast, aggregation
//! and submission.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adversary::{apply_adversary, AdversaryModel};
use super::latency::LatencyTable;
use super::{round_index, stream_rng, Stream};
use crate::config::{validate_config, AggregationMode, ScenarioConfig, StrategyKind};
use crate::crypto::{CryptoSuite, MockBackend, NodeKeyPair, SignatureBackend, SourceKey, SourceProof};
use crate::error::Result;
use crate::ledger::{AccountBook, LedgerEvent, OracleContract, TaskRequest};
use crate::strategies::baselines::{iot_node_sources, majority_value};
use crate::strategies::{daon_select, iot_assign, simple_select, DdqnAgent};
use crate::tbls::{
    admit_contribution, finalize, handle_retry, raise_correction, try_select_winners, AggregateResult,
    AggregationPool, Contribution, RetrySignal,
};
use crate::types::{DataValue, NodeId, SourceId, TaskId};

/// Rounds of history the reputation baseline averages in iid mode.
const REPUTATION_SAMPLES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EventKind {
    TaskPosted,
    DataArrived { node: NodeId, source: SourceId },
    ContributionArrived { node: NodeId },
    AggregationAttempt,
    Submitted { submitter: NodeId },
    RetryTriggered { retry_count: u32 },
}

/// A processed event; `time` is relative to the start of its round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub attempt: u32,
    pub time: f64,
    pub seq: u64,
    pub kind: EventKind,
}

#[derive(Debug, Clone)]
struct Queued {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    /// Reversed so the max-heap pops the earliest `(time, seq)`.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Default)]
struct EventQueue {
    heap: BinaryHeap<Queued>,
    next_seq: u64,
}

impl EventQueue {
    fn push(&mut self, time: f64, kind: EventKind) {
        self.heap.push(Queued { time, seq: self.next_seq, kind });
        self.next_seq += 1;
    }

    fn pop(&mut self) -> Option<Queued> {
        self.heap.pop()
    }
}

/// Result of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub task_id: TaskId,
    /// Value delivered to the requester, if any.
    pub value: Option<DataValue>,
    pub correct: bool,
    pub winners: Vec<NodeId>,
    /// Source of each winner, aligned with `winners`.
    pub winning_sources: Vec<SourceId>,
    /// Seconds from posting to submission, summed over all rounds.
    pub completion_time: f64,
    pub retries: u32,
    /// 1 for each node in the final winning set.
    pub rewards: Vec<u8>,
    /// Source queries per node, summed over all rounds.
    pub accesses: Vec<u32>,
    /// Mean time at which nodes broadcast in the final round.
    pub mean_node_response: f64,
    pub corrected: bool,
    #[serde(skip)]
    pub trace: Vec<TraceEvent>,
}

impl TaskOutcome {
    pub fn success(&self) -> bool {
        self.value.is_some()
    }

    pub fn total_reward(&self) -> u32 {
        self.rewards.iter().map(|&r| r as u32).sum()
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub label: String,
    pub outcomes: Vec<TaskOutcome>,
    pub book: AccountBook,
    pub ledger: Vec<LedgerEvent>,
    pub warnings: Vec<String>,
}

/// Everything that persists across tasks of one scenario.
#[derive(Debug)]
pub struct World {
    cfg: ScenarioConfig,
    suite: CryptoSuite,
    node_keys: Vec<NodeKeyPair>,
    source_keys: Vec<SourceKey>,
    latency: LatencyTable,
    adversary: AdversaryModel,
    strategies: Vec<StrategyKind>,
    agents: Vec<Option<DdqnAgent>>,
    fixed_sources: Vec<Vec<SourceId>>,
    contract: OracleContract,
    trace: bool,
    warnings: Vec<String>,
}

struct RoundResult {
    accepted: Option<AggregateResult>,
    corrected: bool,
    end_time: f64,
    mean_response: f64,
}

impl World {
    /// Validates the configuration and sets up keys, latencies and agents.
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        let report = validate_config(cfg).into_result()?;
        let (n, m) = (cfg.node_count, cfg.source_count);
        let backend = MockBackend;
        let (node_keys, group_key) = backend.keygen(cfg.seed, n, cfg.threshold)?;
        let (source_keys, certificates) = backend.source_keygen(cfg.seed, m);
        let suite = CryptoSuite { backend: Arc::new(backend), group_key, certificates };
        let latency = LatencyTable::build(&cfg.latency, n, m, cfg.seed);
        let adversary = AdversaryModel::realize(&cfg.adversary, n, m, cfg.seed);
        let strategies = cfg.node_strategies();

        let agents = strategies
            .iter()
            .enumerate()
            .map(|(i, s)| {
                (*s == StrategyKind::Rl).then(|| {
                    let seed = stream_rng(cfg.seed, Stream::Agent, i as u64).random();
                    DdqnAgent::new(NodeId(i), n, m, &cfg.rl, seed)
                })
            })
            .collect();

        let mut fixed_sources: Vec<Vec<SourceId>> = vec![Vec::new(); n];
        let iot_ks: std::collections::BTreeSet<usize> = strategies
            .iter()
            .filter_map(|s| if let StrategyKind::Iot { k } = s { Some(*k) } else { None })
            .collect();
        if !iot_ks.is_empty() {
            let means = latency.mean_matrix(REPUTATION_SAMPLES);
            for k in iot_ks {
                // Reputation ranks only the nodes running this variant.
                let members: Vec<usize> =
                    (0..n).filter(|&i| strategies[i] == StrategyKind::Iot { k }).collect();
                let sub = means.select(ndarray::Axis(0), &members);
                let assigned = iot_node_sources(&iot_assign(&sub, k), members.len());
                for (local, sources) in assigned.into_iter().enumerate() {
                    fixed_sources[members[local]] = sources;
                }
            }
        }
        for (i, s) in strategies.iter().enumerate() {
            if *s == StrategyKind::Daon {
                fixed_sources[i] = daon_select(m);
            }
        }

        let contract = OracleContract::new(suite.clone(), cfg.aggregation, cfg.effective_k());
        Ok(Self {
            cfg: cfg.clone(),
            suite,
            node_keys,
            source_keys,
            latency,
            adversary,
            strategies,
            agents,
            fixed_sources,
            contract,
            trace: false,
            warnings: report.warnings,
        })
    }

    /// Record every processed event in the outcomes.
    pub fn with_trace(mut self, on: bool) -> Self {
        self.trace = on;
        self
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn contract(&self) -> &OracleContract {
        &self.contract
    }

    pub fn adversary(&self) -> &AdversaryModel {
        &self.adversary
    }

    pub fn latency(&self) -> &LatencyTable {
        &self.latency
    }

    pub fn agent(&self, node: NodeId) -> Option<&DdqnAgent> {
        self.agents.get(node.0).and_then(|a| a.as_ref())
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    fn select_sources(&mut self, task: TaskId, attempt: u32) -> Vec<Vec<SourceId>> {
        let m = self.cfg.source_count;
        let mut rng = stream_rng(self.cfg.seed, Stream::Selection, round_index(task.0, attempt));
        let mut out = Vec::with_capacity(self.strategies.len());
        for i in 0..self.strategies.len() {
            let picked = match self.strategies[i] {
                StrategyKind::Simple { n } => simple_select(n, m, &mut rng),
                StrategyKind::Daon | StrategyKind::Iot { .. } => self.fixed_sources[i].clone(),
                StrategyKind::Rl => vec![self.agents[i].as_mut().expect("rl node has an agent").act()],
            };
            out.push(picked);
        }
        out
    }

    fn contribution(&self, task: TaskId, node: NodeId, value: DataValue, proof: SourceProof, at: f64) -> Contribution {
        Contribution {
            task_id: task,
            node_id: node,
            source_id: proof.source_id,
            value,
            partial: self.suite.backend.sign_partial(&self.node_keys[node.0], task, value),
            proof,
            arrival_time: at,
        }
    }

    fn run_round(
        &mut self,
        pool: &mut AggregationPool,
        task: TaskId,
        truth: DataValue,
        selections: &[Vec<SourceId>],
        trace: &mut Vec<TraceEvent>,
    ) -> RoundResult {
        let attempt = pool.retry_count;
        let (t, k) = (self.cfg.threshold, self.cfg.effective_k());
        let latencies = self.latency.round(task, attempt);
        let mut queue = EventQueue::default();
        queue.push(0.0, EventKind::TaskPosted);
        for (i, sources) in selections.iter().enumerate() {
            for s in sources {
                queue.push(latencies[[i, s.0]], EventKind::DataArrived { node: NodeId(i), source: *s });
            }
        }

        let n = selections.len();
        let mut received: Vec<Vec<(DataValue, SourceProof)>> = vec![Vec::new(); n];
        let mut outbox: BTreeMap<NodeId, Contribution> = BTreeMap::new();
        let mut broadcast_at: Vec<Option<f64>> = vec![None; n];
        let mut pending: Option<AggregateResult> = None;
        let mut accepted: Option<AggregateResult> = None;
        let mut end_time = 0.0;

        while let Some(ev) = queue.pop() {
            end_time = ev.time;
            if self.trace {
                trace.push(TraceEvent { attempt, time: ev.time, seq: ev.seq, kind: ev.kind });
            }
            match ev.kind {
                EventKind::TaskPosted | EventKind::RetryTriggered { .. } => {}
                EventKind::DataArrived { node, source } => {
                    let obs = apply_adversary(&self.adversary, node, source, truth);
                    let proof = self.suite.backend.issue_source_proof(
                        &self.source_keys[source.0],
                        task,
                        node,
                        obs.source_value,
                    );
                    let got = &mut received[node.0];
                    got.push((obs.broadcast_value, proof));
                    let ready = match self.strategies[node.0] {
                        StrategyKind::Daon => got.len() == selections[node.0].len(),
                        _ => got.len() == 1,
                    };
                    if ready {
                        let value = majority_value(&got.iter().map(|(v, _)| *v).collect::<Vec<_>>())
                            .expect("at least one value received");
                        let proof = got.iter().find(|(v, _)| *v == value).expect("majority is present").1.clone();
                        let at = ev.time + self.cfg.broadcast_latency;
                        broadcast_at[node.0] = Some(at);
                        outbox.insert(node, self.contribution(task, node, value, proof, at));
                        queue.push(at, EventKind::ContributionArrived { node });
                    }
                }
                EventKind::ContributionArrived { node } => {
                    let c = outbox.remove(&node).expect("contribution was broadcast");
                    admit_contribution(pool, c, &self.suite).expect("contribution belongs to this task");
                    if pending.is_none() && accepted.is_none() {
                        queue.push(ev.time, EventKind::AggregationAttempt);
                    }
                }
                EventKind::AggregationAttempt => {
                    if pending.is_some() || accepted.is_some() {
                        continue;
                    }
                    if let Some(w) = try_select_winners(pool, t, k) {
                        let result = finalize(pool, &w, &self.suite, self.cfg.submission_latency)
                            .expect("winning set aggregates");
                        queue.push(result.completion_time, EventKind::Submitted { submitter: result.submitter });
                        pending = Some(result);
                    }
                }
                EventKind::Submitted { .. } => {
                    let result = pending.take().expect("submission was scheduled");
                    self.contract.accept_submission(&result);
                    accepted = self.contract.accepted(task).cloned();
                }
            }
        }

        let mut corrected = false;
        if let Some(submitted) = &accepted {
            // Every honest observer holds the full round pool.
            if let Some(cr) = raise_correction(pool, submitted, &self.suite, t, k) {
                if self.contract.apply_correction(&cr).is_some() {
                    corrected = true;
                    accepted = self.contract.accepted(task).cloned();
                }
            }
        }
        let times: Vec<f64> = broadcast_at.iter().flatten().copied().collect();
        let mean_response = if times.is_empty() { 0.0 } else { times.iter().sum::<f64>() / times.len() as f64 };
        RoundResult { accepted, corrected, end_time, mean_response }
    }

    /// Runs one task to success or retry exhaustion.
    pub fn run_task(&mut self, task: TaskId) -> TaskOutcome {
        let (n, m) = (self.cfg.node_count, self.cfg.source_count);
        let truth = {
            let mut rng = stream_rng(self.cfg.seed, Stream::Truth, task.0);
            DataValue::from_f64(rng.random_range(100.0..200.0))
        };
        let request = TaskRequest {
            task_id: task,
            sources: (0..m).map(SourceId).collect(),
            certificates: self.suite.certificates.clone(),
            ground_truth: truth,
        };
        self.contract.post_request(&request);

        let mut pool = AggregationPool::new(task, self.cfg.aggregation == AggregationMode::Tbls);
        let mut accesses = vec![0u32; n];
        let mut elapsed = 0.0;
        let mut trace = Vec::new();
        let (result, corrected, completion, mean_response) = loop {
            let attempt = pool.retry_count;
            let selections = self.select_sources(task, attempt);
            for (a, s) in accesses.iter_mut().zip(&selections) {
                *a += s.len() as u32;
            }
            let round = self.run_round(&mut pool, task, truth, &selections, &mut trace);

            let winners: Vec<(NodeId, SourceId)> = round
                .accepted
                .as_ref()
                .map(|r| r.winners.iter().copied().zip(r.winning_sources.iter().copied()).collect())
                .unwrap_or_default();
            self.agents.par_iter_mut().flatten().for_each(|a| a.observe(&winners));

            if let Some(result) = round.accepted {
                let completion = elapsed + result.completion_time;
                break (Some(result), round.corrected, completion, round.mean_response);
            }
            elapsed += round.end_time;
            match handle_retry(&mut pool, self.cfg.max_retries) {
                RetrySignal::Retry { retry_count } => {
                    if self.trace {
                        trace.push(TraceEvent {
                            attempt,
                            time: round.end_time,
                            seq: u64::MAX,
                            kind: EventKind::RetryTriggered { retry_count },
                        });
                    }
                }
                RetrySignal::Exhausted => break (None, false, elapsed, round.mean_response),
            }
        };

        let mut rewards = vec![0u8; n];
        let (value, winners, winning_sources) = match &result {
            Some(r) => {
                self.contract.deliver_callback(task).expect("accepted task has a pending callback");
                for w in &r.winners {
                    rewards[w.0] = 1;
                }
                (Some(r.value), r.winners.clone(), r.winning_sources.clone())
            }
            None => (None, Vec::new(), Vec::new()),
        };
        TaskOutcome {
            task_id: task,
            value,
            correct: value == Some(truth),
            winners,
            winning_sources,
            completion_time: completion,
            retries: pool.retry_count,
            rewards,
            accesses,
            mean_node_response: mean_response,
            corrected,
            trace,
        }
    }

    pub fn into_result(self, outcomes: Vec<TaskOutcome>) -> ScenarioResult {
        ScenarioResult {
            label: self.cfg.strategy_label(),
            outcomes,
            book: self.contract.book().clone(),
            ledger: self.contract.events().to_vec(),
            warnings: self.warnings,
        }
    }
}

/// Runs `cfg.task_count` tasks. Deterministic per seed.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    let mut world = World::new(cfg)?;
    let outcomes = (0..cfg.task_count as u64).map(|t| world.run_task(TaskId(t))).collect();
    Ok(world.into_result(outcomes))
}
