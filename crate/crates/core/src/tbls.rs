//! Per-task aggregation state machine: admission, winner selection,
//! finalization, retries and correction requests.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::crypto::{CryptoSuite, GroupSignature, PartialSignature, SourceProof};
use crate::error::{Error, Result};
use crate::types::{DataValue, NodeId, SourceId, TaskId};

/// One node's broadcast for a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub task_id: TaskId,
    pub node_id: NodeId,
    pub source_id: SourceId,
    pub value: DataValue,
    pub proof: SourceProof,
    pub partial: PartialSignature,
    /// Simulated seconds since the round started.
    pub arrival_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdmitOutcome {
    Accepted,
    RejectedInvalidProof,
    RejectedInvalidPartial,
    DisqualifiedDuplicate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregationPool {
    pub task_id: TaskId,
    contributions: BTreeMap<NodeId, Contribution>,
    disqualified: BTreeSet<NodeId>,
    pub retry_count: u32,
    /// When false (plain threshold mode) source proofs are not checked.
    pub require_proofs: bool,
}

impl AggregationPool {
    pub fn new(task_id: TaskId, require_proofs: bool) -> Self {
        Self {
            task_id,
            contributions: BTreeMap::new(),
            disqualified: BTreeSet::new(),
            retry_count: 0,
            require_proofs,
        }
    }

    pub fn contributions(&self) -> impl Iterator<Item = &Contribution> {
        self.contributions.values()
    }

    pub fn get(&self, node: NodeId) -> Option<&Contribution> {
        self.contributions.get(&node)
    }

    pub fn len(&self) -> usize {
        self.contributions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contributions.is_empty()
    }

    pub fn is_disqualified(&self, node: NodeId) -> bool {
        self.disqualified.contains(&node)
    }

    pub fn disqualified(&self) -> &BTreeSet<NodeId> {
        &self.disqualified
    }
}

/// Admits `c` into `pool`, enforcing one upload per node per task.
///
/// A second upload from a node removes its earlier contribution and
/// disqualifies it for the rest of the task. Invalid contributions leave the
/// pool untouched.
pub fn admit_contribution(pool: &mut AggregationPool, c: Contribution, suite: &CryptoSuite) -> Result<AdmitOutcome> {
    if c.task_id != pool.task_id {
        return Err(Error::TaskMismatch { expected: pool.task_id, got: c.task_id });
    }
    if pool.disqualified.contains(&c.node_id) {
        return Ok(AdmitOutcome::DisqualifiedDuplicate);
    }
    if pool.contributions.remove(&c.node_id).is_some() {
        pool.disqualified.insert(c.node_id);
        return Ok(AdmitOutcome::DisqualifiedDuplicate);
    }
    if pool.require_proofs {
        let p = &c.proof;
        let bound = p.task_id == c.task_id && p.node_id == c.node_id && p.source_id == c.source_id;
        if !(bound && p.attests(c.value) && suite.verify_source_proof(p)) {
            return Ok(AdmitOutcome::RejectedInvalidProof);
        }
    }
    if c.partial.node_id != c.node_id || !suite.verify_partial(&c.partial, c.task_id, c.value) {
        return Ok(AdmitOutcome::RejectedInvalidPartial);
    }
    pool.contributions.insert(c.node_id, c);
    Ok(AdmitOutcome::Accepted)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinningSet {
    pub value: DataValue,
    /// Winners in selection order.
    pub members: Vec<NodeId>,
}

fn arrival_key(c: &Contribution) -> (f64, NodeId) {
    (c.arrival_time, c.node_id)
}

fn cmp_arrival(a: &Contribution, b: &Contribution) -> std::cmp::Ordering {
    a.arrival_time.total_cmp(&b.arrival_time).then(a.node_id.cmp(&b.node_id))
}

/// Picks `t` contributions on the modal value with at least `k` distinct sources.
///
/// Rule: start from the `t` earliest arrivals on the modal value; while fewer
/// than `k` sources are represented, replace the latest-arriving member whose
/// source is duplicated with the earliest non-member that brings a new source.
/// Ties on arrival time fall back to node id. A tie for the modal value yields
/// `None`.
pub fn try_select_winners(pool: &AggregationPool, t: usize, k: usize) -> Option<WinningSet> {
    if t == 0 {
        return None;
    }
    let mut counts: BTreeMap<DataValue, usize> = BTreeMap::new();
    for c in pool.contributions.values() {
        *counts.entry(c.value).or_default() += 1;
    }
    let top = *counts.values().max()?;
    let mut modal = counts.iter().filter(|(_, &n)| n == top).map(|(v, _)| *v);
    let value = modal.next()?;
    if modal.next().is_some() || top < t {
        return None;
    }

    let mut candidates: Vec<&Contribution> = pool.contributions.values().filter(|c| c.value == value).collect();
    candidates.sort_by(|a, b| cmp_arrival(a, b));

    let mut selected: Vec<&Contribution> = candidates[..t].to_vec();
    let mut per_source: BTreeMap<SourceId, usize> = BTreeMap::new();
    for c in &selected {
        *per_source.entry(c.source_id).or_default() += 1;
    }
    let mut next_outside = t;
    while per_source.len() < k {
        let incoming = loop {
            let c = candidates.get(next_outside)?;
            next_outside += 1;
            if !per_source.contains_key(&c.source_id) {
                break *c;
            }
        };
        let (slot, _) = selected
            .iter()
            .enumerate()
            .filter(|(_, c)| per_source[&c.source_id] > 1)
            .max_by(|(_, a), (_, b)| cmp_arrival(a, b))?;
        let outgoing = selected[slot];
        *per_source.get_mut(&outgoing.source_id).expect("member source counted") -= 1;
        *per_source.entry(incoming.source_id).or_default() += 1;
        selected[slot] = incoming;
    }
    selected.sort_by(|a, b| cmp_arrival(a, b));
    debug_assert!(selected.windows(2).all(|w| arrival_key(w[0]) <= arrival_key(w[1])));
    Some(WinningSet { value, members: selected.iter().map(|c| c.node_id).collect() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub task_id: TaskId,
    pub signature: GroupSignature,
    pub proofs: Vec<SourceProof>,
    pub value: DataValue,
    /// Winners in selection order.
    pub winners: Vec<NodeId>,
    /// Source used by each winner, aligned with `winners`.
    pub winning_sources: Vec<SourceId>,
    pub distinct_sources: usize,
    /// Simulated seconds since the round started.
    pub completion_time: f64,
    /// Node that uploads the result.
    pub submitter: NodeId,
}

/// Aggregates the winners' partial signatures into the submitted result.
pub fn finalize(
    pool: &AggregationPool,
    winners: &WinningSet,
    suite: &CryptoSuite,
    submission_latency: f64,
) -> Result<AggregateResult> {
    let members: Vec<&Contribution> = winners
        .members
        .iter()
        .map(|n| pool.contributions.get(n).expect("winner must be in the pool"))
        .collect();
    let partials: Vec<PartialSignature> = members.iter().map(|c| c.partial.clone()).collect();
    let signature = suite.backend.aggregate(&partials, partials.len())?;
    let winning_sources: Vec<SourceId> = members.iter().map(|c| c.source_id).collect();
    let distinct_sources = winning_sources.iter().collect::<BTreeSet<_>>().len();
    let last = members.iter().map(|c| c.arrival_time).fold(0.0, f64::max);
    Ok(AggregateResult {
        task_id: pool.task_id,
        signature,
        proofs: members.iter().map(|c| c.proof.clone()).collect(),
        value: winners.value,
        winners: winners.members.clone(),
        winning_sources,
        distinct_sources,
        completion_time: last + submission_latency,
        submitter: *winners.members.iter().min().expect("winning set is non-empty"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RetrySignal {
    /// Re-run source selection; carries the new retry count.
    Retry { retry_count: u32 },
    /// The retry budget is spent and the task fails.
    Exhausted,
}

/// Called once every eligible contribution has arrived without a feasible
/// winning set. Clears the pool; disqualifications persist for the task.
pub fn handle_retry(pool: &mut AggregationPool, max_retries: u32) -> RetrySignal {
    pool.contributions.clear();
    if pool.retry_count >= max_retries {
        return RetrySignal::Exhausted;
    }
    pool.retry_count += 1;
    RetrySignal::Retry { retry_count: pool.retry_count }
}

/// Group signature over `d` plus `K`-diverse valid proofs attesting `d`.
pub fn verify_submission(result: &AggregateResult, suite: &CryptoSuite, k: usize) -> bool {
    let sig = &result.signature;
    if sig.task_id != result.task_id || !suite.verify_group(sig, result.value) {
        return false;
    }
    let contributors: BTreeSet<NodeId> = sig.contributors.iter().copied().collect();
    let provers: BTreeSet<NodeId> = result.proofs.iter().map(|p| p.node_id).collect();
    if result.proofs.len() != sig.contributors.len() || provers != contributors {
        return false;
    }
    if !result.proofs.iter().all(|p| p.task_id == result.task_id && p.attests(result.value)) {
        return false;
    }
    suite.verify_div(&result.proofs, k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionRequest {
    pub task_id: TaskId,
    /// The observer's own aggregate.
    pub result: AggregateResult,
    /// Submitter of the result being challenged.
    pub accused: NodeId,
}

/// An observer re-checks a submission against its own pool.
///
/// Raised when the submission fails verification or the observer's locally
/// selected winners agree on a different value. Requires the observer to hold
/// a feasible winning set of its own.
pub fn raise_correction(
    observer_pool: &AggregationPool,
    submitted: &AggregateResult,
    suite: &CryptoSuite,
    t: usize,
    k: usize,
) -> Option<CorrectionRequest> {
    let local = try_select_winners(observer_pool, t, k)?;
    let disputes = !verify_submission(submitted, suite, k) || local.value != submitted.value;
    if !disputes {
        return None;
    }
    let result = finalize(observer_pool, &local, suite, 0.0).ok()?;
    if !verify_submission(&result, suite, k) {
        return None;
    }
    Some(CorrectionRequest { task_id: submitted.task_id, result, accused: submitted.submitter })
}
