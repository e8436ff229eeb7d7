//! Simulated on-chain oracle contract: request intake, append-only event log,
//! submission verification, reward/penalty accounting and user callbacks.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::AggregationMode;
use crate::crypto::{CertificateSet, CryptoSuite};
use crate::error::{Error, Result};
use crate::tbls::{verify_submission, AggregateResult, CorrectionRequest};
use crate::types::{DataValue, NodeId, SourceId, TaskId};

/// Tokens locked per task and split evenly among the winners.
pub const TASK_FEE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRequest {
    pub task_id: TaskId,
    pub sources: Vec<SourceId>,
    pub certificates: CertificateSet,
    /// Simulation-only; never shown to selection strategies.
    #[serde(skip)]
    pub ground_truth: DataValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LedgerPayload {
    Requested { task_id: TaskId, sources: Vec<SourceId>, fee: f64 },
    Submitted { task_id: TaskId, submitter: NodeId, value: DataValue, winners: Vec<NodeId> },
    Corrected { task_id: TaskId, accused: NodeId, value: DataValue, revoked: Vec<(NodeId, f64)> },
    Rewarded { task_id: TaskId, node: NodeId, amount: f64 },
    Penalized { task_id: TaskId, node: NodeId },
    CallbackDelivered { task_id: TaskId, value: DataValue },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEvent {
    pub seq: u64,
    #[serde(flatten)]
    pub payload: LedgerPayload,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Account {
    pub reward_count: u64,
    pub penalty_count: u64,
    pub token_balance: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AccountBook {
    pub accounts: BTreeMap<NodeId, Account>,
}

impl AccountBook {
    pub fn get(&self, node: NodeId) -> Account {
        self.accounts.get(&node).copied().unwrap_or_default()
    }

    fn apply(&mut self, event: &LedgerPayload) {
        match event {
            LedgerPayload::Rewarded { node, amount, .. } => {
                let a = self.accounts.entry(*node).or_default();
                a.reward_count += 1;
                a.token_balance += amount;
            }
            LedgerPayload::Corrected { revoked, .. } => {
                for (node, amount) in revoked {
                    let a = self.accounts.entry(*node).or_default();
                    a.reward_count -= 1;
                    a.token_balance -= amount;
                }
            }
            LedgerPayload::Penalized { node, .. } => {
                self.accounts.entry(*node).or_default().penalty_count += 1;
            }
            _ => {}
        }
    }

    /// Rebuilds the book from an event log.
    pub fn replay<'a>(events: impl IntoIterator<Item = &'a LedgerEvent>) -> Self {
        let mut book = Self::default();
        for e in events {
            book.apply(&e.payload);
        }
        book
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectReason {
    UnknownTask,
    AlreadyAccepted,
    VerificationFailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubmissionOutcome {
    Accepted,
    Rejected(RejectReason),
}

#[derive(Debug, Clone)]
struct TaskRecord {
    fee: f64,
    accepted: Option<AggregateResult>,
    callback: bool,
}

#[derive(Debug, Clone)]
pub struct OracleContract {
    suite: CryptoSuite,
    mode: AggregationMode,
    diversity_k: usize,
    events: Vec<LedgerEvent>,
    book: AccountBook,
    tasks: BTreeMap<TaskId, TaskRecord>,
    latest: Option<TaskId>,
}

impl OracleContract {
    pub fn new(suite: CryptoSuite, mode: AggregationMode, diversity_k: usize) -> Self {
        Self {
            suite,
            mode,
            diversity_k,
            events: Vec::new(),
            book: AccountBook::default(),
            tasks: BTreeMap::new(),
            latest: None,
        }
    }

    pub fn events(&self) -> &[LedgerEvent] {
        &self.events
    }

    pub fn book(&self) -> &AccountBook {
        &self.book
    }

    pub fn suite(&self) -> &CryptoSuite {
        &self.suite
    }

    pub fn accepted(&self, task: TaskId) -> Option<&AggregateResult> {
        self.tasks.get(&task).and_then(|r| r.accepted.as_ref())
    }

    fn append(&mut self, payload: LedgerPayload) -> LedgerEvent {
        self.book.apply(&payload);
        let event = LedgerEvent { seq: self.events.len() as u64, payload };
        self.events.push(event.clone());
        event
    }

    /// Records the request and locks the task fee.
    pub fn post_request(&mut self, q: &TaskRequest) -> LedgerEvent {
        self.tasks.insert(q.task_id, TaskRecord { fee: TASK_FEE, accepted: None, callback: false });
        self.latest = Some(q.task_id);
        self.append(LedgerPayload::Requested { task_id: q.task_id, sources: q.sources.clone(), fee: TASK_FEE })
    }

    fn verifies(&self, result: &AggregateResult) -> bool {
        match self.mode {
            AggregationMode::Tbls => verify_submission(result, &self.suite, self.diversity_k),
            AggregationMode::Threshold => {
                result.signature.task_id == result.task_id && self.suite.verify_group(&result.signature, result.value)
            }
        }
    }

    fn reward_winners(&mut self, task_id: TaskId, winners: &[NodeId], fee: f64) {
        let amount = fee / winners.len() as f64;
        let mut sorted = winners.to_vec();
        sorted.sort();
        for node in sorted {
            self.append(LedgerPayload::Rewarded { task_id, node, amount });
        }
    }

    /// First verified submission per task wins; everything else is rejected
    /// without touching the ledger.
    pub fn accept_submission(&mut self, result: &AggregateResult) -> SubmissionOutcome {
        let Some(record) = self.tasks.get(&result.task_id) else {
            return SubmissionOutcome::Rejected(RejectReason::UnknownTask);
        };
        if record.accepted.is_some() {
            return SubmissionOutcome::Rejected(RejectReason::AlreadyAccepted);
        }
        if !self.verifies(result) {
            return SubmissionOutcome::Rejected(RejectReason::VerificationFailed);
        }
        let fee = record.fee;
        self.append(LedgerPayload::Submitted {
            task_id: result.task_id,
            submitter: result.submitter,
            value: result.value,
            winners: result.winners.clone(),
        });
        self.reward_winners(result.task_id, &result.winners, fee);
        self.tasks.get_mut(&result.task_id).expect("checked above").accepted = Some(result.clone());
        SubmissionOutcome::Accepted
    }

    /// Applies a correction while its window is open: the task is the most
    /// recent one and its callback has not been delivered.
    ///
    /// Returns the `Corrected` event, or `None` when the correction is refused.
    pub fn apply_correction(&mut self, cr: &CorrectionRequest) -> Option<LedgerEvent> {
        if self.latest != Some(cr.task_id) || cr.result.task_id != cr.task_id {
            return None;
        }
        let record = self.tasks.get(&cr.task_id)?;
        let original = record.accepted.as_ref()?;
        if record.callback || !self.verifies(&cr.result) {
            return None;
        }
        if self.verifies(original) && original.value == cr.result.value {
            return None;
        }
        let fee = record.fee;
        let amount = fee / original.winners.len() as f64;
        let mut revoked: Vec<(NodeId, f64)> = original.winners.iter().map(|&n| (n, amount)).collect();
        revoked.sort_by_key(|(n, _)| *n);
        let accused = original.submitter;
        let corrected = self.append(LedgerPayload::Corrected {
            task_id: cr.task_id,
            accused,
            value: cr.result.value,
            revoked,
        });
        self.append(LedgerPayload::Penalized { task_id: cr.task_id, node: accused });
        self.reward_winners(cr.task_id, &cr.result.winners, fee);
        self.tasks.get_mut(&cr.task_id).expect("checked above").accepted = Some(cr.result.clone());
        Some(corrected)
    }

    /// Returns the final value to the requesting contract, once per task.
    pub fn deliver_callback(&mut self, task_id: TaskId) -> Result<LedgerEvent> {
        let record = self.tasks.get_mut(&task_id).ok_or(Error::UnknownTask(task_id))?;
        let value = match (&record.accepted, record.callback) {
            (Some(r), false) => r.value,
            _ => return Err(Error::UnknownTask(task_id)),
        };
        record.callback = true;
        Ok(self.append(LedgerPayload::CallbackDelivered { task_id, value }))
    }

    /// Writes the event log as JSON lines.
    pub fn export_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub fn parse_jsonl(text: &str) -> std::result::Result<Vec<LedgerEvent>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}
