//! Line-delimited test vectors for the signature backend.
//!
//! Each line is a JSON object with an `op` field naming the operation, its
//! inputs, and the expected verification outcome. The conformance suite runs
//! every vector against a backend and compares outcomes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{data_digest, verify_div, SignatureBackend};
use crate::error::{Error, Result};
use crate::types::{DataValue, NodeId, SourceId, TaskId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProofTamper {
    None,
    Value,
    Node,
    Source,
    Task,
    Tag,
    UnknownSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum TestVector {
    Keygen {
        seed: u64,
        n: usize,
        t: usize,
        expect_ok: bool,
    },
    Partial {
        seed: u64,
        n: usize,
        signer: usize,
        task: u64,
        value: DataValue,
        verify_as: usize,
        verify_task: u64,
        verify_value: DataValue,
        expect: bool,
    },
    Group {
        seed: u64,
        n: usize,
        t: usize,
        signers: Vec<usize>,
        task: u64,
        value: DataValue,
        /// Signer whose partial is bit-flipped before aggregation.
        #[serde(default)]
        forge: Option<usize>,
        verify_value: DataValue,
        expect: bool,
    },
    Source {
        seed: u64,
        m: usize,
        source: usize,
        node: usize,
        task: u64,
        value: DataValue,
        tamper: ProofTamper,
        expect: bool,
    },
    Diversity {
        seed: u64,
        m: usize,
        sources: Vec<usize>,
        k: usize,
        /// Index of a proof whose value digest is altered.
        #[serde(default)]
        tamper_index: Option<usize>,
        expect: bool,
    },
}

impl TestVector {
    pub fn expected(&self) -> bool {
        match self {
            TestVector::Keygen { expect_ok, .. } => *expect_ok,
            TestVector::Partial { expect, .. }
            | TestVector::Group { expect, .. }
            | TestVector::Source { expect, .. }
            | TestVector::Diversity { expect, .. } => *expect,
        }
    }

    /// Evaluates the vector and returns the observed outcome.
    pub fn evaluate(&self, backend: &dyn SignatureBackend) -> bool {
        match self {
            TestVector::Keygen { seed, n, t, .. } => backend.keygen(*seed, *n, *t).is_ok(),
            TestVector::Partial { seed, n, signer, task, value, verify_as, verify_task, verify_value, .. } => {
                let Ok((keys, _)) = backend.keygen(*seed, *n, 1) else { return false };
                let (Some(signer), Some(verifier)) = (keys.get(*signer), keys.get(*verify_as)) else {
                    return false;
                };
                let sig = backend.sign_partial(signer, TaskId(*task), *value);
                backend.verify_partial(&sig, &verifier.public, TaskId(*verify_task), *verify_value)
            }
            TestVector::Group { seed, n, t, signers, task, value, forge, verify_value, .. } => {
                let Ok((keys, group)) = backend.keygen(*seed, *n, *t) else { return false };
                let mut partials = Vec::new();
                for &i in signers {
                    let Some(key) = keys.get(i) else { return false };
                    let mut p = backend.sign_partial(key, TaskId(*task), *value);
                    if *forge == Some(i) {
                        p.tag.0[0] ^= 0x80;
                    }
                    partials.push(p);
                }
                match backend.aggregate(&partials, *t) {
                    Ok(sig) => backend.verify_group(&sig, &group, *verify_value),
                    Err(_) => false,
                }
            }
            TestVector::Source { seed, m, source, node, task, value, tamper, .. } => {
                let (keys, mut certs) = backend.source_keygen(*seed, *m);
                let Some(key) = keys.get(*source) else { return false };
                let mut p = backend.issue_source_proof(key, TaskId(*task), NodeId(*node), *value);
                match tamper {
                    ProofTamper::None => {}
                    ProofTamper::Value => p.data = data_digest(value.offset(DataValue::from_micros(1))),
                    ProofTamper::Node => p.node_id = NodeId(node + 1),
                    ProofTamper::Source => p.source_id = SourceId((source + 1) % m),
                    ProofTamper::Task => p.task_id = TaskId(task.wrapping_add(1)),
                    ProofTamper::Tag => p.tag.0[31] ^= 1,
                    ProofTamper::UnknownSource => {
                        certs.keys.remove(&SourceId(*source));
                    }
                }
                backend.verify_source_proof(&p, &certs)
            }
            TestVector::Diversity { seed, m, sources, k, tamper_index, .. } => {
                let (keys, certs) = backend.source_keygen(*seed, *m);
                let value = DataValue::from_micros(42_000_000);
                let mut proofs = Vec::new();
                for (i, &j) in sources.iter().enumerate() {
                    let Some(key) = keys.get(j) else { return false };
                    proofs.push(backend.issue_source_proof(key, TaskId(1), NodeId(i), value));
                }
                if let Some(p) = tamper_index.and_then(|i| proofs.get_mut(i)) {
                    p.data = data_digest(DataValue::from_micros(43_000_000));
                }
                verify_div(backend, &proofs, &certs, *k)
            }
        }
    }
}

pub fn parse_vectors(text: &str) -> std::result::Result<Vec<TestVector>, serde_json::Error> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(serde_json::from_str)
        .collect()
}

pub fn load_vectors(path: &Path) -> Result<Vec<TestVector>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_vectors(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })
}
