//! Threshold-signature and source-provenance primitives.
//!
//! [`SignatureBackend`] is the seam for a real pairing-based scheme. The default
//! [`MockBackend`] is a deterministic structural mock: every tag is a SHA-256
//! digest keyed by the signer's public tag, and a group signature is a digest
//! over the sorted contributor tags. It enforces the functional contract
//! (message binding, key binding, threshold structure) and nothing more; it is
//! not unforgeable.

pub mod vectors;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::types::{DataValue, NodeId, SourceId, TaskId};

/// 32-byte opaque tag.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Tag(pub [u8; 32]);

impl fmt::Debug for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tag({})", &hex::encode(self.0)[..12])
    }
}

impl From<Tag> for String {
    fn from(t: Tag) -> Self {
        hex::encode(t.0)
    }
}

impl TryFrom<String> for Tag {
    type Error = hex::FromHexError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out)?;
        Ok(Tag(out))
    }
}

fn hash(domain: &str, parts: &[&[u8]]) -> Tag {
    let mut h = Sha256::new();
    h.update((domain.len() as u32).to_le_bytes());
    h.update(domain.as_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    Tag(h.finalize().into())
}

/// Digest of `(task_id, canonical(d))`; this is what partial signatures cover.
pub fn message_digest(task: TaskId, value: DataValue) -> Tag {
    hash("message", &[&task.0.to_le_bytes(), value.canonical().as_bytes()])
}

/// Digest of the canonical data value alone; carried inside source proofs.
pub fn data_digest(value: DataValue) -> Tag {
    hash("data", &[value.canonical().as_bytes()])
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CryptoError {
    #[error("threshold t={t} must be between 1 and N={n}")]
    InvalidThreshold { n: usize, t: usize },
    #[error("need {needed} consistent partial signatures, got {got}")]
    InsufficientPartials { needed: usize, got: usize },
    #[error("partial signatures cover different messages")]
    InconsistentMessage,
    #[error("node {0} contributed more than one partial signature")]
    DuplicateContributor(NodeId),
}

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeKeyPair {
    pub node_id: NodeId,
    secret: Tag,
    pub public: Tag,
}

impl fmt::Debug for NodeKeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NodeKeyPair")
            .field("node_id", &self.node_id)
            .field("public", &self.public)
            .finish_non_exhaustive()
    }
}

/// Registered group public key: the member public tags and the threshold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupKey {
    pub threshold: usize,
    pub members: Vec<Tag>,
    pub digest: Tag,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialSignature {
    pub task_id: TaskId,
    pub node_id: NodeId,
    pub message: Tag,
    pub tag: Tag,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSignature {
    pub task_id: TaskId,
    /// Sorted, distinct.
    pub contributors: Vec<NodeId>,
    pub message: Tag,
    pub tag: Tag,
}

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceKey {
    pub source_id: SourceId,
    secret: Tag,
}

impl fmt::Debug for SourceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceKey").field("source_id", &self.source_id).finish_non_exhaustive()
    }
}

/// Source id to verification key.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateSet {
    pub keys: BTreeMap<SourceId, Tag>,
}

impl CertificateSet {
    pub fn get(&self, source: SourceId) -> Option<&Tag> {
        self.keys.get(&source)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

/// Non-repudiable attestation that `node_id` obtained a value with digest
/// `data` from `source_id` while serving `task_id`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceProof {
    pub task_id: TaskId,
    pub node_id: NodeId,
    pub source_id: SourceId,
    pub data: Tag,
    pub tag: Tag,
}

impl SourceProof {
    pub fn attests(&self, value: DataValue) -> bool {
        self.data == data_digest(value)
    }
}

pub trait SignatureBackend: fmt::Debug + Send + Sync {
    fn keygen(&self, seed: u64, n: usize, t: usize) -> Result<(Vec<NodeKeyPair>, GroupKey), CryptoError>;
    fn source_keygen(&self, seed: u64, m: usize) -> (Vec<SourceKey>, CertificateSet);
    fn sign_partial(&self, key: &NodeKeyPair, task: TaskId, value: DataValue) -> PartialSignature;
    fn verify_partial(&self, sig: &PartialSignature, public: &Tag, task: TaskId, value: DataValue) -> bool;
    fn aggregate(&self, partials: &[PartialSignature], t: usize) -> Result<GroupSignature, CryptoError>;
    fn verify_group(&self, sig: &GroupSignature, group: &GroupKey, value: DataValue) -> bool;
    fn issue_source_proof(&self, key: &SourceKey, task: TaskId, node: NodeId, value: DataValue) -> SourceProof;
    fn verify_source_proof(&self, proof: &SourceProof, certs: &CertificateSet) -> bool;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MockBackend;

impl MockBackend {
    fn partial_tag(public: &Tag, node: NodeId, message: &Tag) -> Tag {
        hash("partial", &[&public.0, &(node.0 as u64).to_le_bytes(), &message.0])
    }

    fn group_tag(task: TaskId, message: &Tag, parts: &[(NodeId, Tag)]) -> Tag {
        let mut bytes = Vec::with_capacity(parts.len() * 40);
        for (node, tag) in parts {
            bytes.extend_from_slice(&(node.0 as u64).to_le_bytes());
            bytes.extend_from_slice(&tag.0);
        }
        hash("group-signature", &[&task.0.to_le_bytes(), &message.0, &bytes])
    }

    fn proof_tag(vk: &Tag, task: TaskId, node: NodeId, source: SourceId, data: &Tag) -> Tag {
        hash(
            "provenance",
            &[
                &vk.0,
                &task.0.to_le_bytes(),
                &(node.0 as u64).to_le_bytes(),
                &(source.0 as u64).to_le_bytes(),
                &data.0,
            ],
        )
    }

    fn verification_key(secret: &Tag) -> Tag {
        hash("source-vk", &[&secret.0])
    }
}

impl SignatureBackend for MockBackend {
    fn keygen(&self, seed: u64, n: usize, t: usize) -> Result<(Vec<NodeKeyPair>, GroupKey), CryptoError> {
        if t == 0 || t > n {
            return Err(CryptoError::InvalidThreshold { n, t });
        }
        let keys: Vec<NodeKeyPair> = (0..n)
            .map(|i| {
                let secret = hash("node-sk", &[&seed.to_le_bytes(), &(i as u64).to_le_bytes()]);
                let public = hash("node-pk", &[&secret.0]);
                NodeKeyPair { node_id: NodeId(i), secret, public }
            })
            .collect();
        let members: Vec<Tag> = keys.iter().map(|k| k.public).collect();
        let flat: Vec<u8> = members.iter().flat_map(|m| m.0).collect();
        let digest = hash("group-key", &[&(t as u64).to_le_bytes(), &flat]);
        Ok((keys, GroupKey { threshold: t, members, digest }))
    }

    fn source_keygen(&self, seed: u64, m: usize) -> (Vec<SourceKey>, CertificateSet) {
        let keys: Vec<SourceKey> = (0..m)
            .map(|j| SourceKey {
                source_id: SourceId(j),
                secret: hash("source-sk", &[&seed.to_le_bytes(), &(j as u64).to_le_bytes()]),
            })
            .collect();
        let certs = CertificateSet {
            keys: keys.iter().map(|k| (k.source_id, Self::verification_key(&k.secret))).collect(),
        };
        (keys, certs)
    }

    fn sign_partial(&self, key: &NodeKeyPair, task: TaskId, value: DataValue) -> PartialSignature {
        let message = message_digest(task, value);
        PartialSignature {
            task_id: task,
            node_id: key.node_id,
            message,
            tag: Self::partial_tag(&key.public, key.node_id, &message),
        }
    }

    fn verify_partial(&self, sig: &PartialSignature, public: &Tag, task: TaskId, value: DataValue) -> bool {
        let message = message_digest(task, value);
        sig.task_id == task && sig.message == message && sig.tag == Self::partial_tag(public, sig.node_id, &message)
    }

    fn aggregate(&self, partials: &[PartialSignature], t: usize) -> Result<GroupSignature, CryptoError> {
        let Some(first) = partials.first() else {
            return Err(CryptoError::InsufficientPartials { needed: t, got: 0 });
        };
        if partials.iter().any(|p| p.message != first.message || p.task_id != first.task_id) {
            return Err(CryptoError::InconsistentMessage);
        }
        let mut seen = BTreeSet::new();
        for p in partials {
            if !seen.insert(p.node_id) {
                return Err(CryptoError::DuplicateContributor(p.node_id));
            }
        }
        if t == 0 || partials.len() < t {
            return Err(CryptoError::InsufficientPartials { needed: t, got: partials.len() });
        }
        let mut parts: Vec<(NodeId, Tag)> = partials[..t].iter().map(|p| (p.node_id, p.tag)).collect();
        parts.sort();
        Ok(GroupSignature {
            task_id: first.task_id,
            contributors: parts.iter().map(|(n, _)| *n).collect(),
            message: first.message,
            tag: Self::group_tag(first.task_id, &first.message, &parts),
        })
    }

    fn verify_group(&self, sig: &GroupSignature, group: &GroupKey, value: DataValue) -> bool {
        if sig.contributors.len() != group.threshold || sig.message != message_digest(sig.task_id, value) {
            return false;
        }
        if !sig.contributors.windows(2).all(|w| w[0] < w[1]) {
            return false;
        }
        let mut parts = Vec::with_capacity(sig.contributors.len());
        for &node in &sig.contributors {
            let Some(public) = group.members.get(node.0) else {
                return false;
            };
            parts.push((node, Self::partial_tag(public, node, &sig.message)));
        }
        sig.tag == Self::group_tag(sig.task_id, &sig.message, &parts)
    }

    fn issue_source_proof(&self, key: &SourceKey, task: TaskId, node: NodeId, value: DataValue) -> SourceProof {
        let vk = Self::verification_key(&key.secret);
        let data = data_digest(value);
        SourceProof {
            task_id: task,
            node_id: node,
            source_id: key.source_id,
            data,
            tag: Self::proof_tag(&vk, task, node, key.source_id, &data),
        }
    }

    fn verify_source_proof(&self, proof: &SourceProof, certs: &CertificateSet) -> bool {
        certs.get(proof.source_id).is_some_and(|vk| {
            proof.tag == Self::proof_tag(vk, proof.task_id, proof.node_id, proof.source_id, &proof.data)
        })
    }
}

/// True iff every proof verifies and the proofs span at least `k` distinct sources.
pub fn verify_div(backend: &dyn SignatureBackend, proofs: &[SourceProof], certs: &CertificateSet, k: usize) -> bool {
    if !proofs.iter().all(|p| backend.verify_source_proof(p, certs)) {
        return false;
    }
    let distinct: BTreeSet<SourceId> = proofs.iter().map(|p| p.source_id).collect();
    distinct.len() >= k
}

/// Everything a verifier needs: backend, registered group key and certificates.
#[derive(Debug, Clone)]
pub struct CryptoSuite {
    pub backend: Arc<dyn SignatureBackend>,
    pub group_key: GroupKey,
    pub certificates: CertificateSet,
}

impl CryptoSuite {
    pub fn verify_group(&self, sig: &GroupSignature, value: DataValue) -> bool {
        self.backend.verify_group(sig, &self.group_key, value)
    }

    pub fn verify_source_proof(&self, proof: &SourceProof) -> bool {
        self.backend.verify_source_proof(proof, &self.certificates)
    }

    pub fn verify_partial(&self, sig: &PartialSignature, task: TaskId, value: DataValue) -> bool {
        self.group_key
            .members
            .get(sig.node_id.0)
            .is_some_and(|pk| self.backend.verify_partial(sig, pk, task, value))
    }

    pub fn verify_div(&self, proofs: &[SourceProof], k: usize) -> bool {
        verify_div(self.backend.as_ref(), proofs, &self.certificates, k)
    }
}
