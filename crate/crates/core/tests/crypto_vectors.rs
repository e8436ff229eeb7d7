//! Signature backend conformance over the recorded vector file.

use std::path::Path;

use oracle_sim::crypto::vectors::load_vectors;
use oracle_sim::crypto::MockBackend;

#[test]
fn mock_backend_meets_every_vector() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/crypto_vectors.jsonl");
    let vectors = load_vectors(&path).unwrap();
    assert!(vectors.len() >= 20);
    assert!(vectors.iter().any(|v| v.expected()) && vectors.iter().any(|v| !v.expected()));
    for (i, v) in vectors.iter().enumerate() {
        assert_eq!(v.evaluate(&MockBackend), v.expected(), "vector {i}: {v:?}");
    }
}
