//! Scenario parameters and their validation.
//!
//! A [`ScenarioConfig`] is immutable once built. Every scenario passes through
//! [`validate_config`] before the engine will run it.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How contributions are aggregated off-chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AggregationMode {
    /// Threshold signatures plus source proofs plus the diversity requirement.
    Tbls,
    /// Plain threshold signatures over the first `t` matching values; source
    /// proofs are ignored and there is no diversity requirement.
    Threshold,
}

impl fmt::Display for AggregationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AggregationMode::Tbls => "tbls",
            AggregationMode::Threshold => "threshold",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LatencyMode {
    /// Fresh sample for every (node, source, round).
    IidPerTask,
    /// Per-pair base latency drawn once, scaled by a per-round jitter.
    FixedAffinity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LatencyDistribution {
    Uniform { lo: f64, hi: f64 },
    Gaussian { mean: f64, std: f64 },
}

impl LatencyDistribution {
    pub const DEFAULT_UNIFORM: Self = LatencyDistribution::Uniform { lo: 0.1, hi: 2.3 };
    pub const DEFAULT_GAUSSIAN: Self = LatencyDistribution::Gaussian { mean: 2.0, std: 0.4 };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencyModelSpec {
    pub mode: LatencyMode,
    pub distribution: LatencyDistribution,
    /// Relative jitter bound, fixed-affinity mode only.
    pub jitter_fraction: f64,
}

impl Default for LatencyModelSpec {
    fn default() -> Self {
        Self {
            mode: LatencyMode::FixedAffinity,
            distribution: LatencyDistribution::DEFAULT_UNIFORM,
            jitter_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdversaryConfig {
    pub malicious_node_fraction: f64,
    pub malicious_source_fraction: f64,
    /// Malicious nodes forward wrong values from malicious sources with valid proofs.
    pub collusion: bool,
}

/// Data-source selection policy for a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StrategyKind {
    /// Query `n` distinct random sources (`n = 1` is plain Simple).
    Simple { n: usize },
    /// Query every source and aggregate locally.
    Daon,
    /// Reputation assignment of the `k` fastest nodes to each source.
    Iot { k: usize },
    /// Double deep Q-learning over the advantage matrix.
    Rl,
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyKind::Simple { n } => write!(f, "simple-{n}"),
            StrategyKind::Daon => f.write_str("daon"),
            StrategyKind::Iot { k } => write!(f, "iot-{k}"),
            StrategyKind::Rl => f.write_str("rl"),
        }
    }
}

/// Assigns `strategy` to the next `count` nodes in id order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyMix {
    pub count: usize,
    pub strategy: StrategyKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateEncoding {
    /// N x M matrix over every node's per-source advantage.
    FullMatrix,
    /// Only the owner's row (length M).
    OwnRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlHyperparams {
    pub learning_rate: f64,
    pub exploration: f64,
    pub discount: f64,
    pub memory_size: usize,
    pub batch_size: usize,
    /// Train steps between target-network syncs.
    pub target_sync_period: usize,
    pub hidden_layers: Vec<usize>,
    /// Bootstrap targets through the target network instead of treating every
    /// round as terminal.
    pub bootstrap_targets: bool,
    pub state_encoding: StateEncoding,
}

impl Default for RlHyperparams {
    fn default() -> Self {
        Self {
            learning_rate: 5e-4,
            exploration: 0.05,
            discount: 0.99,
            memory_size: 1000,
            batch_size: 32,
            target_sync_period: 100,
            hidden_layers: vec![64, 64],
            bootstrap_targets: false,
            state_encoding: StateEncoding::FullMatrix,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub node_count: usize,
    pub source_count: usize,
    pub threshold: usize,
    pub diversity_k: usize,
    pub task_count: usize,
    pub aggregation: AggregationMode,
    pub latency: LatencyModelSpec,
    pub adversary: AdversaryConfig,
    /// Strategy for every node not covered by `strategy_mix`.
    pub strategy: StrategyKind,
    pub strategy_mix: Vec<StrategyMix>,
    pub rl: RlHyperparams,
    /// Seconds between a node obtaining data and its broadcast reaching peers.
    pub broadcast_latency: f64,
    /// Seconds between the winning set completing and the submission landing.
    pub submission_latency: f64,
    pub max_retries: u32,
    /// Also warn when `t < M` does not hold.
    pub strict_assumptions: bool,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            node_count: 50,
            source_count: 20,
            threshold: 20,
            diversity_k: 18,
            task_count: 1000,
            aggregation: AggregationMode::Tbls,
            latency: LatencyModelSpec::default(),
            adversary: AdversaryConfig::default(),
            strategy: StrategyKind::Rl,
            strategy_mix: Vec::new(),
            rl: RlHyperparams::default(),
            broadcast_latency: 0.0,
            submission_latency: 0.0,
            max_retries: 10,
            strict_assumptions: false,
            seed: 0,
        }
    }
}

/// `round(fraction * population)` with halves rounded up.
pub fn fraction_to_count(fraction: f64, population: usize) -> usize {
    (fraction * population as f64 + 0.5).floor().max(0.0) as usize
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config always serializes")
    }

    pub fn malicious_node_count(&self) -> usize {
        fraction_to_count(self.adversary.malicious_node_fraction, self.node_count)
    }

    pub fn malicious_source_count(&self) -> usize {
        fraction_to_count(self.adversary.malicious_source_fraction, self.source_count)
    }

    /// Effective diversity requirement handed to the aggregation pool.
    pub fn effective_k(&self) -> usize {
        match self.aggregation {
            AggregationMode::Tbls => self.diversity_k,
            AggregationMode::Threshold => 1,
        }
    }

    /// Strategy assigned to each node, in id order.
    pub fn node_strategies(&self) -> Vec<StrategyKind> {
        let mut out = Vec::with_capacity(self.node_count);
        for entry in &self.strategy_mix {
            out.extend(std::iter::repeat_n(entry.strategy, entry.count));
        }
        out.truncate(self.node_count);
        out.resize(self.node_count, self.strategy);
        out
    }

    /// Short label used in reports: the single strategy, or `mixed`.
    pub fn strategy_label(&self) -> String {
        let strategies = self.node_strategies();
        match strategies.first() {
            Some(first) if strategies.iter().all(|s| s == first) => first.to_string(),
            Some(_) => "mixed".to_string(),
            None => self.strategy.to_string(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn into_result(self) -> Result<Self> {
        if self.is_valid() {
            Ok(self)
        } else {
            Err(Error::InvalidConfig(self.errors.join("; ")))
        }
    }
}

pub fn validate_config(cfg: &ScenarioConfig) -> ValidationReport {
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    let (n, m, t, k) = (cfg.node_count, cfg.source_count, cfg.threshold, cfg.diversity_k);

    for (name, value) in [
        ("node_count", n),
        ("source_count", m),
        ("threshold", t),
        ("diversity_k", k),
        ("task_count", cfg.task_count),
    ] {
        if value == 0 {
            errors.push(format!("{name} must be positive"));
        }
    }
    if t > n {
        errors.push(format!("threshold t={t} exceeds node count N={n}"));
    }
    if k > m {
        errors.push(format!("diversity K={k} exceeds source count M={m}"));
    }
    if cfg.aggregation == AggregationMode::Tbls {
        if 2 * k <= m {
            errors.push(format!("K must exceed M/2 (K={k}, M={m})"));
        }
        if k > t {
            errors.push(format!("K={k} distinct sources cannot fit in t={t} signatures"));
        }
    }

    let adv = &cfg.adversary;
    for (name, f) in [
        ("malicious_node_fraction", adv.malicious_node_fraction),
        ("malicious_source_fraction", adv.malicious_source_fraction),
    ] {
        if !(0.0..=1.0).contains(&f) {
            errors.push(format!("{name}={f} outside [0, 1]"));
        }
    }

    validate_latency(&cfg.latency, &mut errors);
    validate_rl(&cfg.rl, &mut errors);

    for (name, v) in [
        ("broadcast_latency", cfg.broadcast_latency),
        ("submission_latency", cfg.submission_latency),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            errors.push(format!("{name} must be a non-negative number"));
        }
    }

    if !cfg.strategy_mix.is_empty() {
        let covered: usize = cfg.strategy_mix.iter().map(|e| e.count).sum();
        if covered > n {
            errors.push(format!("strategy_mix covers {covered} nodes but N={n}"));
        }
    }
    let mut kinds: Vec<StrategyKind> = cfg.strategy_mix.iter().map(|e| e.strategy).collect();
    kinds.push(cfg.strategy);
    for kind in kinds {
        match kind {
            StrategyKind::Simple { n: q } if q == 0 || q > m => {
                errors.push(format!("simple-{q} must query between 1 and M={m} sources"));
            }
            StrategyKind::Iot { k: q } if q == 0 || q > n => {
                errors.push(format!("iot assignment size {q} must be between 1 and N={n}"));
            }
            StrategyKind::Daon if cfg.aggregation == AggregationMode::Tbls => {
                errors.push("daon aggregates every source locally and cannot run under tbls".into());
            }
            _ => {}
        }
    }

    // Security assumptions: warnings only.
    if m > 0 && n > 0 {
        let bad_nodes = adv.malicious_node_fraction * n as f64;
        let bad_sources = adv.malicious_source_fraction * m as f64;
        if bad_nodes + bad_sources >= (n + m) as f64 / 2.0 {
            warnings.push(format!(
                "malicious nodes + sources = {:.1} is not below (N+M)/2 = {:.1}",
                bad_nodes + bad_sources,
                (n + m) as f64 / 2.0
            ));
        }
        if bad_sources >= m as f64 / 2.0 {
            warnings.push(format!(
                "malicious sources {bad_sources:.1} is not below M/2 = {:.1}",
                m as f64 / 2.0
            ));
        }
        if cfg.strict_assumptions && t >= m {
            warnings.push(format!("t={t} is not below M={m}"));
        }
    }

    ValidationReport { errors, warnings }
}

fn validate_latency(spec: &LatencyModelSpec, errors: &mut Vec<String>) {
    match spec.distribution {
        LatencyDistribution::Uniform { lo, hi } => {
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
                errors.push(format!("uniform latency needs 0 <= lo < hi (got {lo}, {hi})"));
            }
        }
        LatencyDistribution::Gaussian { mean, std } => {
            if !(mean.is_finite() && std.is_finite() && std >= 0.0) {
                errors.push(format!("gaussian latency needs finite mean and std >= 0 (got {mean}, {std})"));
            }
        }
    }
    if !(spec.jitter_fraction.is_finite() && (0.0..1.0).contains(&spec.jitter_fraction)) {
        errors.push(format!("jitter_fraction={} outside [0, 1)", spec.jitter_fraction));
    }
}

fn validate_rl(rl: &RlHyperparams, errors: &mut Vec<String>) {
    if !(rl.learning_rate.is_finite() && rl.learning_rate > 0.0) {
        errors.push("learning_rate must be positive".into());
    }
    if !(0.0..=1.0).contains(&rl.exploration) {
        errors.push(format!("exploration={} outside [0, 1]", rl.exploration));
    }
    if !(rl.discount > 0.0 && rl.discount <= 1.0) {
        errors.push(format!("discount={} outside (0, 1]", rl.discount));
    }
    if rl.batch_size == 0 {
        errors.push("batch_size must be positive".into());
    }
    if rl.memory_size < rl.batch_size {
        errors.push(format!(
            "memory_size={} smaller than batch_size={}",
            rl.memory_size, rl.batch_size
        ));
    }
    if rl.target_sync_period == 0 {
        errors.push("target_sync_period must be positive".into());
    }
    if rl.hidden_layers.iter().any(|&w| w == 0) {
        errors.push("hidden layer widths must be positive".into());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_defaults_are_valid_without_warnings() {
        let cfg = ScenarioConfig::default();
        assert_eq!((cfg.node_count, cfg.source_count, cfg.threshold, cfg.diversity_k), (50, 20, 20, 18));
        assert_eq!(cfg.task_count, 1000);
        assert_eq!(cfg.rl.learning_rate, 5e-4);
        assert_eq!(cfg.rl.exploration, 0.05);
        assert_eq!(cfg.rl.discount, 0.99);
        assert_eq!(cfg.rl.memory_size, 1000);
        let report = validate_config(&cfg);
        assert!(report.is_valid(), "{report:?}");
        assert!(report.warnings.is_empty(), "{report:?}");
    }

    #[test]
    fn k_at_half_m_is_rejected_under_tbls() {
        let cfg = ScenarioConfig { diversity_k: 10, ..Default::default() };
        let report = validate_config(&cfg);
        assert!(report.errors.iter().any(|e| e.contains("K must exceed M/2")), "{report:?}");

        let plain = ScenarioConfig { aggregation: AggregationMode::Threshold, strategy: StrategyKind::Simple { n: 1 }, ..cfg };
        assert!(validate_config(&plain).is_valid());
    }

    #[test]
    fn structural_errors() {
        let cfg = ScenarioConfig { threshold: 51, ..Default::default() };
        assert!(!validate_config(&cfg).is_valid());
        let cfg = ScenarioConfig { diversity_k: 21, ..Default::default() };
        assert!(!validate_config(&cfg).is_valid());
        let cfg = ScenarioConfig { task_count: 0, ..Default::default() };
        assert!(!validate_config(&cfg).is_valid());
        let cfg = ScenarioConfig { threshold: 10, diversity_k: 11, ..Default::default() };
        assert!(!validate_config(&cfg).is_valid());
        let cfg = ScenarioConfig { strategy: StrategyKind::Daon, ..Default::default() };
        assert!(!validate_config(&cfg).is_valid());
    }

    #[test]
    fn assumption_inequality_evaluated_arithmetically() {
        // 0.45 * 50 + 0.3 * 20 = 22.5 + 6 = 28.5 < (50 + 20) / 2 = 35
        let cfg = ScenarioConfig {
            adversary: AdversaryConfig {
                malicious_node_fraction: 0.45,
                malicious_source_fraction: 0.3,
                collusion: true,
            },
            ..Default::default()
        };
        let report = validate_config(&cfg);
        assert!(report.is_valid());
        assert!(report.warnings.is_empty(), "{report:?}");

        let cfg = ScenarioConfig {
            adversary: AdversaryConfig {
                malicious_node_fraction: 0.5,
                malicious_source_fraction: 0.5,
                collusion: true,
            },
            ..Default::default()
        };
        let report = validate_config(&cfg);
        assert!(report.is_valid());
        assert_eq!(report.warnings.len(), 2, "{report:?}");
    }

    #[test]
    fn t_below_m_is_only_a_strict_warning() {
        let cfg = ScenarioConfig { strict_assumptions: true, ..Default::default() };
        let report = validate_config(&cfg);
        assert!(report.is_valid());
        assert_eq!(report.warnings, vec!["t=20 is not below M=20".to_string()]);
    }

    #[test]
    fn validation_is_pure() {
        let cfg = ScenarioConfig { diversity_k: 3, threshold: 60, ..Default::default() };
        assert_eq!(validate_config(&cfg), validate_config(&cfg));
    }

    #[test]
    fn counts_round_half_up() {
        assert_eq!(fraction_to_count(0.45, 50), 23);
        assert_eq!(fraction_to_count(0.25, 2), 1);
        assert_eq!(fraction_to_count(0.0, 50), 0);
        assert_eq!(fraction_to_count(1.0, 20), 20);
    }

    #[test]
    fn toml_round_trip_and_partial_files() {
        let cfg = ScenarioConfig { seed: 99, strategy: StrategyKind::Simple { n: 2 }, ..Default::default() };
        let back = ScenarioConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);

        let partial = ScenarioConfig::from_toml_str("node_count = 10\n[strategy]\nkind = \"iot\"\nk = 2\n").unwrap();
        assert_eq!(partial.node_count, 10);
        assert_eq!(partial.strategy, StrategyKind::Iot { k: 2 });
        assert_eq!(partial.source_count, 20);
    }

    #[test]
    fn strategy_mix_assignment() {
        let cfg = ScenarioConfig {
            node_count: 4,
            strategy: StrategyKind::Rl,
            strategy_mix: vec![StrategyMix { count: 1, strategy: StrategyKind::Daon }],
            ..Default::default()
        };
        assert_eq!(
            cfg.node_strategies(),
            vec![StrategyKind::Daon, StrategyKind::Rl, StrategyKind::Rl, StrategyKind::Rl]
        );
        assert_eq!(cfg.strategy_label(), "mixed");
    }
}
