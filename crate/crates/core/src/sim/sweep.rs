//! Parameter sweeps over a base scenario.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::engine::{run_scenario, ScenarioResult};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};

fn one() -> usize {
    1
}

/// One base scenario, one dotted parameter path, a list of values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: ScenarioConfig,
    /// Dotted path into the scenario, e.g. `adversary.malicious_node_fraction`.
    pub parameter: String,
    pub values: Vec<toml::Value>,
    /// Runs per value; replication `r` uses seed `base.seed + r`.
    #[serde(default = "one")]
    pub replications: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub value: String,
    pub replication: usize,
    pub config: ScenarioConfig,
}

fn invalid(msg: String) -> Error {
    Error::InvalidConfig(msg)
}

/// Returns a copy of `base` with the dotted `path` set to `value`.
pub fn with_parameter(base: &ScenarioConfig, path: &str, value: &toml::Value) -> Result<ScenarioConfig> {
    let mut doc = toml::Value::try_from(base).map_err(|e| invalid(e.to_string()))?;
    let mut slot = &mut doc;
    for key in path.split('.') {
        slot = slot
            .as_table_mut()
            .and_then(|t| t.get_mut(key))
            .ok_or_else(|| invalid(format!("unknown sweep parameter `{path}`")))?;
    }
    *slot = match (&*slot, value) {
        (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(*i as f64),
        _ => value.clone(),
    };
    doc.try_into().map_err(|e: toml::de::Error| invalid(format!("sweep value for `{path}`: {e}")))
}

impl SweepSpec {
    pub fn from_toml_str(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })
    }

    /// Every (value, replication) scenario in run order.
    pub fn points(&self) -> Result<Vec<SweepPoint>> {
        let mut out = Vec::new();
        for value in &self.values {
            let cfg = with_parameter(&self.base, &self.parameter, value)?;
            for r in 0..self.replications.max(1) {
                let mut config = cfg.clone();
                config.seed = self.base.seed.wrapping_add(r as u64);
                out.push(SweepPoint { index: out.len(), value: value.to_string(), replication: r, config });
            }
        }
        Ok(out)
    }
}

/// Runs every point on `jobs` worker threads; results keep point order.
pub fn run_sweep(spec: &SweepSpec, jobs: usize) -> Result<Vec<(SweepPoint, ScenarioResult)>> {
    let points = spec.points()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| invalid(format!("thread pool: {e}")))?;
    pool.install(|| {
        points
            .into_par_iter()
            .map(|p| {
                let r = run_scenario(&p.config)?;
                Ok((p, r))
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sets_nested_and_top_level_fields() {
        let base = ScenarioConfig::default();
        let c = with_parameter(&base, "adversary.malicious_node_fraction", &toml::Value::Float(0.3)).unwrap();
        assert_eq!(c.adversary.malicious_node_fraction, 0.3);
        let c = with_parameter(&base, "adversary.malicious_node_fraction", &toml::Value::Integer(0)).unwrap();
        assert_eq!(c.adversary.malicious_node_fraction, 0.0);
        let c = with_parameter(&base, "task_count", &toml::Value::Integer(7)).unwrap();
        assert_eq!(c.task_count, 7);
        assert!(with_parameter(&base, "nope", &toml::Value::Integer(7)).is_err());
        assert!(with_parameter(&base, "task_count", &toml::Value::String("x".into())).is_err());
    }

    #[test]
    fn points_expand_replications() {
        let spec = SweepSpec::from_toml_str(
            r#"
            parameter = "adversary.malicious_source_fraction"
            values = [0.0, 0.25]
            replications = 2
            [base]
            seed = 10
            "#,
        )
        .unwrap();
        let pts = spec.points().unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[3].config.seed, 11);
        assert_eq!(pts[3].config.adversary.malicious_source_fraction, 0.25);
        assert_eq!(pts[3].index, 3);
    }
}
