//! Experiment configuration: JSON checked against the bundled schema, then
//! deserialized and cross-checked.

use std::path::{Path, PathBuf};

use koopman_pssd::dynamics::{DynamicalSystem, Sampling, SignaturePolicy};
use koopman_pssd::network::{complete_digraph, path_digraph, ring_digraph, Digraph};
use koopman_pssd::pssd::{PartitionPolicy, StopRule};
use koopman_pssd::Tolerances;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Schema every config must satisfy before anything runs.
pub const SCHEMA: &str = include_str!("../schema/experiment_config.schema.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub system: DynamicalSystem,
    /// Desk-scale sampling.
    pub sampling: Sampling,
    /// Sampling used with `--full`; falls back to `sampling`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_sampling: Option<Sampling>,
    pub signature: SignaturePolicy,
    pub dictionary: DictionaryConfig,
    pub agents: usize,
    #[serde(default)]
    pub partition: PartitionPolicy,
    pub network: NetworkConfig,
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Run the centralized decomposition on all data for comparison.
    #[serde(default = "yes")]
    pub oracle: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<EvaluationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenfunction_grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn yes() -> bool {
    true
}

/// All monomials in the state variables up to `max_degree`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictionaryConfig {
    pub max_degree: u32,
    /// Rescale terms so the columns of `[D(X); D(Y)]` have unit norm.
    #[serde(default)]
    pub balance: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Topology {
    Ring,
    Complete,
    Path,
    /// 0-based `(from, to)` pairs.
    Custom { edges: Vec<(usize, usize)> },
}

impl Topology {
    pub fn build(&self, m: usize) -> Result<Digraph, CliError> {
        let g = match self {
            Topology::Ring => ring_digraph(m),
            Topology::Complete => complete_digraph(m),
            Topology::Path => path_digraph(m),
            Topology::Custom { edges } => Digraph::new(m, edges.iter().copied()),
        };
        g.map_err(|e| CliError::Config(format!("network: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub topology: Topology,
    #[serde(default)]
    pub drop_probability: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Exact,
    /// Agents run the approximated decomposition with `tolerances.eps_approx`.
    Approximated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub variant: Variant,
    pub max_rounds: usize,
    /// Default: flags on static graphs, a `2M` window under drops.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<StopRule>,
    #[serde(default)]
    pub memoize: bool,
    #[serde(default)]
    pub shared_bus: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consensus_tol: Option<f64>,
    #[serde(default = "yes")]
    pub reuse_factorization: bool,
}

/// Prediction-error evaluation on fresh trajectories.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    pub trajectories: usize,
    pub steps: usize,
    pub region: Vec<(f64, f64)>,
}

/// Square lattice for eigenfunction magnitude and phase; 2-D systems only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub region: Vec<(f64, f64)>,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub drop_probabilities: Vec<f64>,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub agent_counts: Vec<usize>,
    /// Overrides `network.topology` for the comparison.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<Topology>,
    /// Data for the comparison; falls back to the run sampling. Counts are
    /// only meaningful once row-proportional work dominates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<Sampling>,
}

fn schema_errors(value: &serde_json::Value) -> Result<Vec<String>, CliError> {
    let schema: serde_json::Value =
        serde_json::from_str(SCHEMA).map_err(|e| CliError::Internal(format!("bundled schema: {e}")))?;
    let validator =
        jsonschema::validator_for(&schema).map_err(|e| CliError::Internal(format!("bundled schema: {e}")))?;
    Ok(validator
        .iter_errors(value)
        .map(|e| format!("{}: {}", e.instance_path, e))
        .collect())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("not valid JSON: {e}")))?;
        let errors = schema_errors(&value)?;
        if !errors.is_empty() {
            return Err(CliError::Config(format!("schema violations: {}", errors.join("; "))));
        }
        let config: Self = serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks that go beyond the schema: cross-field consistency.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        self.system.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.tolerances.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let n = self.system.state_dim();
        if self.agents == 0 {
            return bad("agents must be at least 1".into());
        }
        if self.protocol.max_rounds == 0 {
            return bad("protocol.max_rounds must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.network.drop_probability) {
            return bad(format!("drop_probability must lie in [0, 1), got {}", self.network.drop_probability));
        }
        if self.protocol.variant == Variant::Approximated && self.tolerances.eps_approx >= 1.0 {
            return bad("eps_approx must be below 1".into());
        }
        if let Some(t) = self.protocol.consensus_tol {
            if !(t.is_finite() && t > 0.0) {
                return bad(format!("consensus_tol must be positive, got {t}"));
            }
        }
        let check_region = |what: &str, region: &[(f64, f64)]| {
            if region.len() != n {
                return bad(format!("{what} has {} intervals, system has {n} states", region.len()));
            }
            if region.iter().any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
                return bad(format!("{what} needs finite intervals with lo < hi"));
            }
            Ok(())
        };
        if let Some(ev) = &self.evaluation {
            check_region("evaluation.region", &ev.region)?;
            if ev.trajectories > 0 && ev.steps == 0 {
                return bad("evaluation.steps must be at least 1".into());
            }
        }
        if let Some(grid) = &self.eigenfunction_grid {
            if n != 2 {
                return bad("eigenfunction_grid needs a 2-D system".into());
            }
            check_region("eigenfunction_grid.region", &grid.region)?;
            if grid.points < 2 {
                return bad("eigenfunction_grid.points must be at least 2".into());
            }
        }
        if let Some(sw) = &self.sweep {
            if sw.trials == 0 || sw.drop_probabilities.is_empty() {
                return bad("sweep needs at least one probability and one trial".into());
            }
            if sw.drop_probabilities.iter().any(|p| !(0.0..1.0).contains(p)) {
                return bad("sweep probabilities must lie in [0, 1)".into());
            }
        }
        if let Some(cmp) = &self.compare {
            if cmp.agent_counts.is_empty() || cmp.agent_counts.contains(&0) {
                return bad("compare.agent_counts must be nonempty and positive".into());
            }
        }
        if let PartitionPolicy::Weighted { weights } = &self.partition {
            if weights.len() != self.agents {
                return bad(format!("{} partition weights for {} agents", weights.len(), self.agents));
            }
        }
        self.network.topology.build(self.agents)?;
        Ok(())
    }

    /// Sampling for the requested scale.
    pub fn sampling_for(&self, full: bool) -> &Sampling {
        match (&self.full_sampling, full) {
            (Some(s), true) => s,
            _ => &self.sampling,
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("out").join(&self.name))
    }

    /// Stop rule, with flags on time-invariant graphs and a `2M`
    /// stationarity window under drops unless configured.
    pub fn stop_rule(&self, drop_probability: f64) -> StopRule {
        self.protocol.stop.unwrap_or(if drop_probability > 0.0 {
            StopRule::Window { rounds: 2 * self.agents }
        } else {
            StopRule::Flags
        })
    }
}
