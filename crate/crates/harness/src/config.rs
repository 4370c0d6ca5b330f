//! Experiment configuration schema.

use demem_core::env::EnvConfig;
use demem_core::error::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::methods::Method;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Cumulative regret of every method at one operating point.
    Regret,
    /// Memory-distortion tradeoff over the budget grid.
    BudgetSweep,
    /// Final regret over the mismatch grid.
    MismatchSweep,
    /// Induced partition distortion vs final regret point cloud.
    PartitionValidation,
    /// Greedy certified distortion vs the exact frontier oracle.
    OracleValidation,
    /// Anytime certificate violation frequencies.
    CertificateAudit,
    /// Fixed-restart wrapper vs plain run, stationary and piecewise.
    Nonstationary,
    /// Slot-runtime invariants, planted-conflict precision, and the
    /// bridge decomposition.
    SlotAudit,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Regret => "regret",
            ExperimentKind::BudgetSweep => "budget_sweep",
            ExperimentKind::MismatchSweep => "mismatch_sweep",
            ExperimentKind::PartitionValidation => "partition_validation",
            ExperimentKind::OracleValidation => "oracle_validation",
            ExperimentKind::CertificateAudit => "certificate_audit",
            ExperimentKind::Nonstationary => "nonstationary",
            ExperimentKind::SlotAudit => "slot_audit",
        }
    }
}

/// Learner parameters shared by every DeMem run in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerParams {
    pub delta: f64,
    pub gamma: f64,
    #[serde(default)]
    pub restart_period: Option<usize>,
}

impl Default for LearnerParams {
    fn default() -> Self {
        LearnerParams {
            delta: 0.1,
            gamma: 1.2,
            restart_period: None,
        }
    }
}

/// Baseline knobs left open by their definitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    /// Neighbors retrieved by the feature-RAG policy.
    #[serde(default = "default_rag_neighbors")]
    pub rag_neighbors: usize,
    /// Exploration rate of the epsilon-greedy clustering policy.
    #[serde(default = "default_eps_explore")]
    pub eps_explore: f64,
    /// New-cluster distance threshold of the epsilon-greedy policy.
    #[serde(default = "default_r_new")]
    pub r_new: f64,
}

fn default_rag_neighbors() -> usize {
    4
}
fn default_eps_explore() -> f64 {
    0.05
}
fn default_r_new() -> f64 {
    0.15
}

impl Default for BaselineParams {
    fn default() -> Self {
        BaselineParams {
            rag_neighbors: default_rag_neighbors(),
            eps_explore: default_eps_explore(),
            r_new: default_r_new(),
        }
    }
}

/// Certificate-audit knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditParams {
    #[serde(default = "default_audit_runs")]
    pub runs: usize,
    #[serde(default = "default_audit_horizon")]
    pub horizon: usize,
    #[serde(default = "default_audit_deltas")]
    pub deltas: [f64; 2],
}

fn default_audit_runs() -> usize {
    10_000
}
fn default_audit_horizon() -> usize {
    250
}
fn default_audit_deltas() -> [f64; 2] {
    [0.05, 0.1]
}

impl Default for AuditParams {
    fn default() -> Self {
        AuditParams {
            runs: default_audit_runs(),
            horizon: default_audit_horizon(),
            deltas: default_audit_deltas(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub env: EnvConfig,
    /// DeMem budget at fixed-K experiment kinds (grids override it).
    pub k: usize,
    #[serde(default)]
    pub learner: LearnerParams,
    #[serde(default)]
    pub baselines: BaselineParams,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_k_grid")]
    pub k_grid: Vec<usize>,
    #[serde(default = "default_alpha_grid")]
    pub alpha_grid: Vec<f64>,
    /// Seed indices; each expands to an instance seed and a run seed.
    pub seeds: Vec<u64>,
    /// Change point for the nonstationary kind (defaults to half the
    /// horizon).
    #[serde(default)]
    pub change_round: Option<usize>,
    #[serde(default)]
    pub audit: AuditParams,
}

fn default_methods() -> Vec<Method> {
    vec![
        Method::Oracle,
        Method::Demem,
        Method::FeatureKMeans,
        Method::FeatureRag,
        Method::EpsGreedyCluster,
        Method::Club,
        Method::RandomPartition,
    ]
}

fn default_k_grid() -> Vec<usize> {
    vec![3, 5, 8, 10]
}

fn default_alpha_grid() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}

impl ExperimentConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        let config: ExperimentConfig =
            serde_json::from_str(json).map_err(|e| Error::InvalidData(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::InvalidParameter {
                name: "seeds",
                message: "at least one seed required".into(),
            });
        }
        if self.k == 0 {
            return Err(Error::InvalidParameter {
                name: "k",
                message: "budget must be at least 1".into(),
            });
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter {
                name: "methods",
                message: "at least one method required".into(),
            });
        }
        match self.kind {
            ExperimentKind::BudgetSweep if self.k_grid.is_empty() => Err(Error::InvalidParameter {
                name: "k_grid",
                message: "budget sweep needs a nonempty K grid".into(),
            }),
            ExperimentKind::MismatchSweep if self.alpha_grid.is_empty() => {
                Err(Error::InvalidParameter {
                    name: "alpha_grid",
                    message: "mismatch sweep needs a nonempty alpha grid".into(),
                })
            }
            _ => Ok(()),
        }
    }

    /// Instance seed for one seed index.
    pub fn instance_seed(&self, seed: u64) -> u64 {
        self.env.seed.wrapping_add(2 * seed)
    }

    /// Trajectory/run seed for one seed index.
    pub fn run_seed(&self, seed: u64) -> u64 {
        self.env.seed.wrapping_add(2 * seed + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use demem_core::env::RewardProfile;

    fn base_config() -> ExperimentConfig {
        ExperimentConfig {
            kind: ExperimentKind::Regret,
            env: EnvConfig {
                num_identities: 8,
                num_actions: 2,
                feature_dim: 2,
                num_contexts: 14,
                alpha: 0.5,
                noise_sigma: 0.1,
                horizon: 1000,
                seed: 7,
                reward_profile: RewardProfile::Separated {
                    top_min: 0.9,
                    low_max: 0.2,
                },
            },
            k: 8,
            learner: LearnerParams::default(),
            baselines: BaselineParams::default(),
            methods: default_methods(),
            k_grid: default_k_grid(),
            alpha_grid: default_alpha_grid(),
            seeds: vec![0, 1],
            change_round: None,
            audit: AuditParams::default(),
        }
    }

    #[test]
    fn round_trips_and_validates() {
        let config = base_config();
        let json = serde_json::to_string_pretty(&config).unwrap();
        let back = ExperimentConfig::from_json(&json).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn rejects_empty_seeds() {
        let mut config = base_config();
        config.seeds.clear();
        assert!(config.validate().is_err());
    }

    #[test]
    fn rejects_bad_env_field() {
        let mut config = base_config();
        config.env.alpha = 1.5;
        let err = config.validate().unwrap_err();
        assert!(err.to_string().contains("alpha"));
    }
}
