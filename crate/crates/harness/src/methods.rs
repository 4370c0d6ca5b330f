//! Method registry: every comparison policy behind one runner.

use demem_core::baselines::{
    ClubPolicy, EpsGreedyClusterPolicy, FeatureKMeansPolicy, FeatureRagPolicy, OraclePolicy,
    Policy, RandomPartitionPolicy,
};
use demem_core::env::{DecoupledBandit, EnvInstance};
use demem_core::error::Result;
use demem_core::learner::{run_policy, DememPolicy, LearnerConfig, Trajectory};
use demem_core::model::{ContextId, Partition};
use serde::{Deserialize, Serialize};

use crate::config::{BaselineParams, LearnerParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Oracle,
    Demem,
    #[serde(rename = "feature_kmeans")]
    FeatureKMeans,
    FeatureRag,
    EpsGreedyCluster,
    Club,
    RandomPartition,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Oracle => "oracle",
            Method::Demem => "demem",
            Method::FeatureKMeans => "feature_kmeans",
            Method::FeatureRag => "feature_rag",
            Method::EpsGreedyCluster => "eps_greedy_cluster",
            Method::Club => "club",
            Method::RandomPartition => "random_partition",
        }
    }

    /// Methods that organize memory by descriptive features only.
    pub fn is_description_based(&self) -> bool {
        matches!(
            self,
            Method::FeatureKMeans
                | Method::FeatureRag
                | Method::EpsGreedyCluster
                | Method::RandomPartition
        )
    }

    /// Methods that maintain a discrete context partition.
    pub fn has_partition(&self) -> bool {
        !matches!(self, Method::FeatureRag)
    }
}

/// One executed cell: the trajectory plus the realized end-of-run
/// partition over the context roster (for distortion metrics).
pub struct CellResult {
    pub trajectory: Trajectory,
    pub partition: Option<Partition>,
}

impl CellResult {
    pub fn final_regret(&self) -> f64 {
        self.trajectory.final_regret()
    }
}

/// Runs `method` on a fresh environment around `instance` for `horizon`
/// rounds. `run_seed` drives the environment stream; policy randomness is
/// derived from it per method so methods stay independent.
pub fn run_cell(
    instance: &EnvInstance,
    run_seed: u64,
    method: Method,
    k: usize,
    horizon: usize,
    learner: &LearnerParams,
    baselines: &BaselineParams,
) -> Result<CellResult> {
    let mut env = DecoupledBandit::new(instance.clone(), run_seed);
    let a = instance.num_actions();
    let policy_seed = run_seed.wrapping_mul(0x9e37).wrapping_add(method as u64);
    if method == Method::Demem {
        let config = LearnerConfig {
            k,
            delta: learner.delta,
            gamma: learner.gamma,
            horizon,
            restart_period: None,
        };
        let mut policy = DememPolicy::new(instance.num_contexts(), a, config)?;
        let mut trajectory = run_policy(&mut env, &mut policy, horizon);
        trajectory.epochs = policy.epoch_log().to_vec();
        let partition = Some(realized_partition(&policy, instance, k, method));
        return Ok(CellResult {
            trajectory,
            partition,
        });
    }
    let mut policy: Box<dyn Policy> = match method {
        Method::Oracle => Box::new(OraclePolicy::from_env(&env)),
        Method::Demem => unreachable!("handled above"),
        Method::FeatureKMeans => Box::new(FeatureKMeansPolicy::new(k, a)),
        Method::FeatureRag => Box::new(FeatureRagPolicy::new(
            baselines.rag_neighbors,
            a,
            policy_seed,
        )),
        Method::EpsGreedyCluster => Box::new(EpsGreedyClusterPolicy::new(
            k,
            a,
            baselines.r_new,
            baselines.eps_explore,
            policy_seed,
        )),
        Method::Club => Box::new(ClubPolicy::new(k, a)),
        Method::RandomPartition => Box::new(RandomPartitionPolicy::new(k, a, policy_seed)),
    };
    let trajectory = run_policy(&mut env, policy.as_mut(), horizon);
    let partition = method
        .has_partition()
        .then(|| realized_partition(policy.as_ref(), instance, k, method));
    Ok(CellResult {
        trajectory,
        partition,
    })
}

/// End-of-run partition over the full roster, with raw state ids
/// canonicalized to dense labels. Contexts the policy never saw
/// (vanishingly rare at experiment horizons) fall back to the first label.
fn realized_partition(
    policy: &dyn Policy,
    instance: &EnvInstance,
    k: usize,
    method: Method,
) -> Partition {
    let raw: Vec<usize> = (0..instance.num_contexts())
        .map(|x| {
            policy
                .state_of(ContextId(x), &instance.contexts[x].features)
                .unwrap_or(0)
        })
        .collect();
    let mut dense = std::collections::BTreeMap::new();
    for &r in &raw {
        let next = dense.len();
        dense.entry(r).or_insert(next);
    }
    let budget = match method {
        // the oracle's states are the identities themselves
        Method::Oracle => instance.config.num_identities.max(dense.len()),
        _ => k.max(dense.len()),
    };
    let labels: Vec<usize> = raw.iter().map(|r| dense[r]).collect();
    Partition::new(labels, budget).expect("dense labels within budget")
}
