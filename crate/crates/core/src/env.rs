//! The Decoupled Bandit diagnostic environment.
//!
//! Each context carries a descriptive feature vector and a latent decision
//! identity, and the two are deliberately misaligned: features are drawn
//! around the prototype of a pseudo-identity, while the true identity
//! equals that pseudo-identity only with probability `1 - alpha`, and is
//! otherwise permuted to a decision-distinct identity by a fixed cyclic
//! shift. Identities are drawn once per context and fixed, so each context
//! remains a stationary bandit arm set.
//!
//! Reward rows have a unique argmax, and the permutation changes the
//! argmax of every mapped identity; both constraints are enforced at
//! generation. Prototype geometry and the reward-value profile are not
//! pinned by the decision model, so they are explicit config fields and
//! travel with the instance manifest.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ActionId, ContextId, Partition, RewardTable};

/// How identity reward rows are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardProfile {
    /// Every entry uniform in `[0, 1]`; the argmax lands wherever it lands.
    Uniform,
    /// The argmax entry is drawn in `[top_min, 1]` and every other entry in
    /// `[0, low_max]`, giving within-row gaps of at least
    /// `top_min - low_max`.
    Separated { top_min: f64, low_max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    /// Number of decision identities M.
    pub num_identities: usize,
    /// Number of actions A.
    pub num_actions: usize,
    /// Descriptive feature dimension d.
    pub feature_dim: usize,
    /// Context universe size N.
    pub num_contexts: usize,
    /// Mismatch severity in `[0, 1]`.
    pub alpha: f64,
    /// Standard deviation of the zero-mean Gaussian observation noise.
    pub noise_sigma: f64,
    /// Horizon T.
    pub horizon: usize,
    /// Instance seed.
    pub seed: u64,
    #[serde(default = "default_profile")]
    pub reward_profile: RewardProfile,
}

fn default_profile() -> RewardProfile {
    RewardProfile::Separated {
        top_min: 0.9,
        low_max: 0.2,
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_identities == 0 || self.num_actions == 0 || self.num_contexts == 0 {
            return Err(Error::InvalidParameter {
                name: "env",
                message: "identities, actions, and contexts must be positive".into(),
            });
        }
        if self.num_identities > self.num_contexts {
            return Err(Error::InvalidParameter {
                name: "num_identities",
                message: "more identities than contexts".into(),
            });
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                message: format!("mismatch {} outside [0, 1]", self.alpha),
            });
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::InvalidParameter {
                name: "noise_sigma",
                message: "noise level must be nonnegative".into(),
            });
        }
        if let RewardProfile::Separated { top_min, low_max } = self.reward_profile {
            if !(0.0..=1.0).contains(&top_min) || !(0.0..=1.0).contains(&low_max) {
                return Err(Error::InvalidParameter {
                    name: "reward_profile",
                    message: "profile bounds must lie in [0, 1]".into(),
                });
            }
            if low_max >= top_min {
                return Err(Error::InvalidParameter {
                    name: "reward_profile",
                    message: "separated profile needs low_max < top_min".into(),
                });
            }
        }
        Ok(())
    }
}

/// One roster entry: descriptive features, the description-induced
/// pseudo-identity, and the true decision identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextRecord {
    pub features: Vec<f64>,
    pub pseudo_identity: usize,
    pub identity: usize,
}

/// A fully generated instance: identity reward rows, prototype geometry,
/// the fixed permutation, and the context roster. Immutable after
/// generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvInstance {
    pub config: EnvConfig,
    pub mu: Vec<Vec<f64>>,
    pub prototypes: Vec<Vec<f64>>,
    pub feature_std: f64,
    pub perm: Vec<usize>,
    pub contexts: Vec<ContextRecord>,
}

const PROTOTYPE_RETRIES: usize = 64;
const ROW_RETRIES: usize = 2000;

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; u1 bounded away from zero
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn draw_row(rng: &mut ChaCha8Rng, a: usize, profile: RewardProfile) -> Vec<f64> {
    match profile {
        RewardProfile::Uniform => (0..a).map(|_| rng.random::<f64>()).collect(),
        RewardProfile::Separated { top_min, low_max } => {
            let top = rng.random_range(0..a);
            (0..a)
                .map(|i| {
                    if i == top {
                        top_min + rng.random::<f64>() * (1.0 - top_min)
                    } else {
                        rng.random::<f64>() * low_max
                    }
                })
                .collect()
        }
    }
}

fn has_unique_argmax(row: &[f64]) -> bool {
    let best = argmax(row);
    row.iter()
        .enumerate()
        .all(|(i, &v)| i == best || v < row[best])
}

/// Generates an instance: separated prototypes, identity reward rows whose
/// argmaxes differ across the permutation, and the context roster with
/// once-per-context identity draws.
pub fn generate(config: &EnvConfig) -> Result<EnvInstance> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let m = config.num_identities;
    let a = config.num_actions;
    let d = config.feature_dim;

    // prototypes, retried until pairwise separated
    let mut prototypes = Vec::new();
    let mut min_dist = 0.0;
    for attempt in 0..=PROTOTYPE_RETRIES {
        if attempt == PROTOTYPE_RETRIES {
            return Err(Error::Generation(
                "could not separate prototypes; raise feature_dim or lower num_identities".into(),
            ));
        }
        prototypes = (0..m)
            .map(|_| (0..d).map(|_| rng.random::<f64>()).collect::<Vec<f64>>())
            .collect();
        min_dist = f64::INFINITY;
        for i in 0..m {
            for j in (i + 1)..m {
                let dist: f64 = prototypes[i]
                    .iter()
                    .zip(&prototypes[j])
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                min_dist = min_dist.min(dist);
            }
        }
        if m == 1 || min_dist >= 1e-3 {
            break;
        }
    }
    // noise std an eighth of the prototype separation keeps pseudo-identity
    // recovery near-exact, so alpha alone controls mismatch
    let feature_std = if m == 1 { 0.05 } else { min_dist / 8.0 };

    // fixed permutation: cyclic shift (no fixed points for m >= 2)
    let perm: Vec<usize> = (0..m).map(|z| (z + 1) % m).collect();

    // reward rows: unique argmax everywhere, and the permutation must
    // change the argmax of every mapped identity
    let mut mu: Vec<Vec<f64>> = Vec::with_capacity(m);
    for z in 0..m {
        let mut ok = false;
        for _ in 0..ROW_RETRIES {
            let row = draw_row(&mut rng, a, config.reward_profile);
            if !has_unique_argmax(&row) {
                continue;
            }
            let top = argmax(&row);
            if m >= 2 && z > 0 && top == argmax(&mu[z - 1]) {
                continue;
            }
            // closing the cycle: the last row must also differ from row 0
            if m >= 2 && z == m - 1 && top == argmax(&mu[0]) {
                continue;
            }
            mu.push(row);
            ok = true;
            break;
        }
        if !ok {
            return Err(Error::Generation(format!(
                "could not draw reward rows with alternating argmaxes \
                 (M={m}, A={a}); an odd cycle needs at least 3 actions"
            )));
        }
    }

    // roster: balanced base prototypes, Gaussian features, identity drawn
    // once per context
    let mut contexts = Vec::with_capacity(config.num_contexts);
    for i in 0..config.num_contexts {
        let base = i % m;
        let features: Vec<f64> = (0..d)
            .map(|j| prototypes[base][j] + feature_std * standard_normal(&mut rng))
            .collect();
        let pseudo = nearest_prototype(&features, &prototypes);
        let identity = if rng.random::<f64>() < config.alpha {
            perm[pseudo]
        } else {
            pseudo
        };
        contexts.push(ContextRecord {
            features,
            pseudo_identity: pseudo,
            identity,
        });
    }

    Ok(EnvInstance {
        config: config.clone(),
        mu,
        prototypes,
        feature_std,
        perm,
        contexts,
    })
}

fn nearest_prototype(features: &[f64], prototypes: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (i, p) in prototypes.iter().enumerate() {
        let d: f64 = features.iter().zip(p).map(|(x, y)| (x - y) * (x - y)).sum();
        if d < best_dist {
            best_dist = d;
            best = i;
        }
    }
    best
}

impl EnvInstance {
    pub fn num_contexts(&self) -> usize {
        self.contexts.len()
    }

    pub fn num_actions(&self) -> usize {
        self.config.num_actions
    }

    pub fn identity(&self, x: ContextId) -> usize {
        self.contexts[x.0].identity
    }

    pub fn mean_reward(&self, x: ContextId, a: ActionId) -> f64 {
        self.mu[self.contexts[x.0].identity][a.0]
    }

    pub fn optimal_action(&self, x: ContextId) -> ActionId {
        ActionId(argmax(&self.mu[self.contexts[x.0].identity]))
    }

    /// Ground-truth reward table over the roster: row `c` is the reward
    /// row of context `c`'s identity. Bridges the environment to the
    /// frontier oracles and the partition distortion metrics.
    pub fn export_reward_table(&self) -> Result<RewardTable> {
        let rows = self
            .contexts
            .iter()
            .map(|c| self.mu[c.identity].clone())
            .collect();
        RewardTable::new(rows)
    }

    fn cluster_profiles(&self, partition: &Partition) -> Vec<Option<Vec<f64>>> {
        let a = self.num_actions();
        let mut sums = vec![vec![0.0; a]; partition.budget()];
        let mut counts = vec![0usize; partition.budget()];
        for (i, ctx) in self.contexts.iter().enumerate() {
            let label = partition.label(ContextId(i));
            counts[label] += 1;
            for (s, &v) in sums[label].iter_mut().zip(&self.mu[ctx.identity]) {
                *s += v;
            }
        }
        sums.into_iter()
            .zip(counts)
            .map(|(sum, n)| (n > 0).then(|| sum.into_iter().map(|s| s / n as f64).collect()))
            .collect()
    }

    /// Probability (under the uniform roster distribution) that acting
    /// from the cluster-mean reward profile disagrees with the true
    /// optimal action.
    pub fn action_mismatch_distortion(&self, partition: &Partition) -> Result<f64> {
        self.check_partition(partition)?;
        let profiles = self.cluster_profiles(partition);
        let mut wrong = 0usize;
        for (i, ctx) in self.contexts.iter().enumerate() {
            let profile = profiles[partition.label(ContextId(i))]
                .as_ref()
                .expect("own cluster nonempty");
            if argmax(profile) != argmax(&self.mu[ctx.identity]) {
                wrong += 1;
            }
        }
        Ok(wrong as f64 / self.contexts.len() as f64)
    }

    /// Expected value lost by acting from the cluster-mean profiles:
    /// `E[mu(z, a*) - mu(z, a_hat)]` under the uniform roster distribution.
    pub fn value_loss_distortion(&self, partition: &Partition) -> Result<f64> {
        self.check_partition(partition)?;
        let profiles = self.cluster_profiles(partition);
        let mut loss = 0.0;
        for (i, ctx) in self.contexts.iter().enumerate() {
            let profile = profiles[partition.label(ContextId(i))]
                .as_ref()
                .expect("own cluster nonempty");
            let chosen = argmax(profile);
            let row = &self.mu[ctx.identity];
            loss += row[argmax(row)] - row[chosen];
        }
        Ok(loss / self.contexts.len() as f64)
    }

    fn check_partition(&self, partition: &Partition) -> Result<()> {
        if partition.num_contexts() != self.contexts.len() {
            return Err(Error::InvalidData(
                "partition must cover the context roster".into(),
            ));
        }
        Ok(())
    }

    /// The identity-respecting partition (one cluster per identity),
    /// useful as an oracle reference.
    pub fn identity_partition(&self) -> Partition {
        let labels = self.contexts.iter().map(|c| c.identity).collect();
        Partition::new(labels, self.config.num_identities).expect("identities within budget")
    }
}

/// Reward and clean-mean regret for one pull.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub regret: f64,
}

/// What a policy may observe and do each round. Ground-truth accessors
/// exist for the oracle policy and for audits; budgeted policies must not
/// consult them.
pub trait Environment {
    /// Size of the context universe.
    fn num_contexts(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn feature_dim(&self) -> usize;
    /// Draws the context for the next round and advances the round clock.
    fn draw_context(&mut self) -> ContextId;
    fn features(&self, x: ContextId) -> &[f64];
    /// Plays `a` in the current round.
    fn step(&mut self, x: ContextId, a: ActionId) -> StepOutcome;
    /// Ground truth: the latent decision identity of `x` (oracle only).
    fn latent_identity(&self, x: ContextId) -> usize;
    /// Ground truth: identity reward rows (oracle only).
    fn identity_values(&self, z: usize) -> &[f64];
    /// Ground truth: clean mean reward (audits only).
    fn mean_reward(&self, x: ContextId, a: ActionId) -> f64;
    /// Ground truth: roster table under the current reward regime.
    fn export_reward_table(&self) -> Result<RewardTable>;
}

/// A single change point: at `at_round` every context's identity is
/// redrawn from the mismatch mixture with a fresh stream, so at
/// `alpha = 1/2` roughly half the contexts switch decision identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangeSpec {
    pub at_round: usize,
    pub reseed: u64,
}

/// Runtime wrapper around an instance: context draws, observation noise,
/// and the optional change point. One value per trajectory.
#[derive(Debug, Clone)]
pub struct DecoupledBandit {
    instance: EnvInstance,
    identities: Vec<usize>,
    rng: ChaCha8Rng,
    round: usize,
    change: Option<ChangeSpec>,
}

impl DecoupledBandit {
    pub fn new(instance: EnvInstance, run_seed: u64) -> Self {
        let identities = instance.contexts.iter().map(|c| c.identity).collect();
        DecoupledBandit {
            instance,
            identities,
            rng: ChaCha8Rng::seed_from_u64(run_seed),
            round: 0,
            change: None,
        }
    }

    pub fn with_change(instance: EnvInstance, run_seed: u64, change: ChangeSpec) -> Self {
        let mut env = Self::new(instance, run_seed);
        env.change = Some(change);
        env
    }

    pub fn instance(&self) -> &EnvInstance {
        &self.instance
    }

    /// Identity-respecting partition under the current reward regime.
    pub fn identity_partition(&self) -> Partition {
        Partition::new(self.identities.clone(), self.instance.config.num_identities)
            .expect("identities within budget")
    }

    fn apply_change(&mut self, spec: ChangeSpec) {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.reseed);
        let alpha = self.instance.config.alpha;
        for (slot, ctx) in self.identities.iter_mut().zip(&self.instance.contexts) {
            *slot = if rng.random::<f64>() < alpha {
                self.instance.perm[ctx.pseudo_identity]
            } else {
                ctx.pseudo_identity
            };
        }
    }
}

impl Environment for DecoupledBandit {
    fn num_contexts(&self) -> usize {
        self.instance.num_contexts()
    }

    fn num_actions(&self) -> usize {
        self.instance.num_actions()
    }

    fn feature_dim(&self) -> usize {
        self.instance.config.feature_dim
    }

    fn draw_context(&mut self) -> ContextId {
        self.round += 1;
        if let Some(spec) = self.change {
            if self.round == spec.at_round {
                self.apply_change(spec);
            }
        }
        ContextId(self.rng.random_range(0..self.instance.num_contexts()))
    }

    fn features(&self, x: ContextId) -> &[f64] {
        &self.instance.contexts[x.0].features
    }

    fn step(&mut self, x: ContextId, a: ActionId) -> StepOutcome {
        let row = &self.instance.mu[self.identities[x.0]];
        let clean = row[a.0];
        let noise = if self.instance.config.noise_sigma > 0.0 {
            self.instance.config.noise_sigma * standard_normal(&mut self.rng)
        } else {
            0.0
        };
        StepOutcome {
            reward: clean + noise,
            regret: row[argmax(row)] - clean,
        }
    }

    fn latent_identity(&self, x: ContextId) -> usize {
        self.identities[x.0]
    }

    fn identity_values(&self, z: usize) -> &[f64] {
        &self.instance.mu[z]
    }

    fn mean_reward(&self, x: ContextId, a: ActionId) -> f64 {
        self.instance.mu[self.identities[x.0]][a.0]
    }

    fn export_reward_table(&self) -> Result<RewardTable> {
        let rows = self
            .identities
            .iter()
            .map(|&z| self.instance.mu[z].clone())
            .collect();
        RewardTable::new(rows)
    }
}
