//! Comparison policies behind one interface.
//!
//! Every policy observes a context id plus its descriptive features, picks
//! an action, and is told the reward. All of them except the oracle
//! respect the `K`-state budget, and all are deterministic given their
//! seed, so comparison runs replay exactly.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::env::Environment;
use crate::model::{ActionId, ContextId};

/// What a policy sees each round.
#[derive(Debug, Clone)]
pub struct PolicyObservation {
    pub context: ContextId,
    pub features: Vec<f64>,
    pub round: usize,
}

/// Optional per-round diagnostics a policy can expose for trajectory logs.
#[derive(Debug, Clone, Default)]
pub struct RoundInfo {
    /// Internal memory state used this round, if the policy has discrete
    /// states (-1 otherwise).
    pub state: i64,
    /// "certify" / "exploit" for the certified learner, empty otherwise.
    pub mode: &'static str,
    pub epoch: usize,
    pub eps_cert: f64,
}

pub trait Policy {
    fn name(&self) -> &'static str;
    fn act(&mut self, obs: &PolicyObservation) -> ActionId;
    fn update(&mut self, obs: &PolicyObservation, action: ActionId, reward: f64);

    /// Diagnostics for the round just played.
    fn round_info(&self) -> RoundInfo {
        RoundInfo::default()
    }

    /// The memory state this policy would use for a context right now,
    /// for policies that maintain a discrete partition.
    fn state_of(&self, context: ContextId, features: &[f64]) -> Option<usize> {
        let _ = (context, features);
        None
    }
}

/// Greedy argmax over per-action `(count, sum)` stats; unvisited actions
/// read as the optimistic mean 1, ties go to the lowest index.
fn greedy_action(counts: &[usize], sums: &[f64]) -> ActionId {
    let mut best = 0usize;
    let mut best_v = f64::NEG_INFINITY;
    for a in 0..counts.len() {
        let v = if counts[a] == 0 {
            1.0
        } else {
            sums[a] / counts[a] as f64
        };
        if v > best_v {
            best_v = v;
            best = a;
        }
    }
    ActionId(best)
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Unconstrained skyline: reads the true decision identity straight from
/// the environment and plays its argmax. Zero regret by construction.
pub struct OraclePolicy {
    mu: Vec<Vec<f64>>,
    identities: Vec<usize>,
}

impl OraclePolicy {
    /// The environment discloses ground truth to this policy only.
    pub fn from_env(env: &dyn Environment) -> Self {
        let identities: Vec<usize> = (0..env.num_contexts())
            .map(|x| env.latent_identity(ContextId(x)))
            .collect();
        let max_z = identities.iter().copied().max().unwrap_or(0);
        let mu = (0..=max_z)
            .map(|z| env.identity_values(z).to_vec())
            .collect();
        OraclePolicy { mu, identities }
    }
}

impl Policy for OraclePolicy {
    fn name(&self) -> &'static str {
        "oracle"
    }

    fn act(&mut self, obs: &PolicyObservation) -> ActionId {
        let row = &self.mu[self.identities[obs.context.0]];
        let mut best = 0;
        for (i, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = i;
            }
        }
        ActionId(best)
    }

    fn update(&mut self, _obs: &PolicyObservation, _action: ActionId, _reward: f64) {}

    fn state_of(&self, context: ContextId, _features: &[f64]) -> Option<usize> {
        Some(self.identities[context.0])
    }
}

/// Online mini-batch k-means over descriptive features: nearest-center
/// assignment with running-mean center updates, greedy action from the
/// assigned cluster's empirical reward means. Centers are seeded with the
/// first K distinct feature vectors.
pub struct FeatureKMeansPolicy {
    k: usize,
    num_actions: usize,
    centers: Vec<Vec<f64>>,
    center_counts: Vec<usize>,
    counts: Vec<Vec<usize>>,
    sums: Vec<Vec<f64>>,
    last_cluster: usize,
}

impl FeatureKMeansPolicy {
    pub fn new(k: usize, num_actions: usize) -> Self {
        assert!(k >= 1);
        FeatureKMeansPolicy {
            k,
            num_actions,
            centers: Vec::new(),
            center_counts: Vec::new(),
            counts: Vec::new(),
            sums: Vec::new(),
            last_cluster: 0,
        }
    }

    fn nearest_center(&self, features: &[f64]) -> Option<usize> {
        (0..self.centers.len()).min_by(|&i, &j| {
            sq_dist(features, &self.centers[i])
                .partial_cmp(&sq_dist(features, &self.centers[j]))
                .unwrap()
                .then(i.cmp(&j))
        })
    }

    fn assign(&mut self, features: &[f64]) -> usize {
        if self.centers.len() < self.k && !self.centers.iter().any(|c| c == features) {
            self.centers.push(features.to_vec());
            self.center_counts.push(0);
            self.counts.push(vec![0; self.num_actions]);
            self.sums.push(vec![0.0; self.num_actions]);
            return self.centers.len() - 1;
        }
        self.nearest_center(features).expect("centers nonempty")
    }
}

impl Policy for FeatureKMeansPolicy {
    fn name(&self) -> &'static str {
        "feature_kmeans"
    }

    fn act(&mut self, obs: &PolicyObservation) -> ActionId {
        let c = self.assign(&obs.features);
        // running-mean center update
        self.center_counts[c] += 1;
        let n = self.center_counts[c] as f64;
        for (slot, &f) in self.centers[c].iter_mut().zip(&obs.features) {
            *slot += (f - *slot) / n;
        }
        self.last_cluster = c;
        greedy_action(&self.counts[c], &self.sums[c])
    }

    fn update(&mut self, _obs: &PolicyObservation, action: ActionId, reward: f64) {
        let c = self.last_cluster;
        self.counts[c][action.0] += 1;
        self.sums[c][action.0] += reward;
    }

    fn round_info(&self) -> RoundInfo {
        RoundInfo {
            state: self.last_cluster as i64,
            ..RoundInfo::default()
        }
    }

    fn state_of(&self, _context: ContextId, features: &[f64]) -> Option<usize> {
        self.nearest_center(features)
    }
}

/// Nearest-neighbor retrieval over a bank of per-context reward
/// estimates, aggregated with Gaussian similarity weights
/// `w = exp(-||x - x_i||^2 / tau)`. The bandwidth is the median pairwise
/// squared distance over the first hundred distinct contexts.
pub struct FeatureRagPolicy {
    k_neighbors: usize,
    num_actions: usize,
    features: Vec<Vec<f64>>,
    counts: Vec<Vec<usize>>,
    sums: Vec<Vec<f64>>,
    by_context: BTreeMap<usize, usize>,
    tau: Option<f64>,
    rng: ChaCha8Rng,
    last_entry: usize,
}

const RAG_CALIBRATION_CONTEXTS: usize = 100;

impl FeatureRagPolicy {
    pub fn new(k_neighbors: usize, num_actions: usize, seed: u64) -> Self {
        assert!(k_neighbors >= 1);
        FeatureRagPolicy {
            k_neighbors,
            num_actions,
            features: Vec::new(),
            counts: Vec::new(),
            sums: Vec::new(),
            by_context: BTreeMap::new(),
            tau: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
            last_entry: 0,
        }
    }

    fn bandwidth(&self) -> f64 {
        if let Some(t) = self.tau {
            return t;
        }
        let n = self.features.len().min(RAG_CALIBRATION_CONTEXTS);
        let mut dists = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                dists.push(sq_dist(&self.features[i], &self.features[j]));
            }
        }
        if dists.is_empty() {
            return 1.0;
        }
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        dists[dists.len() / 2].max(1e-12)
    }

    fn entry_for(&mut self, obs: &PolicyObservation) -> usize {
        if let Some(&i) = self.by_context.get(&obs.context.0) {
            return i;
        }
        self.features.push(obs.features.clone());
        self.counts.push(vec![0; self.num_actions]);
        self.sums.push(vec![0.0; self.num_actions]);
        let i = self.features.len() - 1;
        self.by_context.insert(obs.context.0, i);
        if self.features.len() == RAG_CALIBRATION_CONTEXTS && self.tau.is_none() {
            self.tau = Some(self.bandwidth());
        }
        i
    }
}

impl Policy for FeatureRagPolicy {
    fn name(&self) -> &'static str {
        "feature_rag"
    }

    fn act(&mut self, obs: &PolicyObservation) -> ActionId {
        if self.features.is_empty() {
            return ActionId(self.rng.random_range(0..self.num_actions));
        }
        let tau = self.bandwidth();
        let mut order: Vec<usize> = (0..self.features.len()).collect();
        order.sort_by(|&i, &j| {
            sq_dist(&obs.features, &self.features[i])
                .partial_cmp(&sq_dist(&obs.features, &self.features[j]))
                .unwrap()
                .then(i.cmp(&j))
        });
        order.truncate(self.k_neighbors);
        let mut weighted = vec![0.0; self.num_actions];
        let mut total = 0.0;
        for &i in &order {
            let w = (-sq_dist(&obs.features, &self.features[i]) / tau).exp();
            total += w;
            for a in 0..self.num_actions {
                let est = if self.counts[i][a] == 0 {
                    1.0
                } else {
                    self.sums[i][a] / self.counts[i][a] as f64
                };
                weighted[a] += w * est;
            }
        }
        let mut best = 0;
        for a in 1..self.num_actions {
            if weighted[a] > weighted[best] {
                best = a;
            }
        }
        let _ = total;
        ActionId(best)
    }

    fn update(&mut self, obs: &PolicyObservation, action: ActionId, reward: f64) {
        let i = self.entry_for(obs);
        self.counts[i][action.0] += 1;
        self.sums[i][action.0] += reward;
        self.last_entry = i;
    }
}

/// Online feature clustering with epsilon-greedy action selection: a
/// context joins the nearest cluster anchor within `r_new`, otherwise
/// opens a new cluster until the budget is spent.
pub struct EpsGreedyClusterPolicy {
    k: usize,
    num_actions: usize,
    r_new: f64,
    eps: f64,
    anchors: Vec<Vec<f64>>,
    counts: Vec<Vec<usize>>,
    sums: Vec<Vec<f64>>,
    rng: ChaCha8Rng,
    last_cluster: usize,
}

impl EpsGreedyClusterPolicy {
    pub fn new(k: usize, num_actions: usize, r_new: f64, eps: f64, seed: u64) -> Self {
        assert!(k >= 1 && (0.0..=1.0).contains(&eps));
        EpsGreedyClusterPolicy {
            k,
            num_actions,
            r_new,
            eps,
            anchors: Vec::new(),
            counts: Vec::new(),
            sums: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            last_cluster: 0,
        }
    }

    pub fn cluster_count(&self) -> usize {
        self.anchors.len()
    }

    fn nearest_anchor(&self, features: &[f64]) -> Option<(usize, f64)> {
        (0..self.anchors.len())
            .map(|i| (i, sq_dist(features, &self.anchors[i])))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)))
    }

    fn assign(&mut self, features: &[f64]) -> usize {
        match self.nearest_anchor(features) {
            Some((i, d)) if d.sqrt() <= self.r_new || self.anchors.len() >= self.k => i,
            _ => {
                self.anchors.push(features.to_vec());
                self.counts.push(vec![0; self.num_actions]);
                self.sums.push(vec![0.0; self.num_actions]);
                self.anchors.len() - 1
            }
        }
    }
}

impl Policy for EpsGreedyClusterPolicy {
    fn name(&self) -> &'static str {
        "eps_greedy_cluster"
    }

    fn act(&mut self, obs: &PolicyObservation) -> ActionId {
        let c = self.assign(&obs.features);
        self.last_cluster = c;
        if self.eps > 0.0 && self.rng.random::<f64>() < self.eps {
            ActionId(self.rng.random_range(0..self.num_actions))
        } else {
            greedy_action(&self.counts[c], &self.sums[c])
        }
    }

    fn update(&mut self, _obs: &PolicyObservation, action: ActionId, reward: f64) {
        let c = self.last_cluster;
        self.counts[c][action.0] += 1;
        self.sums[c][action.0] += reward;
    }

    fn round_info(&self) -> RoundInfo {
        RoundInfo {
            state: self.last_cluster as i64,
            ..RoundInfo::default()
        }
    }

    fn state_of(&self, _context: ContextId, features: &[f64]) -> Option<usize> {
        self.nearest_anchor(features).map(|(i, _)| i)
    }
}

/// Confidence-graph online clustering: per-context reward estimates with
/// shrinking radii, an edge dropped once the estimates separate beyond the
/// summed radii, and greedy play from the connected component's pooled
/// estimate. Estimate vectors are compared on their common support. A
/// strict state budget is restored, when components outnumber it, by
/// pooling the smallest components with their nearest neighbor in
/// estimate space.
pub struct ClubPolicy {
    k: usize,
    num_actions: usize,
    nodes: Vec<usize>,
    node_of: BTreeMap<usize, usize>,
    counts: Vec<Vec<usize>>,
    sums: Vec<Vec<f64>>,
    pulls: Vec<usize>,
    removed: Vec<(usize, usize)>,
    last_state: usize,
}

impl ClubPolicy {
    pub fn new(k: usize, num_actions: usize) -> Self {
        assert!(k >= 1);
        ClubPolicy {
            k,
            num_actions,
            nodes: Vec::new(),
            node_of: BTreeMap::new(),
            counts: Vec::new(),
            sums: Vec::new(),
            pulls: Vec::new(),
            removed: Vec::new(),
            last_state: 0,
        }
    }

    fn radius(&self, i: usize, round: usize) -> f64 {
        (2.0 * (1.0 + round as f64).ln() / self.pulls[i].max(1) as f64).sqrt()
    }

    fn node(&mut self, context: usize) -> usize {
        if let Some(&i) = self.node_of.get(&context) {
            return i;
        }
        self.nodes.push(context);
        self.counts.push(vec![0; self.num_actions]);
        self.sums.push(vec![0.0; self.num_actions]);
        self.pulls.push(0);
        let i = self.nodes.len() - 1;
        self.node_of.insert(context, i);
        i
    }

    /// Largest estimate separation over actions both nodes have tried.
    fn estimate_gap(&self, i: usize, j: usize) -> Option<f64> {
        let mut gap: Option<f64> = None;
        for a in 0..self.num_actions {
            if self.counts[i][a] > 0 && self.counts[j][a] > 0 {
                let mi = self.sums[i][a] / self.counts[i][a] as f64;
                let mj = self.sums[j][a] / self.counts[j][a] as f64;
                let d = (mi - mj).abs();
                gap = Some(gap.map_or(d, |g: f64| g.max(d)));
            }
        }
        gap
    }

    fn scan_edges(&mut self, i: usize, round: usize) {
        for j in 0..self.nodes.len() {
            if j == i {
                continue;
            }
            let key = (i.min(j), i.max(j));
            if self.removed.contains(&key) {
                continue;
            }
            if let Some(gap) = self.estimate_gap(i, j) {
                if gap > self.radius(i, round) + self.radius(j, round) {
                    self.removed.push(key);
                }
            }
        }
    }

    /// Connected components of the current graph, then pooled down to the
    /// budget by repeatedly merging the smallest component into its
    /// nearest neighbor in pooled-estimate space.
    fn effective_groups(&self) -> Vec<usize> {
        let n = self.nodes.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut v: usize) -> usize {
            while parent[v] != v {
                parent[v] = parent[parent[v]];
                v = parent[v];
            }
            v
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if !self.removed.contains(&(i, j)) {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri.max(rj)] = ri.min(rj);
                    }
                }
            }
        }
        let mut group: Vec<usize> = (0..n).map(|v| find(&mut parent, v)).collect();

        loop {
            let mut roots: Vec<usize> = group.clone();
            roots.sort_unstable();
            roots.dedup();
            if roots.len() <= self.k {
                break;
            }
            // pooled estimates per root
            let pooled: BTreeMap<usize, (Vec<usize>, Vec<f64>, usize)> = roots
                .iter()
                .map(|&r| {
                    let mut c = vec![0usize; self.num_actions];
                    let mut s = vec![0.0; self.num_actions];
                    let mut size = 0;
                    for v in 0..n {
                        if group[v] == r {
                            size += 1;
                            for a in 0..self.num_actions {
                                c[a] += self.counts[v][a];
                                s[a] += self.sums[v][a];
                            }
                        }
                    }
                    (r, (c, s, size))
                })
                .collect();
            let &smallest = roots
                .iter()
                .min_by_key(|&&r| (pooled[&r].2, r))
                .expect("roots nonempty");
            let gap_between = |a: &usize, b: &usize| -> f64 {
                let (ca, sa, _) = &pooled[a];
                let (cb, sb, _) = &pooled[b];
                let mut worst = 0.0f64;
                for act in 0..self.num_actions {
                    let ma = if ca[act] == 0 {
                        0.5
                    } else {
                        sa[act] / ca[act] as f64
                    };
                    let mb = if cb[act] == 0 {
                        0.5
                    } else {
                        sb[act] / cb[act] as f64
                    };
                    worst = worst.max((ma - mb).abs());
                }
                worst
            };
            let &target = roots
                .iter()
                .filter(|&&r| r != smallest)
                .min_by(|a, b| {
                    gap_between(a, &smallest)
                        .partial_cmp(&gap_between(b, &smallest))
                        .unwrap()
                        .then(a.cmp(b))
                })
                .expect("more components than budget");
            let keep = smallest.min(target);
            let drop = smallest.max(target);
            for g in group.iter_mut() {
                if *g == drop {
                    *g = keep;
                }
            }
        }
        group
    }
}

impl Policy for ClubPolicy {
    fn name(&self) -> &'static str {
        "club"
    }

    fn act(&mut self, obs: &PolicyObservation) -> ActionId {
        let i = self.node(obs.context.0);
        self.scan_edges(i, obs.round);
        let groups = self.effective_groups();
        let g = groups[i];
        self.last_state = g;
        let mut counts = vec![0usize; self.num_actions];
        let mut sums = vec![0.0; self.num_actions];
        for v in 0..self.nodes.len() {
            if groups[v] == g {
                for a in 0..self.num_actions {
                    counts[a] += self.counts[v][a];
                    sums[a] += self.sums[v][a];
                }
            }
        }
        greedy_action(&counts, &sums)
    }

    fn update(&mut self, obs: &PolicyObservation, action: ActionId, reward: f64) {
        let i = self.node(obs.context.0);
        self.counts[i][action.0] += 1;
        self.sums[i][action.0] += reward;
        self.pulls[i] += 1;
    }

    fn round_info(&self) -> RoundInfo {
        RoundInfo {
            state: self.last_state as i64,
            ..RoundInfo::default()
        }
    }

    fn state_of(&self, context: ContextId, _features: &[f64]) -> Option<usize> {
        let &i = self.node_of.get(&context.0)?;
        Some(self.effective_groups()[i])
    }
}

/// Control baseline: a uniformly random static label per context id,
/// greedy play from the pooled group estimate.
pub struct RandomPartitionPolicy {
    k: usize,
    labels: BTreeMap<usize, usize>,
    counts: Vec<Vec<usize>>,
    sums: Vec<Vec<f64>>,
    rng: ChaCha8Rng,
    last_label: usize,
}

impl RandomPartitionPolicy {
    pub fn new(k: usize, num_actions: usize, seed: u64) -> Self {
        assert!(k >= 1);
        RandomPartitionPolicy {
            k,
            labels: BTreeMap::new(),
            counts: vec![vec![0; num_actions]; k],
            sums: vec![vec![0.0; num_actions]; k],
            rng: ChaCha8Rng::seed_from_u64(seed),
            last_label: 0,
        }
    }

    fn label(&mut self, context: usize) -> usize {
        if let Some(&l) = self.labels.get(&context) {
            return l;
        }
        let l = self.rng.random_range(0..self.k);
        self.labels.insert(context, l);
        l
    }
}

impl Policy for RandomPartitionPolicy {
    fn name(&self) -> &'static str {
        "random_partition"
    }

    fn act(&mut self, obs: &PolicyObservation) -> ActionId {
        let l = self.label(obs.context.0);
        self.last_label = l;
        greedy_action(&self.counts[l], &self.sums[l])
    }

    fn update(&mut self, obs: &PolicyObservation, action: ActionId, reward: f64) {
        let l = self.label(obs.context.0);
        self.counts[l][action.0] += 1;
        self.sums[l][action.0] += reward;
    }

    fn round_info(&self) -> RoundInfo {
        RoundInfo {
            state: self.last_label as i64,
            ..RoundInfo::default()
        }
    }

    fn state_of(&self, context: ContextId, _features: &[f64]) -> Option<usize> {
        self.labels.get(&context.0).copied()
    }
}
