//! The decision-distortion calculus.
//!
//! A context must be acted on through one of `K` memory states, so two
//! contexts can share a state exactly when some single action is
//! near-optimal for both. Everything in this module is a deterministic
//! function of a fixed mean-reward table: suboptimality gaps, the pairwise
//! decision distance, cluster decision radii, and the distortion of a whole
//! partition.
//!
//! All types are immutable after construction and safe to share across
//! threads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Index of a context within an instance (`0..N`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContextId(pub usize);

/// Index of a query fiber. Synthetic instances use a single fiber.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QueryId(pub usize);

/// Index of an action (`0..A`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionId(pub usize);

/// The unknown mean-reward matrix over contexts × actions, with one query
/// fiber label per context. Entries live in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Serialize", deserialize = "S: Deserialize<'de>"))]
#[serde(try_from = "RewardTableRepr<S>", into = "RewardTableRepr<S>")]
pub struct RewardTable<S: Scalar = f64> {
    values: Vec<Vec<S>>,
    fibers: Vec<QueryId>,
}

/// On-disk JSON shape: `{"n": N, "a": A, "values": [[...]]}`.
#[derive(Serialize, Deserialize)]
struct RewardTableRepr<S> {
    n: usize,
    a: usize,
    values: Vec<Vec<S>>,
}

impl<S: Scalar> From<RewardTable<S>> for RewardTableRepr<S> {
    fn from(t: RewardTable<S>) -> Self {
        RewardTableRepr {
            n: t.num_contexts(),
            a: t.num_actions(),
            values: t.values,
        }
    }
}

impl<S: Scalar> TryFrom<RewardTableRepr<S>> for RewardTable<S> {
    type Error = Error;

    fn try_from(repr: RewardTableRepr<S>) -> Result<Self> {
        let table = RewardTable::new(repr.values)?;
        if table.num_contexts() != repr.n || table.num_actions() != repr.a {
            return Err(Error::InvalidData(format!(
                "declared shape {}x{} does not match values {}x{}",
                repr.n,
                repr.a,
                table.num_contexts(),
                table.num_actions()
            )));
        }
        Ok(table)
    }
}

impl<S: Scalar> RewardTable<S> {
    /// Builds a single-fiber table from an `N x A` matrix. Every entry must
    /// lie in `[0, 1]` and rows must have uniform length.
    pub fn new(values: Vec<Vec<S>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidData(
                "table needs at least one context".into(),
            ));
        }
        let n = values.len();
        Self::with_fibers(values, vec![QueryId(0); n])
    }

    /// Builds a table with an explicit query-fiber label per context.
    pub fn with_fibers(values: Vec<Vec<S>>, fibers: Vec<QueryId>) -> Result<Self> {
        let a = values.first().map_or(0, Vec::len);
        if a == 0 {
            return Err(Error::InvalidData("table needs at least one action".into()));
        }
        if fibers.len() != values.len() {
            return Err(Error::InvalidData(
                "fiber labels must match the number of contexts".into(),
            ));
        }
        for row in &values {
            if row.len() != a {
                return Err(Error::InvalidData("ragged reward rows".into()));
            }
            for &v in row {
                if !(v >= S::zero() && v <= S::one()) {
                    return Err(Error::InvalidData(format!(
                        "reward entry {v} outside [0, 1]"
                    )));
                }
            }
        }
        Ok(RewardTable { values, fibers })
    }

    pub fn num_contexts(&self) -> usize {
        self.values.len()
    }

    pub fn num_actions(&self) -> usize {
        self.values[0].len()
    }

    pub fn fiber(&self, x: ContextId) -> QueryId {
        self.fibers[x.0]
    }

    pub fn entry(&self, x: ContextId, a: ActionId) -> S {
        self.values[x.0][a.0]
    }

    pub fn row(&self, x: ContextId) -> &[S] {
        &self.values[x.0]
    }

    fn check_context(&self, x: ContextId) -> Result<()> {
        if x.0 >= self.num_contexts() {
            return Err(Error::ContextOutOfRange {
                index: x.0,
                n: self.num_contexts(),
            });
        }
        Ok(())
    }

    fn check_action(&self, a: ActionId) -> Result<()> {
        if a.0 >= self.num_actions() {
            return Err(Error::ActionOutOfRange {
                index: a.0,
                a: self.num_actions(),
            });
        }
        Ok(())
    }

    fn check_same_fiber(&self, xs: &[ContextId]) -> Result<()> {
        if let Some((&first, rest)) = xs.split_first() {
            let q = self.fiber(first);
            for &x in rest {
                if self.fiber(x) != q {
                    return Err(Error::CrossFiber {
                        x: first.0,
                        x2: x.0,
                    });
                }
            }
        }
        Ok(())
    }

    /// Best achievable mean reward for context `x`: `max_a mu(x, a)`.
    pub fn best_value(&self, x: ContextId) -> Result<S> {
        self.check_context(x)?;
        Ok(self.values[x.0]
            .iter()
            .copied()
            .fold(S::neg_infinity(), S::max))
    }

    /// Action attaining the row maximum, lowest index on ties.
    pub fn best_action(&self, x: ContextId) -> Result<ActionId> {
        let best = self.best_value(x)?;
        let a = self.values[x.0]
            .iter()
            .position(|&v| v == best)
            .expect("row maximum exists");
        Ok(ActionId(a))
    }

    /// Suboptimality gap of action `a` at context `x`.
    pub fn gap(&self, x: ContextId, a: ActionId) -> Result<S> {
        self.check_action(a)?;
        Ok(self.best_value(x)? - self.entry(x, a))
    }

    /// Pairwise decision distance: the smallest worst-case loss either
    /// context suffers if both must share one action. Symmetric and zero on
    /// the diagonal, but not a metric — the triangle inequality can fail.
    pub fn decision_distance(&self, x: ContextId, x2: ContextId) -> Result<S> {
        self.check_context(x)?;
        self.check_context(x2)?;
        self.check_same_fiber(&[x, x2])?;
        let mut best = S::infinity();
        for a in 0..self.num_actions() {
            let a = ActionId(a);
            let d = self.gap(x, a)?.max(self.gap(x2, a)?);
            if d < best {
                best = d;
            }
        }
        Ok(best)
    }

    /// Cluster decision radius: the smallest worst-case loss from assigning
    /// one action to every context in `cluster`, together with a minimizing
    /// action (lowest index on ties).
    pub fn cluster_radius(&self, cluster: &[ContextId]) -> Result<(S, ActionId)> {
        if cluster.is_empty() {
            return Err(Error::EmptyCluster);
        }
        for &x in cluster {
            self.check_context(x)?;
        }
        self.check_same_fiber(cluster)?;
        let mut best = (S::infinity(), ActionId(0));
        for a in 0..self.num_actions() {
            let a = ActionId(a);
            let mut worst = S::zero();
            for &x in cluster {
                worst = worst.max(self.gap(x, a)?);
            }
            if worst < best.0 {
                best = (worst, a);
            }
        }
        Ok(best)
    }

    /// Average cluster decision radius under `weights`, which must be a
    /// probability vector over `cluster` (same length, sums to one).
    pub fn avg_cluster_radius(&self, weights: &[S], cluster: &[ContextId]) -> Result<S> {
        if cluster.is_empty() {
            return Err(Error::EmptyCluster);
        }
        if weights.len() != cluster.len() {
            return Err(Error::InvalidData(
                "weights must match the cluster length".into(),
            ));
        }
        check_normalized(weights)?;
        for &x in cluster {
            self.check_context(x)?;
        }
        self.check_same_fiber(cluster)?;
        let mut best = S::infinity();
        for a in 0..self.num_actions() {
            let a = ActionId(a);
            let mut acc = S::zero();
            for (&w, &x) in weights.iter().zip(cluster) {
                acc = acc + w * self.gap(x, a)?;
            }
            if acc < best {
                best = acc;
            }
        }
        Ok(best)
    }

    /// Worst-case distortion induced by a partition: the largest cluster
    /// decision radius over nonempty clusters.
    pub fn partition_worst_distortion(&self, partition: &Partition) -> Result<S> {
        partition.check_covers(self.num_contexts())?;
        let mut worst = S::zero();
        for cluster in partition.clusters() {
            if cluster.is_empty() {
                continue;
            }
            let (radius, _) = self.cluster_radius(&cluster)?;
            worst = worst.max(radius);
        }
        Ok(worst)
    }

    /// Average distortion induced by a partition under a context
    /// distribution: each cluster contributes its probability mass times its
    /// average radius under the conditional distribution.
    pub fn partition_avg_distortion(&self, dist: &[S], partition: &Partition) -> Result<S> {
        partition.check_covers(self.num_contexts())?;
        if dist.len() != self.num_contexts() {
            return Err(Error::InvalidData(
                "distribution must cover every context".into(),
            ));
        }
        check_normalized(dist)?;
        let mut total = S::zero();
        for cluster in partition.clusters() {
            if cluster.is_empty() {
                continue;
            }
            // mass * min_a E[gap | cluster] == min_a sum_{x in C} dist(x) gap(x, a)
            let mut best = S::infinity();
            for a in 0..self.num_actions() {
                let a = ActionId(a);
                let mut acc = S::zero();
                for &x in &cluster {
                    acc = acc + dist[x.0] * self.gap(x, a)?;
                }
                if acc < best {
                    best = acc;
                }
            }
            total = total + best;
        }
        Ok(total)
    }
}

/// Tolerance for validating that externally supplied weight vectors sum to
/// one. Used only for input validation, never inside algorithm logic.
const NORMALIZATION_TOL: f64 = 1e-9;

fn check_normalized<S: Scalar>(weights: &[S]) -> Result<()> {
    let mut sum = S::zero();
    for &w in weights {
        if w < S::zero() {
            return Err(Error::InvalidData("negative weight".into()));
        }
        sum = sum + w;
    }
    let err = (sum - S::one()).abs();
    if err > S::from_config(NORMALIZATION_TOL) {
        return Err(Error::UnnormalizedDistribution {
            sum: sum.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

/// Assignment of contexts to at most `K` cluster labels: the deterministic
/// memory encoder. Empty labels are permitted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    /// Builds a partition from per-context labels in `[0, k)`.
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter {
                name: "k",
                message: "budget must be at least 1".into(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidData(format!(
                "label {bad} exceeds budget {k}"
            )));
        }
        Ok(Partition { labels, k })
    }

    /// The all-singletons partition on `n` contexts.
    pub fn singletons(n: usize) -> Self {
        Partition {
            labels: (0..n).collect(),
            k: n.max(1),
        }
    }

    /// One cluster holding every context.
    pub fn single_cluster(n: usize) -> Self {
        Partition {
            labels: vec![0; n],
            k: 1,
        }
    }

    pub fn budget(&self) -> usize {
        self.k
    }

    pub fn num_contexts(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, x: ContextId) -> usize {
        self.labels[x.0]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Number of labels actually used.
    pub fn num_nonempty(&self) -> usize {
        self.clusters().iter().filter(|c| !c.is_empty()).count()
    }

    /// Members of every label, including empty ones, indexed by label.
    pub fn clusters(&self) -> Vec<Vec<ContextId>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(ContextId(i));
        }
        out
    }

    fn check_covers(&self, n: usize) -> Result<()> {
        if self.labels.len() != n {
            return Err(Error::InvalidData(format!(
                "partition covers {} contexts, table has {n}",
                self.labels.len()
            )));
        }
        Ok(())
    }
}
