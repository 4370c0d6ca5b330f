//! Time-uniform confidence statistics and one-sided certificates.
//!
//! The ledger keeps pull counts and reward sums per (context, action) pair
//! and recomputes means on read. Confidence radii follow the anytime
//! Hoeffding construction `c_t = sqrt(log(4 N A t^2 / delta) / (2 n))`,
//! with the trivial interval `[0, 1]` for unobserved pairs. From the
//! per-pair intervals we derive gap bounds, pairwise decision-distance
//! certificates, and cluster-radius certificates: on the confidence event
//! the lower certificates never exceed the true quantities, so a positive
//! lower distance is a one-sided proof that two contexts cannot share a
//! low-distortion state.
//!
//! Gap lower bounds are reported as-is (they can be negative); consumers
//! that need an edge semantics compare `d_low > alpha` directly. All
//! logarithms here are natural.

use crate::error::{Error, Result};
use crate::model::{ActionId, ContextId, QueryId, RewardTable};
use crate::scalar::Scalar;

/// Anytime confidence radius for a pair observed `n` times by round `t`.
/// Returns `None` for `n = 0`, signalling the trivial interval `[0, 1]`.
pub fn conf_radius<S: Scalar>(
    n: usize,
    n_contexts: usize,
    n_actions: usize,
    t: usize,
    delta: S,
) -> Result<Option<S>> {
    if !(delta > S::zero() && delta < S::one()) {
        return Err(Error::InvalidParameter {
            name: "delta",
            message: format!("confidence level {delta} outside (0, 1)"),
        });
    }
    if t == 0 {
        return Err(Error::InvalidParameter {
            name: "t",
            message: "round index starts at 1".into(),
        });
    }
    if n == 0 {
        return Ok(None);
    }
    let four = S::from_config(4.0);
    let arg = four
        * S::from_count(n_contexts)
        * S::from_count(n_actions)
        * S::from_count(t)
        * S::from_count(t)
        / delta;
    let two_n = S::from_count(2 * n);
    Ok(Some((arg.ln() / two_n).sqrt()))
}

/// Per-(context, action) pull counts and empirical means, with the
/// confidence parameter and current round needed to evaluate certificates.
///
/// `exact` builds a zero-width ledger around a known table, under which
/// every certificate collapses to its exact counterpart; this is how the
/// oracle-validation experiments feed ground truth through the same code
/// path the learner uses.
#[derive(Debug, Clone)]
pub struct ObservationLedger<S: Scalar = f64> {
    n_contexts: usize,
    n_actions: usize,
    delta: S,
    round: usize,
    counts: Vec<usize>,
    sums: Vec<S>,
    fibers: Vec<QueryId>,
    exact: Option<RewardTable<S>>,
}

impl<S: Scalar> ObservationLedger<S> {
    pub fn new(n_contexts: usize, n_actions: usize, delta: S) -> Result<Self> {
        Self::with_fibers(n_contexts, n_actions, delta, vec![QueryId(0); n_contexts])
    }

    pub fn with_fibers(
        n_contexts: usize,
        n_actions: usize,
        delta: S,
        fibers: Vec<QueryId>,
    ) -> Result<Self> {
        if !(delta > S::zero() && delta < S::one()) {
            return Err(Error::InvalidParameter {
                name: "delta",
                message: format!("confidence level {delta} outside (0, 1)"),
            });
        }
        if n_contexts == 0 || n_actions == 0 {
            return Err(Error::InvalidData(
                "ledger needs contexts and actions".into(),
            ));
        }
        if fibers.len() != n_contexts {
            return Err(Error::InvalidData(
                "fiber labels must cover contexts".into(),
            ));
        }
        Ok(ObservationLedger {
            n_contexts,
            n_actions,
            delta,
            round: 1,
            counts: vec![0; n_contexts * n_actions],
            sums: vec![S::zero(); n_contexts * n_actions],
            fibers,
            exact: None,
        })
    }

    /// Zero-width oracle statistics around a known table.
    pub fn exact(table: RewardTable<S>, delta: S) -> Result<Self> {
        let mut ledger = Self::with_fibers(
            table.num_contexts(),
            table.num_actions(),
            delta,
            (0..table.num_contexts())
                .map(|x| table.fiber(ContextId(x)))
                .collect(),
        )?;
        ledger.exact = Some(table);
        Ok(ledger)
    }

    pub fn num_contexts(&self) -> usize {
        self.n_contexts
    }

    pub fn num_actions(&self) -> usize {
        self.n_actions
    }

    pub fn delta(&self) -> S {
        self.delta
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn fiber(&self, x: ContextId) -> QueryId {
        self.fibers[x.0]
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// Advances the wall-clock round used in the radius formula.
    pub fn set_round(&mut self, t: usize) {
        assert!(t >= 1, "round index starts at 1");
        self.round = t;
    }

    fn idx(&self, x: ContextId, a: ActionId) -> usize {
        debug_assert!(x.0 < self.n_contexts && a.0 < self.n_actions);
        x.0 * self.n_actions + a.0
    }

    /// Records one observed reward. Rewards must already be clipped to
    /// `[0, 1]`.
    pub fn record(&mut self, x: ContextId, a: ActionId, reward: S) {
        assert!(
            reward >= S::zero() && reward <= S::one(),
            "ledger rewards must be clipped to [0, 1]"
        );
        let i = self.idx(x, a);
        self.counts[i] += 1;
        self.sums[i] = self.sums[i] + reward;
    }

    pub fn count(&self, x: ContextId, a: ActionId) -> usize {
        self.counts[self.idx(x, a)]
    }

    /// Has any action of `x` been pulled?
    pub fn observed(&self, x: ContextId) -> bool {
        (0..self.n_actions).any(|a| self.count(x, ActionId(a)) > 0)
    }

    /// Empirical mean, recomputed from sums. `None` when unobserved.
    pub fn mean(&self, x: ContextId, a: ActionId) -> Option<S> {
        if let Some(table) = &self.exact {
            return Some(table.entry(x, a));
        }
        let i = self.idx(x, a);
        if self.counts[i] == 0 {
            None
        } else {
            Some(self.sums[i] / S::from_count(self.counts[i]))
        }
    }

    fn radius(&self, x: ContextId, a: ActionId) -> Option<S> {
        if self.exact.is_some() {
            return Some(S::zero());
        }
        conf_radius(
            self.count(x, a),
            self.n_contexts,
            self.n_actions,
            self.round,
            self.delta,
        )
        .expect("ledger parameters validated at construction")
    }

    /// Upper confidence bound, clipped to `[0, 1]`; 1 when unobserved.
    pub fn ucb(&self, x: ContextId, a: ActionId) -> S {
        match (self.mean(x, a), self.radius(x, a)) {
            (Some(m), Some(c)) => (m + c).min(S::one()),
            _ => S::one(),
        }
    }

    /// Lower confidence bound, clipped to `[0, 1]`; 0 when unobserved.
    pub fn lcb(&self, x: ContextId, a: ActionId) -> S {
        match (self.mean(x, a), self.radius(x, a)) {
            (Some(m), Some(c)) => (m - c).max(S::zero()),
            _ => S::zero(),
        }
    }

    pub fn ucb_star(&self, x: ContextId) -> S {
        (0..self.n_actions)
            .map(|a| self.ucb(x, ActionId(a)))
            .fold(S::neg_infinity(), S::max)
    }

    pub fn lcb_star(&self, x: ContextId) -> S {
        (0..self.n_actions)
            .map(|a| self.lcb(x, ActionId(a)))
            .fold(S::neg_infinity(), S::max)
    }

    /// Optimistic gap bound: at least the true gap on the confidence event.
    pub fn gap_high(&self, x: ContextId, a: ActionId) -> S {
        self.ucb_star(x) - self.lcb(x, a)
    }

    /// Pessimistic gap bound; may be negative, in which case no gap is
    /// certified.
    pub fn gap_low(&self, x: ContextId, a: ActionId) -> S {
        self.lcb_star(x) - self.ucb(x, a)
    }

    /// `(gap_low, gap_high)` for one pair. `gap_low <= gap_high` always.
    pub fn gap_bounds(&self, x: ContextId, a: ActionId) -> (S, S) {
        (self.gap_low(x, a), self.gap_high(x, a))
    }

    fn check_same_fiber(&self, xs: &[ContextId]) -> Result<()> {
        if let Some((&first, rest)) = xs.split_first() {
            for &x in rest {
                if self.fibers[x.0] != self.fibers[first.0] {
                    return Err(Error::CrossFiber {
                        x: first.0,
                        x2: x.0,
                    });
                }
            }
        }
        Ok(())
    }

    /// Lower and upper certificates for the pairwise decision distance.
    pub fn pair_distance_bounds(&self, x: ContextId, x2: ContextId) -> Result<(S, S)> {
        self.check_same_fiber(&[x, x2])?;
        let mut low = S::infinity();
        let mut high = S::infinity();
        for a in 0..self.n_actions {
            let a = ActionId(a);
            low = low.min(self.gap_low(x, a).max(self.gap_low(x2, a)));
            high = high.min(self.gap_high(x, a).max(self.gap_high(x2, a)));
        }
        Ok((low, high))
    }

    /// Lower and upper certificates for the cluster decision radius.
    pub fn cluster_radius_bounds(&self, cluster: &[ContextId]) -> Result<(S, S)> {
        if cluster.is_empty() {
            return Err(Error::EmptyCluster);
        }
        self.check_same_fiber(cluster)?;
        let mut low = S::infinity();
        let mut high = S::infinity();
        for a in 0..self.n_actions {
            let a = ActionId(a);
            let mut worst_low = S::neg_infinity();
            let mut worst_high = S::neg_infinity();
            for &x in cluster {
                worst_low = worst_low.max(self.gap_low(x, a));
                worst_high = worst_high.max(self.gap_high(x, a));
            }
            low = low.min(worst_low);
            high = high.min(worst_high);
        }
        Ok((low, high))
    }

    /// Upper radius certificate alone (the certified compression price of a
    /// cluster).
    pub fn cluster_radius_high(&self, cluster: &[ContextId]) -> Result<S> {
        Ok(self.cluster_radius_bounds(cluster)?.1)
    }

    /// Dumps `(x, a, n, mean)` rows for audit tooling. Unobserved pairs
    /// leave the mean field empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,a,n,mean\n");
        for x in 0..self.n_contexts {
            for a in 0..self.n_actions {
                let (x, a) = (ContextId(x), ActionId(a));
                let n = self.count(x, a);
                match self.mean(x, a) {
                    Some(m) => out.push_str(&format!("{},{},{},{}\n", x.0, a.0, n, m)),
                    None => out.push_str(&format!("{},{},{},\n", x.0, a.0, n)),
                }
            }
        }
        out
    }
}
