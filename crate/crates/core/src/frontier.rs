//! Exact small-instance oracles for the memory–distortion frontier.
//!
//! Everything here is exhaustive and honest about scale: partition
//! enumeration runs over restricted-growth strings and is capped at
//! [`DEFAULT_PARTITION_CAP`] contexts, packing uses branch-and-bound
//! independent-set search up to [`PACKING_CAP`] vertices, and covering is
//! solved as an exact set cover over action balls. Covering exploits the
//! structural identity that a cluster admits worst-case distortion `eps`
//! exactly when it fits inside one action's `eps`-ball, so the covering
//! number equals the minimum number of action balls covering the context
//! set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ActionId, ContextId, Partition, RewardTable};
use crate::scalar::Scalar;

/// Default cap for exact partition enumeration (Bell(10) = 115 975).
pub const DEFAULT_PARTITION_CAP: usize = 10;

/// Cap for branch-and-bound packing search.
pub const PACKING_CAP: usize = 20;

/// Cap for exhaustive action-subset search in the covering oracle.
pub const COVERING_ACTION_CAP: usize = 12;

/// Exact frontier value together with a partition and per-cluster actions
/// achieving it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Serialize", deserialize = "S: Deserialize<'de>"))]
pub struct FrontierReport<S: Scalar = f64> {
    pub eps_star_inf: S,
    pub witness_partition: Partition,
    pub witness_actions: Vec<ActionId>,
}

fn check_single_fiber<S: Scalar>(table: &RewardTable<S>) -> Result<()> {
    let q = table.fiber(ContextId(0));
    for x in 1..table.num_contexts() {
        if table.fiber(ContextId(x)) != q {
            return Err(Error::CrossFiber { x: 0, x2: x });
        }
    }
    Ok(())
}

fn check_partition_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::CapacityExceeded {
            what: "exact partition enumeration",
            cap,
            given: n,
        });
    }
    Ok(())
}

/// Visits every partition of `0..n` with at most `k_max` blocks as a
/// restricted-growth string, calling `visit(labels, num_blocks)`.
fn for_each_partition(n: usize, k_max: usize, mut visit: impl FnMut(&[usize], usize)) {
    let mut labels = vec![0usize; n];
    fn rec(
        labels: &mut Vec<usize>,
        pos: usize,
        used: usize,
        k_max: usize,
        visit: &mut impl FnMut(&[usize], usize),
    ) {
        let n = labels.len();
        if pos == n {
            visit(labels, used);
            return;
        }
        let top = (used + 1).min(k_max);
        for l in 0..top {
            labels[pos] = l;
            rec(labels, pos + 1, used.max(l + 1), k_max, visit);
        }
    }
    rec(&mut labels, 1, 1, k_max, &mut visit);
}

fn gap_matrix<S: Scalar>(table: &RewardTable<S>) -> Vec<Vec<S>> {
    (0..table.num_contexts())
        .map(|x| {
            (0..table.num_actions())
                .map(|a| table.gap(ContextId(x), ActionId(a)).unwrap())
                .collect()
        })
        .collect()
}

/// Worst-case radius of each block of `labels` over the gap matrix, plus
/// the minimizing action per block.
fn partition_worst<S: Scalar>(
    gaps: &[Vec<S>],
    labels: &[usize],
    blocks: usize,
    num_actions: usize,
) -> (S, Vec<ActionId>) {
    let mut worst = S::zero();
    let mut actions = Vec::with_capacity(blocks);
    for b in 0..blocks {
        let mut best = (S::infinity(), ActionId(0));
        for a in 0..num_actions {
            let mut m = S::zero();
            for (x, &l) in labels.iter().enumerate() {
                if l == b {
                    m = m.max(gaps[x][a]);
                }
            }
            if m < best.0 {
                best = (m, ActionId(a));
            }
        }
        worst = worst.max(best.0);
        actions.push(best.1);
    }
    (worst, actions)
}

/// Exact best worst-case distortion achievable with at most `k` memory
/// states, by enumeration over all partitions. `n` must not exceed `cap`.
pub fn eps_star_inf_with_cap<S: Scalar>(
    table: &RewardTable<S>,
    k: usize,
    cap: usize,
) -> Result<FrontierReport<S>> {
    if k == 0 {
        return Err(Error::InvalidParameter {
            name: "k",
            message: "budget must be at least 1".into(),
        });
    }
    check_single_fiber(table)?;
    let n = table.num_contexts();
    check_partition_cap(n, cap)?;
    let gaps = gap_matrix(table);
    let a = table.num_actions();
    let mut best: Option<(S, Vec<usize>, usize, Vec<ActionId>)> = None;
    for_each_partition(n, k.min(n), |labels, blocks| {
        let (worst, actions) = partition_worst(&gaps, labels, blocks, a);
        let better = match &best {
            None => true,
            Some((b, ..)) => worst < *b,
        };
        if better {
            best = Some((worst, labels.to_vec(), blocks, actions));
        }
    });
    let (value, labels, _, actions) = best.expect("at least one partition");
    Ok(FrontierReport {
        eps_star_inf: value,
        witness_partition: Partition::new(labels, k)?,
        witness_actions: actions,
    })
}

/// [`eps_star_inf_with_cap`] at the default enumeration cap.
pub fn eps_star_inf<S: Scalar>(table: &RewardTable<S>, k: usize) -> Result<FrontierReport<S>> {
    eps_star_inf_with_cap(table, k, DEFAULT_PARTITION_CAP)
}

/// The whole frontier curve `eps_star_inf(1..=k_max)` from one enumeration
/// pass.
pub fn eps_star_inf_curve<S: Scalar>(table: &RewardTable<S>, k_max: usize) -> Result<Vec<S>> {
    if k_max == 0 {
        return Err(Error::InvalidParameter {
            name: "k_max",
            message: "budget must be at least 1".into(),
        });
    }
    check_single_fiber(table)?;
    let n = table.num_contexts();
    check_partition_cap(n, DEFAULT_PARTITION_CAP)?;
    let gaps = gap_matrix(table);
    let a = table.num_actions();
    let mut best = vec![S::infinity(); k_max];
    for_each_partition(n, k_max.min(n), |labels, blocks| {
        let (worst, _) = partition_worst(&gaps, labels, blocks, a);
        // A partition with `blocks` blocks is feasible for every K >= blocks.
        if worst < best[blocks - 1] {
            best[blocks - 1] = worst;
        }
    });
    for k in 1..k_max {
        if best[k] > best[k - 1] {
            best[k] = best[k - 1];
        }
    }
    // K >= N is served by singletons even when k_max > n.
    for slot in best.iter_mut().skip(n.saturating_sub(1)) {
        *slot = slot.min(S::zero());
    }
    Ok(best)
}

/// Exact best average-case distortion achievable with at most `k` states
/// under context distribution `dist`.
pub fn eps_star_avg<S: Scalar>(table: &RewardTable<S>, dist: &[S], k: usize) -> Result<S> {
    if k == 0 {
        return Err(Error::InvalidParameter {
            name: "k",
            message: "budget must be at least 1".into(),
        });
    }
    check_single_fiber(table)?;
    let n = table.num_contexts();
    check_partition_cap(n, DEFAULT_PARTITION_CAP)?;
    if dist.len() != n {
        return Err(Error::InvalidData(
            "distribution must cover every context".into(),
        ));
    }
    let gaps = gap_matrix(table);
    let a = table.num_actions();
    let mut best = S::infinity();
    for_each_partition(n, k.min(n), |labels, blocks| {
        let mut total = S::zero();
        for b in 0..blocks {
            let mut block_best = S::infinity();
            for act in 0..a {
                let mut acc = S::zero();
                for (x, &l) in labels.iter().enumerate() {
                    if l == b {
                        acc = acc + dist[x] * gaps[x][act];
                    }
                }
                if acc < block_best {
                    block_best = acc;
                }
            }
            total = total + block_best;
        }
        if total < best {
            best = total;
        }
    });
    Ok(best)
}

/// Minimum number of memory states achieving worst-case distortion `eps`,
/// computed as an exact set cover of the contexts by the action balls
/// `S_a = {x : gap(x, a) <= eps}`.
pub fn covering_number<S: Scalar>(table: &RewardTable<S>, eps: S) -> Result<usize> {
    if eps < S::zero() {
        return Err(Error::InvalidParameter {
            name: "eps",
            message: "distortion level must be nonnegative".into(),
        });
    }
    check_single_fiber(table)?;
    let n = table.num_contexts();
    let a = table.num_actions();
    if a > COVERING_ACTION_CAP {
        return Err(Error::CapacityExceeded {
            what: "exact action-ball set cover",
            cap: COVERING_ACTION_CAP,
            given: a,
        });
    }
    if n > 128 {
        return Err(Error::CapacityExceeded {
            what: "action-ball bitmask",
            cap: 128,
            given: n,
        });
    }
    let full: u128 = if n == 128 { !0 } else { (1u128 << n) - 1 };
    let mut balls = vec![0u128; a];
    for (act, ball) in balls.iter_mut().enumerate() {
        for x in 0..n {
            if table.gap(ContextId(x), ActionId(act))? <= eps {
                *ball |= 1u128 << x;
            }
        }
    }
    // Every context has a zero-gap action, so the full action set covers.
    for size in 1..=a {
        let mut found = false;
        for_each_combination(a, size, |subset| {
            if found {
                return;
            }
            let mut union = 0u128;
            for &act in subset {
                union |= balls[act];
            }
            if union == full {
                found = true;
            }
        });
        if found {
            return Ok(size);
        }
    }
    unreachable!("action balls at eps >= 0 always cover the context set");
}

fn for_each_combination(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    if k > n {
        return;
    }
    loop {
        visit(&idx);
        // advance to the next k-combination in lexicographic order
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Largest subset of contexts with all pairwise decision distances
/// strictly above `eps`, via branch-and-bound independent-set search on the
/// `<= eps` compatibility graph.
pub fn packing_number<S: Scalar>(table: &RewardTable<S>, eps: S) -> Result<usize> {
    if eps < S::zero() {
        return Err(Error::InvalidParameter {
            name: "eps",
            message: "distortion level must be nonnegative".into(),
        });
    }
    check_single_fiber(table)?;
    let n = table.num_contexts();
    if n > PACKING_CAP {
        return Err(Error::CapacityExceeded {
            what: "branch-and-bound packing search",
            cap: PACKING_CAP,
            given: n,
        });
    }
    // conflict[x] = contexts that may NOT join a packing containing x
    let mut compatible = vec![0u32; n];
    for x in 0..n {
        for y in (x + 1)..n {
            let d = table.decision_distance(ContextId(x), ContextId(y))?;
            if d <= eps {
                compatible[x] |= 1 << y;
                compatible[y] |= 1 << x;
            }
        }
    }
    fn bb(candidates: u32, chosen: usize, best: &mut usize, compatible: &[u32]) {
        if chosen + (candidates.count_ones() as usize) <= *best {
            return;
        }
        if candidates == 0 {
            *best = (*best).max(chosen);
            return;
        }
        let v = candidates.trailing_zeros() as usize;
        let rest = candidates & !(1 << v);
        // include v: drop everything compatible with it
        bb(rest & !compatible[v], chosen + 1, best, compatible);
        // exclude v
        bb(rest, chosen, best, compatible);
    }
    let all: u32 = if n == 32 { !0 } else { (1u32 << n) - 1 };
    let mut best = 0usize;
    bb(all, 0, &mut best, &compatible);
    Ok(best)
}

/// Information floor in bits: `log2` of the packing number at scale
/// `2 * eps`. Any memory variable supporting worst-case distortion `eps`
/// must carry at least this much information about a uniform draw from a
/// maximum packing.
pub fn info_floor<S: Scalar>(table: &RewardTable<S>, eps: S) -> Result<S> {
    let p = packing_number(table, (S::one() + S::one()) * eps)?;
    Ok(S::from_count(p).log2())
}

/// Outcome of checking both covering/packing clauses at one `(eps, K)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Serialize", deserialize = "S: Deserialize<'de>"))]
pub struct SandwichReport<S: Scalar = f64> {
    pub eps: S,
    pub k: usize,
    pub covering: usize,
    pub packing_at_2eps: usize,
    pub eps_star_inf: S,
    /// `K >= covering(eps)`, which must force `eps_star_inf(K) <= eps`.
    pub cover_clause_fired: bool,
    pub cover_clause_holds: bool,
    /// `packing(2 eps) > K`, which must force `eps_star_inf(K) > eps`.
    pub pack_clause_fired: bool,
    pub pack_clause_holds: bool,
}

impl<S: Scalar> SandwichReport<S> {
    pub fn holds(&self) -> bool {
        (!self.cover_clause_fired || self.cover_clause_holds)
            && (!self.pack_clause_fired || self.pack_clause_holds)
    }
}

/// Checks both clauses of the covering/packing sandwich on a small
/// instance.
pub fn sandwich_check<S: Scalar>(
    table: &RewardTable<S>,
    eps: S,
    k: usize,
) -> Result<SandwichReport<S>> {
    let covering = covering_number(table, eps)?;
    let packing = packing_number(table, (S::one() + S::one()) * eps)?;
    let star = eps_star_inf(table, k)?.eps_star_inf;
    let cover_fired = k >= covering;
    let pack_fired = packing > k;
    Ok(SandwichReport {
        eps,
        k,
        covering,
        packing_at_2eps: packing,
        eps_star_inf: star,
        cover_clause_fired: cover_fired,
        cover_clause_holds: !cover_fired || star <= eps,
        pack_clause_fired: pack_fired,
        pack_clause_holds: !pack_fired || star > eps,
    })
}

/// A Set-Cover instance: universe `0..universe_size`, a family of subsets,
/// and a budget. Every element must belong to at least one set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SetCoverInstance {
    pub universe_size: usize,
    pub sets: Vec<Vec<usize>>,
    pub k: usize,
}

impl SetCoverInstance {
    pub fn validate(&self) -> Result<()> {
        if self.universe_size == 0 {
            return Err(Error::InvalidData("empty universe".into()));
        }
        if self.sets.is_empty() {
            return Err(Error::InvalidData("no sets".into()));
        }
        let mut covered = vec![false; self.universe_size];
        for set in &self.sets {
            if set.is_empty() {
                return Err(Error::InvalidData("empty set in family".into()));
            }
            for &u in set {
                if u >= self.universe_size {
                    return Err(Error::InvalidData(format!(
                        "element {u} outside universe of size {}",
                        self.universe_size
                    )));
                }
                covered[u] = true;
            }
        }
        if let Some(u) = covered.iter().position(|&c| !c) {
            return Err(Error::InvalidData(format!(
                "element {u} is not covered by any set"
            )));
        }
        Ok(())
    }

    /// Brute-force feasibility: is there a cover using at most `k` sets?
    pub fn feasible_at(&self, k: usize) -> Result<bool> {
        self.validate()?;
        let m = self.sets.len();
        if m > 20 {
            return Err(Error::CapacityExceeded {
                what: "brute-force set cover",
                cap: 20,
                given: m,
            });
        }
        let full: u32 = if self.universe_size == 32 {
            !0
        } else {
            (1u32 << self.universe_size) - 1
        };
        let masks: Vec<u32> = self
            .sets
            .iter()
            .map(|s| s.iter().fold(0u32, |m, &u| m | (1 << u)))
            .collect();
        for choice in 0u32..(1 << m) {
            if (choice.count_ones() as usize) > k {
                continue;
            }
            let mut union = 0u32;
            for (j, &mask) in masks.iter().enumerate() {
                if choice & (1 << j) != 0 {
                    union |= mask;
                }
            }
            if union == full {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// Reduction from Set Cover to a memory instance: one context per element,
/// one action per set, reward 1 exactly when the element belongs to the
/// set. The instance then has `eps_star_inf(K) = 0` iff the cover is
/// feasible at `K`, and `= 1` otherwise.
pub fn setcover_to_memory<S: Scalar>(sc: &SetCoverInstance) -> Result<RewardTable<S>> {
    sc.validate()?;
    let rows = (0..sc.universe_size)
        .map(|u| {
            sc.sets
                .iter()
                .map(|set| {
                    if set.contains(&u) {
                        S::one()
                    } else {
                        S::zero()
                    }
                })
                .collect()
        })
        .collect();
    RewardTable::new(rows)
}

/// Result of exhaustively verifying the forgetting boundary on one table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForgettingReport {
    pub subsets_checked: usize,
    pub pairs_checked: usize,
    /// A subset where shared-action existence and the radius test disagree.
    pub subset_counterexample: Option<Vec<usize>>,
    /// A pair where mergeability and the pairwise distance test disagree.
    pub pair_counterexample: Option<(usize, usize)>,
}

impl ForgettingReport {
    pub fn holds(&self) -> bool {
        self.subset_counterexample.is_none() && self.pair_counterexample.is_none()
    }
}

/// Checks, for every nonempty subset `C`, that a shared `eps`-optimal
/// action exists iff the cluster radius of `C` is at most `eps`, and for
/// every pair that mergeability at `eps` matches the pairwise decision
/// distance test.
pub fn verify_forgetting_boundary<S: Scalar>(
    table: &RewardTable<S>,
    eps: S,
) -> Result<ForgettingReport> {
    check_single_fiber(table)?;
    let n = table.num_contexts();
    check_partition_cap(n, DEFAULT_PARTITION_CAP)?;
    let a = table.num_actions();
    let gaps = gap_matrix(table);

    let mut report = ForgettingReport {
        subsets_checked: 0,
        pairs_checked: 0,
        subset_counterexample: None,
        pair_counterexample: None,
    };

    for mask in 1u32..(1 << n) {
        let members: Vec<usize> = (0..n).filter(|&x| mask & (1 << x) != 0).collect();
        let shared_action = (0..a).any(|act| members.iter().all(|&x| gaps[x][act] <= eps));
        let ids: Vec<ContextId> = members.iter().map(|&x| ContextId(x)).collect();
        let (radius, _) = table.cluster_radius(&ids)?;
        report.subsets_checked += 1;
        if shared_action != (radius <= eps) && report.subset_counterexample.is_none() {
            report.subset_counterexample = Some(members.clone());
        }
    }

    for x in 0..n {
        for y in x..n {
            let mergeable = (0..a).any(|act| gaps[x][act] <= eps && gaps[y][act] <= eps);
            let d = table.decision_distance(ContextId(x), ContextId(y))?;
            report.pairs_checked += 1;
            if mergeable != (d <= eps) && report.pair_counterexample.is_none() {
                report.pair_counterexample = Some((x, y));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;

    fn table(rows: &[&[f64]]) -> RewardTable {
        RewardTable::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn random_table(rng: &mut StdRng, n: usize, a: usize) -> RewardTable {
        let rows = (0..n)
            .map(|_| (0..a).map(|_| rng.random::<f64>()).collect())
            .collect();
        RewardTable::new(rows).unwrap()
    }

    #[test]
    fn eps_star_inf_examples() {
        let t = table(&[&[1.0, 0.8], &[0.7, 1.0]]);
        let r = eps_star_inf(&t, 1).unwrap();
        assert!((r.eps_star_inf - 0.2).abs() < 1e-15);
        assert_eq!(r.witness_actions.len(), 1);
        let r2 = eps_star_inf(&t, 2).unwrap();
        assert_eq!(r2.eps_star_inf, 0.0);
        let r5 = eps_star_inf(&t, 5).unwrap();
        assert_eq!(r5.eps_star_inf, 0.0);
    }

    #[test]
    fn eps_star_witness_achieves_value() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..20 {
            let t = random_table(&mut rng, 6, 3);
            for k in 1..=3 {
                let r = eps_star_inf(&t, k).unwrap();
                let realized = t.partition_worst_distortion(&r.witness_partition).unwrap();
                assert_eq!(realized, r.eps_star_inf);
                assert!(r.witness_partition.num_nonempty() <= k);
            }
        }
    }

    #[test]
    fn eps_star_cap_error_names_cap() {
        let rows = vec![vec![0.5, 0.6]; 11];
        let t = RewardTable::new(rows).unwrap();
        let err = eps_star_inf(&t, 2).unwrap_err();
        assert!(err.is_capacity());
        assert!(err.to_string().contains("10"));
    }

    #[test]
    fn eps_star_monotone_and_zero_at_n() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..10 {
            let t = random_table(&mut rng, 6, 3);
            let curve = eps_star_inf_curve(&t, 7).unwrap();
            for w in curve.windows(2) {
                assert!(w[1] <= w[0]);
            }
            assert_eq!(curve[5], 0.0);
            assert_eq!(curve[6], 0.0);
            // curve agrees with the single-K oracle
            for k in 1..=6 {
                assert_eq!(curve[k - 1], eps_star_inf(&t, k).unwrap().eps_star_inf);
            }
        }
    }

    #[test]
    fn eps_star_avg_examples() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..10 {
            let t = random_table(&mut rng, 5, 3);
            let dist = vec![0.2; 5];
            for k in 1..=5 {
                let avg = eps_star_avg(&t, &dist, k).unwrap();
                let worst = eps_star_inf(&t, k).unwrap().eps_star_inf;
                assert!(avg <= worst + 1e-12);
            }
            assert_eq!(eps_star_avg(&t, &dist, 5).unwrap(), 0.0);
        }
    }

    /// Rare-outlier instance: worst-case frontier stays 1 while the
    /// average-case frontier drops to the outlier mass.
    #[test]
    fn eps_star_avg_rare_outlier() {
        let t = table(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let delta = 0.05;
        let avg = eps_star_avg(&t, &[1.0 - delta, delta], 1).unwrap();
        assert!(avg <= delta + 1e-15);
        assert_eq!(eps_star_inf(&t, 1).unwrap().eps_star_inf, 1.0);
    }

    #[test]
    fn covering_examples() {
        let t = table(&[&[1.0, 0.8], &[0.7, 1.0]]);
        assert_eq!(covering_number(&t, 0.1).unwrap(), 2);
        assert_eq!(covering_number(&t, 0.2).unwrap(), 1);
        assert_eq!(covering_number(&t, 1.0).unwrap(), 1);
    }

    #[test]
    fn packing_examples() {
        let t = table(&[&[1.0, 0.8], &[0.7, 1.0]]);
        assert_eq!(packing_number(&t, 0.1).unwrap(), 2);
        assert_eq!(packing_number(&t, 0.2).unwrap(), 1);
        assert_eq!(packing_number(&t, 1.0).unwrap(), 1);
    }

    #[test]
    fn info_floor_examples() {
        let t = table(&[&[1.0, 0.8], &[0.7, 1.0]]);
        // packing(2 * 0.15) = packing(0.3) = 1
        assert_eq!(info_floor(&t, 0.15).unwrap(), 0.0);
        // packing(2 * 0.05) = 2 -> one bit
        assert_eq!(info_floor(&t, 0.05).unwrap(), 1.0);
        // orthogonal 4x4 table: packing(0.8) = 4 -> two bits
        let eye = table(&[
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
        ]);
        assert_eq!(info_floor(&eye, 0.4).unwrap(), 2.0);
    }

    #[test]
    fn sandwich_examples() {
        let t = table(&[&[1.0, 0.8], &[0.7, 1.0]]);
        let r = sandwich_check(&t, 0.2, 1).unwrap();
        assert!(r.cover_clause_fired && r.holds());

        let conflict = table(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let r = sandwich_check(&conflict, 0.4, 1).unwrap();
        assert!(r.pack_clause_fired);
        assert_eq!(r.packing_at_2eps, 2);
        assert!(r.holds());
    }

    #[test]
    fn sandwich_fuzz() {
        let mut rng = StdRng::seed_from_u64(42);
        for _ in 0..60 {
            let t = random_table(&mut rng, 6, 3);
            for &eps in &[0.0, 0.05, 0.1, 0.2, 0.4, 0.8] {
                for k in 1..=6 {
                    let r = sandwich_check(&t, eps, k).unwrap();
                    assert!(r.holds(), "sandwich failed at eps={eps} k={k}");
                }
            }
        }
    }

    #[test]
    fn setcover_reduction_examples() {
        let sc = SetCoverInstance {
            universe_size: 3,
            sets: vec![vec![0, 1], vec![1, 2]],
            k: 2,
        };
        let t: RewardTable = setcover_to_memory(&sc).unwrap();
        assert_eq!(t.row(ContextId(0)), &[1.0, 0.0]);
        assert_eq!(t.row(ContextId(1)), &[1.0, 1.0]);
        assert_eq!(t.row(ContextId(2)), &[0.0, 1.0]);
        assert_eq!(eps_star_inf(&t, 1).unwrap().eps_star_inf, 1.0);
        assert_eq!(eps_star_inf(&t, 2).unwrap().eps_star_inf, 0.0);
        // a cluster inside one set is free under that set's action
        let (r, a) = t.cluster_radius(&[ContextId(0), ContextId(1)]).unwrap();
        assert_eq!(r, 0.0);
        assert_eq!(a, ActionId(0));
    }

    #[test]
    fn setcover_uncovered_element_rejected() {
        let sc = SetCoverInstance {
            universe_size: 3,
            sets: vec![vec![0, 1]],
            k: 1,
        };
        assert!(setcover_to_memory::<f64>(&sc).is_err());
    }

    #[test]
    fn forgetting_boundary_examples() {
        let t = table(&[&[1.0, 0.8], &[0.7, 1.0]]);
        assert!(verify_forgetting_boundary(&t, 0.2).unwrap().holds());
        assert!(verify_forgetting_boundary(&t, 0.0).unwrap().holds());
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..30 {
            let t = random_table(&mut rng, 5, 3);
            for &eps in &[0.0, 0.1, 0.3, 0.6] {
                assert!(verify_forgetting_boundary(&t, eps).unwrap().holds());
            }
        }
    }

    #[test]
    fn covering_matches_frontier_threshold() {
        let mut rng = StdRng::seed_from_u64(9);
        for _ in 0..20 {
            let t = random_table(&mut rng, 6, 3);
            let curve = eps_star_inf_curve(&t, 6).unwrap();
            for &eps in &[0.02, 0.1, 0.25, 0.5] {
                let cov = covering_number(&t, eps).unwrap();
                let by_curve = 1 + curve.iter().position(|&v| v <= eps).unwrap();
                assert_eq!(cov, by_curve);
            }
        }
    }

    #[test]
    fn info_floor_below_log_covering() {
        let mut rng = StdRng::seed_from_u64(21);
        for _ in 0..20 {
            let t = random_table(&mut rng, 6, 3);
            for &eps in &[0.05, 0.1, 0.2] {
                let floor = info_floor(&t, eps).unwrap();
                let cov = covering_number(&t, eps).unwrap() as f64;
                assert!(floor <= cov.log2() + 1e-12);
            }
        }
    }
}
