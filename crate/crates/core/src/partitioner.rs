//! The greedy budgeted partitioner.
//!
//! An epoch partition is found by binary search over certified conflict
//! levels: at level `alpha` the cannot-link graph has an edge wherever the
//! lower distance certificate exceeds `alpha`, and a level is feasible when
//! `degeneracy + 1 <= K`, since smallest-last greedy coloring then meets
//! the budget. Feasibility is monotone (raising the level only removes
//! edges), the candidate levels are the distinct certified distances, and
//! the returned partition never co-clusters a pair whose conflict is
//! certified above the chosen level.
//!
//! Candidate levels are deduplicated and restricted to `alpha >= 0`: a
//! negative level would create edges for pairs with no certified conflict
//! at all.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::certificates::ObservationLedger;
use crate::error::{Error, Result};
use crate::model::ContextId;
use crate::scalar::Scalar;

/// Vertex cap for the exact chromatic diagnostic in
/// [`graph_gap_report`].
pub const CHROMATIC_CAP: usize = 12;

/// Cannot-link graph over observed contexts at one conflict level: an edge
/// means the pair is certified to conflict above `alpha`.
#[derive(Debug, Clone)]
pub struct CannotLinkGraph<S: Scalar = f64> {
    vertices: Vec<ContextId>,
    adj: Vec<Vec<usize>>,
    alpha: S,
}

impl<S: Scalar> CannotLinkGraph<S> {
    /// Builds the graph at level `alpha` from pairwise lower certificates.
    /// `d_low[i][j]` indexes pairs of `vertices` (only `i < j` is read).
    fn from_certificates(vertices: Vec<ContextId>, d_low: &[Vec<S>], alpha: S) -> Self {
        let n = vertices.len();
        let mut adj = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                if d_low[i][j] > alpha {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        CannotLinkGraph {
            vertices,
            adj,
            alpha,
        }
    }

    /// Builds the level-`alpha` graph straight from a ledger.
    pub fn from_ledger(
        ledger: &ObservationLedger<S>,
        observed: &[ContextId],
        alpha: S,
    ) -> Result<Self> {
        let vertices = sorted_unique(observed);
        let d_low = pairwise_lower(ledger, &vertices)?;
        Ok(Self::from_certificates(vertices, &d_low, alpha))
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn alpha(&self) -> S {
        self.alpha
    }

    pub fn vertices(&self) -> &[ContextId] {
        &self.vertices
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].contains(&v)
    }
}

fn sorted_unique(xs: &[ContextId]) -> Vec<ContextId> {
    let mut v = xs.to_vec();
    v.sort();
    v.dedup();
    v
}

fn pairwise_lower<S: Scalar>(
    ledger: &ObservationLedger<S>,
    vertices: &[ContextId],
) -> Result<Vec<Vec<S>>> {
    let n = vertices.len();
    let mut d = vec![vec![S::zero(); n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let (low, _) = ledger.pair_distance_bounds(vertices[i], vertices[j])?;
            d[i][j] = low;
            d[j][i] = low;
        }
    }
    Ok(d)
}

/// Smallest-last peeling: repeatedly removes a minimum-degree vertex
/// (lowest index on ties). Returns the removal order and the degeneracy,
/// the largest degree seen at removal time. Greedy coloring along the
/// reversed order uses at most `degeneracy + 1` colors.
pub fn degeneracy_order<S: Scalar>(graph: &CannotLinkGraph<S>) -> (Vec<usize>, usize) {
    let n = graph.num_vertices();
    let mut degree: Vec<usize> = (0..n).map(|v| graph.neighbors(v).len()).collect();
    let mut removed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut degeneracy = 0;
    for _ in 0..n {
        let v = (0..n)
            .filter(|&v| !removed[v])
            .min_by_key(|&v| (degree[v], v))
            .expect("unremoved vertex exists");
        degeneracy = degeneracy.max(degree[v]);
        removed[v] = true;
        order.push(v);
        for &w in graph.neighbors(v) {
            if !removed[w] {
                degree[w] -= 1;
            }
        }
    }
    (order, degeneracy)
}

/// Degeneracy alone, for feasibility tests.
pub fn degeneracy<S: Scalar>(graph: &CannotLinkGraph<S>) -> usize {
    degeneracy_order(graph).1
}

/// Greedy proper coloring along `ordering` (a permutation of the
/// vertices), assigning each vertex the smallest color unused by its
/// already-colored neighbors.
pub fn greedy_color<S: Scalar>(graph: &CannotLinkGraph<S>, ordering: &[usize]) -> Vec<usize> {
    let n = graph.num_vertices();
    assert_eq!(ordering.len(), n, "ordering must cover every vertex");
    let mut color = vec![usize::MAX; n];
    for &v in ordering {
        let mut used: Vec<usize> = graph
            .neighbors(v)
            .iter()
            .filter_map(|&w| (color[w] != usize::MAX).then_some(color[w]))
            .collect();
        used.sort_unstable();
        used.dedup();
        let mut c = 0;
        for u in used {
            if u == c {
                c += 1;
            } else if u > c {
                break;
            }
        }
        color[v] = c;
    }
    color
}

/// Per-epoch graph diagnostics, one CSV row per epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub vertices: usize,
    pub edges: usize,
    pub degeneracy: usize,
    pub colors_used: usize,
}

impl GraphStats {
    pub fn csv_header() -> &'static str {
        "vertices,edges,degeneracy,colors_used,eps_cert"
    }

    pub fn csv_row(&self, eps_cert: f64) -> String {
        format!(
            "{},{},{},{},{}",
            self.vertices, self.edges, self.degeneracy, self.colors_used, eps_cert
        )
    }
}

/// A frozen epoch partition: cluster labels for the observed contexts, the
/// conflict level the graph was built at, and the certified distortion
/// (the largest upper radius certificate over its clusters).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Serialize", deserialize = "S: Deserialize<'de>"))]
pub struct EpochPartition<S: Scalar = f64> {
    labels: BTreeMap<usize, usize>,
    k: usize,
    pub alpha: S,
    pub eps_cert: S,
    pub stats: GraphStats,
}

impl<S: Scalar> EpochPartition<S> {
    pub fn budget(&self) -> usize {
        self.k
    }

    pub fn label(&self, x: ContextId) -> Option<usize> {
        self.labels.get(&x.0).copied()
    }

    pub fn contains(&self, x: ContextId) -> bool {
        self.labels.contains_key(&x.0)
    }

    pub fn assignments(&self) -> impl Iterator<Item = (ContextId, usize)> + '_ {
        self.labels.iter().map(|(&x, &l)| (ContextId(x), l))
    }

    /// Members of every cluster slot, including empty padding up to `K`.
    pub fn clusters(&self) -> Vec<Vec<ContextId>> {
        let mut out = vec![Vec::new(); self.k];
        for (&x, &l) in &self.labels {
            out[l].push(ContextId(x));
        }
        out
    }

    pub fn num_nonempty(&self) -> usize {
        self.clusters().iter().filter(|c| !c.is_empty()).count()
    }
}

/// Candidate conflict levels: zero plus every distinct positive certified
/// distance, ascending.
fn candidate_levels<S: Scalar>(d_low: &[Vec<S>]) -> Vec<S> {
    let n = d_low.len();
    let mut levels = vec![S::zero()];
    for i in 0..n {
        for j in (i + 1)..n {
            if d_low[i][j] > S::zero() {
                levels.push(d_low[i][j]);
            }
        }
    }
    levels.sort_by(|a, b| a.partial_cmp(b).expect("certificates are finite"));
    levels.dedup();
    levels
}

/// Binary-searches the candidate ladder for the smallest feasible level,
/// builds the graph there, colors it along the reversed smallest-last
/// order, and reports the certified distortion of the resulting clusters.
pub fn greedy_partition<S: Scalar>(
    ledger: &ObservationLedger<S>,
    observed: &[ContextId],
    k: usize,
) -> Result<EpochPartition<S>> {
    if k == 0 {
        return Err(Error::InvalidParameter {
            name: "k",
            message: "budget must be at least 1".into(),
        });
    }
    let vertices = sorted_unique(observed);
    if vertices.is_empty() {
        return Ok(EpochPartition {
            labels: BTreeMap::new(),
            k,
            alpha: S::zero(),
            eps_cert: S::zero(),
            stats: GraphStats {
                vertices: 0,
                edges: 0,
                degeneracy: 0,
                colors_used: 0,
            },
        });
    }
    let d_low = pairwise_lower(ledger, &vertices)?;
    let levels = candidate_levels(&d_low);

    // Feasibility (degeneracy + 1 <= K) is monotone in the level: raising
    // it removes edges. The top level always works since no certificate
    // exceeds it strictly.
    let mut lo = 0usize;
    let mut hi = levels.len() - 1;
    let mut smallest = levels.len() - 1;
    while lo <= hi {
        let mid = (lo + hi) / 2;
        let graph = CannotLinkGraph::from_certificates(vertices.clone(), &d_low, levels[mid]);
        if degeneracy(&graph) + 1 <= k {
            smallest = mid;
            if mid == 0 {
                break;
            }
            hi = mid - 1;
        } else {
            lo = mid + 1;
        }
    }
    let alpha = levels[smallest];
    let graph = CannotLinkGraph::from_certificates(vertices.clone(), &d_low, alpha);
    let (order, degen) = degeneracy_order(&graph);
    let reversed: Vec<usize> = order.iter().rev().copied().collect();
    let colors = greedy_color(&graph, &reversed);
    let colors_used = colors.iter().copied().max().map_or(0, |c| c + 1);
    debug_assert!(colors_used <= k, "degeneracy coloring exceeded the budget");

    let mut labels = BTreeMap::new();
    for (i, &x) in vertices.iter().enumerate() {
        labels.insert(x.0, colors[i]);
    }
    let partition = EpochPartition {
        labels,
        k,
        alpha,
        eps_cert: S::zero(),
        stats: GraphStats {
            vertices: graph.num_vertices(),
            edges: graph.num_edges(),
            degeneracy: degen,
            colors_used,
        },
    };
    let mut eps_cert = S::zero();
    for cluster in partition.clusters() {
        if cluster.is_empty() {
            continue;
        }
        eps_cert = eps_cert.max(ledger.cluster_radius_high(&cluster)?);
    }
    Ok(EpochPartition {
        eps_cert,
        ..partition
    })
}

/// Comparison of the greedy level against the exact chromatic threshold on
/// a small instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Serialize", deserialize = "S: Deserialize<'de>"))]
pub struct GraphGapReport<S: Scalar = f64> {
    pub alpha_greedy: S,
    pub alpha_star: S,
    /// `degeneracy(G at alpha_star) + 1`.
    pub degen_plus_one_at_star: usize,
    /// Whether the structural condition guaranteeing exactness held.
    pub degen_condition: bool,
    /// `alpha_greedy == alpha_star` (must hold whenever the condition
    /// does).
    pub exact: bool,
}

/// Exact `chi(G) <= k` test by backtracking.
fn k_colorable<S: Scalar>(graph: &CannotLinkGraph<S>, k: usize) -> bool {
    let n = graph.num_vertices();
    if n == 0 {
        return true;
    }
    fn assign<S: Scalar>(
        graph: &CannotLinkGraph<S>,
        colors: &mut Vec<usize>,
        v: usize,
        k: usize,
        max_used: usize,
    ) -> bool {
        if v == graph.num_vertices() {
            return true;
        }
        // trying colors up to one past the current maximum avoids
        // symmetric permutations of the palette
        let top = k.min(max_used + 1);
        for c in 0..top {
            if graph
                .neighbors(v)
                .iter()
                .all(|&w| colors[w] == usize::MAX || colors[w] != c)
            {
                colors[v] = c;
                if assign(graph, colors, v + 1, k, max_used.max(c + 1)) {
                    return true;
                }
                colors[v] = usize::MAX;
            }
        }
        false
    }
    let mut colors = vec![usize::MAX; n];
    assign(graph, &mut colors, 0, k, 0)
}

/// Compares the greedy binary-search level against the exact chromatic
/// threshold `alpha_star = min { alpha : chi(G_alpha) <= K }`. The greedy
/// level can never be smaller, and must match exactly whenever
/// `degeneracy(G at alpha_star) + 1 <= K`.
pub fn graph_gap_report<S: Scalar>(
    ledger: &ObservationLedger<S>,
    observed: &[ContextId],
    k: usize,
) -> Result<GraphGapReport<S>> {
    let vertices = sorted_unique(observed);
    if vertices.len() > CHROMATIC_CAP {
        return Err(Error::CapacityExceeded {
            what: "exact chromatic search",
            cap: CHROMATIC_CAP,
            given: vertices.len(),
        });
    }
    if k == 0 {
        return Err(Error::InvalidParameter {
            name: "k",
            message: "budget must be at least 1".into(),
        });
    }
    let d_low = pairwise_lower(ledger, &vertices)?;
    let levels = candidate_levels(&d_low);
    let mut alpha_star = *levels.last().expect("ladder nonempty");
    for &alpha in &levels {
        let graph = CannotLinkGraph::from_certificates(vertices.clone(), &d_low, alpha);
        if k_colorable(&graph, k) {
            alpha_star = alpha;
            break;
        }
    }
    let star_graph = CannotLinkGraph::from_certificates(vertices.clone(), &d_low, alpha_star);
    let degen_plus_one = degeneracy(&star_graph) + 1;
    let greedy = greedy_partition(ledger, &vertices, k)?;
    Ok(GraphGapReport {
        alpha_greedy: greedy.alpha,
        alpha_star,
        degen_plus_one_at_star: degen_plus_one,
        degen_condition: degen_plus_one <= k,
        exact: greedy.alpha == alpha_star,
    })
}
