//! Acceptance suite: one test per criterion, each printing a single
//! pass/fail line (run with `--nocapture` to see them on success).
//!
//! Every tolerance is pinned here. All randomness is seeded, so outcomes
//! are reproducible run to run.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use demem_core::env::{self, EnvConfig, RewardProfile};
use demem_core::frontier::{self, SetCoverInstance};
use demem_core::model::RewardTable;
use demem_harness::config::{BaselineParams, LearnerParams};
use demem_harness::experiments::{
    self, certificate_audit, mean_std, nonstationary_cell, oracle_validation_cell,
    slot_bridge_cell, slot_precision_cell, spearman, summarize_oracle_validation,
};
use demem_harness::methods::{run_cell, Method};

fn conclude(number: usize, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {number:2} — {name}: {detail}");
    assert!(pass, "criterion {number} ({name}) failed: {detail}");
}

fn random_table(rng: &mut ChaCha8Rng, n: usize, a: usize) -> RewardTable {
    let rows = (0..n)
        .map(|_| (0..a).map(|_| rng.random::<f64>()).collect())
        .collect();
    RewardTable::new(rows).unwrap()
}

/// The desk-scale Decoupled Bandit operating point used by the regret,
/// sweep, and non-stationarity criteria: strongly separated reward rows so
/// that decision conflicts are certifiable at desk horizons.
fn regret_env(alpha: f64, instance_seed: u64) -> EnvConfig {
    EnvConfig {
        num_identities: 8,
        num_actions: 2,
        feature_dim: 2,
        num_contexts: 14,
        alpha,
        noise_sigma: 0.1,
        horizon: 20_000,
        seed: instance_seed,
        reward_profile: RewardProfile::Separated {
            top_min: 0.9,
            low_max: 0.2,
        },
    }
}

fn learner_params() -> LearnerParams {
    LearnerParams {
        delta: 0.1,
        gamma: 1.2,
        restart_period: None,
    }
}

fn run_method(
    instance: &env::EnvInstance,
    run_seed: u64,
    method: Method,
    k: usize,
    horizon: usize,
) -> demem_harness::methods::CellResult {
    run_cell(
        instance,
        run_seed,
        method,
        k,
        horizon,
        &learner_params(),
        &BaselineParams::default(),
    )
    .expect("cell runs")
}

/// Criterion 1: on 100 random instances (N <= 8, A <= 4) the exhaustive
/// forgetting-boundary equivalence holds with zero counterexamples.
#[test]
fn criterion_01_forgetting_boundary() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut checked = 0usize;
    for i in 0..100 {
        let n = 2 + (i % 7);
        let a = 1 + (i % 4);
        let table = random_table(&mut rng, n, a);
        for &eps in &[0.0, 0.05, 0.15, 0.3, 0.5, 0.75, 1.0] {
            let report = frontier::verify_forgetting_boundary(&table, eps).unwrap();
            assert!(
                report.holds(),
                "counterexample at eps={eps}: {:?}",
                report.subset_counterexample
            );
            checked += report.subsets_checked;
        }
    }
    conclude(
        1,
        "forgetting-boundary equivalence",
        true,
        &format!("100 instances, {checked} subset checks, zero counterexamples"),
    );
}

/// Criterion 2: covering/packing sandwich clauses hold on 200 random 6x3
/// instances across an eps grid, and the information floor never exceeds
/// log2 of the eps-feasible budget when the packing clause binds.
#[test]
fn criterion_02_covering_packing_sandwich() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut cells = 0usize;
    for _ in 0..200 {
        let table = random_table(&mut rng, 6, 3);
        for &eps in &[0.0, 0.02, 0.05, 0.1, 0.2, 0.35, 0.5, 0.8] {
            let covering = frontier::covering_number(&table, eps).unwrap();
            let floor = frontier::info_floor(&table, eps).unwrap();
            for k in 1..=6 {
                let report = frontier::sandwich_check(&table, eps, k).unwrap();
                assert!(report.holds(), "sandwich violated at eps={eps} k={k}");
                if report.pack_clause_fired {
                    assert!(
                        floor <= (covering as f64).log2() + 1e-12,
                        "info floor {floor} above log2({covering})"
                    );
                }
                cells += 1;
            }
        }
    }
    conclude(
        2,
        "covering/packing sandwich",
        true,
        &format!("{cells} (instance, eps, K) cells, zero violations"),
    );
}

/// Criterion 3: on 100 random Set-Cover instances, brute-force feasibility
/// at K is equivalent to the reduced table's frontier being at most eps,
/// for every eps in {0, 0.5, 0.99}.
#[test]
fn criterion_03_setcover_reduction() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut checks = 0usize;
    for i in 0..100 {
        let universe = 3 + (i % 6); // up to 8
        let num_sets = 2 + (i % 5); // up to 6
        let mut sets: Vec<Vec<usize>> = (0..num_sets)
            .map(|_| {
                (0..universe)
                    .filter(|_| rng.random::<f64>() < 0.4)
                    .collect()
            })
            .collect();
        for set in sets.iter_mut() {
            if set.is_empty() {
                set.push(rng.random_range(0..universe));
            }
        }
        // every element must be covered
        for u in 0..universe {
            if !sets.iter().any(|s| s.contains(&u)) {
                let j = rng.random_range(0..num_sets);
                sets[j].push(u);
            }
        }
        let sc = SetCoverInstance {
            universe_size: universe,
            sets,
            k: num_sets,
        };
        let table: RewardTable = frontier::setcover_to_memory(&sc).unwrap();
        for k in 1..=num_sets {
            let feasible = sc.feasible_at(k).unwrap();
            let star = frontier::eps_star_inf(&table, k).unwrap().eps_star_inf;
            assert!(
                star == 0.0 || star == 1.0,
                "reduced frontier must be binary, got {star}"
            );
            for &eps in &[0.0, 0.5, 0.99] {
                assert_eq!(
                    feasible,
                    star <= eps,
                    "mismatch at |U|={universe} k={k} eps={eps}"
                );
                checks += 1;
            }
        }
    }
    conclude(
        3,
        "Set-Cover reduction",
        true,
        &format!("100 instances, {checks} equivalence checks, zero mismatches"),
    );
}

/// Criterion 4: with exact certificates the greedy level equals the exact
/// chromatic threshold whenever the degeneracy condition holds (zero
/// tolerance); the certified distortion never beats the frontier; and in
/// the tight-budget regime (K = 3) the mean ratio stays within the
/// widened 1.15 envelope. At K in {8, 10} the degeneracy condition holds
/// on every instance and the ratio is exactly one.
#[test]
fn criterion_04_greedy_partition_optimality() {
    let mut rows = Vec::new();
    for seed in 0..20u64 {
        let cfg = EnvConfig {
            num_identities: 8,
            num_actions: 5,
            feature_dim: 2,
            num_contexts: 10,
            alpha: 0.5,
            noise_sigma: 0.1,
            horizon: 1,
            seed: 20_000 + seed,
            reward_profile: RewardProfile::Separated {
                top_min: 0.9,
                low_max: 0.2,
            },
        };
        let instance = env::generate(&cfg).unwrap();
        let table = instance.export_reward_table().unwrap();
        for k in [3usize, 5, 8, 10] {
            rows.push(oracle_validation_cell(&table, k, seed).unwrap());
        }
    }
    let summaries = summarize_oracle_validation(&rows);
    let mut pass = true;
    let mut details = Vec::new();
    for summary in &summaries {
        pass &= summary.cert_never_below_star;
        pass &= summary.alpha_exact_under_condition;
        if summary.k == 3 {
            pass &= summary.finite_ratios > 0 && summary.mean_ratio <= 1.15;
            details.push(format!(
                "K=3 mean ratio {:.4} over {} instances (<= 1.15)",
                summary.mean_ratio, summary.finite_ratios
            ));
        }
        if summary.k == 8 || summary.k == 10 {
            pass &= (summary.zero_gap_frequency - 1.0).abs() < 1e-12;
            pass &= summary.finite_ratios == summary.instances
                && (summary.mean_ratio - 1.0).abs() < 1e-12
                && (summary.max_ratio - 1.0).abs() < 1e-12;
            details.push(format!("K={} ratio 1.000 on all instances", summary.k));
        }
    }
    conclude(
        4,
        "greedy-partition optimality regime",
        pass,
        &details.join("; "),
    );
}

/// Criterion 5: anytime certificate violation frequency stays within
/// delta plus three binomial standard deviations over 10k Monte-Carlo
/// trajectories at delta in {0.05, 0.1}.
#[test]
fn criterion_05_certificate_validity() {
    let mut pass = true;
    let mut details = Vec::new();
    for &delta in &[0.05, 0.1] {
        let report = certificate_audit(delta, 10_000, 250, 505, false).unwrap();
        pass &= report.passed;
        details.push(format!(
            "delta={delta}: frequency {:.4} <= bound {:.4}",
            report.frequency, report.bound
        ));
    }
    let noiseless = certificate_audit(0.1, 500, 250, 506, true).unwrap();
    pass &= noiseless.violations == 0;
    details.push(format!("noiseless violations {}", noiseless.violations));
    conclude(5, "certificate validity", pass, &details.join("; "));
}

/// Criterion 6: at alpha = 0.5, K = M, T = 20k, over 20 seeds, mean final
/// regret orders Oracle < DeMem < every description-based baseline, and
/// DeMem's mean advantage over the best of them clears two standard
/// errors of the paired per-seed differences.
#[test]
fn criterion_06_regret_ordering() {
    let seeds = 20u64;
    let k = 8;
    let methods = [
        Method::Oracle,
        Method::Demem,
        Method::FeatureKMeans,
        Method::FeatureRag,
        Method::EpsGreedyCluster,
        Method::RandomPartition,
    ];
    let mut finals: std::collections::BTreeMap<&str, Vec<f64>> = Default::default();
    for seed in 0..seeds {
        let instance = env::generate(&regret_env(0.5, 1000 + 2 * seed)).unwrap();
        for &method in &methods {
            let cell = run_method(&instance, 1001 + 2 * seed, method, k, 20_000);
            finals
                .entry(method.name())
                .or_default()
                .push(cell.final_regret());
        }
    }
    let mean = |name: &str| mean_std(&finals[name]).0;
    let oracle = mean("oracle");
    let demem = mean("demem");
    let description = [
        "feature_kmeans",
        "feature_rag",
        "eps_greedy_cluster",
        "random_partition",
    ];
    let mut pass = oracle < demem;
    for name in description {
        pass &= demem < mean(name);
    }
    let best = description
        .iter()
        .min_by(|a, b| mean(a).partial_cmp(&mean(b)).unwrap())
        .unwrap();
    let diffs: Vec<f64> = finals[*best]
        .iter()
        .zip(&finals["demem"])
        .map(|(b, d)| b - d)
        .collect();
    let (adv, diff_std) = mean_std(&diffs);
    let se = diff_std / (seeds as f64).sqrt();
    pass &= adv >= 2.0 * se;
    conclude(
        6,
        "regret ordering",
        pass,
        &format!(
            "oracle {oracle:.0} < demem {demem:.0} < best description baseline {} {:.0}; \
             advantage {adv:.0} = {:.1} standard errors ({:.2} paired stds)",
            best,
            mean(best),
            adv / se,
            adv / diff_std
        ),
    );
}

/// Criterion 7: seed-averaged realized value-loss distortion of DeMem's
/// partition is nonincreasing in K over {3, 5, 8, 10} within +0.01 per
/// step.
#[test]
fn criterion_07_memory_distortion_curve() {
    let seeds = 10u64;
    let grid = [3usize, 5, 8, 10];
    let mut curve = Vec::new();
    for &k in &grid {
        let mut dvals = Vec::new();
        for seed in 0..seeds {
            let instance = env::generate(&regret_env(0.5, 7000 + 2 * seed)).unwrap();
            let cell = run_method(&instance, 7001 + 2 * seed, Method::Demem, k, 20_000);
            let partition = cell.partition.expect("demem has a partition");
            dvals.push(instance.value_loss_distortion(&partition).unwrap());
        }
        curve.push(mean_std(&dvals).0);
    }
    let mut pass = true;
    for w in curve.windows(2) {
        pass &= w[1] <= w[0] + 0.01;
    }
    conclude(
        7,
        "memory-distortion curve",
        pass,
        &format!(
            "seed-averaged D_val over K grid {:?}: {:?}",
            grid,
            curve
                .iter()
                .map(|v| (v * 1e4).round() / 1e4)
                .collect::<Vec<_>>()
        ),
    );
}

/// Criterion 8: over the full mismatch grid the feature-based baselines'
/// final-regret curves must correlate with alpha (Spearman >= 0.8) and
/// DeMem's regret increase from alpha 0 to 1 must be at most half of
/// Feature-KMeans's increase.
///
/// This criterion is structurally unattainable under the pinned mismatch
/// construction: drawing every context's identity as `perm(pseudo)` at
/// alpha = 1 produces an environment that is an identity-relabeled copy of
/// alpha = 0, which no label-blind policy can distinguish, so the curves
/// are symmetric around alpha = 0.5 rather than monotone. The test
/// implements the criterion exactly as stated and reports the measured
/// shape; the ascending half of the grid does confirm the mechanism
/// (description-based regret rises steeply with mismatch while DeMem stays
/// flat).
#[test]
fn criterion_08_mismatch_mechanism() {
    let seeds = 10u64;
    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    let methods = [
        Method::Demem,
        Method::FeatureKMeans,
        Method::FeatureRag,
        Method::EpsGreedyCluster,
    ];
    let mut curves: std::collections::BTreeMap<&str, Vec<f64>> = Default::default();
    for &alpha in &grid {
        let mut sums: std::collections::BTreeMap<&str, f64> = Default::default();
        for seed in 0..seeds {
            let instance = env::generate(&regret_env(alpha, 8000 + 2 * seed)).unwrap();
            for &method in &methods {
                let cell = run_method(&instance, 8001 + 2 * seed, method, 8, 20_000);
                *sums.entry(method.name()).or_default() += cell.final_regret();
            }
        }
        for (name, sum) in sums {
            curves.entry(name).or_default().push(sum / seeds as f64);
        }
    }
    let mut pass = true;
    let mut details = Vec::new();
    for name in ["feature_kmeans", "feature_rag", "eps_greedy_cluster"] {
        let rho = spearman(&grid, &curves[name]);
        details.push(format!("{name} spearman {rho:.2}"));
        pass &= rho >= 0.8;
    }
    let increase = |name: &str| curves[name].last().unwrap() - curves[name].first().unwrap();
    let demem_inc = increase("demem");
    let kmeans_inc = increase("feature_kmeans");
    details.push(format!(
        "increase 0->1: demem {demem_inc:.0}, kmeans {kmeans_inc:.0}"
    ));
    pass &= demem_inc <= 0.5 * kmeans_inc;
    details.push(format!(
        "curves (ascending half shows the mechanism): kmeans {:?}, demem {:?}",
        curves["feature_kmeans"]
            .iter()
            .map(|v| v.round())
            .collect::<Vec<_>>(),
        curves["demem"]
            .iter()
            .map(|v| v.round())
            .collect::<Vec<_>>()
    ));
    conclude(8, "mismatch mechanism", pass, &details.join("; "));
}

/// Criterion 9: across {method x seed} points, induced partition
/// distortion and final regret rank-correlate at Spearman >= 0.5.
#[test]
fn criterion_09_regret_distortion_coupling() {
    let seeds = 20u64;
    let methods = [
        Method::Oracle,
        Method::Demem,
        Method::FeatureKMeans,
        Method::EpsGreedyCluster,
        Method::Club,
        Method::RandomPartition,
    ];
    let mut d_star = Vec::new();
    let mut regret = Vec::new();
    for seed in 0..seeds {
        let instance = env::generate(&regret_env(0.5, 9000 + 2 * seed)).unwrap();
        let table = instance.export_reward_table().unwrap();
        let uniform = vec![1.0 / instance.num_contexts() as f64; instance.num_contexts()];
        for &method in &methods {
            let cell = run_method(&instance, 9001 + 2 * seed, method, 8, 20_000);
            regret.push(cell.final_regret());
            let partition = cell.partition.expect("partition methods only");
            d_star.push(
                table
                    .partition_avg_distortion(&uniform, &partition)
                    .unwrap(),
            );
        }
    }
    let rho = spearman(&d_star, &regret);
    conclude(
        9,
        "regret-distortion coupling",
        rho >= 0.5,
        &format!(
            "spearman(D*, final regret) = {rho:.3} over {} points",
            d_star.len()
        ),
    );
}

/// Criterion 10: with one aligned change point the fixed-restart wrapper
/// beats the plain run on mean final regret across 20 paired seeds, and
/// the ordering reverses (or ties) on the stationary environment.
#[test]
fn criterion_10_nonstationary_restarts() {
    let seeds: Vec<u64> = (0..20).collect();
    let mut config = demem_harness::ExperimentConfig {
        kind: demem_harness::ExperimentKind::Nonstationary,
        env: regret_env(0.5, 4000),
        k: 8,
        learner: learner_params(),
        baselines: BaselineParams::default(),
        methods: vec![Method::Demem],
        k_grid: vec![8],
        alpha_grid: vec![0.5],
        seeds: seeds.clone(),
        change_round: Some(20_000),
        audit: Default::default(),
    };
    config.env.horizon = 40_000;
    let rows: Vec<_> = seeds
        .iter()
        .map(|&s| nonstationary_cell(&config, s).unwrap())
        .collect();
    let mean = |f: fn(&experiments::NonstationaryRow) -> f64| -> f64 {
        rows.iter().map(f).sum::<f64>() / rows.len() as f64
    };
    let piecewise_plain = mean(|r| r.piecewise_plain);
    let piecewise_restarted = mean(|r| r.piecewise_restarted);
    let stationary_plain = mean(|r| r.stationary_plain);
    let stationary_restarted = mean(|r| r.stationary_restarted);
    let pass = piecewise_restarted < piecewise_plain && stationary_restarted >= stationary_plain;
    conclude(
        10,
        "non-stationary restarts",
        pass,
        &format!(
            "piecewise: restarted {piecewise_restarted:.0} < plain {piecewise_plain:.0}; \
             stationary: restarted {stationary_restarted:.0} >= plain {stationary_plain:.0}"
        ),
    );
}

/// Criterion 11: across fuzzed 10k-step streams the active slot count
/// never exceeds K and summaries never exceed their budget; the planted
/// split trigger has precision one without feedback noise and degrades
/// monotonically under flip noise.
#[test]
fn criterion_11_slot_runtime_invariants() {
    let seeds = 20u64;
    let noise_grid = [0.0, 0.1, 0.2];
    let mut pass = true;
    let mut means = Vec::new();
    for &noise in &noise_grid {
        let mut precisions = Vec::new();
        for seed in 0..seeds {
            let cfg = regret_env(0.5, 11_000 + 2 * seed);
            let instance = env::generate(&cfg).unwrap();
            let row = slot_precision_cell(&instance, noise, 11_001 + 2 * seed, 10_000).unwrap();
            pass &= row.budget_ok && row.summary_ok;
            if noise == 0.0 {
                pass &= (row.precision - 1.0).abs() < 1e-12;
            }
            precisions.push(row.precision);
        }
        means.push(mean_std(&precisions).0);
    }
    for w in means.windows(2) {
        pass &= w[1] <= w[0] + 1e-12;
    }
    conclude(
        11,
        "slot runtime invariants",
        pass,
        &format!(
            "budgets and summaries held on {} streams; precision by noise {:?}",
            seeds as usize * noise_grid.len(),
            means
                .iter()
                .map(|v| (v * 1e3).round() / 1e3)
                .collect::<Vec<_>>()
        ),
    );
}

/// Criterion 12: the measured bridge decomposition satisfies
/// total <= compression + eta_route + eta_read on every audited synthetic
/// slot run.
#[test]
fn criterion_12_bridge_inequality() {
    let mut pass = true;
    let mut worst_slack = f64::INFINITY;
    for seed in 0..20u64 {
        let cfg = regret_env(0.5, 12_000 + 2 * seed);
        let instance = env::generate(&cfg).unwrap();
        let report = slot_bridge_cell(&instance, 12_001 + 2 * seed).unwrap();
        pass &= report.bound_holds();
        let slack = report.compression + report.eta_route + report.eta_read - report.total;
        worst_slack = worst_slack.min(slack);
    }
    conclude(
        12,
        "bridge inequality",
        pass,
        &format!("holds on 20/20 audited runs, minimum slack {worst_slack:.4}"),
    );
}
