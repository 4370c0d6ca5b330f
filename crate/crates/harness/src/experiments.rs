//! Experiment execution and deterministic result emission.
//!
//! Every kind expands into independent cells, runs them in parallel, sorts
//! the keyed results, and writes CSV/JSON outputs that all carry the
//! config digest. Within a cell the bandit protocol is strictly
//! sequential.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use demem_core::certificates::ObservationLedger;
use demem_core::env::{self, ChangeSpec, DecoupledBandit};
use demem_core::error::{Error, Result};
use demem_core::frontier;
use demem_core::learner::{self, LearnerConfig};
use demem_core::model::{ActionId, ContextId, RewardTable};
use demem_core::partitioner::{self, GraphStats};
use demem_core::slots::{
    self, bridge_decomposition, neg_distance_score, Slot, SlotConfig, SlotSystem, StepInput,
};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::manifest::{config_digest, RunManifest};
use crate::methods::{run_cell, Method};

/// Sample mean and (n-1) standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap().then(i.cmp(&j)));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // average rank across ties
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks on ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for i in 0..xs.len() {
        let dx = rx[i] - mx;
        let dy = ry[i] - my;
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

struct OutputSet {
    digest: String,
    files: BTreeMap<String, String>,
}

impl OutputSet {
    fn new(digest: String) -> Self {
        OutputSet {
            digest,
            files: BTreeMap::new(),
        }
    }

    fn add_csv(&mut self, name: &str, header: &str, rows: Vec<String>) {
        let mut body = format!("# manifest: {}\n{header}\n", self.digest);
        for row in rows {
            body.push_str(&row);
            body.push('\n');
        }
        self.files.insert(name.to_string(), body);
    }

    fn add_json<T: Serialize>(&mut self, name: &str, value: &T) {
        let mut value = serde_json::to_value(value).expect("report serializes");
        if let Some(map) = value.as_object_mut() {
            map.insert(
                "manifest_digest".into(),
                serde_json::Value::String(self.digest.clone()),
            );
        }
        self.files.insert(
            name.to_string(),
            serde_json::to_string_pretty(&value).expect("report serializes"),
        );
    }

    fn add_raw(&mut self, name: &str, contents: String) {
        self.files.insert(name.to_string(), contents);
    }

    fn write(self, out_dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(out_dir)?;
        for (name, contents) in self.files {
            fs::write(out_dir.join(name), contents)?;
        }
        Ok(())
    }
}

/// Runs an experiment config end to end and writes its outputs.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: &Path,
    threads: Option<usize>,
) -> Result<()> {
    config.validate()?;
    let started = Instant::now();
    let outputs = match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidParameter {
                    name: "threads",
                    message: e.to_string(),
                })?;
            pool.install(|| build_outputs(config))?
        }
        None => build_outputs(config)?,
    };
    let manifest = RunManifest::new(
        outputs.digest.clone(),
        config.kind.as_str(),
        &config.seeds,
        started.elapsed().as_secs_f64(),
    );
    let mut outputs = outputs;
    outputs.add_raw("manifest.json", manifest.to_json());
    outputs
        .write(out_dir)
        .map_err(|e| Error::InvalidData(format!("write outputs: {e}")))?;
    Ok(())
}

fn build_outputs(config: &ExperimentConfig) -> Result<OutputSet> {
    match config.kind {
        ExperimentKind::Regret => regret_outputs(config),
        ExperimentKind::BudgetSweep => budget_sweep_outputs(config),
        ExperimentKind::MismatchSweep => mismatch_sweep_outputs(config),
        ExperimentKind::PartitionValidation => partition_validation_outputs(config),
        ExperimentKind::OracleValidation => oracle_validation_outputs(config),
        ExperimentKind::CertificateAudit => certificate_audit_outputs(config),
        ExperimentKind::Nonstationary => nonstationary_outputs(config),
        ExperimentKind::SlotAudit => slot_audit_outputs(config),
    }
}

fn generate_instance(config: &ExperimentConfig, alpha: f64, seed: u64) -> Result<env::EnvInstance> {
    let mut env_config = config.env.clone();
    env_config.alpha = alpha;
    env_config.seed = config.instance_seed(seed);
    env::generate(&env_config)
}

/// Final regrets plus realized-partition distortion metrics for one
/// (method, K, alpha, seed) cell.
struct CellMetrics {
    final_regret: f64,
    d_val: f64,
    d_action: f64,
    d_star: f64,
    trajectory_csv: Option<String>,
    epochs: Vec<learner::EpochRecord>,
}

fn run_metric_cell(
    config: &ExperimentConfig,
    method: Method,
    k: usize,
    alpha: f64,
    seed: u64,
    keep_rounds: bool,
) -> Result<CellMetrics> {
    let instance = generate_instance(config, alpha, seed)?;
    let cell = run_cell(
        &instance,
        config.run_seed(seed),
        method,
        k,
        config.env.horizon,
        &config.learner,
        &config.baselines,
    )?;
    let (d_val, d_action, d_star) = match &cell.partition {
        Some(partition) => {
            let table = instance.export_reward_table()?;
            let uniform = vec![1.0 / instance.num_contexts() as f64; instance.num_contexts()];
            (
                instance.value_loss_distortion(partition)?,
                instance.action_mismatch_distortion(partition)?,
                table.partition_avg_distortion(&uniform, partition)?,
            )
        }
        None => (f64::NAN, f64::NAN, f64::NAN),
    };
    Ok(CellMetrics {
        final_regret: cell.final_regret(),
        d_val,
        d_action,
        d_star,
        trajectory_csv: keep_rounds.then(|| cell.trajectory.to_csv()),
        epochs: cell.trajectory.epochs,
    })
}

fn regret_outputs(config: &ExperimentConfig) -> Result<OutputSet> {
    let mut out = OutputSet::new(config_digest(config));
    let cells: Vec<(Method, u64)> = config
        .methods
        .iter()
        .flat_map(|&m| config.seeds.iter().map(move |&s| (m, s)))
        .collect();
    let results: Result<Vec<_>> = cells
        .par_iter()
        .map(|&(method, seed)| {
            let metrics = run_metric_cell(config, method, config.k, config.env.alpha, seed, true)?;
            Ok((method, seed, metrics))
        })
        .collect();
    let mut results = results?;
    results.sort_by_key(|(m, s, _)| (m.name(), *s));

    let mut finals: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (method, seed, metrics) in &results {
        let name = format!("rounds_{}_seed{:04}.csv", method.name(), seed);
        let digest = out.digest.clone();
        out.add_raw(
            &name,
            format!(
                "# manifest: {digest}\n{}",
                metrics.trajectory_csv.as_deref().unwrap_or("")
            ),
        );
        if *method == Method::Demem {
            let rows = metrics
                .epochs
                .iter()
                .map(|e| {
                    format!(
                        "{},{},{:.9},{}",
                        e.epoch,
                        e.start_round,
                        e.alpha,
                        e.stats.csv_row(e.eps_cert)
                    )
                })
                .collect();
            out.add_csv(
                &format!("epochs_demem_seed{seed:04}.csv"),
                &format!("epoch,start_round,alpha,{}", GraphStats::csv_header()),
                rows,
            );
        }
        finals
            .entry(method.name())
            .or_default()
            .push(metrics.final_regret);
    }
    // instance manifests (config plus generated structure) per seed
    for &seed in &config.seeds {
        let instance = generate_instance(config, config.env.alpha, seed)?;
        out.add_json(&format!("instance_seed{seed:04}.json"), &instance);
    }
    let rows = finals
        .iter()
        .map(|(name, vals)| {
            let (mean, std) = mean_std(vals);
            format!("{name},{},{mean:.6},{std:.6}", vals.len())
        })
        .collect();
    out.add_csv(
        "summary.csv",
        "method,cells,mean_final_regret,std_final_regret",
        rows,
    );
    Ok(out)
}

fn budget_sweep_outputs(config: &ExperimentConfig) -> Result<OutputSet> {
    let mut out = OutputSet::new(config_digest(config));
    let cells: Vec<(Method, usize, u64)> = config
        .methods
        .iter()
        .flat_map(|&m| {
            config
                .k_grid
                .iter()
                .flat_map(move |&k| config.seeds.iter().map(move |&s| (m, k, s)))
        })
        .collect();
    let results: Result<Vec<_>> = cells
        .par_iter()
        .map(|&(method, k, seed)| {
            let metrics = run_metric_cell(config, method, k, config.env.alpha, seed, false)?;
            Ok((method, k, seed, metrics))
        })
        .collect();
    let mut results = results?;
    results.sort_by_key(|(m, k, s, _)| (m.name(), *k, *s));

    let mut grouped: BTreeMap<(&str, usize), Vec<&CellMetrics>> = BTreeMap::new();
    for (method, k, _, metrics) in &results {
        grouped
            .entry((method.name(), *k))
            .or_default()
            .push(metrics);
    }
    let rows = grouped
        .iter()
        .map(|((name, k), cells)| {
            let collect = |f: fn(&CellMetrics) -> f64| -> Vec<f64> {
                cells.iter().map(|c| f(c)).collect()
            };
            let (regret_m, regret_s) = mean_std(&collect(|c| c.final_regret));
            let (dval_m, dval_s) = mean_std(&collect(|c| c.d_val));
            let (dact_m, _) = mean_std(&collect(|c| c.d_action));
            let (dstar_m, _) = mean_std(&collect(|c| c.d_star));
            format!(
                "{name},{k},{},{regret_m:.6},{regret_s:.6},{dval_m:.6},{dval_s:.6},{dact_m:.6},{dstar_m:.6}",
                cells.len()
            )
        })
        .collect();
    out.add_csv(
        "summary.csv",
        "method,k,cells,mean_final_regret,std_final_regret,mean_d_val,std_d_val,mean_d_action,mean_d_star",
        rows,
    );
    Ok(out)
}

fn mismatch_sweep_outputs(config: &ExperimentConfig) -> Result<OutputSet> {
    let mut out = OutputSet::new(config_digest(config));
    let cells: Vec<(Method, usize, u64)> = config
        .methods
        .iter()
        .flat_map(|&m| {
            (0..config.alpha_grid.len())
                .flat_map(move |ai| config.seeds.iter().map(move |&s| (m, ai, s)))
        })
        .collect();
    let results: Result<Vec<_>> = cells
        .par_iter()
        .map(|&(method, alpha_idx, seed)| {
            let alpha = config.alpha_grid[alpha_idx];
            let metrics = run_metric_cell(config, method, config.k, alpha, seed, false)?;
            Ok((method, alpha_idx, seed, metrics.final_regret))
        })
        .collect();
    let mut results = results?;
    results.sort_by_key(|(m, ai, s, _)| (m.name(), *ai, *s));

    let mut grouped: BTreeMap<(&str, usize), Vec<f64>> = BTreeMap::new();
    for (method, alpha_idx, _, regret) in &results {
        grouped
            .entry((method.name(), *alpha_idx))
            .or_default()
            .push(*regret);
    }
    let rows = grouped
        .iter()
        .map(|((name, alpha_idx), vals)| {
            let (mean, std) = mean_std(vals);
            format!(
                "{name},{:.4},{},{mean:.6},{std:.6}",
                config.alpha_grid[*alpha_idx],
                vals.len()
            )
        })
        .collect();
    out.add_csv(
        "summary.csv",
        "method,alpha,cells,mean_final_regret,std_final_regret",
        rows,
    );

    // seed-averaged curves and their rank correlation with the grid
    #[derive(Serialize)]
    struct CurveReport {
        method: String,
        means: Vec<f64>,
        spearman_vs_alpha: f64,
        increase_0_to_1: f64,
    }
    #[derive(Serialize)]
    struct SweepReport {
        alpha_grid: Vec<f64>,
        curves: Vec<CurveReport>,
    }
    let mut curves = Vec::new();
    for &method in &config.methods {
        let means: Vec<f64> = (0..config.alpha_grid.len())
            .map(|ai| {
                let vals = &grouped[&(method.name(), ai)];
                vals.iter().sum::<f64>() / vals.len() as f64
            })
            .collect();
        curves.push(CurveReport {
            method: method.name().to_string(),
            spearman_vs_alpha: spearman(&config.alpha_grid, &means),
            increase_0_to_1: means.last().unwrap() - means.first().unwrap(),
            means,
        });
    }
    curves.sort_by(|a, b| a.method.cmp(&b.method));
    out.add_json(
        "report.json",
        &SweepReport {
            alpha_grid: config.alpha_grid.clone(),
            curves,
        },
    );
    Ok(out)
}

fn partition_validation_outputs(config: &ExperimentConfig) -> Result<OutputSet> {
    let mut out = OutputSet::new(config_digest(config));
    let methods: Vec<Method> = config
        .methods
        .iter()
        .copied()
        .filter(Method::has_partition)
        .collect();
    let cells: Vec<(Method, u64)> = methods
        .iter()
        .flat_map(|&m| config.seeds.iter().map(move |&s| (m, s)))
        .collect();
    let results: Result<Vec<_>> = cells
        .par_iter()
        .map(|&(method, seed)| {
            let metrics = run_metric_cell(config, method, config.k, config.env.alpha, seed, false)?;
            Ok((method, seed, metrics))
        })
        .collect();
    let mut results = results?;
    results.sort_by_key(|(m, s, _)| (m.name(), *s));

    let rows = results
        .iter()
        .map(|(method, seed, m)| {
            format!(
                "{},{seed},{:.6},{:.6},{:.6}",
                method.name(),
                m.d_star,
                m.d_val,
                m.final_regret
            )
        })
        .collect();
    out.add_csv("points.csv", "method,seed,d_star,d_val,final_regret", rows);

    let d_star: Vec<f64> = results.iter().map(|(_, _, m)| m.d_star).collect();
    let regret: Vec<f64> = results.iter().map(|(_, _, m)| m.final_regret).collect();
    #[derive(Serialize)]
    struct CouplingReport {
        points: usize,
        spearman_d_star_vs_regret: f64,
    }
    out.add_json(
        "report.json",
        &CouplingReport {
            points: results.len(),
            spearman_d_star_vs_regret: spearman(&d_star, &regret),
        },
    );
    Ok(out)
}

/// One oracle-validation row.
#[derive(Debug, Clone, Serialize)]
pub struct OracleValidationRow {
    pub seed: u64,
    pub k: usize,
    pub alpha_greedy: f64,
    pub alpha_star: f64,
    pub degen_plus_one_at_star: usize,
    pub degen_condition: bool,
    pub alpha_exact: bool,
    pub eps_cert: f64,
    pub eps_star: f64,
    /// Undefined when the frontier value is zero.
    pub ratio: Option<f64>,
}

/// Greedy certified distortion vs the exact frontier on one instance.
pub fn oracle_validation_cell(
    table: &RewardTable,
    k: usize,
    seed: u64,
) -> Result<OracleValidationRow> {
    let ledger = ObservationLedger::exact(table.clone(), 0.1)?;
    let observed: Vec<ContextId> = (0..table.num_contexts()).map(ContextId).collect();
    let partition = partitioner::greedy_partition(&ledger, &observed, k)?;
    let star = frontier::eps_star_inf(table, k)?.eps_star_inf;
    let gap = partitioner::graph_gap_report(&ledger, &observed, k)?;
    let ratio = if star > 1e-12 {
        Some(partition.eps_cert / star)
    } else if partition.eps_cert <= 1e-12 {
        Some(1.0)
    } else {
        None
    };
    Ok(OracleValidationRow {
        seed,
        k,
        alpha_greedy: gap.alpha_greedy,
        alpha_star: gap.alpha_star,
        degen_plus_one_at_star: gap.degen_plus_one_at_star,
        degen_condition: gap.degen_condition,
        alpha_exact: gap.exact,
        eps_cert: partition.eps_cert,
        eps_star: star,
        ratio,
    })
}

/// Per-K aggregate of the oracle validation.
#[derive(Debug, Clone, Serialize)]
pub struct OracleValidationSummary {
    pub k: usize,
    pub instances: usize,
    pub finite_ratios: usize,
    pub mean_ratio: f64,
    pub max_ratio: f64,
    pub min_ratio: f64,
    pub zero_gap_frequency: f64,
    pub alpha_exact_under_condition: bool,
    pub cert_never_below_star: bool,
}

pub fn summarize_oracle_validation(rows: &[OracleValidationRow]) -> Vec<OracleValidationSummary> {
    let mut by_k: BTreeMap<usize, Vec<&OracleValidationRow>> = BTreeMap::new();
    for row in rows {
        by_k.entry(row.k).or_default().push(row);
    }
    by_k.into_iter()
        .map(|(k, rows)| {
            let finite: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
            let (mean, _) = if finite.is_empty() {
                (f64::NAN, 0.0)
            } else {
                mean_std(&finite)
            };
            OracleValidationSummary {
                k,
                instances: rows.len(),
                finite_ratios: finite.len(),
                mean_ratio: mean,
                max_ratio: finite.iter().copied().fold(f64::NAN, f64::max),
                min_ratio: finite.iter().copied().fold(f64::NAN, f64::min),
                zero_gap_frequency: rows.iter().filter(|r| r.degen_condition).count() as f64
                    / rows.len() as f64,
                alpha_exact_under_condition: rows
                    .iter()
                    .filter(|r| r.degen_condition)
                    .all(|r| r.alpha_exact),
                cert_never_below_star: rows.iter().all(|r| r.eps_cert >= r.eps_star - 1e-12),
            }
        })
        .collect()
}

fn oracle_validation_outputs(config: &ExperimentConfig) -> Result<OutputSet> {
    if config.env.num_contexts > frontier::DEFAULT_PARTITION_CAP {
        return Err(Error::CapacityExceeded {
            what: "oracle validation (exact partition enumeration)",
            cap: frontier::DEFAULT_PARTITION_CAP,
            given: config.env.num_contexts,
        });
    }
    let mut out = OutputSet::new(config_digest(config));
    let cells: Vec<(u64, usize)> = config
        .seeds
        .iter()
        .flat_map(|&s| config.k_grid.iter().map(move |&k| (s, k)))
        .collect();
    let results: Result<Vec<_>> = cells
        .par_iter()
        .map(|&(seed, k)| {
            let instance = generate_instance(config, config.env.alpha, seed)?;
            let table = instance.export_reward_table()?;
            oracle_validation_cell(&table, k, seed)
        })
        .collect();
    let mut rows = results?;
    rows.sort_by_key(|r| (r.k, r.seed));

    let csv_rows = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{:.9},{:.9},{},{},{},{:.9},{:.9},{}",
                r.seed,
                r.k,
                r.alpha_greedy,
                r.alpha_star,
                r.degen_plus_one_at_star,
                r.degen_condition,
                r.alpha_exact,
                r.eps_cert,
                r.eps_star,
                r.ratio.map_or(String::new(), |v| format!("{v:.9}")),
            )
        })
        .collect();
    out.add_csv(
        "rows.csv",
        "seed,k,alpha_greedy,alpha_star,degen_plus_one_at_star,degen_condition,alpha_exact,eps_cert,eps_star,ratio",
        csv_rows,
    );
    #[derive(Serialize)]
    struct Report {
        per_k: Vec<OracleValidationSummary>,
    }
    out.add_json(
        "report.json",
        &Report {
            per_k: summarize_oracle_validation(&rows),
        },
    );
    Ok(out)
}

/// Outcome of the anytime-certificate Monte-Carlo audit at one confidence
/// level.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateAuditReport {
    pub delta: f64,
    pub runs: usize,
    pub violations: usize,
    pub frequency: f64,
    /// `delta` plus three binomial standard deviations.
    pub bound: f64,
    pub passed: bool,
}

/// Monte-Carlo audit of the anytime confidence event
/// `{forall x, a, t : LCB <= mu <= UCB}` over random Bernoulli tables with
/// uniformly random pulls. `noiseless` replaces Bernoulli draws with the
/// exact means, under which violations are impossible.
pub fn certificate_audit(
    delta: f64,
    runs: usize,
    horizon: usize,
    base_seed: u64,
    noiseless: bool,
) -> Result<CertificateAuditReport> {
    let n = 3;
    let a = 3;
    let violations: usize = (0..runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(run as u64));
            let mu: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..a).map(|_| rng.random::<f64>()).collect())
                .collect();
            let mut ledger: ObservationLedger =
                ObservationLedger::new(n, a, delta).expect("valid delta");
            for t in 1..=horizon {
                ledger.set_round(t);
                let x = rng.random_range(0..n);
                let act = rng.random_range(0..a);
                let reward = if noiseless {
                    mu[x][act]
                } else if rng.random::<f64>() < mu[x][act] {
                    1.0
                } else {
                    0.0
                };
                ledger.record(ContextId(x), ActionId(act), reward);
                for cx in 0..n {
                    for ca in 0..a {
                        let (x_id, a_id) = (ContextId(cx), ActionId(ca));
                        if mu[cx][ca] > ledger.ucb(x_id, a_id) + 1e-12
                            || mu[cx][ca] < ledger.lcb(x_id, a_id) - 1e-12
                        {
                            return 1;
                        }
                    }
                }
            }
            0
        })
        .sum();
    let frequency = violations as f64 / runs as f64;
    let bound = delta + 3.0 * (delta * (1.0 - delta) / runs as f64).sqrt();
    Ok(CertificateAuditReport {
        delta,
        runs,
        violations,
        frequency,
        bound,
        passed: frequency <= bound,
    })
}

fn certificate_audit_outputs(config: &ExperimentConfig) -> Result<OutputSet> {
    let mut out = OutputSet::new(config_digest(config));
    let audits: Result<Vec<CertificateAuditReport>> = config
        .audit
        .deltas
        .iter()
        .map(|&delta| {
            certificate_audit(
                delta,
                config.audit.runs,
                config.audit.horizon,
                config.env.seed,
                false,
            )
        })
        .collect();
    let noiseless = certificate_audit(0.1, 200, config.audit.horizon, config.env.seed, true)?;
    #[derive(Serialize)]
    struct Report {
        audits: Vec<CertificateAuditReport>,
        noiseless: CertificateAuditReport,
    }
    out.add_json(
        "report.json",
        &Report {
            audits: audits?,
            noiseless,
        },
    );
    Ok(out)
}

/// Paired plain-vs-restart outcome for one seed.
#[derive(Debug, Clone, Serialize)]
pub struct NonstationaryRow {
    pub seed: u64,
    pub piecewise_plain: f64,
    pub piecewise_restarted: f64,
    pub stationary_plain: f64,
    pub stationary_restarted: f64,
}

/// Runs the paired comparison on one seed: a piecewise environment whose
/// identities are redrawn at the change point, and the unchanged
/// stationary environment.
pub fn nonstationary_cell(config: &ExperimentConfig, seed: u64) -> Result<NonstationaryRow> {
    let change_round = config.change_round.unwrap_or(config.env.horizon / 2);
    let instance = generate_instance(config, config.env.alpha, seed)?;
    let spec = ChangeSpec {
        at_round: change_round,
        reseed: config.instance_seed(seed) ^ 0x5eed_5eed,
    };
    let learner_config = LearnerConfig {
        k: config.k,
        delta: config.learner.delta,
        gamma: config.learner.gamma,
        horizon: config.env.horizon,
        restart_period: None,
    };
    let restarted_config = LearnerConfig {
        restart_period: Some(config.learner.restart_period.unwrap_or(change_round)),
        ..learner_config
    };
    let run_seed = config.run_seed(seed);

    let mut env = DecoupledBandit::with_change(instance.clone(), run_seed, spec);
    let piecewise_plain = learner::run(&mut env, &learner_config)?.final_regret();
    let mut env = DecoupledBandit::with_change(instance.clone(), run_seed, spec);
    let piecewise_restarted =
        learner::run_with_restarts(&mut env, &restarted_config)?.final_regret();
    let mut env = DecoupledBandit::new(instance.clone(), run_seed);
    let stationary_plain = learner::run(&mut env, &learner_config)?.final_regret();
    let mut env = DecoupledBandit::new(instance, run_seed);
    let stationary_restarted =
        learner::run_with_restarts(&mut env, &restarted_config)?.final_regret();
    Ok(NonstationaryRow {
        seed,
        piecewise_plain,
        piecewise_restarted,
        stationary_plain,
        stationary_restarted,
    })
}

fn nonstationary_outputs(config: &ExperimentConfig) -> Result<OutputSet> {
    let mut out = OutputSet::new(config_digest(config));
    let results: Result<Vec<_>> = config
        .seeds
        .par_iter()
        .map(|&seed| nonstationary_cell(config, seed))
        .collect();
    let mut rows = results?;
    rows.sort_by_key(|r| r.seed);
    let csv_rows = rows
        .iter()
        .map(|r| {
            format!(
                "{},{:.6},{:.6},{:.6},{:.6}",
                r.seed,
                r.piecewise_plain,
                r.piecewise_restarted,
                r.stationary_plain,
                r.stationary_restarted
            )
        })
        .collect();
    out.add_csv(
        "rows.csv",
        "seed,piecewise_plain,piecewise_restarted,stationary_plain,stationary_restarted",
        csv_rows,
    );
    #[derive(Serialize)]
    struct Report {
        seeds: usize,
        mean_piecewise_plain: f64,
        mean_piecewise_restarted: f64,
        mean_stationary_plain: f64,
        mean_stationary_restarted: f64,
        restart_wins_piecewise: usize,
    }
    let mean = |f: fn(&NonstationaryRow) -> f64| -> f64 {
        rows.iter().map(f).sum::<f64>() / rows.len() as f64
    };
    out.add_json(
        "report.json",
        &Report {
            seeds: rows.len(),
            mean_piecewise_plain: mean(|r| r.piecewise_plain),
            mean_piecewise_restarted: mean(|r| r.piecewise_restarted),
            mean_stationary_plain: mean(|r| r.stationary_plain),
            mean_stationary_restarted: mean(|r| r.stationary_restarted),
            restart_wins_piecewise: rows
                .iter()
                .filter(|r| r.piecewise_restarted < r.piecewise_plain)
                .count(),
        },
    );
    Ok(out)
}

/// Planted-conflict slot stream outcome at one feedback-noise level.
#[derive(Debug, Clone, Serialize)]
pub struct SlotPrecisionRow {
    pub noise: f64,
    pub seed: u64,
    pub steps: usize,
    pub splits: usize,
    pub true_splits: usize,
    pub precision: f64,
    pub max_active: usize,
    pub budget_ok: bool,
    pub summary_ok: bool,
}

/// Drives a slot system over a planted-conflict stream built from an
/// environment instance: binary feedback (1 on the identity's optimal
/// action) flipped with probability `noise`, scripted alternating
/// exploration, capacity-dependent thresholds. A split is counted as true
/// when its witness pair genuinely prefers different actions.
pub fn slot_precision_cell(
    instance: &env::EnvInstance,
    noise: f64,
    seed: u64,
    steps: usize,
) -> Result<SlotPrecisionRow> {
    let k = instance.config.num_identities;
    let a = instance.num_actions();
    let config = SlotConfig {
        budget: k,
        num_actions: a,
        summary_budget: 48,
        tau_split: 0.5,
        tau_sat: 1.0,
        eta: 0.3,
    };
    let mut sys = SlotSystem::new(
        config,
        instance.config.feature_dim,
        Box::new(neg_distance_score),
        Box::new(move |slot: &Slot, input: &StepInput| {
            // scripted exploration: cycle the actions per context visit
            slot.items()
                .iter()
                .filter(|i| i.context == input.context)
                .count()
                % a
        }),
        Box::new(|input: &StepInput| format!("c{}", input.context)),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = instance.num_contexts();
    let mut max_active = 0usize;
    let mut summary_ok = true;
    for step in 0..steps {
        let x = step % n;
        let optimal = instance.optimal_action(ContextId(x)).0;
        let input = StepInput {
            context: x,
            features: instance.contexts[x].features.clone(),
            text: format!("c{x}"),
            round: step + 1,
        };
        let flip = rng.random::<f64>() < noise;
        sys.step(&input, |decision| {
            let clean = if decision == optimal { 1.0 } else { 0.0 };
            if flip {
                1.0 - clean
            } else {
                clean
            }
        })?;
        max_active = max_active.max(sys.active_slots());
        if sys
            .slots()
            .iter()
            .any(|s| s.summary_len() > sys.config().summary_budget)
        {
            summary_ok = false;
        }
    }
    let splits = sys.cannot_link_log().len();
    let true_splits = sys
        .cannot_link_log()
        .iter()
        .filter(|w| {
            instance.optimal_action(ContextId(w.x)) != instance.optimal_action(ContextId(w.x2))
        })
        .count();
    Ok(SlotPrecisionRow {
        noise,
        seed,
        steps,
        splits,
        true_splits,
        precision: if splits == 0 {
            1.0
        } else {
            true_splits as f64 / splits as f64
        },
        max_active,
        budget_ok: max_active <= k,
        summary_ok,
    })
}

/// JSON-lines event log of one short noiseless planted stream.
fn slot_event_sample(instance: &env::EnvInstance, steps: usize) -> Result<String> {
    let a = instance.num_actions();
    let config = SlotConfig {
        budget: instance.config.num_identities,
        num_actions: a,
        summary_budget: 48,
        tau_split: 0.5,
        tau_sat: 1.0,
        eta: 0.3,
    };
    let mut sys = SlotSystem::new(
        config,
        instance.config.feature_dim,
        Box::new(neg_distance_score),
        Box::new(move |slot: &Slot, input: &StepInput| {
            slot.items()
                .iter()
                .filter(|i| i.context == input.context)
                .count()
                % a
        }),
        Box::new(|input: &StepInput| format!("c{}", input.context)),
    )?;
    let n = instance.num_contexts();
    for step in 0..steps {
        let x = step % n;
        let optimal = instance.optimal_action(ContextId(x)).0;
        let input = StepInput {
            context: x,
            features: instance.contexts[x].features.clone(),
            text: format!("c{x}"),
            round: step + 1,
        };
        sys.step(
            &input,
            |decision| if decision == optimal { 1.0 } else { 0.0 },
        )?;
    }
    Ok(sys.events_jsonl())
}

/// Bridge decomposition audit of one synthetic slot run against the
/// identity-respecting reference partition.
pub fn slot_bridge_cell(instance: &env::EnvInstance, seed: u64) -> Result<slots::BridgeReport> {
    let _ = seed;
    let k = instance.config.num_identities;
    let a = instance.num_actions();
    let config = SlotConfig {
        budget: k,
        num_actions: a,
        summary_budget: 48,
        tau_split: 0.5,
        tau_sat: 1.0,
        eta: 0.3,
    };
    let mut sys = SlotSystem::new(
        config,
        instance.config.feature_dim,
        Box::new(neg_distance_score),
        Box::new(move |slot: &Slot, input: &StepInput| {
            slot.items()
                .iter()
                .filter(|i| i.context == input.context)
                .count()
                % a
        }),
        Box::new(|input: &StepInput| format!("c{}", input.context)),
    )?;
    let n = instance.num_contexts();
    for step in 0..(40 * n) {
        let x = step % n;
        let optimal = instance.optimal_action(ContextId(x)).0;
        let input = StepInput {
            context: x,
            features: instance.contexts[x].features.clone(),
            text: format!("c{x}"),
            round: step + 1,
        };
        sys.step(
            &input,
            |decision| if decision == optimal { 1.0 } else { 0.0 },
        )?;
    }

    let table = instance.export_reward_table()?;
    let reference = instance.identity_partition();
    let reference_actions: Vec<ActionId> = (0..instance.config.num_identities)
        .map(|z| {
            let row = &instance.mu[z];
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            ActionId(best)
        })
        .collect();

    // identify each slot with the reference cluster of the majority of
    // its member contexts (lowest cluster on ties)
    let slot_cluster: Vec<usize> = sys
        .slots()
        .iter()
        .map(|slot| {
            let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
            for item in slot.items() {
                *votes
                    .entry(reference.label(ContextId(item.context)))
                    .or_insert(0) += 1;
            }
            votes
                .into_iter()
                .max_by_key(|&(label, count)| (count, usize::MAX - label))
                .map(|(label, _)| label)
                .unwrap_or(0)
        })
        .collect();
    let mut routed = Vec::with_capacity(n);
    let mut decisions = Vec::with_capacity(n);
    for x in 0..n {
        let slot = sys.route(&instance.contexts[x].features)?;
        routed.push(slot_cluster[slot]);
        decisions.push(ActionId(sys.pooled_decision(slot)));
    }
    let dist = vec![1.0 / n as f64; n];
    bridge_decomposition(
        &table,
        &dist,
        &reference,
        &reference_actions,
        &routed,
        &decisions,
    )
}

fn slot_audit_outputs(config: &ExperimentConfig) -> Result<OutputSet> {
    let mut out = OutputSet::new(config_digest(config));
    let noise_grid = [0.0, 0.1, 0.2];
    let cells: Vec<(usize, u64)> = (0..noise_grid.len())
        .flat_map(|ni| config.seeds.iter().map(move |&s| (ni, s)))
        .collect();
    let results: Result<Vec<_>> = cells
        .par_iter()
        .map(|&(ni, seed)| {
            let instance = generate_instance(config, config.env.alpha, seed)?;
            slot_precision_cell(&instance, noise_grid[ni], seed, 10_000)
        })
        .collect();
    let mut rows = results?;
    rows.sort_by(|a, b| {
        a.noise
            .partial_cmp(&b.noise)
            .unwrap()
            .then(a.seed.cmp(&b.seed))
    });
    let csv_rows = rows
        .iter()
        .map(|r| {
            format!(
                "{:.2},{},{},{},{},{:.6},{},{},{}",
                r.noise,
                r.seed,
                r.steps,
                r.splits,
                r.true_splits,
                r.precision,
                r.max_active,
                r.budget_ok,
                r.summary_ok
            )
        })
        .collect();
    out.add_csv(
        "precision.csv",
        "noise,seed,steps,splits,true_splits,precision,max_active,budget_ok,summary_ok",
        csv_rows,
    );

    let bridge_results: Result<Vec<_>> = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let instance = generate_instance(config, config.env.alpha, seed)?;
            let report = slot_bridge_cell(&instance, seed)?;
            Ok((seed, report))
        })
        .collect();
    let mut bridge_rows = bridge_results?;
    bridge_rows.sort_by_key(|(seed, _)| *seed);
    let csv_rows = bridge_rows
        .iter()
        .map(|(seed, r)| {
            format!(
                "{seed},{:.6},{:.6},{:.6},{:.6},{}",
                r.compression,
                r.eta_route,
                r.eta_read,
                r.total,
                r.bound_holds()
            )
        })
        .collect();
    out.add_csv(
        "bridge.csv",
        "seed,compression,eta_route,eta_read,total,bound_holds",
        csv_rows,
    );

    // sample event log (route/split/suppress) from a short noiseless run
    if let Some(&seed) = config.seeds.first() {
        let instance = generate_instance(config, config.env.alpha, seed)?;
        let events = slot_event_sample(&instance, 40 * instance.num_contexts())?;
        out.add_raw("events_sample.jsonl", events);
    }

    #[derive(Serialize)]
    struct Report {
        mean_precision_by_noise: Vec<(f64, f64)>,
        precision_monotone_nonincreasing: bool,
        all_budgets_respected: bool,
        all_summaries_within_budget: bool,
        bridge_bound_holds_everywhere: bool,
    }
    let mut mean_by_noise = Vec::new();
    for &p in &noise_grid {
        let vals: Vec<f64> = rows
            .iter()
            .filter(|r| r.noise == p)
            .map(|r| r.precision)
            .collect();
        mean_by_noise.push((p, vals.iter().sum::<f64>() / vals.len().max(1) as f64));
    }
    let monotone = mean_by_noise.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
    out.add_json(
        "report.json",
        &Report {
            precision_monotone_nonincreasing: monotone,
            all_budgets_respected: rows.iter().all(|r| r.budget_ok),
            all_summaries_within_budget: rows.iter().all(|r| r.summary_ok),
            bridge_bound_holds_everywhere: bridge_rows.iter().all(|(_, r)| r.bound_holds()),
            mean_precision_by_noise: mean_by_noise,
        },
    );
    Ok(out)
}
