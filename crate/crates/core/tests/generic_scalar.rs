//! The numeric core is generic over the scalar type; exercise it at f32
//! and check agreement with the f64 route within single-precision
//! tolerance.

use demem_core::certificates::ObservationLedger;
use demem_core::frontier;
use demem_core::model::{ActionId, ContextId};
use demem_core::{ObservationLedger32, RewardTable, RewardTable32};

fn paired_tables() -> (RewardTable, RewardTable32) {
    let rows64 = vec![
        vec![0.91, 0.13, 0.40],
        vec![0.22, 0.86, 0.55],
        vec![0.47, 0.29, 0.78],
        vec![0.90, 0.16, 0.33],
    ];
    let rows32: Vec<Vec<f32>> = rows64
        .iter()
        .map(|r| r.iter().map(|&v| v as f32).collect())
        .collect();
    (
        RewardTable::new(rows64).unwrap(),
        RewardTable32::new(rows32).unwrap(),
    )
}

#[test]
fn distortion_calculus_agrees_across_scalars() {
    let (t64, t32) = paired_tables();
    for x in 0..4 {
        for y in 0..4 {
            let d64 = t64.decision_distance(ContextId(x), ContextId(y)).unwrap();
            let d32 = t32.decision_distance(ContextId(x), ContextId(y)).unwrap();
            assert!((d64 - d32 as f64).abs() < 1e-6);
        }
    }
    let cluster = [ContextId(0), ContextId(1), ContextId(2)];
    let (r64, a64) = t64.cluster_radius(&cluster).unwrap();
    let (r32, a32) = t32.cluster_radius(&cluster).unwrap();
    assert_eq!(a64, a32);
    assert!((r64 - r32 as f64).abs() < 1e-6);
}

#[test]
fn frontier_oracle_agrees_across_scalars() {
    let (t64, t32) = paired_tables();
    for k in 1..=4 {
        let r64 = frontier::eps_star_inf(&t64, k).unwrap();
        let r32 = frontier::eps_star_inf(&t32, k).unwrap();
        assert!((r64.eps_star_inf - r32.eps_star_inf as f64).abs() < 1e-6);
    }
    for &eps in &[0.05f64, 0.2, 0.5] {
        assert_eq!(
            frontier::covering_number(&t64, eps).unwrap(),
            frontier::covering_number(&t32, eps as f32).unwrap()
        );
        assert_eq!(
            frontier::packing_number(&t64, eps).unwrap(),
            frontier::packing_number(&t32, eps as f32).unwrap()
        );
    }
}

#[test]
fn certificates_agree_across_scalars() {
    let mut l64: ObservationLedger = ObservationLedger::new(2, 2, 0.1).unwrap();
    let mut l32: ObservationLedger32 = ObservationLedger32::new(2, 2, 0.1f32).unwrap();
    let pulls = [
        (0usize, 0usize, 0.9),
        (0, 1, 0.2),
        (1, 0, 0.4),
        (1, 1, 0.7),
        (0, 0, 0.8),
        (1, 1, 0.6),
    ];
    for &(x, a, r) in &pulls {
        l64.record(ContextId(x), ActionId(a), r);
        l32.record(ContextId(x), ActionId(a), r as f32);
    }
    l64.set_round(6);
    l32.set_round(6);
    let (lo64, hi64) = l64
        .pair_distance_bounds(ContextId(0), ContextId(1))
        .unwrap();
    let (lo32, hi32) = l32
        .pair_distance_bounds(ContextId(0), ContextId(1))
        .unwrap();
    assert!((lo64 - lo32 as f64).abs() < 1e-6);
    assert!((hi64 - hi32 as f64).abs() < 1e-6);
}
