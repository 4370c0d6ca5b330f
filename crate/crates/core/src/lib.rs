//! Decision-centric budgeted memory for contextual bandits.
//!
//! A learner that can keep only `K` runtime memory states must decide which
//! contexts may share a state. This crate measures that question in units of
//! decision quality rather than descriptive similarity, and provides:
//!
//! - [`model`] — the distortion calculus: reward tables, suboptimality gaps,
//!   pairwise decision distances, cluster decision radii, and partition
//!   distortion metrics.
//! - [`frontier`] — exact small-instance oracles for the memory–distortion
//!   frontier, decision covering/packing numbers, the information floor, and
//!   a verifiable Set-Cover reduction.
//! - [`certificates`] — time-uniform confidence statistics over
//!   (context, action) pairs and the derived one-sided distance and radius
//!   certificates.
//! - [`partitioner`] — the greedy budgeted partitioner: cannot-link graphs,
//!   degeneracy ordering, smallest-last greedy coloring, and binary search
//!   over certified conflict levels.
//! - [`learner`] — DeMem, the online learner with doubling epochs, frozen
//!   partitions, certification exploration, and cluster-level UCB, plus a
//!   fixed-restart wrapper for piecewise-stationary rewards.
//! - [`baselines`] — six comparison policies behind one policy interface.
//! - [`env`](mod@env) — the Decoupled Bandit diagnostic environment, where
//!   descriptive features and decision identities are deliberately
//!   misaligned.
//! - [`slots`] — a generic K-slot memory runtime with certified split-only
//!   refinement and pluggable scoring, so no language-model dependency
//!   exists.
//!
//! The numeric core ([`model`], [`frontier`], [`certificates`],
//! [`partitioner`]) is generic over the scalar type via [`Scalar`]; all
//! types default to `f64`, and `f32` aliases live at the crate root.
//!
//! ```
//! use demem_core::{frontier, RewardTable};
//!
//! // two contexts that disagree on the best action, but share a decent one
//! let table: RewardTable = RewardTable::new(vec![
//!     vec![1.0, 0.8],
//!     vec![0.7, 1.0],
//! ])?;
//! // with a single memory state the best worst-case decision loss is 0.2
//! let report = frontier::eps_star_inf(&table, 1)?;
//! assert!((report.eps_star_inf - 0.2).abs() < 1e-12);
//! // and one extra state removes the distortion entirely
//! assert_eq!(frontier::eps_star_inf(&table, 2)?.eps_star_inf, 0.0);
//! # Ok::<(), demem_core::Error>(())
//! ```

pub mod baselines;
pub mod certificates;
pub mod env;
pub mod error;
pub mod frontier;
pub mod learner;
pub mod model;
pub mod partitioner;
pub mod scalar;
pub mod slots;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use model::{ActionId, ContextId, Partition, QueryId, RewardTable};

/// Single-precision aliases for the generic numeric core.
pub type RewardTable32 = model::RewardTable<f32>;
pub type ObservationLedger32 = certificates::ObservationLedger<f32>;
pub type FrontierReport32 = frontier::FrontierReport<f32>;
