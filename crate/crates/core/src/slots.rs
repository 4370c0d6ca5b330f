//! Generic K-slot memory runtime with certified split-only refinement.
//!
//! Slots hold a vector prototype, a bounded summary (an item list under a
//! character budget), or both. Contexts are routed to the best-scoring
//! active slot, slot content is updated in place, and a slot is split only
//! when two co-routed contexts are certified to prefer conflicting
//! decisions. Once all `K` slots are active the runtime switches to a more
//! conservative threshold and suppresses further splits, logging them
//! instead; nothing is ever merged or evicted.
//!
//! Scoring, decision-making, and summary extraction are pluggable pure
//! functions, so the runtime runs fully synthetic. The guard-band and
//! candidate-restricted certificates mirror the same one-sided logic for
//! score-panel feedback, and the bridge decomposition audits a realized
//! run against a reference encoder.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ActionId, ContextId, Partition, RewardTable};

/// One stored memory item: the routed context's features plus an extracted
/// text payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryItem {
    pub context: usize,
    pub features: Vec<f64>,
    pub text: String,
}

/// A memory slot. At least one realization (prototype or summary) is
/// always present; the summary item list never exceeds the character
/// budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub id: usize,
    pub prototype: Option<Vec<f64>>,
    pub summary: Option<Vec<String>>,
    pub active: bool,
    items: Vec<MemoryItem>,
}

impl Slot {
    pub fn new(
        id: usize,
        prototype: Option<Vec<f64>>,
        summary: Option<Vec<String>>,
    ) -> Result<Self> {
        if prototype.is_none() && summary.is_none() {
            return Err(Error::InvalidData(
                "slot needs at least one realization".into(),
            ));
        }
        Ok(Slot {
            id,
            prototype,
            summary,
            active: false,
            items: Vec::new(),
        })
    }

    pub fn items(&self) -> &[MemoryItem] {
        &self.items
    }

    pub fn summary_len(&self) -> usize {
        self.summary
            .as_ref()
            .map_or(0, |s| s.iter().map(String::len).sum())
    }
}

/// Exponential prototype update `p <- (1 - eta) p + eta f`.
pub fn update_prototype(slot: &mut Slot, features: &[f64], eta: f64) -> Result<()> {
    let p = slot
        .prototype
        .as_mut()
        .ok_or_else(|| Error::InvalidState("prototype update on a slot without one".into()))?;
    if p.len() != features.len() {
        return Err(Error::InvalidData(format!(
            "feature dimension {} does not match prototype {}",
            features.len(),
            p.len()
        )));
    }
    for (slot_v, &f) in p.iter_mut().zip(features) {
        *slot_v = (1.0 - eta) * *slot_v + eta * f;
    }
    Ok(())
}

/// Appends an item to the summary and enforces the character budget by
/// evicting oldest items first. An item longer than the whole budget is
/// truncated to fit.
pub fn update_summary(slot: &mut Slot, item: &str, budget: usize) -> Result<()> {
    let summary = slot
        .summary
        .as_mut()
        .ok_or_else(|| Error::InvalidState("summary update on a slot without one".into()))?;
    if budget == 0 {
        summary.clear();
        return Ok(());
    }
    let mut entry = item.to_string();
    if entry.len() > budget {
        entry.truncate(budget);
    }
    summary.push(entry);
    compress_to_budget(summary, budget);
    Ok(())
}

fn compress_to_budget(summary: &mut Vec<String>, budget: usize) {
    let mut total: usize = summary.iter().map(String::len).sum();
    while total > budget && !summary.is_empty() {
        total -= summary.remove(0).len();
    }
}

/// Generic empirical split trigger: true when some pair of actions is
/// preferred in opposite directions by margin `beta` under the two
/// contexts' reward estimates.
pub fn cannot_link_test(estimates_x: &[f64], estimates_x2: &[f64], beta: f64) -> bool {
    let a = estimates_x.len();
    debug_assert_eq!(a, estimates_x2.len());
    for i in 0..a {
        for j in 0..a {
            if i == j {
                continue;
            }
            if estimates_x[i] - estimates_x[j] > beta && estimates_x2[j] - estimates_x2[i] > beta {
                return true;
            }
        }
    }
    false
}

/// Routing score plugged into the runtime. Pure function of its inputs.
pub type ScoreFn = dyn Fn(&[f64], &Slot) -> f64 + Send + Sync;
/// Decision rule given the routed slot and the step input.
pub type ActFn = dyn Fn(&Slot, &StepInput) -> usize + Send + Sync;
/// Memory-item extractor applied before summary updates.
pub type ExtractFn = dyn Fn(&StepInput) -> String + Send + Sync;

/// Cosine similarity against the slot prototype (0 for slots without one).
pub fn cosine_score(features: &[f64], slot: &Slot) -> f64 {
    let Some(p) = slot.prototype.as_ref() else {
        return 0.0;
    };
    let dot: f64 = features.iter().zip(p).map(|(a, b)| a * b).sum();
    let nx: f64 = features.iter().map(|v| v * v).sum::<f64>().sqrt();
    let np: f64 = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nx == 0.0 || np == 0.0 {
        0.0
    } else {
        dot / (nx * np)
    }
}

/// Negative squared distance to the prototype.
pub fn neg_distance_score(features: &[f64], slot: &Slot) -> f64 {
    let Some(p) = slot.prototype.as_ref() else {
        return f64::NEG_INFINITY;
    };
    -features
        .iter()
        .zip(p)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotConfig {
    /// Hard slot budget K.
    pub budget: usize,
    /// Number of decisions the feedback estimates range over.
    pub num_actions: usize,
    /// Per-slot summary character budget L.
    pub summary_budget: usize,
    /// Split threshold while capacity remains.
    pub tau_split: f64,
    /// Conservative threshold once all K slots are active; must be at
    /// least `tau_split`.
    pub tau_sat: f64,
    /// Prototype learning rate in (0, 1].
    pub eta: f64,
}

impl SlotConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 || self.num_actions == 0 {
            return Err(Error::InvalidParameter {
                name: "slot_config",
                message: "budget and action count must be positive".into(),
            });
        }
        if self.tau_sat < self.tau_split {
            return Err(Error::InvalidParameter {
                name: "tau_sat",
                message: "saturated threshold below the split threshold".into(),
            });
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "eta",
                message: "learning rate outside (0, 1]".into(),
            });
        }
        Ok(())
    }
}

/// One observed context arriving at the runtime.
#[derive(Debug, Clone)]
pub struct StepInput {
    pub context: usize,
    pub features: Vec<f64>,
    pub text: String,
    pub round: usize,
}

/// A logged cannot-link witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessEvent {
    pub round: usize,
    pub slot: usize,
    pub x: usize,
    pub x2: usize,
    pub threshold: f64,
}

/// One line of the runtime event log.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SlotEvent {
    Route {
        round: usize,
        context: usize,
        slot: usize,
    },
    Split {
        round: usize,
        slot: usize,
        new_slot: usize,
        x: usize,
        x2: usize,
        threshold: f64,
    },
    Suppress {
        round: usize,
        slot: usize,
        x: usize,
        x2: usize,
        threshold: f64,
    },
}

/// Outcome of one runtime step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub slot: usize,
    pub decision: usize,
    pub reward: f64,
    pub split: bool,
    pub suppressed: bool,
}

/// The K-slot runtime. Single writer; splits are the only event that
/// increases the active count, and nothing merges or evicts.
pub struct SlotSystem {
    config: SlotConfig,
    slots: Vec<Slot>,
    scorer: Box<ScoreFn>,
    act: Box<ActFn>,
    extract: Box<ExtractFn>,
    counts: BTreeMap<(usize, usize), usize>,
    sums: BTreeMap<(usize, usize), f64>,
    cannot_link: Vec<WitnessEvent>,
    saturated: Vec<WitnessEvent>,
    events: Vec<SlotEvent>,
}

impl SlotSystem {
    /// Starts with one active slot holding both realizations.
    pub fn new(
        config: SlotConfig,
        feature_dim: usize,
        scorer: Box<ScoreFn>,
        act: Box<ActFn>,
        extract: Box<ExtractFn>,
    ) -> Result<Self> {
        config.validate()?;
        let mut first = Slot::new(0, Some(vec![0.0; feature_dim]), Some(Vec::new()))?;
        first.active = true;
        Ok(SlotSystem {
            config,
            slots: vec![first],
            scorer,
            act,
            extract,
            counts: BTreeMap::new(),
            sums: BTreeMap::new(),
            cannot_link: Vec::new(),
            saturated: Vec::new(),
            events: Vec::new(),
        })
    }

    pub fn config(&self) -> &SlotConfig {
        &self.config
    }

    pub fn active_slots(&self) -> usize {
        self.slots.iter().filter(|s| s.active).count()
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn cannot_link_log(&self) -> &[WitnessEvent] {
        &self.cannot_link
    }

    pub fn saturated_log(&self) -> &[WitnessEvent] {
        &self.saturated
    }

    pub fn events(&self) -> &[SlotEvent] {
        &self.events
    }

    /// Event log as JSON lines for split-audit tooling.
    pub fn events_jsonl(&self) -> String {
        self.events
            .iter()
            .map(|e| serde_json::to_string(e).expect("events serialize"))
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn estimate(&self, context: usize, action: usize) -> Option<f64> {
        let n = *self.counts.get(&(context, action))?;
        if n == 0 {
            return None;
        }
        Some(self.sums[&(context, action)] / n as f64)
    }

    /// Full estimate vector, present only when every action was observed.
    fn estimate_vector(&self, context: usize) -> Option<Vec<f64>> {
        (0..self.config.num_actions)
            .map(|a| self.estimate(context, a))
            .collect()
    }

    /// Slot-level readout: the greedy decision from the pooled feedback
    /// estimates of the slot's member contexts (lowest index on ties,
    /// action 0 when nothing was observed). This is the deterministic
    /// decision the bounded slot state supports on its own.
    pub fn pooled_decision(&self, slot_id: usize) -> usize {
        let mut members: Vec<usize> = self.slots[slot_id]
            .items
            .iter()
            .map(|i| i.context)
            .collect();
        members.sort_unstable();
        members.dedup();
        let mut best = (f64::NEG_INFINITY, 0usize);
        for a in 0..self.config.num_actions {
            let mut count = 0usize;
            let mut sum = 0.0;
            for &c in &members {
                if let Some(&n) = self.counts.get(&(c, a)) {
                    count += n;
                    sum += self.sums[&(c, a)];
                }
            }
            let value = if count == 0 { 0.0 } else { sum / count as f64 };
            if value > best.0 {
                best = (value, a);
            }
        }
        best.1
    }

    /// Routes features to the best-scoring active slot, lowest id on ties.
    pub fn route(&self, features: &[f64]) -> Result<usize> {
        let mut best: Option<(f64, usize)> = None;
        for slot in &self.slots {
            if !slot.active {
                continue;
            }
            let score = (self.scorer)(features, slot);
            let better = match best {
                None => true,
                Some((b, _)) => score > b,
            };
            if better {
                best = Some((score, slot.id));
            }
        }
        best.map(|(_, id)| id)
            .ok_or_else(|| Error::InvalidState("no active slots to route to".into()))
    }

    /// Mean feature vector of an item set (the prototype initializer).
    fn mem_init_prototype(items: &[MemoryItem], dim: usize) -> Vec<f64> {
        if items.is_empty() {
            return vec![0.0; dim];
        }
        let mut mean = vec![0.0; dim];
        for item in items {
            for (m, &f) in mean.iter_mut().zip(&item.features) {
                *m += f;
            }
        }
        for m in &mut mean {
            *m /= items.len() as f64;
        }
        mean
    }

    /// Concatenated texts under the budget (the summary initializer).
    fn mem_init_summary(items: &[MemoryItem], budget: usize) -> Vec<String> {
        let mut summary = Vec::new();
        for item in items {
            if budget == 0 {
                break;
            }
            let mut text = item.text.clone();
            if text.len() > budget {
                text.truncate(budget);
            }
            summary.push(text);
        }
        compress_to_budget(&mut summary, budget);
        summary
    }

    /// Splits slot `slot_id` around a certified witness pair. The witness
    /// items seed two temporary anchors; every item follows its higher
    /// anchor score (ties keep the original slot), and both slots are
    /// reinitialized from the resulting item sets.
    pub fn execute_split(&mut self, slot_id: usize, witness: (usize, usize)) -> Result<usize> {
        if self.active_slots() >= self.config.budget {
            return Err(Error::CapacityExceeded {
                what: "active slots",
                cap: self.config.budget,
                given: self.active_slots() + 1,
            });
        }
        let dim = self.slots[slot_id].prototype.as_ref().map_or(0, Vec::len);
        let items = std::mem::take(&mut self.slots[slot_id].items);
        let anchor_items = |ctx: usize| -> Vec<MemoryItem> {
            items.iter().filter(|i| i.context == ctx).cloned().collect()
        };
        let seed_a = anchor_items(witness.0);
        let seed_b = anchor_items(witness.1);
        if seed_a.is_empty() || seed_b.is_empty() {
            self.slots[slot_id].items = items;
            return Err(Error::InvalidState(
                "witness contexts have no items in the split slot".into(),
            ));
        }
        let anchor_a = Slot {
            id: usize::MAX,
            prototype: Some(Self::mem_init_prototype(&seed_a, dim)),
            summary: Some(Self::mem_init_summary(&seed_a, self.config.summary_budget)),
            active: false,
            items: Vec::new(),
        };
        let anchor_b = Slot {
            id: usize::MAX,
            prototype: Some(Self::mem_init_prototype(&seed_b, dim)),
            summary: Some(Self::mem_init_summary(&seed_b, self.config.summary_budget)),
            active: false,
            items: Vec::new(),
        };
        let mut keep = Vec::new();
        let mut moved = Vec::new();
        for item in items {
            let stay = (self.scorer)(&item.features, &anchor_a)
                >= (self.scorer)(&item.features, &anchor_b);
            if stay {
                keep.push(item);
            } else {
                moved.push(item);
            }
        }
        let new_id = self.slots.len();
        let mut new_slot = Slot::new(
            new_id,
            Some(Self::mem_init_prototype(&moved, dim)),
            Some(Self::mem_init_summary(&moved, self.config.summary_budget)),
        )?;
        new_slot.active = true;
        new_slot.items = moved;
        let old = &mut self.slots[slot_id];
        old.prototype = Some(Self::mem_init_prototype(&keep, dim));
        old.summary = Some(Self::mem_init_summary(&keep, self.config.summary_budget));
        old.items = keep;
        self.slots.push(new_slot);
        Ok(new_id)
    }

    /// One runtime step: route, read, act, collect feedback, update slot
    /// content and statistics, then test the split trigger under the
    /// capacity-dependent threshold. Splits execute only below capacity;
    /// at capacity the witness is logged and suppressed.
    pub fn step(
        &mut self,
        input: &StepInput,
        feedback: impl FnOnce(usize) -> f64,
    ) -> Result<StepResult> {
        let slot_id = self.route(&input.features)?;
        self.events.push(SlotEvent::Route {
            round: input.round,
            context: input.context,
            slot: slot_id,
        });

        let decision = (self.act)(&self.slots[slot_id], input);
        if decision >= self.config.num_actions {
            return Err(Error::ActionOutOfRange {
                index: decision,
                a: self.config.num_actions,
            });
        }
        let reward = feedback(decision);

        *self.counts.entry((input.context, decision)).or_insert(0) += 1;
        *self.sums.entry((input.context, decision)).or_insert(0.0) += reward;

        let eta = self.config.eta;
        let budget = self.config.summary_budget;
        let text = (self.extract)(input);
        {
            let slot = &mut self.slots[slot_id];
            if slot.prototype.is_some() {
                update_prototype(slot, &input.features, eta)?;
            }
            if slot.summary.is_some() {
                update_summary(slot, &text, budget)?;
            }
            slot.items.push(MemoryItem {
                context: input.context,
                features: input.features.clone(),
                text,
            });
        }

        // capacity-dependent threshold, then the trigger scan against
        // co-routed contexts with full estimate vectors
        let at_capacity = self.active_slots() >= self.config.budget;
        let tau = if at_capacity {
            self.config.tau_sat
        } else {
            self.config.tau_split
        };
        let mut split = false;
        let mut suppressed = false;
        if let Some(own) = self.estimate_vector(input.context) {
            let mut cohabitants: Vec<usize> = self.slots[slot_id]
                .items
                .iter()
                .map(|i| i.context)
                .filter(|&c| c != input.context)
                .collect();
            cohabitants.sort_unstable();
            cohabitants.dedup();
            for other in cohabitants {
                let Some(theirs) = self.estimate_vector(other) else {
                    continue;
                };
                if !cannot_link_test(&own, &theirs, tau) {
                    continue;
                }
                let witness = WitnessEvent {
                    round: input.round,
                    slot: slot_id,
                    x: input.context,
                    x2: other,
                    threshold: tau,
                };
                if at_capacity {
                    self.saturated.push(witness);
                    self.events.push(SlotEvent::Suppress {
                        round: input.round,
                        slot: slot_id,
                        x: input.context,
                        x2: other,
                        threshold: tau,
                    });
                    suppressed = true;
                } else {
                    self.cannot_link.push(witness);
                    let new_slot = self.execute_split(slot_id, (input.context, other))?;
                    self.events.push(SlotEvent::Split {
                        round: input.round,
                        slot: slot_id,
                        new_slot,
                        x: input.context,
                        x2: other,
                        threshold: tau,
                    });
                    split = true;
                }
                break;
            }
        }
        Ok(StepResult {
            slot: slot_id,
            decision,
            reward,
            split,
            suppressed,
        })
    }
}

/// Score-panel constants for the guard-band certificates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScorerPanel {
    /// Number of feedback scorers B (at least 2 for a variance estimate).
    pub num_scorers: usize,
    /// Safety multiplier on the dispersion term.
    pub c_beta: f64,
    /// Variance floor preventing overconfidence from few scorers.
    pub sigma0_sq: f64,
    /// Calibration slack.
    pub eta_cal: f64,
}

impl ScorerPanel {
    pub fn validate(&self) -> Result<()> {
        if self.num_scorers < 2 {
            return Err(Error::InvalidParameter {
                name: "num_scorers",
                message: "guard bands need at least two scorers".into(),
            });
        }
        if self.sigma0_sq < 0.0 || self.eta_cal < 0.0 || self.c_beta < 0.0 {
            return Err(Error::InvalidParameter {
                name: "panel",
                message: "panel constants must be nonnegative".into(),
            });
        }
        Ok(())
    }
}

/// Guard band `c_beta * sqrt((var + sigma0^2) / B) + eta_cal` over one
/// score set.
pub fn guard_band(panel: &ScorerPanel, scores: &[f64]) -> Result<f64> {
    panel.validate()?;
    if scores.len() != panel.num_scorers {
        return Err(Error::InvalidData(format!(
            "expected {} scores, got {}",
            panel.num_scorers,
            scores.len()
        )));
    }
    let b = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / b;
    let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (b - 1.0);
    Ok(panel.c_beta * ((var + panel.sigma0_sq) / b).sqrt() + panel.eta_cal)
}

/// Candidate-restricted one-sided radius: clipped score envelopes per
/// candidate, the candidate-restricted optimal value per context, one-sided
/// losses, then the min over shared candidates of the pairwise max. An
/// edge is declared when the result exceeds the split tolerance.
pub fn candidate_restricted_radius(
    panel: &ScorerPanel,
    scores_x: &[Vec<f64>],
    scores_x2: &[Vec<f64>],
) -> Result<f64> {
    panel.validate()?;
    if scores_x.is_empty() || scores_x.len() != scores_x2.len() {
        return Err(Error::InvalidData(
            "both contexts need scores for the same nonempty candidate set".into(),
        ));
    }
    let envelopes = |scores: &[Vec<f64>]| -> Result<Vec<(f64, f64)>> {
        scores
            .iter()
            .map(|set| {
                let band = guard_band(panel, set)?;
                let mean = set.iter().sum::<f64>() / set.len() as f64;
                Ok(((mean - band).max(0.0), (mean + band).min(1.0)))
            })
            .collect()
    };
    let env_x = envelopes(scores_x)?;
    let env_x2 = envelopes(scores_x2)?;
    let star = |env: &[(f64, f64)]| env.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
    let star_x = star(&env_x);
    let star_x2 = star(&env_x2);
    let mut radius = f64::INFINITY;
    for u in 0..env_x.len() {
        let loss_x = (star_x - env_x[u].1).max(0.0);
        let loss_x2 = (star_x2 - env_x2[u].1).max(0.0);
        radius = radius.min(loss_x.max(loss_x2));
    }
    Ok(radius)
}

/// Measured decomposition of realized distortion into compression,
/// routing, and readout terms against a reference encoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeReport {
    /// Worst-case distortion of the reference `(g*, a*)` pair.
    pub compression: f64,
    /// Realized loss mass on rounds where routing disagrees with the
    /// reference encoder.
    pub eta_route: f64,
    /// Conditional excess loss over the reference action on agreement.
    pub eta_read: f64,
    /// Realized average distortion of the implemented decisions.
    pub total: f64,
}

impl BridgeReport {
    pub fn bound_holds(&self) -> bool {
        self.total <= self.compression + self.eta_route + self.eta_read + 1e-12
    }
}

/// Audits realized routing and decisions against a reference encoder with
/// per-cluster reference actions, under context distribution `dist`.
pub fn bridge_decomposition(
    table: &RewardTable,
    dist: &[f64],
    reference: &Partition,
    reference_actions: &[ActionId],
    routed: &[usize],
    decisions: &[ActionId],
) -> Result<BridgeReport> {
    let n = table.num_contexts();
    if reference.num_contexts() != n || dist.len() != n || routed.len() != n || decisions.len() != n
    {
        return Err(Error::InvalidData(
            "bridge audit inputs must cover every context".into(),
        ));
    }
    if reference_actions.len() != reference.budget() {
        return Err(Error::InvalidData(
            "one reference action per reference cluster required".into(),
        ));
    }
    let mut compression = 0.0f64;
    let mut total = 0.0;
    let mut route_mass = 0.0;
    let mut read_mass = 0.0;
    let mut agree_mass = 0.0;
    for x in 0..n {
        let x_id = ContextId(x);
        let g_star = reference.label(x_id);
        let a_star = reference_actions[g_star];
        let ref_loss = table.gap(x_id, a_star)?;
        compression = compression.max(ref_loss);
        let realized_loss = table.gap(x_id, decisions[x])?;
        total += dist[x] * realized_loss;
        let excess = table.entry(x_id, a_star) - table.entry(x_id, decisions[x]);
        if routed[x] == g_star {
            agree_mass += dist[x];
            read_mass += dist[x] * excess;
        } else {
            route_mass += dist[x] * excess;
        }
    }
    let eta_read = if agree_mass > 0.0 {
        read_mass / agree_mass
    } else {
        0.0
    };
    Ok(BridgeReport {
        compression,
        eta_route: route_mass,
        eta_read,
        total,
    })
}
