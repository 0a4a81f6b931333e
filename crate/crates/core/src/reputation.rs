//! Per-node reputation bookkeeping driven by forwarding observations.
//!
//! This is a deliberately small additive model: each observed forward adds
//! `reward`, each observed drop subtracts `penalty`, and the value is clamped
//! to `[0, 100]`. At each epoch boundary the current value is sealed into a
//! ring of the last `window` values, from which interval reputations are
//! taken as `[min, max]`.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{NodeId, Reputation, ReputationInterval, MAXR, MINR};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("node {0} is not registered")]
    UnknownNode(NodeId),
    #[error("node {0} has no sealed epochs")]
    NoHistory(NodeId),
    #[error("invalid reputation parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservationKind {
    Forwarded,
    Dropped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub observer: NodeId,
    pub subject: NodeId,
    pub epoch: u64,
    pub kind: ObservationKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReputationParams {
    pub initial: f64,
    pub reward: f64,
    pub penalty: f64,
    pub window: usize,
}

impl Default for ReputationParams {
    fn default() -> Self {
        Self {
            initial: 50.0,
            reward: 1.0,
            penalty: 2.0,
            window: 5,
        }
    }
}

impl ReputationParams {
    pub fn validate(&self) -> Result<(), LedgerError> {
        if !(MINR..=MAXR).contains(&self.initial) {
            return Err(LedgerError::InvalidParams(format!(
                "initial value {} outside [0, 100]",
                self.initial
            )));
        }
        if !(self.reward.is_finite() && self.reward >= 0.0) {
            return Err(LedgerError::InvalidParams(format!(
                "reward {} must be >= 0",
                self.reward
            )));
        }
        if !(self.penalty.is_finite() && self.penalty >= 0.0) {
            return Err(LedgerError::InvalidParams(format!(
                "penalty {} must be >= 0",
                self.penalty
            )));
        }
        if self.window == 0 {
            return Err(LedgerError::InvalidParams("window must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NodeRecord {
    value: Reputation,
    history: VecDeque<Reputation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReputationLedger {
    params: ReputationParams,
    nodes: BTreeMap<NodeId, NodeRecord>,
}

impl ReputationLedger {
    pub fn new(params: ReputationParams) -> Result<Self, LedgerError> {
        params.validate()?;
        Ok(Self {
            params,
            nodes: BTreeMap::new(),
        })
    }

    pub fn params(&self) -> &ReputationParams {
        &self.params
    }

    /// Registers `node` at the initial value. No-op if already known.
    pub fn register(&mut self, node: NodeId) {
        let initial = Reputation::clamped(self.params.initial);
        self.nodes.entry(node).or_insert_with(|| NodeRecord {
            value: initial,
            history: VecDeque::with_capacity(self.params.window),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.keys().copied()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.nodes.contains_key(&node)
    }

    /// Applies one observation to its subject, registering it if unseen.
    pub fn record_observation(&mut self, obs: &Observation) {
        self.register(obs.subject);
        let (reward, penalty) = (self.params.reward, self.params.penalty);
        let rec = self.nodes.get_mut(&obs.subject).expect("registered above");
        let v = rec.value.value();
        rec.value = match obs.kind {
            ObservationKind::Forwarded => Reputation::clamped(v + reward),
            ObservationKind::Dropped => Reputation::clamped(v - penalty),
        };
    }

    pub fn point_reputation(&self, node: NodeId) -> Result<Reputation, LedgerError> {
        self.nodes
            .get(&node)
            .map(|r| r.value)
            .ok_or(LedgerError::UnknownNode(node))
    }

    /// Seals every node's current value into its history ring.
    pub fn advance_epoch(&mut self) {
        let window = self.params.window;
        for rec in self.nodes.values_mut() {
            if rec.history.len() == window {
                rec.history.pop_front();
            }
            rec.history.push_back(rec.value);
        }
    }

    pub fn history(&self, node: NodeId) -> Result<Vec<f64>, LedgerError> {
        self.nodes
            .get(&node)
            .map(|r| r.history.iter().map(|v| v.value()).collect())
            .ok_or(LedgerError::UnknownNode(node))
    }

    /// `[min, max]` over the sealed history.
    pub fn interval_reputation(&self, node: NodeId) -> Result<ReputationInterval, LedgerError> {
        let rec = self
            .nodes
            .get(&node)
            .ok_or(LedgerError::UnknownNode(node))?;
        let mut it = rec.history.iter().map(|v| v.value());
        let first = it.next().ok_or(LedgerError::NoHistory(node))?;
        let (lo, hi) = it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v)));
        Ok(ReputationInterval { p: lo, q: hi })
    }

    pub fn snapshot(&self) -> BTreeMap<NodeId, f64> {
        self.nodes
            .iter()
            .map(|(&id, r)| (id, r.value.value()))
            .collect()
    }

    /// Test and fixture helper: overwrite a node's current value.
    pub fn set_value(&mut self, node: NodeId, value: Reputation) {
        self.register(node);
        self.nodes.get_mut(&node).expect("registered above").value = value;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ledger() -> ReputationLedger {
        ReputationLedger::new(ReputationParams::default()).unwrap()
    }

    fn obs(subject: NodeId, kind: ObservationKind) -> Observation {
        Observation {
            observer: 0,
            subject,
            epoch: 0,
            kind,
        }
    }

    #[test]
    fn single_updates_and_clamps() {
        let mut l = ledger();
        l.record_observation(&obs(1, ObservationKind::Forwarded));
        assert_eq!(l.point_reputation(1).unwrap().value(), 51.0);

        l.set_value(2, Reputation::new(100.0).unwrap());
        l.record_observation(&obs(2, ObservationKind::Forwarded));
        assert_eq!(l.point_reputation(2).unwrap().value(), 100.0);

        l.set_value(3, Reputation::new(1.0).unwrap());
        l.record_observation(&obs(3, ObservationKind::Dropped));
        assert_eq!(l.point_reputation(3).unwrap().value(), 0.0);
    }

    #[test]
    fn point_reputation_arithmetic() {
        let mut l = ledger();
        l.register(7);
        assert_eq!(l.point_reputation(7).unwrap().value(), 50.0);
        for _ in 0..10 {
            l.record_observation(&obs(7, ObservationKind::Forwarded));
        }
        // 50 + 10 * 1
        assert_eq!(l.point_reputation(7).unwrap().value(), 60.0);

        for _ in 0..30 {
            l.record_observation(&obs(8, ObservationKind::Dropped));
        }
        // max(0, 50 - 60)
        assert_eq!(l.point_reputation(8).unwrap().value(), 0.0);
        assert_eq!(l.point_reputation(99), Err(LedgerError::UnknownNode(99)));
    }

    #[test]
    fn epoch_ring() {
        let mut l = ledger();
        l.register(1);
        l.advance_epoch();
        assert_eq!(l.history(1).unwrap(), vec![50.0]);

        let mut l = ledger();
        for v in [46.0, 52.0, 60.0, 55.0, 58.0] {
            l.set_value(1, Reputation::new(v).unwrap());
            l.advance_epoch();
        }
        assert_eq!(l.history(1).unwrap(), vec![46.0, 52.0, 60.0, 55.0, 58.0]);
        assert_eq!(
            l.interval_reputation(1).unwrap(),
            ReputationInterval { p: 46.0, q: 60.0 }
        );

        l.set_value(1, Reputation::new(70.0).unwrap());
        l.advance_epoch();
        assert_eq!(l.history(1).unwrap(), vec![52.0, 60.0, 55.0, 58.0, 70.0]);
        // current value carries over
        assert_eq!(l.point_reputation(1).unwrap().value(), 70.0);
    }

    #[test]
    fn interval_examples() {
        let mut l = ledger();
        l.set_value(4, Reputation::new(78.0).unwrap());
        l.advance_epoch();
        assert_eq!(
            l.interval_reputation(4).unwrap(),
            ReputationInterval { p: 78.0, q: 78.0 }
        );

        let mut l = ledger();
        for v in [90.0, 95.0, 92.0, 94.0, 91.0] {
            l.set_value(3, Reputation::new(v).unwrap());
            l.advance_epoch();
        }
        assert_eq!(
            l.interval_reputation(3).unwrap(),
            ReputationInterval { p: 90.0, q: 95.0 }
        );
    }

    #[test]
    fn interval_needs_history() {
        let mut l = ledger();
        l.register(1);
        assert_eq!(l.interval_reputation(1), Err(LedgerError::NoHistory(1)));
        assert_eq!(l.interval_reputation(2), Err(LedgerError::UnknownNode(2)));
    }

    #[test]
    fn params_validation() {
        let bad = ReputationParams {
            window: 0,
            ..Default::default()
        };
        assert!(ReputationLedger::new(bad).is_err());
        let bad = ReputationParams {
            initial: 120.0,
            ..Default::default()
        };
        assert!(ReputationLedger::new(bad).is_err());
        let bad = ReputationParams {
            penalty: -1.0,
            ..Default::default()
        };
        assert!(ReputationLedger::new(bad).is_err());
    }

    fn kind() -> impl Strategy<Value = ObservationKind> {
        prop_oneof![
            Just(ObservationKind::Forwarded),
            Just(ObservationKind::Dropped)
        ]
    }

    proptest! {
        #[test]
        fn values_stay_clamped(
            seq in prop::collection::vec((0u32..4, kind(), any::<bool>()), 0..300),
            reward in 0.0f64..30.0,
            penalty in 0.0f64..30.0,
        ) {
            let params = ReputationParams { reward, penalty, ..Default::default() };
            let mut l = ReputationLedger::new(params).unwrap();
            for (subject, kind, seal) in seq {
                l.record_observation(&obs(subject, kind));
                if seal {
                    l.advance_epoch();
                }
                for v in l.snapshot().values() {
                    prop_assert!((0.0..=100.0).contains(v));
                }
                for n in l.nodes().collect::<Vec<_>>() {
                    let h = l.history(n).unwrap();
                    prop_assert!(h.len() <= 5);
                    if let Ok(iv) = l.interval_reputation(n) {
                        let lo = h.iter().copied().fold(f64::INFINITY, f64::min);
                        let hi = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        prop_assert_eq!(iv.p, lo);
                        prop_assert_eq!(iv.q, hi);
                        prop_assert!(iv.p <= iv.q);
                    }
                }
            }
        }

        #[test]
        fn forward_only_never_decreases(n in 0usize..200, reward in 0.0f64..10.0) {
            let params = ReputationParams { reward, ..Default::default() };
            let mut l = ReputationLedger::new(params).unwrap();
            l.register(1);
            let mut prev = l.point_reputation(1).unwrap().value();
            for _ in 0..n {
                l.record_observation(&obs(1, ObservationKind::Forwarded));
                let v = l.point_reputation(1).unwrap().value();
                prop_assert!(v >= prev);
                prev = v;
            }
        }

        #[test]
        fn deterministic_replay(seq in prop::collection::vec((0u32..5, kind()), 0..100)) {
            let run = || {
                let mut l = ledger();
                for (i, &(s, k)) in seq.iter().enumerate() {
                    l.record_observation(&obs(s, k));
                    if i % 7 == 6 {
                        l.advance_epoch();
                    }
                }
                l
            };
            prop_assert_eq!(run(), run());
        }
    }
}
