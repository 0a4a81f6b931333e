//! The expert node: holds the reputation ledger, grades every registered
//! node once per epoch and applies the admission policy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{
    classify_interval, classify_point, ClassificationMode, ClassificationOutcome, ClassifyError,
    CooperationClass, Grade, Method, NodeId, QueryRange,
};
use crate::reputation::{LedgerError, Observation, ReputationLedger};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExpertError {
    #[error("ledger has no registered nodes")]
    EmptyLedger,
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("node {node}: {source}")]
    Classify {
        node: NodeId,
        #[source]
        source: ClassifyError,
    },
}

/// Grades for one epoch. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationTable {
    pub epoch: u64,
    pub method: Method,
    pub mode: ClassificationMode,
    pub range: QueryRange,
    entries: BTreeMap<NodeId, ClassificationOutcome>,
}

impl ClassificationTable {
    pub fn new(
        epoch: u64,
        method: Method,
        mode: ClassificationMode,
        range: QueryRange,
        entries: BTreeMap<NodeId, ClassificationOutcome>,
    ) -> Self {
        Self {
            epoch,
            method,
            mode,
            range,
            entries,
        }
    }

    /// Builds a table directly from grades; handy for routing scenarios.
    pub fn from_grades(grades: impl IntoIterator<Item = (NodeId, Grade)>) -> Self {
        let entries = grades
            .into_iter()
            .map(|(n, g)| (n, ClassificationOutcome::Graded(g)))
            .collect();
        Self::new(
            0,
            Method::Point,
            ClassificationMode::Reconciled,
            QueryRange::new(50.0, 70.0).expect("constant range"),
            entries,
        )
    }

    pub fn outcome(&self, node: NodeId) -> Option<ClassificationOutcome> {
        self.entries.get(&node).copied()
    }

    pub fn grade(&self, node: NodeId) -> Option<Grade> {
        self.outcome(node).and_then(ClassificationOutcome::grade)
    }

    pub fn class(&self, node: NodeId) -> Option<CooperationClass> {
        self.grade(node).map(Grade::class)
    }

    pub fn entries(&self) -> impl Iterator<Item = (NodeId, ClassificationOutcome)> + '_ {
        self.entries.iter().map(|(&n, &o)| (n, o))
    }

    pub fn nodes_with(&self, grade: Grade) -> Vec<NodeId> {
        self.entries()
            .filter(|(_, o)| o.grade() == Some(grade))
            .map(|(n, _)| n)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Grades every node in the ledger. Verbatim error outcomes are kept in the
/// table rather than dropped.
pub fn classify_network(
    ledger: &ReputationLedger,
    range: QueryRange,
    method: Method,
    mode: ClassificationMode,
    epoch: u64,
) -> Result<ClassificationTable, ExpertError> {
    if ledger.is_empty() {
        return Err(ExpertError::EmptyLedger);
    }
    let mut entries = BTreeMap::new();
    for node in ledger.nodes() {
        let outcome = match method {
            Method::Point => {
                let r = ledger.point_reputation(node)?;
                classify_point(r.value(), range, mode)
            }
            Method::Interval => {
                let iv = ledger.interval_reputation(node)?;
                classify_interval(iv, range, mode)
            }
        }
        .map_err(|source| ExpertError::Classify { node, source })?;
        entries.insert(node, outcome);
    }
    Ok(ClassificationTable::new(
        epoch, method, mode, range, entries,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NodeStrength {
    pub high: usize,
    pub med: usize,
    pub low: usize,
    /// Verbatim-mode error outcomes.
    pub error: usize,
    pub total: usize,
}

impl NodeStrength {
    pub fn count(&self, g: Grade) -> usize {
        match g {
            Grade::High => self.high,
            Grade::Med => self.med,
            Grade::Low => self.low,
        }
    }
}

pub fn node_strength(table: &ClassificationTable) -> NodeStrength {
    let mut s = NodeStrength::default();
    for (_, o) in table.entries() {
        match o {
            ClassificationOutcome::Graded(Grade::High) => s.high += 1,
            ClassificationOutcome::Graded(Grade::Med) => s.med += 1,
            ClassificationOutcome::Graded(Grade::Low) => s.low += 1,
            ClassificationOutcome::ReputationValueError => s.error += 1,
        }
        s.total += 1;
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdmissionDecision {
    AlwaysAllowed,
    FallbackOnly,
    Isolated,
}

pub const DEFAULT_STRENGTH_MIN: usize = 4;

/// MED nodes are only a fallback while at least `strength_min` HIGH nodes
/// exist; below that the network counts as small and MED is admitted
/// outright. LOW is always isolated.
pub fn admit(grade: Grade, strength: &NodeStrength, strength_min: usize) -> AdmissionDecision {
    match grade {
        Grade::High => AdmissionDecision::AlwaysAllowed,
        Grade::Med if strength.high < strength_min => AdmissionDecision::AlwaysAllowed,
        Grade::Med => AdmissionDecision::FallbackOnly,
        Grade::Low => AdmissionDecision::Isolated,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpertConfig {
    pub range: QueryRange,
    pub method: Method,
    pub mode: ClassificationMode,
    pub strength_min: usize,
}

/// Stateful wrapper owning the ledger and the latest table.
#[derive(Debug, Clone)]
pub struct ExpertNode {
    config: ExpertConfig,
    ledger: ReputationLedger,
    table: ClassificationTable,
    epoch: u64,
}

impl ExpertNode {
    /// Registers `nodes`, seals their initial values as epoch 0 and grades
    /// them so an interval table is available before any traffic.
    pub fn new(
        config: ExpertConfig,
        mut ledger: ReputationLedger,
        nodes: impl IntoIterator<Item = NodeId>,
    ) -> Result<Self, ExpertError> {
        for n in nodes {
            ledger.register(n);
        }
        ledger.advance_epoch();
        let table = classify_network(&ledger, config.range, config.method, config.mode, 0)?;
        Ok(Self {
            config,
            ledger,
            table,
            epoch: 0,
        })
    }

    pub fn observe(&mut self, obs: &Observation) {
        self.ledger.record_observation(obs);
    }

    /// Seals the epoch and regrades.
    pub fn end_epoch(&mut self) -> Result<&ClassificationTable, ExpertError> {
        self.ledger.advance_epoch();
        self.epoch += 1;
        self.table = classify_network(
            &self.ledger,
            self.config.range,
            self.config.method,
            self.config.mode,
            self.epoch,
        )?;
        Ok(&self.table)
    }

    pub fn table(&self) -> &ClassificationTable {
        &self.table
    }

    pub fn ledger(&self) -> &ReputationLedger {
        &self.ledger
    }

    pub fn strength(&self) -> NodeStrength {
        node_strength(&self.table)
    }

    pub fn admission(&self, node: NodeId) -> Option<AdmissionDecision> {
        let g = self.table.grade(node)?;
        Some(admit(g, &self.strength(), self.config.strength_min))
    }
}
