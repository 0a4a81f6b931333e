//! Reputation grading for mobile ad hoc networks.
//!
//! Nodes are graded `HIGH` (certain), `MED` (possible) or `LOW` (not
//! possible) against a query range `Q(x, y)`. An expert node keeps the
//! reputation ledger and the per-epoch grades; routing prefers HIGH-only
//! relays, falls back to MED relays, and never uses LOW ones. A round-based
//! simulator measures the packet delivery ratio of that policy against an
//! unfiltered minimum-hop baseline.

pub mod classifier;
pub mod cli;
pub mod expert;
pub mod fixtures;
pub mod reputation;
pub mod routing;
pub mod scenario;
pub mod simulator;
pub mod tables;

pub use classifier::{
    classify_batch, classify_interval, classify_point, grade_to_class, ClassificationMode,
    ClassificationOutcome, CooperationClass, Grade, Method, NodeId, QueryRange, Reputation,
    ReputationInput, ReputationInterval,
};
pub use expert::{
    admit, classify_network, node_strength, AdmissionDecision, ClassificationTable, NodeStrength,
};
pub use reputation::{Observation, ObservationKind, ReputationLedger, ReputationParams};
pub use routing::{
    allowed_subgraph, build_topology, select_path, RoutePath, Tier, Topology, TopologySpec,
};
pub use simulator::{
    compare, run, BehaviorProfile, CompareReport, Metrics, RoutingPolicy, SimConfig,
};
