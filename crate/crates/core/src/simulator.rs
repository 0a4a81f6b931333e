//! Round-based packet-forwarding simulation.
//!
//! Each epoch generates `flows_per_epoch` single-packet flows between random
//! member pairs, routes them (grade-filtered or unfiltered), and walks every
//! packet hop by hop. The upstream node of each relay reports whether the
//! relay forwarded or dropped; the expert node folds those observations into
//! the ledger and regrades at the epoch boundary.
//!
//! Randomness is split into independent ChaCha streams (profiles, traffic,
//! relay behaviour, detection, link loss) so both routing policies see the
//! same traffic for a given seed.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{
    ClassificationMode, ClassificationOutcome, Grade, Method, NodeId, QueryRange,
};
use crate::expert::{node_strength, ExpertConfig, ExpertError, ExpertNode, DEFAULT_STRENGTH_MIN};
use crate::reputation::{
    LedgerError, Observation, ObservationKind, ReputationLedger, ReputationParams,
};
use crate::routing::{
    baseline_path, build_topology, select_path, Tier, Topology, TopologyError, TopologySpec,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid {field}: {reason}")]
    Config { field: String, reason: String },
    #[error("topology: {0}")]
    Topology(#[from] TopologyError),
    #[error("reputation: {0}")]
    Ledger(#[from] LedgerError),
    #[error("classification: {0}")]
    Expert(#[from] ExpertError),
}

fn config_err(field: &str, reason: impl Into<String>) -> SimError {
    SimError::Config {
        field: field.to_owned(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BehaviorProfile {
    #[default]
    Cooperative,
    /// Drops each relayed packet with the given probability.
    Selfish(f64),
    Blackhole,
}

impl BehaviorProfile {
    pub fn drop_probability(self) -> f64 {
        match self {
            BehaviorProfile::Cooperative => 0.0,
            BehaviorProfile::Selfish(p) => p,
            BehaviorProfile::Blackhole => 1.0,
        }
    }

    pub fn is_misbehaving(self) -> bool {
        self.drop_probability() > 0.0
    }

    fn validate(self) -> Result<(), String> {
        match self {
            BehaviorProfile::Selfish(p) if !(0.0..=1.0).contains(&p) => {
                Err(format!("selfish drop probability {p} outside [0, 1]"))
            }
            _ => Ok(()),
        }
    }
}

/// Explicit per-node profiles, plus optional seeded random assignment of
/// blackhole and selfish nodes among the remaining members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileAssignment {
    pub default: BehaviorProfile,
    pub nodes: BTreeMap<NodeId, BehaviorProfile>,
    pub blackhole_fraction: f64,
    pub selfish_fraction: f64,
    pub selfish_drop: f64,
}

impl Default for ProfileAssignment {
    fn default() -> Self {
        Self {
            default: BehaviorProfile::Cooperative,
            nodes: BTreeMap::new(),
            blackhole_fraction: 0.0,
            selfish_fraction: 0.0,
            selfish_drop: 0.5,
        }
    }
}

impl ProfileAssignment {
    /// Resolves a profile for every member. Random picks are rounded to the
    /// nearest whole node.
    pub fn resolve(
        &self,
        members: &[NodeId],
        rng: &mut ChaCha8Rng,
    ) -> BTreeMap<NodeId, BehaviorProfile> {
        let mut out: BTreeMap<NodeId, BehaviorProfile> = members
            .iter()
            .map(|&n| (n, self.nodes.get(&n).copied().unwrap_or(self.default)))
            .collect();
        let mut free: Vec<NodeId> = members
            .iter()
            .copied()
            .filter(|n| !self.nodes.contains_key(n))
            .collect();
        let n_black = (self.blackhole_fraction * free.len() as f64).round() as usize;
        let n_selfish = ((self.selfish_fraction * free.len() as f64).round() as usize)
            .min(free.len() - n_black);
        if n_black + n_selfish > 0 {
            free.shuffle(rng);
            for &n in &free[..n_black] {
                out.insert(n, BehaviorProfile::Blackhole);
            }
            for &n in &free[n_black..n_black + n_selfish] {
                out.insert(n, BehaviorProfile::Selfish(self.selfish_drop));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoutingPolicy {
    #[default]
    PcFiltered,
    UnfilteredBaseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub topology: TopologySpec,
    pub relay_expert: bool,
    pub profiles: ProfileAssignment,
    pub range: QueryRange,
    pub method: Method,
    pub mode: ClassificationMode,
    pub reputation: ReputationParams,
    pub strength_min: usize,
    pub epochs: u32,
    pub warmup_epochs: u32,
    pub flows_per_epoch: u32,
    pub policy: RoutingPolicy,
    pub detection_probability: f64,
    pub link_loss: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            topology: TopologySpec::PaperGrid,
            relay_expert: false,
            profiles: ProfileAssignment::default(),
            range: QueryRange::new(50.0, 70.0).expect("constant range"),
            method: Method::Point,
            mode: ClassificationMode::Reconciled,
            reputation: ReputationParams::default(),
            strength_min: DEFAULT_STRENGTH_MIN,
            epochs: 100,
            warmup_epochs: 10,
            flows_per_epoch: 10,
            policy: RoutingPolicy::PcFiltered,
            detection_probability: 1.0,
            link_loss: 0.0,
            seed: 1,
        }
    }
}

const STREAM_PROFILES: u64 = 1;
const STREAM_TRAFFIC: u64 = 2;
const STREAM_BEHAVIOR: u64 = 3;
const STREAM_DETECTION: u64 = 4;
const STREAM_LINK: u64 = 5;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.epochs <= self.warmup_epochs {
            return Err(config_err(
                "run.epochs",
                format!(
                    "epochs ({}) must exceed warmup ({})",
                    self.epochs, self.warmup_epochs
                ),
            ));
        }
        if self.flows_per_epoch == 0 {
            return Err(config_err("run.flows_per_epoch", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.detection_probability) {
            return Err(config_err(
                "run.detection_probability",
                "must be within [0, 1]",
            ));
        }
        if !(0.0..=1.0).contains(&self.link_loss) {
            return Err(config_err("run.link_loss", "must be within [0, 1]"));
        }
        for (name, f) in [
            (
                "profiles.blackhole_fraction",
                self.profiles.blackhole_fraction,
            ),
            ("profiles.selfish_fraction", self.profiles.selfish_fraction),
            ("profiles.selfish_drop", self.profiles.selfish_drop),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(config_err(name, format!("{f} outside [0, 1]")));
            }
        }
        if self.profiles.blackhole_fraction + self.profiles.selfish_fraction > 1.0 {
            return Err(config_err(
                "profiles",
                "blackhole_fraction + selfish_fraction exceeds 1",
            ));
        }
        self.profiles
            .default
            .validate()
            .map_err(|r| config_err("profiles.default", r))?;
        for (n, p) in &self.profiles.nodes {
            p.validate()
                .map_err(|r| config_err(&format!("profiles.nodes.{n}"), r))?;
        }
        self.reputation
            .validate()
            .map_err(|e| config_err("reputation", e.to_string()))?;
        Ok(())
    }

    /// Topology for this run; a random-geometric spec without its own seed
    /// takes the run seed.
    pub fn build_topology(&self) -> Result<Topology, SimError> {
        let spec = match &self.topology {
            TopologySpec::RandomGeometric {
                n,
                radius,
                seed: None,
            } => TopologySpec::RandomGeometric {
                n: *n,
                radius: *radius,
                seed: Some(self.seed),
            },
            other => other.clone(),
        };
        Ok(build_topology(&spec)?)
    }

    /// Full validation, including checks that need the built topology.
    pub fn preflight(&self) -> Result<Topology, SimError> {
        self.validate()?;
        let topo = self.build_topology()?;
        let members = topo.members();
        if members.len() < 2 {
            return Err(config_err("topology", "need at least two non-expert nodes"));
        }
        for n in self.profiles.nodes.keys() {
            if !members.contains(n) {
                return Err(config_err(
                    &format!("profiles.nodes.{n}"),
                    "node is not a non-expert topology node",
                ));
            }
        }
        Ok(topo)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: u32,
    pub warmup: bool,
    pub sent: u64,
    pub delivered: u64,
    pub relay_drops: u64,
    pub link_losses: u64,
    pub no_route: u64,
    pub low_traversals: u64,
    pub tier_high: u64,
    pub tier_fallback: u64,
}

impl EpochMetrics {
    pub fn dropped(&self) -> u64 {
        self.relay_drops + self.link_losses + self.no_route
    }

    pub fn pdr(&self) -> f64 {
        ratio(self.delivered, self.sent)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochClassification {
    pub epoch: u32,
    pub high: usize,
    pub med: usize,
    pub low: usize,
    pub error: usize,
}

/// Summary over post-warmup epochs, plus the full per-epoch record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub policy: RoutingPolicy,
    pub seed: u64,
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub relay_drops: u64,
    pub link_losses: u64,
    pub no_route: u64,
    pub pdr: f64,
    pub low_traversals: u64,
    pub tier_high: u64,
    pub tier_fallback: u64,
    pub epochs: Vec<EpochMetrics>,
    pub classification_trace: Vec<EpochClassification>,
    pub profiles: BTreeMap<NodeId, BehaviorProfile>,
    pub final_reputations: BTreeMap<NodeId, f64>,
    pub final_classification: BTreeMap<NodeId, ClassificationOutcome>,
}

struct Walk {
    delivered: bool,
    relay_drop: bool,
    link_loss: bool,
    low_traversal: bool,
}

struct Runner<'a> {
    cfg: &'a SimConfig,
    profiles: BTreeMap<NodeId, BehaviorProfile>,
    behavior: ChaCha8Rng,
    detection: ChaCha8Rng,
    link: ChaCha8Rng,
}

impl Runner<'_> {
    fn relays(&mut self, relay: NodeId) -> bool {
        let p = self
            .profiles
            .get(&relay)
            .copied()
            .unwrap_or_default()
            .drop_probability();
        if p <= 0.0 {
            true
        } else if p >= 1.0 {
            false
        } else {
            self.behavior.gen::<f64>() >= p
        }
    }

    fn detected(&mut self) -> bool {
        let d = self.cfg.detection_probability;
        d >= 1.0 || (d > 0.0 && self.detection.gen::<f64>() < d)
    }

    fn link_lost(&mut self) -> bool {
        let l = self.cfg.link_loss;
        l > 0.0 && self.link.gen::<f64>() < l
    }

    fn walk(
        &mut self,
        path: &[NodeId],
        expert: &mut ExpertNode,
        topo: &Topology,
        epoch: u32,
    ) -> Walk {
        let mut w = Walk {
            delivered: false,
            relay_drop: false,
            link_loss: false,
            low_traversal: false,
        };
        for i in 1..path.len() {
            if self.link_lost() {
                w.link_loss = true;
                return w;
            }
            let node = path[i];
            if i == path.len() - 1 {
                w.delivered = true;
                return w;
            }
            if Some(node) == topo.expert() {
                continue;
            }
            if expert.table().grade(node) == Some(Grade::Low) {
                w.low_traversal = true;
            }
            let forwarded = self.relays(node);
            if self.detected() {
                expert.observe(&Observation {
                    observer: path[i - 1],
                    subject: node,
                    epoch: epoch as u64,
                    kind: if forwarded {
                        ObservationKind::Forwarded
                    } else {
                        ObservationKind::Dropped
                    },
                });
            }
            if !forwarded {
                w.relay_drop = true;
                return w;
            }
        }
        w
    }
}

pub fn run(config: &SimConfig) -> Result<Metrics, SimError> {
    let topo = config.preflight()?;
    let members = topo.members();
    let profiles = config
        .profiles
        .resolve(&members, &mut stream(config.seed, STREAM_PROFILES));

    let ledger = ReputationLedger::new(config.reputation)?;
    let mut expert = ExpertNode::new(
        ExpertConfig {
            range: config.range,
            method: config.method,
            mode: config.mode,
            strength_min: config.strength_min,
        },
        ledger,
        members.iter().copied(),
    )?;

    let mut traffic = stream(config.seed, STREAM_TRAFFIC);
    let mut runner = Runner {
        cfg: config,
        profiles,
        behavior: stream(config.seed, STREAM_BEHAVIOR),
        detection: stream(config.seed, STREAM_DETECTION),
        link: stream(config.seed, STREAM_LINK),
    };

    let mut epochs = Vec::with_capacity(config.epochs as usize);
    let mut trace = Vec::with_capacity(config.epochs as usize);
    for epoch in 0..config.epochs {
        let strength = node_strength(expert.table());
        trace.push(EpochClassification {
            epoch,
            high: strength.high,
            med: strength.med,
            low: strength.low,
            error: strength.error,
        });
        let mut em = EpochMetrics {
            epoch,
            warmup: epoch < config.warmup_epochs,
            ..Default::default()
        };
        for _ in 0..config.flows_per_epoch {
            let si = traffic.gen_range(0..members.len());
            let mut di = traffic.gen_range(0..members.len() - 1);
            if di >= si {
                di += 1;
            }
            let (src, dst) = (members[si], members[di]);
            em.sent += 1;

            let path = match config.policy {
                RoutingPolicy::PcFiltered => {
                    match select_path(&topo, expert.table(), src, dst, config.relay_expert) {
                        Ok(route) => {
                            match route.tier {
                                Tier::HighOnly => em.tier_high += 1,
                                Tier::MedFallback => em.tier_fallback += 1,
                            }
                            Some(route.nodes)
                        }
                        Err(_) => None,
                    }
                }
                RoutingPolicy::UnfilteredBaseline => {
                    baseline_path(&topo, src, dst, config.relay_expert)
                }
            };
            let Some(path) = path else {
                em.no_route += 1;
                continue;
            };
            let w = runner.walk(&path, &mut expert, &topo, epoch);
            em.delivered += w.delivered as u64;
            em.relay_drops += w.relay_drop as u64;
            em.link_losses += w.link_loss as u64;
            em.low_traversals += w.low_traversal as u64;
        }
        debug_assert_eq!(em.delivered + em.dropped(), em.sent);
        epochs.push(em);
        expert.end_epoch()?;
    }

    let post: Vec<&EpochMetrics> = epochs.iter().filter(|e| !e.warmup).collect();
    let sum = |f: fn(&EpochMetrics) -> u64| post.iter().map(|e| f(e)).sum::<u64>();
    let sent = sum(|e| e.sent);
    let delivered = sum(|e| e.delivered);
    Ok(Metrics {
        policy: config.policy,
        seed: config.seed,
        sent,
        delivered,
        dropped: sum(|e| e.dropped()),
        relay_drops: sum(|e| e.relay_drops),
        link_losses: sum(|e| e.link_losses),
        no_route: sum(|e| e.no_route),
        pdr: ratio(delivered, sent),
        low_traversals: sum(|e| e.low_traversals),
        tier_high: sum(|e| e.tier_high),
        tier_fallback: sum(|e| e.tier_fallback),
        epochs,
        classification_trace: trace,
        profiles: runner.profiles,
        final_reputations: expert.ledger().snapshot(),
        final_classification: expert.table().entries().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub seed: u64,
    pub pdr_filtered: f64,
    pub pdr_unfiltered: f64,
    pub delta: f64,
    pub low_traversals_filtered: u64,
    pub low_traversals_unfiltered: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    pub mean_filtered: f64,
    pub mean_unfiltered: f64,
    pub mean_delta: f64,
}

/// Runs both policies for each seed. Seeds run in parallel; rows come back
/// in the order given.
pub fn compare(config: &SimConfig, seeds: &[u64]) -> Result<CompareReport, SimError> {
    if seeds.is_empty() {
        return Err(config_err("seeds", "at least one seed is required"));
    }
    config.validate()?;
    let rows = seeds
        .par_iter()
        .map(|&seed| {
            let arm = |policy| {
                run(&SimConfig {
                    seed,
                    policy,
                    ..config.clone()
                })
            };
            let f = arm(RoutingPolicy::PcFiltered)?;
            let u = arm(RoutingPolicy::UnfilteredBaseline)?;
            Ok(CompareRow {
                seed,
                pdr_filtered: f.pdr,
                pdr_unfiltered: u.pdr,
                delta: f.pdr - u.pdr,
                low_traversals_filtered: f.low_traversals,
                low_traversals_unfiltered: u.low_traversals,
            })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    let n = rows.len() as f64;
    let mean = |f: fn(&CompareRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    Ok(CompareReport {
        mean_filtered: mean(|r| r.pdr_filtered),
        mean_unfiltered: mean(|r| r.pdr_unfiltered),
        mean_delta: mean(|r| r.delta),
        rows,
    })
}
