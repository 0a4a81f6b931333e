//! TOML scenario files.
//!
//! ```toml
//! [topology]
//! kind = "random-geometric"   # paper-grid | random-geometric | links
//! n = 25
//! radius = 0.35
//! # seed = 7                  # omitted: taken from the run seed
//! # links = [[1, 2], [2, 3]]  # kind = "links", inline
//! # file = "net.links"        # kind = "links", `a b` per line, relative path
//! # expert = 0
//! relay_expert = false
//!
//! [profiles]
//! default = "cooperative"
//! blackhole_fraction = 0.3
//! [profiles.nodes]
//! 3 = "blackhole"
//! 5 = { selfish = 0.4 }
//!
//! [classification]
//! x = 50
//! y = 70
//! method = "point"
//! mode = "reconciled"
//!
//! [reputation]
//! initial = 50
//! reward = 1
//! penalty = 2
//! window = 5
//!
//! [run]
//! epochs = 200
//! warmup = 20
//! flows_per_epoch = 10
//! seed = 1
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{ClassificationMode, Method, NodeId, QueryRange};
use crate::expert::DEFAULT_STRENGTH_MIN;
use crate::reputation::ReputationParams;
use crate::routing::{Topology, TopologySpec};
use crate::simulator::{BehaviorProfile, ProfileAssignment, RoutingPolicy, SimConfig, SimError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
}

impl From<SimError> for ScenarioError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config { field, reason } => ScenarioError::Invalid { field, reason },
            SimError::Topology(t) => invalid("topology", t.to_string()),
            SimError::Ledger(l) => invalid("reputation", l.to_string()),
            SimError::Expert(x) => invalid("classification", x.to_string()),
        }
    }
}

fn invalid(field: &str, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.to_owned(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub links: Option<Vec<(NodeId, NodeId)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expert: Option<NodeId>,
    #[serde(default)]
    pub relay_expert: bool,
}

fn default_selfish_drop() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfilesSection {
    #[serde(default)]
    pub default: BehaviorProfile,
    #[serde(default)]
    pub blackhole_fraction: f64,
    #[serde(default)]
    pub selfish_fraction: f64,
    #[serde(default = "default_selfish_drop")]
    pub selfish_drop: f64,
    #[serde(default)]
    pub nodes: BTreeMap<String, BehaviorProfile>,
}

impl Default for ProfilesSection {
    fn default() -> Self {
        Self {
            default: BehaviorProfile::Cooperative,
            blackhole_fraction: 0.0,
            selfish_fraction: 0.0,
            selfish_drop: default_selfish_drop(),
            nodes: BTreeMap::new(),
        }
    }
}

fn default_strength_min() -> usize {
    DEFAULT_STRENGTH_MIN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassificationSection {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub mode: ClassificationMode,
    #[serde(default = "default_strength_min")]
    pub strength_min: usize,
}

fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub epochs: u32,
    #[serde(default)]
    pub warmup: u32,
    pub flows_per_epoch: u32,
    pub seed: u64,
    #[serde(default)]
    pub policy: RoutingPolicy,
    #[serde(default = "default_one")]
    pub detection_probability: f64,
    #[serde(default)]
    pub link_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub topology: TopologySection,
    #[serde(default)]
    pub profiles: ProfilesSection,
    pub classification: ClassificationSection,
    #[serde(default)]
    pub reputation: ReputationParams,
    pub run: RunSection,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn from_config(cfg: &SimConfig) -> Self {
        let mut topology = TopologySection {
            kind: String::new(),
            n: None,
            radius: None,
            seed: None,
            links: None,
            file: None,
            expert: None,
            relay_expert: cfg.relay_expert,
        };
        match &cfg.topology {
            TopologySpec::PaperGrid => topology.kind = "paper-grid".into(),
            TopologySpec::RandomGeometric { n, radius, seed } => {
                topology.kind = "random-geometric".into();
                topology.n = Some(*n);
                topology.radius = Some(*radius);
                topology.seed = *seed;
            }
            TopologySpec::Links { links, expert } => {
                topology.kind = "links".into();
                topology.links = Some(links.clone());
                topology.expert = *expert;
            }
        }
        Self {
            topology,
            profiles: ProfilesSection {
                default: cfg.profiles.default,
                blackhole_fraction: cfg.profiles.blackhole_fraction,
                selfish_fraction: cfg.profiles.selfish_fraction,
                selfish_drop: cfg.profiles.selfish_drop,
                nodes: cfg
                    .profiles
                    .nodes
                    .iter()
                    .map(|(n, p)| (n.to_string(), *p))
                    .collect(),
            },
            classification: ClassificationSection {
                x: cfg.range.x(),
                y: cfg.range.y(),
                method: cfg.method,
                mode: cfg.mode,
                strength_min: cfg.strength_min,
            },
            reputation: cfg.reputation,
            run: RunSection {
                epochs: cfg.epochs,
                warmup: cfg.warmup_epochs,
                flows_per_epoch: cfg.flows_per_epoch,
                seed: cfg.seed,
                policy: cfg.policy,
                detection_probability: cfg.detection_probability,
                link_loss: cfg.link_loss,
            },
        }
    }

    /// Resolves and validates into a runnable config. `base_dir` anchors a
    /// relative `topology.file`.
    pub fn into_config(self, base_dir: &Path) -> Result<SimConfig, ScenarioError> {
        let t = &self.topology;
        let topology = match t.kind.as_str() {
            "paper-grid" => TopologySpec::PaperGrid,
            "random-geometric" => TopologySpec::RandomGeometric {
                n: t.n
                    .ok_or_else(|| invalid("topology.n", "required for random-geometric"))?,
                radius: t
                    .radius
                    .ok_or_else(|| invalid("topology.radius", "required for random-geometric"))?,
                seed: t.seed,
            },
            "links" => {
                let topo = match (&t.links, &t.file) {
                    (Some(links), None) => Topology::from_links(links, t.expert),
                    (None, Some(file)) => {
                        let path = base_dir.join(file);
                        let text = std::fs::read_to_string(&path)
                            .map_err(|source| ScenarioError::Io { path, source })?;
                        Topology::from_link_list(&text, t.expert)
                    }
                    _ => {
                        return Err(invalid(
                            "topology",
                            "kind `links` needs exactly one of `links` or `file`",
                        ))
                    }
                }
                .map_err(|e| invalid("topology", e.to_string()))?;
                TopologySpec::Links {
                    links: topo.links(),
                    expert: topo.expert(),
                }
            }
            other => {
                return Err(invalid(
                    "topology.kind",
                    format!("unknown kind `{other}` (expected paper-grid|random-geometric|links)"),
                ))
            }
        };
        let mut nodes = BTreeMap::new();
        for (k, p) in &self.profiles.nodes {
            let id: NodeId = k.parse().map_err(|_| {
                invalid(
                    &format!("profiles.nodes.{k}"),
                    "node id must be a non-negative integer",
                )
            })?;
            nodes.insert(id, *p);
        }
        let c = &self.classification;
        let range =
            QueryRange::new(c.x, c.y).map_err(|e| invalid("classification.x/y", e.to_string()))?;
        let cfg = SimConfig {
            topology,
            relay_expert: t.relay_expert,
            profiles: ProfileAssignment {
                default: self.profiles.default,
                nodes,
                blackhole_fraction: self.profiles.blackhole_fraction,
                selfish_fraction: self.profiles.selfish_fraction,
                selfish_drop: self.profiles.selfish_drop,
            },
            range,
            method: c.method,
            mode: c.mode,
            reputation: self.reputation,
            strength_min: c.strength_min,
            epochs: self.run.epochs,
            warmup_epochs: self.run.warmup,
            flows_per_epoch: self.run.flows_per_epoch,
            policy: self.run.policy,
            detection_probability: self.run.detection_probability,
            link_loss: self.run.link_loss,
            seed: self.run.seed,
        };
        cfg.preflight()?;
        Ok(cfg)
    }
}

pub fn load_scenario(path: &Path) -> Result<SimConfig, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_owned(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    ScenarioFile::parse(&text)?.into_config(base)
}
