//! Topologies and grade-filtered minimum-hop routing.
//!
//! Path selection tries HIGH-only relays first, then HIGH and MED relays.
//! LOW relays (and verbatim error outcomes) are never used. Endpoints are
//! exempt from filtering.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{Grade, NodeId};
use crate::expert::ClassificationTable;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("self-link on node {0}")]
    SelfLink(NodeId),
    #[error("link {0}-{1} references an unknown node")]
    DanglingLink(NodeId, NodeId),
    #[error("expert {0} is not a topology node")]
    UnknownExpert(NodeId),
    #[error("random-geometric topology needs n >= 2, got {0}")]
    TooFewNodes(usize),
    #[error("radius must be a positive number, got {0}")]
    BadRadius(f64),
    #[error("random-geometric topology has no seed")]
    MissingSeed,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RouteError {
    #[error("source and destination are both {0}")]
    SameEndpoints(NodeId),
    #[error("node {0} is not in the topology")]
    UnknownNode(NodeId),
    #[error("no route from {src} to {dst} even with MED fallback")]
    NoRoute { src: NodeId, dst: NodeId },
}

/// Undirected graph over node ids, with at most one expert node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    adj: BTreeMap<NodeId, BTreeSet<NodeId>>,
    expert: Option<NodeId>,
}

impl Topology {
    pub fn new(
        nodes: impl IntoIterator<Item = NodeId>,
        links: impl IntoIterator<Item = (NodeId, NodeId)>,
        expert: Option<NodeId>,
    ) -> Result<Self, TopologyError> {
        let mut adj: BTreeMap<NodeId, BTreeSet<NodeId>> =
            nodes.into_iter().map(|n| (n, BTreeSet::new())).collect();
        for (a, b) in links {
            if a == b {
                return Err(TopologyError::SelfLink(a));
            }
            if !adj.contains_key(&a) || !adj.contains_key(&b) {
                return Err(TopologyError::DanglingLink(a, b));
            }
            adj.get_mut(&a).expect("checked").insert(b);
            adj.get_mut(&b).expect("checked").insert(a);
        }
        if let Some(e) = expert {
            if !adj.contains_key(&e) {
                return Err(TopologyError::UnknownExpert(e));
            }
        }
        Ok(Self { adj, expert })
    }

    /// Nodes are the union of link endpoints.
    pub fn from_links(
        links: &[(NodeId, NodeId)],
        expert: Option<NodeId>,
    ) -> Result<Self, TopologyError> {
        let nodes: BTreeSet<NodeId> = links.iter().flat_map(|&(a, b)| [a, b]).collect();
        Self::new(nodes, links.iter().copied(), expert)
    }

    pub fn expert(&self) -> Option<NodeId> {
        self.expert
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.adj.keys().copied()
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.adj.contains_key(&n)
    }

    pub fn neighbors(&self, n: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adj.get(&n).into_iter().flatten().copied()
    }

    pub fn has_link(&self, a: NodeId, b: NodeId) -> bool {
        self.adj.get(&a).is_some_and(|s| s.contains(&b))
    }

    /// Each link once, as `(low, high)`.
    pub fn links(&self) -> Vec<(NodeId, NodeId)> {
        self.adj
            .iter()
            .flat_map(|(&a, ns)| ns.iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
            .collect()
    }

    pub fn link_count(&self) -> usize {
        self.links().len()
    }

    /// Non-expert nodes, i.e. the ones that can originate traffic.
    pub fn members(&self) -> Vec<NodeId> {
        self.nodes().filter(|&n| Some(n) != self.expert).collect()
    }

    /// Subgraph induced by `keep`.
    pub fn induced(&self, keep: &BTreeSet<NodeId>) -> Topology {
        let adj = self
            .adj
            .iter()
            .filter(|(n, _)| keep.contains(n))
            .map(|(&n, ns)| (n, ns.intersection(keep).copied().collect()))
            .collect();
        Topology {
            adj,
            expert: self.expert.filter(|e| keep.contains(e)),
        }
    }

    /// One `a b` pair per line.
    pub fn to_link_list(&self) -> String {
        let mut out = String::new();
        for (a, b) in self.links() {
            writeln!(out, "{a} {b}").expect("writing to a String");
        }
        out
    }

    /// Parses the `a b` per-line form. Blank lines and `#` comments are
    /// skipped.
    pub fn from_link_list(text: &str, expert: Option<NodeId>) -> Result<Self, TopologyError> {
        let mut links = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| TopologyError::Parse {
                line: i + 1,
                message,
            };
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 2 {
                return Err(parse_err(format!(
                    "expected `node_a node_b`, found `{line}`"
                )));
            }
            let a = parts[0]
                .parse()
                .map_err(|_| parse_err(format!("invalid node id `{}`", parts[0])))?;
            let b = parts[1]
                .parse()
                .map_err(|_| parse_err(format!("invalid node id `{}`", parts[1])))?;
            links.push((a, b));
        }
        Self::from_links(&links, expert)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TopologySpec {
    /// 3x3 grid with the expert (id 0) in the centre, linked to all eight
    /// members 1..=8, plus grid adjacency around the ring.
    PaperGrid,
    /// A `None` seed must be resolved before building, e.g. from a run seed.
    RandomGeometric {
        n: usize,
        radius: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
    Links {
        links: Vec<(NodeId, NodeId)>,
        #[serde(default)]
        expert: Option<NodeId>,
    },
}

pub const PAPER_GRID_EXPERT: NodeId = 0;

fn paper_grid() -> Topology {
    // row-major over the 3x3 grid, centre cell is the expert
    //   1 2 3
    //   4 0 5
    //   6 7 8
    let cells: [[NodeId; 3]; 3] = [[1, 2, 3], [4, PAPER_GRID_EXPERT, 5], [6, 7, 8]];
    let mut links = Vec::new();
    for r in 0..3 {
        for c in 0..3 {
            if c + 1 < 3 {
                links.push((cells[r][c], cells[r][c + 1]));
            }
            if r + 1 < 3 {
                links.push((cells[r][c], cells[r + 1][c]));
            }
        }
    }
    for n in 1..=8 {
        if !links.contains(&(PAPER_GRID_EXPERT, n)) && !links.contains(&(n, PAPER_GRID_EXPERT)) {
            links.push((PAPER_GRID_EXPERT, n));
        }
    }
    Topology::new(0..=8, links, Some(PAPER_GRID_EXPERT)).expect("static grid is valid")
}

/// Nodes `1..=n` placed uniformly in the unit square; pairs within `radius`
/// (inclusive) are linked.
fn random_geometric(n: usize, radius: f64, seed: u64) -> Result<Topology, TopologyError> {
    if n < 2 {
        return Err(TopologyError::TooFewNodes(n));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(TopologyError::BadRadius(radius));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pos: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.gen::<f64>(), rng.gen::<f64>()))
        .collect();
    let mut links = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let (dx, dy) = (pos[i].0 - pos[j].0, pos[i].1 - pos[j].1);
            if (dx * dx + dy * dy).sqrt() <= radius {
                links.push((i as NodeId + 1, j as NodeId + 1));
            }
        }
    }
    Topology::new(1..=n as NodeId, links, None)
}

pub fn build_topology(spec: &TopologySpec) -> Result<Topology, TopologyError> {
    match spec {
        TopologySpec::PaperGrid => Ok(paper_grid()),
        TopologySpec::RandomGeometric {
            n,
            radius,
            seed: Some(seed),
        } => random_geometric(*n, *radius, *seed),
        TopologySpec::RandomGeometric { seed: None, .. } => Err(TopologyError::MissingSeed),
        TopologySpec::Links { links, expert } => Topology::from_links(links, *expert),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tier {
    HighOnly,
    MedFallback,
}

impl Tier {
    fn admits(self, g: Grade) -> bool {
        match self {
            Tier::HighOnly => g == Grade::High,
            Tier::MedFallback => g >= Grade::Med,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutePath {
    pub nodes: Vec<NodeId>,
    pub tier: Tier,
}

impl RoutePath {
    pub fn hops(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    pub fn relays(&self) -> &[NodeId] {
        let n = self.nodes.len();
        if n <= 2 {
            &[]
        } else {
            &self.nodes[1..n - 1]
        }
    }
}

/// Drops every node the tier does not admit, except `endpoints` and, when
/// `relay_expert` is set, the expert. Ungraded nodes are dropped.
pub fn allowed_subgraph(
    topo: &Topology,
    table: &ClassificationTable,
    tier: Tier,
    endpoints: &[NodeId],
    relay_expert: bool,
) -> Topology {
    let keep: BTreeSet<NodeId> = topo
        .nodes()
        .filter(|&n| {
            if endpoints.contains(&n) {
                return true;
            }
            if Some(n) == topo.expert() {
                return relay_expert;
            }
            table.grade(n).is_some_and(|g| tier.admits(g))
        })
        .collect();
    topo.induced(&keep)
}

/// Minimum-hop path; among equal-length paths the lexicographically smallest
/// node sequence wins.
pub fn shortest_path(topo: &Topology, src: NodeId, dst: NodeId) -> Option<Vec<NodeId>> {
    if !topo.contains(src) || !topo.contains(dst) {
        return None;
    }
    // BFS distances towards dst, then a greedy smallest-neighbour walk.
    let mut dist: BTreeMap<NodeId, usize> = BTreeMap::new();
    let mut queue = VecDeque::new();
    dist.insert(dst, 0);
    queue.push_back(dst);
    while let Some(n) = queue.pop_front() {
        if n == src {
            break;
        }
        let d = dist[&n];
        for m in topo.neighbors(n) {
            if let std::collections::btree_map::Entry::Vacant(slot) = dist.entry(m) {
                slot.insert(d + 1);
                queue.push_back(m);
            }
        }
    }
    let mut remaining = *dist.get(&src)?;
    let mut path = vec![src];
    let mut cur = src;
    while remaining > 0 {
        cur = topo
            .neighbors(cur)
            .find(|m| dist.get(m) == Some(&(remaining - 1)))
            .expect("BFS layer has a predecessor");
        path.push(cur);
        remaining -= 1;
    }
    Some(path)
}

/// Route with only relays permitted for the given endpoints, without tier
/// filtering. Used for the unfiltered baseline.
pub fn baseline_path(
    topo: &Topology,
    src: NodeId,
    dst: NodeId,
    relay_expert: bool,
) -> Option<Vec<NodeId>> {
    match topo.expert() {
        Some(e) if !relay_expert && e != src && e != dst => {
            let keep: BTreeSet<NodeId> = topo.nodes().filter(|&n| n != e).collect();
            shortest_path(&topo.induced(&keep), src, dst)
        }
        _ => shortest_path(topo, src, dst),
    }
}

pub fn select_path(
    topo: &Topology,
    table: &ClassificationTable,
    src: NodeId,
    dst: NodeId,
    relay_expert: bool,
) -> Result<RoutePath, RouteError> {
    if src == dst {
        return Err(RouteError::SameEndpoints(src));
    }
    for n in [src, dst] {
        if !topo.contains(n) {
            return Err(RouteError::UnknownNode(n));
        }
    }
    for tier in [Tier::HighOnly, Tier::MedFallback] {
        let sub = allowed_subgraph(topo, table, tier, &[src, dst], relay_expert);
        if let Some(nodes) = shortest_path(&sub, src, dst) {
            return Ok(RoutePath { nodes, tier });
        }
    }
    Err(RouteError::NoRoute { src, dst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{classify_point, ClassificationMode};
    use crate::fixtures;
    use proptest::prelude::*;

    fn line(grade: Grade) -> (Topology, ClassificationTable) {
        let topo = Topology::from_links(&[(1, 2), (2, 3)], None).unwrap();
        (
            topo,
            ClassificationTable::from_grades([(1, Grade::Low), (2, grade), (3, Grade::Low)]),
        )
    }

    fn golden_point_table() -> ClassificationTable {
        ClassificationTable::from_grades(fixtures::point_rows().into_iter().map(|(id, v)| {
            let g = classify_point(v, fixtures::golden_range(), ClassificationMode::Reconciled)
                .unwrap()
                .grade()
                .unwrap();
            (id, g)
        }))
    }

    #[test]
    fn line_tiers() {
        let (t, g) = line(Grade::High);
        assert_eq!(
            select_path(&t, &g, 1, 3, false),
            Ok(RoutePath {
                nodes: vec![1, 2, 3],
                tier: Tier::HighOnly
            })
        );
        let (t, g) = line(Grade::Med);
        assert_eq!(
            select_path(&t, &g, 1, 3, false),
            Ok(RoutePath {
                nodes: vec![1, 2, 3],
                tier: Tier::MedFallback
            })
        );
        let (t, g) = line(Grade::Low);
        assert_eq!(
            select_path(&t, &g, 1, 3, false),
            Err(RouteError::NoRoute { src: 1, dst: 3 })
        );
    }

    #[test]
    fn select_path_errors() {
        let (t, g) = line(Grade::High);
        assert_eq!(
            select_path(&t, &g, 1, 1, false),
            Err(RouteError::SameEndpoints(1))
        );
        assert_eq!(
            select_path(&t, &g, 1, 9, false),
            Err(RouteError::UnknownNode(9))
        );
    }

    #[test]
    fn paper_grid_shape() {
        let t = build_topology(&TopologySpec::PaperGrid).unwrap();
        assert_eq!(t.node_count(), 9);
        assert_eq!(t.expert(), Some(0));
        assert_eq!(
            t.neighbors(0).collect::<Vec<_>>(),
            (1..=8).collect::<Vec<_>>()
        );
        // 8 ring links + 8 expert spokes
        assert_eq!(t.link_count(), 16);
        assert!(t.has_link(1, 2) && t.has_link(1, 4) && t.has_link(5, 8) && !t.has_link(1, 3));
    }

    #[test]
    fn paper_grid_high_only_subgraph() {
        let t = build_topology(&TopologySpec::PaperGrid).unwrap();
        let sub = allowed_subgraph(&t, &golden_point_table(), Tier::HighOnly, &[1, 6], false);
        assert_eq!(sub.nodes().collect::<Vec<_>>(), vec![1, 3, 4, 6, 8]);
        assert_eq!(sub.expert(), None);
        let sub = allowed_subgraph(&t, &golden_point_table(), Tier::HighOnly, &[1, 6], true);
        assert_eq!(sub.nodes().collect::<Vec<_>>(), vec![0, 1, 3, 4, 6, 8]);
    }

    #[test]
    fn subgraph_identity_and_isolation() {
        let t = build_topology(&TopologySpec::PaperGrid).unwrap();
        let all_high = ClassificationTable::from_grades((1..=8).map(|n| (n, Grade::High)));
        assert_eq!(
            allowed_subgraph(&t, &all_high, Tier::HighOnly, &[1, 8], true),
            t
        );
        let all_low = ClassificationTable::from_grades((1..=8).map(|n| (n, Grade::Low)));
        let sub = allowed_subgraph(&t, &all_low, Tier::MedFallback, &[1, 8], false);
        assert_eq!(sub.nodes().collect::<Vec<_>>(), vec![1, 8]);
        assert_eq!(sub.link_count(), 0);
    }

    #[test]
    fn random_geometric_cases() {
        let spec = TopologySpec::RandomGeometric {
            n: 2,
            radius: 2.0,
            seed: Some(7),
        };
        let t = build_topology(&spec).unwrap();
        assert_eq!((t.node_count(), t.link_count()), (2, 1));

        let spec = TopologySpec::RandomGeometric {
            n: 25,
            radius: 0.35,
            seed: Some(11),
        };
        assert_eq!(
            build_topology(&spec).unwrap(),
            build_topology(&spec).unwrap()
        );

        for bad in [
            TopologySpec::RandomGeometric {
                n: 1,
                radius: 0.3,
                seed: Some(0),
            },
            TopologySpec::RandomGeometric {
                n: 5,
                radius: 0.0,
                seed: Some(0),
            },
            TopologySpec::RandomGeometric {
                n: 5,
                radius: f64::NAN,
                seed: Some(0),
            },
        ] {
            assert!(build_topology(&bad).is_err());
        }
    }

    #[test]
    fn topology_validation() {
        assert_eq!(
            Topology::from_links(&[(1, 1)], None),
            Err(TopologyError::SelfLink(1))
        );
        assert_eq!(
            Topology::new([1, 2], [(1, 3)], None),
            Err(TopologyError::DanglingLink(1, 3))
        );
        assert_eq!(
            Topology::from_links(&[(1, 2)], Some(5)),
            Err(TopologyError::UnknownExpert(5))
        );
    }

    #[test]
    fn link_list_text() {
        let t = build_topology(&TopologySpec::PaperGrid).unwrap();
        let text = t.to_link_list();
        assert_eq!(Topology::from_link_list(&text, Some(0)).unwrap(), t);
        let err = Topology::from_link_list("1 2\n\n# c\n3\n", None).unwrap_err();
        assert_eq!(
            err,
            TopologyError::Parse {
                line: 4,
                message: "expected `node_a node_b`, found `3`".into()
            }
        );
    }

    #[test]
    fn tie_break_is_lexicographic() {
        // two 2-hop routes 1-3-2 and 1-4-2; also 1-5-6-2
        let t = Topology::from_links(
            &[(1, 4), (4, 2), (1, 3), (3, 2), (1, 5), (5, 6), (6, 2)],
            None,
        )
        .unwrap();
        assert_eq!(shortest_path(&t, 1, 2), Some(vec![1, 3, 2]));
        assert_eq!(shortest_path(&t, 2, 1), Some(vec![2, 3, 1]));
    }

    #[test]
    fn baseline_skips_expert() {
        let t = build_topology(&TopologySpec::PaperGrid).unwrap();
        // 1 -> 8 through the expert is 2 hops; around the ring it is 4
        assert_eq!(baseline_path(&t, 1, 8, true), Some(vec![1, 0, 8]));
        assert_eq!(baseline_path(&t, 1, 8, false).map(|p| p.len()), Some(5));
    }

    // Oracle: enumerate every simple path by DFS.
    fn all_simple_paths(topo: &Topology, src: NodeId, dst: NodeId) -> Vec<Vec<NodeId>> {
        fn go(
            t: &Topology,
            cur: NodeId,
            dst: NodeId,
            path: &mut Vec<NodeId>,
            out: &mut Vec<Vec<NodeId>>,
        ) {
            if cur == dst {
                out.push(path.clone());
                return;
            }
            for m in t.neighbors(cur).collect::<Vec<_>>() {
                if !path.contains(&m) {
                    path.push(m);
                    go(t, m, dst, path, out);
                    path.pop();
                }
            }
        }
        let mut out = Vec::new();
        go(topo, src, dst, &mut vec![src], &mut out);
        out
    }

    fn admissible(path: &[NodeId], table: &ClassificationTable, tier: Tier) -> bool {
        path[1..path.len() - 1]
            .iter()
            .all(|&n| table.grade(n).is_some_and(|g| tier.admits(g)))
    }

    fn grade() -> impl Strategy<Value = Grade> {
        prop_oneof![Just(Grade::Low), Just(Grade::Med), Just(Grade::High)]
    }

    proptest! {
        #[test]
        fn select_path_matches_enumeration(
            n in 2u32..=10,
            edges in prop::collection::vec((1u32..=10, 1u32..=10), 0..30),
            grades in prop::collection::vec(grade(), 10),
            src in 1u32..=10,
            dst in 1u32..=10,
        ) {
            let links: Vec<_> = edges.into_iter().filter(|&(a, b)| a != b && a <= n && b <= n).collect();
            let topo = Topology::new(1..=n, links, None).unwrap();
            let table = ClassificationTable::from_grades((1..=n).map(|i| (i, grades[i as usize - 1])));
            prop_assume!(src <= n && dst <= n && src != dst);

            let paths = all_simple_paths(&topo, src, dst);
            let best = |tier| paths.iter().filter(|p| admissible(p, &table, tier)).min_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b))).cloned();

            let got = select_path(&topo, &table, src, dst, false);
            match (best(Tier::HighOnly), best(Tier::MedFallback)) {
                (Some(p), _) => prop_assert_eq!(got, Ok(RoutePath { nodes: p, tier: Tier::HighOnly })),
                (None, Some(p)) => prop_assert_eq!(got, Ok(RoutePath { nodes: p, tier: Tier::MedFallback })),
                (None, None) => prop_assert_eq!(got, Err(RouteError::NoRoute { src, dst })),
            }
            if let Ok(route) = select_path(&topo, &table, src, dst, false) {
                for w in route.nodes.windows(2) {
                    prop_assert!(topo.has_link(w[0], w[1]));
                }
                for &r in route.relays() {
                    prop_assert_ne!(table.grade(r), Some(Grade::Low));
                }
                let uniq: BTreeSet<_> = route.nodes.iter().collect();
                prop_assert_eq!(uniq.len(), route.nodes.len());
            }
        }

        #[test]
        fn link_list_roundtrip(edges in prop::collection::vec((0u32..50, 0u32..50), 1..60)) {
            let links: Vec<_> = edges.into_iter().filter(|&(a, b)| a != b).collect();
            prop_assume!(!links.is_empty());
            let t = Topology::from_links(&links, None).unwrap();
            prop_assert_eq!(Topology::from_link_list(&t.to_link_list(), None).unwrap(), t);
        }
    }
}
