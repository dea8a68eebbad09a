//! Deterministic round-based simulator for the four benchmark scenarios:
//! topology and flow definitions, the broadcast protocol engine, and
//! adversary instrumentation.

mod engine;

pub use engine::{
    run, AdvMode, AdversaryReport, AdversarySpec, InferenceAttempt, Mode, Observation,
    RunConfig, RunOutcome, TamperAttempt, TransmissionLog, TransmissionRecord,
};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::NodeId;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("unknown scenario id {0} (1..=4)")]
    UnknownScenario(u32),
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("invalid flow {0}: {1}")]
    InvalidFlow(u32, String),
    #[error("no payload provided for flow {0}")]
    MissingPayload(u32),
    #[error("scenario file: {0}")]
    ScenarioFile(String),
    #[error("run failed: {0}")]
    Run(String),
}

/// Radio-range neighbor structure: symmetric adjacency, no self-loops.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    nodes: BTreeSet<NodeId>,
    adj: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

impl Topology {
    pub fn new(
        nodes: impl IntoIterator<Item = NodeId>,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self, SimError> {
        let nodes: BTreeSet<NodeId> = nodes.into_iter().collect();
        let mut adj: BTreeMap<NodeId, BTreeSet<NodeId>> =
            nodes.iter().map(|&n| (n, BTreeSet::new())).collect();
        for (a, b) in edges {
            if a == b {
                return Err(SimError::InvalidTopology(format!("self-loop at {a}")));
            }
            if !nodes.contains(&a) || !nodes.contains(&b) {
                return Err(SimError::InvalidTopology(format!(
                    "edge {a}-{b} references an unknown node"
                )));
            }
            adj.get_mut(&a).unwrap().insert(b);
            adj.get_mut(&b).unwrap().insert(a);
        }
        Ok(Topology { nodes, adj })
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().copied()
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.nodes.contains(&n)
    }

    pub fn neighbors(&self, n: NodeId) -> BTreeSet<NodeId> {
        self.adj.get(&n).cloned().unwrap_or_default()
    }

    pub fn are_adjacent(&self, a: NodeId, b: NodeId) -> bool {
        self.adj.get(&a).is_some_and(|s| s.contains(&b))
    }
}

/// Flow identifier; flows are numbered from 1 as in the scenario tables.
#[derive(
    Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize,
)]
pub struct FlowId(pub u32);

impl std::fmt::Display for FlowId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "F{}", self.0)
    }
}

/// A source-routed flow: ordered node path, source first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowSpec {
    pub id: FlowId,
    pub path: Vec<NodeId>,
}

impl FlowSpec {
    pub fn source(&self) -> NodeId {
        self.path[0]
    }

    pub fn dest(&self) -> NodeId {
        *self.path.last().unwrap()
    }

    pub fn next_hop_after(&self, node: NodeId) -> Option<NodeId> {
        let pos = self.path.iter().position(|&n| n == node)?;
        self.path.get(pos + 1).copied()
    }

    pub fn validate(&self, topo: &Topology) -> Result<(), SimError> {
        if self.path.len() < 2 {
            return Err(SimError::InvalidFlow(self.id.0, "path shorter than 2".into()));
        }
        for w in self.path.windows(2) {
            if !topo.are_adjacent(w[0], w[1]) {
                return Err(SimError::InvalidFlow(
                    self.id.0,
                    format!("consecutive nodes {} and {} are not adjacent", w[0], w[1]),
                ));
            }
        }
        Ok(())
    }
}

/// A topology plus its flows; ids 1..=4 are the built-in benchmark
/// scenarios, 0 marks a custom file-loaded one.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub id: u32,
    pub topology: Topology,
    pub flows: Vec<FlowSpec>,
}

impl Scenario {
    fn checked(id: u32, topology: Topology, flows: Vec<FlowSpec>) -> Result<Self, SimError> {
        for f in &flows {
            f.validate(&topology)?;
        }
        Ok(Scenario {
            id,
            topology,
            flows,
        })
    }

    /// Total hops over all flows; the round budget derives from it.
    pub fn total_hops(&self) -> usize {
        self.flows.iter().map(|f| f.path.len() - 1).sum()
    }
}

fn n(v: u32) -> NodeId {
    NodeId(v)
}

fn flow(id: u32, path: &[u32]) -> FlowSpec {
    FlowSpec {
        id: FlowId(id),
        path: path.iter().map(|&v| n(v)).collect(),
    }
}

/// The four benchmark scenarios:
///
/// 1. three-node chain, two opposing flows
/// 2. five-node star, four flows crossing at the center
/// 3. seven-node star, six flows crossing at the center
/// 4. nine-node chain, two opposing end-to-end flows
pub fn build_scenario(id: u32) -> Result<Scenario, SimError> {
    match id {
        1 => Scenario::checked(
            1,
            Topology::new((1..=3).map(n), [(n(1), n(2)), (n(2), n(3))])?,
            vec![flow(1, &[1, 2, 3]), flow(2, &[3, 2, 1])],
        ),
        2 => Scenario::checked(
            2,
            Topology::new((1..=5).map(n), (1..=4).map(|i| (n(i), n(5))))?,
            vec![
                flow(1, &[1, 5, 3]),
                flow(2, &[3, 5, 1]),
                flow(3, &[2, 5, 4]),
                flow(4, &[4, 5, 2]),
            ],
        ),
        3 => Scenario::checked(
            3,
            Topology::new((1..=7).map(n), (1..=6).map(|i| (n(i), n(7))))?,
            vec![
                flow(1, &[1, 7, 4]),
                flow(2, &[4, 7, 1]),
                flow(3, &[2, 7, 5]),
                flow(4, &[5, 7, 2]),
                flow(5, &[3, 7, 6]),
                flow(6, &[6, 7, 3]),
            ],
        ),
        4 => {
            let path: Vec<u32> = (1..=9).collect();
            let mut rev = path.clone();
            rev.reverse();
            Scenario::checked(
                4,
                Topology::new((1..=9).map(n), (1..=8).map(|i| (n(i), n(i + 1))))?,
                vec![flow(1, &path), flow(2, &rev)],
            )
        }
        other => Err(SimError::UnknownScenario(other)),
    }
}

/// On-disk scenario description: nodes, undirected edges, flow paths.
#[derive(Debug, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub nodes: Vec<u32>,
    pub edges: Vec<(u32, u32)>,
    pub flows: Vec<Vec<u32>>,
}

impl Scenario {
    pub fn from_json(json: &str) -> Result<Self, SimError> {
        let file: ScenarioFile =
            serde_json::from_str(json).map_err(|e| SimError::ScenarioFile(e.to_string()))?;
        let topology = Topology::new(
            file.nodes.iter().map(|&v| n(v)),
            file.edges.iter().map(|&(a, b)| (n(a), n(b))),
        )?;
        let flows = file
            .flows
            .iter()
            .enumerate()
            .map(|(i, path)| FlowSpec {
                id: FlowId(i as u32 + 1),
                path: path.iter().map(|&v| n(v)).collect(),
            })
            .collect();
        Scenario::checked(0, topology, flows)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, SimError> {
        let json =
            std::fs::read_to_string(path).map_err(|e| SimError::ScenarioFile(e.to_string()))?;
        Self::from_json(&json)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenarios_match_the_flow_table() {
        let s1 = build_scenario(1).unwrap();
        assert_eq!(s1.flows.len(), 2);
        assert_eq!(s1.flows[0].path, vec![n(1), n(2), n(3)]);
        assert_eq!(s1.flows[1].path, vec![n(3), n(2), n(1)]);

        let s2 = build_scenario(2).unwrap();
        assert_eq!(s2.topology.nodes().count(), 5);
        assert_eq!(s2.flows.len(), 4);
        assert!(s2.flows.iter().all(|f| f.path[1] == n(5)));

        let s3 = build_scenario(3).unwrap();
        assert_eq!(s3.topology.nodes().count(), 7);
        assert_eq!(s3.flows.len(), 6);
        assert!(s3.flows.iter().all(|f| f.path[1] == n(7)));
        assert_eq!(s3.flows[4].path, vec![n(3), n(7), n(6)]);

        let s4 = build_scenario(4).unwrap();
        assert_eq!(s4.topology.nodes().count(), 9);
        assert_eq!(s4.flows.len(), 2);
        assert_eq!(s4.flows[0].path.len(), 9);
    }

    #[test]
    fn scenario_flows_follow_adjacency() {
        for id in 1..=4 {
            let s = build_scenario(id).unwrap();
            for f in &s.flows {
                f.validate(&s.topology).unwrap();
            }
        }
        assert!(matches!(
            build_scenario(9),
            Err(SimError::UnknownScenario(9))
        ));
    }

    #[test]
    fn topology_rejects_bad_edges() {
        assert!(Topology::new([n(1)], [(n(1), n(1))]).is_err());
        assert!(Topology::new([n(1)], [(n(1), n(2))]).is_err());
        let t = Topology::new([n(1), n(2)], [(n(1), n(2))]).unwrap();
        assert!(t.are_adjacent(n(2), n(1)), "adjacency is symmetric");
    }

    #[test]
    fn scenario_json_roundtrip() {
        let json = r#"{
            "nodes": [1, 2, 3],
            "edges": [[1, 2], [2, 3]],
            "flows": [[1, 2, 3], [3, 2, 1]]
        }"#;
        let s = Scenario::from_json(json).unwrap();
        assert_eq!(s.id, 0);
        assert_eq!(s.flows.len(), 2);
        assert_eq!(s.flows[0].id, FlowId(1));
        // a disconnected flow is rejected
        let bad = r#"{"nodes": [1,2,3], "edges": [[1,2]], "flows": [[1,2,3]]}"#;
        assert!(Scenario::from_json(bad).is_err());
    }
}
