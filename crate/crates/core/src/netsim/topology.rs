use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::NodeId;

/// Undirected connected graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TopologyFile", into = "TopologyFile")]
pub struct Topology {
    nodes: usize,
    edges: BTreeSet<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct TopologyFile {
    nodes: Vec<usize>,
    edges: Vec<(usize, usize)>,
}

impl TryFrom<TopologyFile> for Topology {
    type Error = Error;
    fn try_from(f: TopologyFile) -> Result<Self> {
        let n = f.nodes.len();
        if f.nodes.iter().copied().ne(0..n) {
            return Err(Error::Config("nodes must be listed as 0, 1, …, n-1".into()));
        }
        Topology::new(n, &f.edges)
    }
}

impl From<Topology> for TopologyFile {
    fn from(t: Topology) -> Self {
        TopologyFile {
            nodes: (0..t.nodes).collect(),
            edges: t.edges.into_iter().collect(),
        }
    }
}

impl Topology {
    pub fn new(nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if nodes == 0 {
            return Err(Error::Argument("a topology needs at least one node".into()));
        }
        let mut set = BTreeSet::new();
        for &(u, v) in edges {
            if u >= nodes || v >= nodes || u == v {
                return Err(Error::Argument(format!("invalid edge ({u}, {v})")));
            }
            set.insert((u.min(v), u.max(v)));
        }
        let t = Topology { nodes, edges: set };
        if !t.is_connected() {
            return Err(Error::Argument("topology is not connected".into()));
        }
        Ok(t)
    }

    /// The path `v_0 – v_1 – … – v_r`.
    pub fn line(r: usize) -> Topology {
        let edges: Vec<_> = (0..r).map(|j| (j, j + 1)).collect();
        Topology::new(r + 1, &edges).expect("a path is connected")
    }

    pub fn len(&self) -> usize {
        self.nodes
    }

    pub fn is_empty(&self) -> bool {
        self.nodes == 0
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes).map(NodeId)
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.edges.iter().map(|&(u, v)| (NodeId(u), NodeId(v)))
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.edges.contains(&(u.0.min(v.0), u.0.max(v.0)))
    }

    pub fn neighbors(&self, u: NodeId) -> Vec<NodeId> {
        self.nodes().filter(|&v| self.has_edge(u, v)).collect()
    }

    pub fn degree(&self, u: NodeId) -> usize {
        self.neighbors(u).len()
    }

    pub fn max_degree(&self) -> usize {
        self.nodes().map(|u| self.degree(u)).max().unwrap_or(0)
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.nodes];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &(a, b) in &self.edges {
                let next = if a == u { b } else if b == u { a } else { continue };
                if !seen[next] {
                    seen[next] = true;
                    stack.push(next);
                }
            }
        }
        seen.iter().all(|&s| s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_shape() {
        let t = Topology::line(3);
        assert_eq!(t.len(), 4);
        assert!(t.has_edge(NodeId(2), NodeId(1)));
        assert!(!t.has_edge(NodeId(0), NodeId(2)));
        assert_eq!(t.max_degree(), 2);
    }

    #[test]
    fn json_format() {
        let t: Topology = serde_json::from_str(r#"{"nodes":[0,1,2],"edges":[[0,1],[2,1]]}"#).unwrap();
        assert_eq!(t, Topology::line(2));
        assert_eq!(serde_json::to_string(&t).unwrap(), r#"{"nodes":[0,1,2],"edges":[[0,1],[1,2]]}"#);
        assert!(serde_json::from_str::<Topology>(r#"{"nodes":[0,1,2],"edges":[[0,1]]}"#).is_err());
    }
}
