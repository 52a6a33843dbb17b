//! Prize-collecting Steiner tree selection.
//!
//! The objective of a connected edge set `S` over nodes `V_S` is
//!
//! ```text
//! sum(prize(u) for u in V_S) + sum(prize(e) - cost(e) for e in S)
//! ```
//!
//! Rooted instances must contain the root. Unrooted instances may also
//! return the empty solution (objective 0). A single node with no edges is a
//! valid connected solution.

mod approx;
mod exact;
mod extract;
mod fold;

pub use approx::solve_approx;
pub use exact::{solve_exact, EXACT_EDGE_LIMIT};
pub use extract::{extract_subgraph, PcstConfig, SolveMode, Subgraph};
pub use fold::{fold_edge_prizes, FoldedInstance};

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Objectives closer than this are treated as equal.
pub(crate) const EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PcstError {
    #[error("edge #{0} has non-positive or non-finite cost")]
    BadCost(usize),
    #[error("negative or non-finite prize on {0}")]
    BadPrize(String),
    #[error("edge #{index} references node {node} outside 0..{num_nodes}")]
    BadEndpoint {
        index: usize,
        node: usize,
        num_nodes: usize,
    },
    #[error("edge #{0} is a self-loop")]
    SelfLoop(usize),
    #[error("root {0} is not a node of the instance")]
    BadRoot(usize),
    #[error("only single-cluster solutions are supported (got num_clusters = {0})")]
    Clusters(usize),
    #[error("instance has {edges} edges after folding; exact solver is limited to {limit}, use solve_approx")]
    TooLarge { edges: usize, limit: usize },
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcstEdge {
    pub u: usize,
    pub v: usize,
    pub cost: f64,
    #[serde(default)]
    pub prize: f64,
}

/// Undirected instance over nodes `0..node_prizes.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcstInstance {
    pub node_prizes: Vec<f64>,
    pub edges: Vec<PcstEdge>,
    #[serde(default)]
    pub root: Option<usize>,
    #[serde(default = "one")]
    pub num_clusters: usize,
}

impl PcstInstance {
    pub fn new(node_prizes: Vec<f64>, edges: Vec<PcstEdge>, root: Option<usize>) -> Self {
        Self {
            node_prizes,
            edges,
            root,
            num_clusters: 1,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.node_prizes.len()
    }

    pub fn validate(&self) -> Result<(), PcstError> {
        if self.num_clusters != 1 {
            return Err(PcstError::Clusters(self.num_clusters));
        }
        for (i, p) in self.node_prizes.iter().enumerate() {
            if !(p.is_finite() && *p >= 0.0) {
                return Err(PcstError::BadPrize(format!("node {i}")));
            }
        }
        let n = self.num_nodes();
        for (i, e) in self.edges.iter().enumerate() {
            if !(e.cost.is_finite() && e.cost > 0.0) {
                return Err(PcstError::BadCost(i));
            }
            if !(e.prize.is_finite() && e.prize >= 0.0) {
                return Err(PcstError::BadPrize(format!("edge {i}")));
            }
            for node in [e.u, e.v] {
                if node >= n {
                    return Err(PcstError::BadEndpoint {
                        index: i,
                        node,
                        num_nodes: n,
                    });
                }
            }
            if e.u == e.v {
                return Err(PcstError::SelfLoop(i));
            }
        }
        if let Some(r) = self.root {
            if r >= n {
                return Err(PcstError::BadRoot(r));
            }
        }
        Ok(())
    }

    /// Incident `(edge, other endpoint)` pairs per node.
    pub(crate) fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.num_nodes()];
        for (i, e) in self.edges.iter().enumerate() {
            adj[e.u].push((i, e.v));
            adj[e.v].push((i, e.u));
        }
        adj
    }

    pub fn objective(&self, nodes: &[usize], edges: &[usize]) -> f64 {
        let node_sum: f64 = nodes.iter().map(|&u| self.node_prizes[u]).sum();
        let edge_sum: f64 = edges
            .iter()
            .map(|&e| self.edges[e].prize - self.edges[e].cost)
            .sum();
        node_sum + edge_sum
    }
}

/// Solution over instance indices; node and edge lists are sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcstSolution {
    pub nodes: Vec<usize>,
    pub edges: Vec<usize>,
    pub objective: f64,
}

impl PcstSolution {
    pub fn empty() -> Self {
        Self {
            nodes: Vec::new(),
            edges: Vec::new(),
            objective: 0.0,
        }
    }

    pub(crate) fn from_parts(inst: &PcstInstance, mut nodes: Vec<usize>, mut edges: Vec<usize>) -> Self {
        nodes.sort_unstable();
        nodes.dedup();
        edges.sort_unstable();
        edges.dedup();
        let objective = inst.objective(&nodes, &edges);
        Self {
            nodes,
            edges,
            objective,
        }
    }

    /// Preference order: higher objective, then fewer edges, then the
    /// lexicographically smaller node list. `Greater` means `self` wins.
    pub fn preference(&self, other: &Self) -> Ordering {
        if (self.objective - other.objective).abs() > EPS {
            return self.objective.total_cmp(&other.objective);
        }
        other
            .edges
            .len()
            .cmp(&self.edges.len())
            .then_with(|| other.nodes.cmp(&self.nodes))
    }

    pub fn contains_node(&self, u: usize) -> bool {
        self.nodes.binary_search(&u).is_ok()
    }
}

/// Union-find connectivity check of `nodes` under `edges`. Edge endpoints
/// must be among `nodes`. The empty set counts as connected.
pub fn is_connected(inst: &PcstInstance, nodes: &[usize], edges: &[usize]) -> bool {
    if nodes.is_empty() {
        return edges.is_empty();
    }
    let index: HashMap<usize, usize> = nodes.iter().enumerate().map(|(i, &u)| (u, i)).collect();
    let pos = |u: usize| index.get(&u).copied();
    let mut parent: Vec<usize> = (0..nodes.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut components = nodes.len();
    for &e in edges {
        let (Some(a), Some(b)) = (pos(inst.edges[e].u), pos(inst.edges[e].v)) else {
            return false;
        };
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            components -= 1;
        }
    }
    components == 1
}
