//! State-action graph: UI states as nodes, user actions as directed edges.
//!
//! Graphs are persisted as two JSON documents, a nodes file and an
//! adjacency file. Node ids are kept exactly as they appear on disk; they do
//! not need to be dense.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = u64;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeRecord {
    pub node_id: NodeId,
    pub name: String,
    pub description: String,
    pub url: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Button,
    Link,
    Menu,
    Form,
    Dropdown,
    System,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 6] = [
        EdgeKind::Button,
        EdgeKind::Link,
        EdgeKind::Menu,
        EdgeKind::Form,
        EdgeKind::Dropdown,
        EdgeKind::System,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Button => "button",
            EdgeKind::Link => "link",
            EdgeKind::Menu => "menu",
            EdgeKind::Form => "form",
            EdgeKind::Dropdown => "dropdown",
            EdgeKind::System => "system",
        }
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EdgeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EdgeKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub src: NodeId,
    pub tgt: NodeId,
    pub action: String,
    pub kind: EdgeKind,
    /// Extra payload carried into prompts (e.g. the fields of a form).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl EdgeRecord {
    pub fn new(src: NodeId, tgt: NodeId, action: impl Into<String>, kind: EdgeKind) -> Self {
        Self {
            src,
            tgt,
            action: action.into(),
            kind,
            detail: None,
        }
    }

    pub fn is_self_loop(&self) -> bool {
        self.src == self.tgt
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("malformed {file} file at line {line}, column {column}: {message}")]
    Parse {
        file: &'static str,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("graph must contain home node")]
    MissingHome { home_node: NodeId },
    #[error("duplicate node_id {0}")]
    DuplicateNode(NodeId),
    #[error("node {0} has an empty name")]
    EmptyName(NodeId),
    #[error("edge #{index} ({src} -> {tgt}, {action:?}) references missing node {missing}")]
    DanglingEdge {
        index: usize,
        src: NodeId,
        tgt: NodeId,
        action: String,
        missing: NodeId,
    },
    #[error("edge #{index} ({src} -> {tgt}, {action:?}) duplicates an earlier edge")]
    DuplicateEdge {
        index: usize,
        src: NodeId,
        tgt: NodeId,
        action: String,
    },
    #[error("edge #{index} has an empty action label")]
    EmptyAction { index: usize },
    #[error("edge #{index} has unknown kind {kind:?}")]
    UnknownKind { index: usize, kind: String },
    #[error("graph_id mismatch: nodes file says {nodes:?}, adjacency file says {adjacency:?}")]
    GraphIdMismatch { nodes: String, adjacency: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl GraphError {
    /// Stable machine-readable classification.
    pub fn class(&self) -> &'static str {
        match self {
            GraphError::Parse { .. } => "parse",
            GraphError::MissingHome { .. } => "missing_home",
            GraphError::DuplicateNode(_) => "duplicate_node",
            GraphError::EmptyName(_) => "empty_name",
            GraphError::DanglingEdge { .. } => "dangling_edge",
            GraphError::DuplicateEdge { .. } => "duplicate_edge",
            GraphError::EmptyAction { .. } => "empty_action",
            GraphError::UnknownKind { .. } => "unknown_kind",
            GraphError::GraphIdMismatch { .. } => "graph_id_mismatch",
            GraphError::Io(_) => "io",
        }
    }
}

/// On-disk shape of the nodes file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodesFile {
    pub graph_id: String,
    pub home_node: NodeId,
    pub nodes: Vec<NodeRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawEdge {
    src: NodeId,
    tgt: NodeId,
    action: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    detail: Option<String>,
}

/// On-disk shape of the adjacency file. Edge kinds stay textual until
/// validation so unknown kinds get a dedicated error.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdjacencyFile {
    pub graph_id: String,
    edges: Vec<RawEdge>,
}

impl AdjacencyFile {
    pub fn new(graph_id: impl Into<String>, edges: &[EdgeRecord]) -> Self {
        Self {
            graph_id: graph_id.into(),
            edges: edges
                .iter()
                .map(|e| RawEdge {
                    src: e.src,
                    tgt: e.tgt,
                    action: e.action.clone(),
                    kind: e.kind.as_str().to_string(),
                    detail: e.detail.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    pub reachable_fraction: f64,
    pub max_out_degree: usize,
}

/// Non-fatal findings from validation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub unreachable: Vec<NodeId>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.unreachable.is_empty()
    }
}

/// Immutable, validated state-action graph.
#[derive(Debug, Clone)]
pub struct StateActionGraph {
    graph_id: String,
    home_node: NodeId,
    nodes: Vec<NodeRecord>,
    edges: Vec<EdgeRecord>,
    index: HashMap<NodeId, usize>,
    out_edges: Vec<Vec<usize>>,
}

impl PartialEq for StateActionGraph {
    fn eq(&self, other: &Self) -> bool {
        self.graph_id == other.graph_id
            && self.home_node == other.home_node
            && self.nodes == other.nodes
            && self.edges == other.edges
    }
}

impl StateActionGraph {
    /// Validates and builds a graph. Reachability problems are reported by
    /// [`StateActionGraph::validate`], not rejected here.
    pub fn new(
        graph_id: impl Into<String>,
        home_node: NodeId,
        nodes: Vec<NodeRecord>,
        edges: Vec<EdgeRecord>,
    ) -> Result<Self, GraphError> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (pos, node) in nodes.iter().enumerate() {
            if index.insert(node.node_id, pos).is_some() {
                return Err(GraphError::DuplicateNode(node.node_id));
            }
            if node.name.trim().is_empty() {
                return Err(GraphError::EmptyName(node.node_id));
            }
        }
        if !index.contains_key(&home_node) {
            return Err(GraphError::MissingHome { home_node });
        }

        let mut seen = HashSet::with_capacity(edges.len());
        let mut out_edges = vec![Vec::new(); nodes.len()];
        for (i, edge) in edges.iter().enumerate() {
            for endpoint in [edge.src, edge.tgt] {
                if !index.contains_key(&endpoint) {
                    return Err(GraphError::DanglingEdge {
                        index: i,
                        src: edge.src,
                        tgt: edge.tgt,
                        action: edge.action.clone(),
                        missing: endpoint,
                    });
                }
            }
            if edge.action.trim().is_empty() {
                return Err(GraphError::EmptyAction { index: i });
            }
            if !seen.insert((edge.src, edge.tgt, edge.action.as_str())) {
                return Err(GraphError::DuplicateEdge {
                    index: i,
                    src: edge.src,
                    tgt: edge.tgt,
                    action: edge.action.clone(),
                });
            }
            out_edges[index[&edge.src]].push(i);
        }

        Ok(Self {
            graph_id: graph_id.into(),
            home_node,
            nodes,
            edges,
            index,
            out_edges,
        })
    }

    pub fn graph_id(&self) -> &str {
        &self.graph_id
    }

    pub fn home_node(&self) -> NodeId {
        self.home_node
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn edges(&self) -> &[EdgeRecord] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeRecord> {
        self.index.get(&id).map(|&pos| &self.nodes[pos])
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.index.contains_key(&id)
    }

    /// Position of a node in [`StateActionGraph::nodes`].
    pub fn position(&self, id: NodeId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    /// Indices of edges leaving `id`, in adjacency-file order.
    pub fn out_edges(&self, id: NodeId) -> &[usize] {
        self.index
            .get(&id)
            .map(|&pos| self.out_edges[pos].as_slice())
            .unwrap_or(&[])
    }

    /// Nodes reachable from the home node along directed edges.
    pub fn reachable_from_home(&self) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([self.home_node]);
        seen.insert(self.home_node);
        while let Some(u) = queue.pop_front() {
            for &e in self.out_edges(u) {
                let v = self.edges[e].tgt;
                if seen.insert(v) {
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    pub fn validate(&self) -> ValidationReport {
        let reachable = self.reachable_from_home();
        let mut unreachable: Vec<NodeId> = self
            .nodes
            .iter()
            .map(|n| n.node_id)
            .filter(|id| !reachable.contains(id))
            .collect();
        unreachable.sort_unstable();
        ValidationReport { unreachable }
    }

    pub fn stats(&self) -> GraphStats {
        let reachable = self.reachable_from_home().len();
        GraphStats {
            nodes: self.nodes.len(),
            edges: self.edges.len(),
            reachable_fraction: reachable as f64 / self.nodes.len() as f64,
            max_out_degree: self.out_edges.iter().map(Vec::len).max().unwrap_or(0),
        }
    }

    pub fn to_files(&self) -> (NodesFile, AdjacencyFile) {
        (
            NodesFile {
                graph_id: self.graph_id.clone(),
                home_node: self.home_node,
                nodes: self.nodes.clone(),
            },
            AdjacencyFile::new(self.graph_id.clone(), &self.edges),
        )
    }

    pub fn from_files(nodes: NodesFile, adjacency: AdjacencyFile) -> Result<Self, GraphError> {
        if nodes.graph_id != adjacency.graph_id {
            return Err(GraphError::GraphIdMismatch {
                nodes: nodes.graph_id,
                adjacency: adjacency.graph_id,
            });
        }
        let edges = adjacency
            .edges
            .into_iter()
            .enumerate()
            .map(|(index, raw)| {
                let kind = raw
                    .kind
                    .parse()
                    .map_err(|kind| GraphError::UnknownKind { index, kind })?;
                Ok(EdgeRecord {
                    src: raw.src,
                    tgt: raw.tgt,
                    action: raw.action,
                    kind,
                    detail: raw.detail,
                })
            })
            .collect::<Result<Vec<_>, GraphError>>()?;
        Self::new(nodes.graph_id, nodes.home_node, nodes.nodes, edges)
    }
}

fn parse_json<T: for<'de> Deserialize<'de>>(
    file: &'static str,
    bytes: &[u8],
) -> Result<T, GraphError> {
    serde_json::from_slice(bytes).map_err(|e| GraphError::Parse {
        file,
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Loads and validates a graph from its nodes and adjacency streams.
/// Unreachable nodes are logged as a warning.
pub fn load_graph<R1: Read, R2: Read>(
    mut nodes_file: R1,
    mut adjacency_file: R2,
) -> Result<StateActionGraph, GraphError> {
    let mut nodes_buf = Vec::new();
    nodes_file
        .read_to_end(&mut nodes_buf)
        .map_err(|e| GraphError::Io(e.to_string()))?;
    let mut adj_buf = Vec::new();
    adjacency_file
        .read_to_end(&mut adj_buf)
        .map_err(|e| GraphError::Io(e.to_string()))?;

    let nodes: NodesFile = parse_json("nodes", &nodes_buf)?;
    let adjacency: AdjacencyFile = parse_json("adjacency", &adj_buf)?;
    let graph = StateActionGraph::from_files(nodes, adjacency)?;

    let report = graph.validate();
    if !report.is_clean() {
        tracing::warn!(
            graph_id = graph.graph_id(),
            unreachable = ?report.unreachable,
            "graph has nodes unreachable from home"
        );
    }
    Ok(graph)
}

pub fn load_graph_files(
    nodes_path: impl AsRef<std::path::Path>,
    adjacency_path: impl AsRef<std::path::Path>,
) -> Result<StateActionGraph, GraphError> {
    let open = |p: &std::path::Path| {
        std::fs::File::open(p).map_err(|e| GraphError::Io(format!("{}: {e}", p.display())))
    };
    load_graph(open(nodes_path.as_ref())?, open(adjacency_path.as_ref())?)
}

/// Writes both files as 2-space indented JSON with a trailing newline.
pub fn save_graph<W1: Write, W2: Write>(
    graph: &StateActionGraph,
    mut nodes_out: W1,
    mut adjacency_out: W2,
) -> std::io::Result<()> {
    let (nodes, adjacency) = graph.to_files();
    serde_json::to_writer_pretty(&mut nodes_out, &nodes)?;
    nodes_out.write_all(b"\n")?;
    serde_json::to_writer_pretty(&mut adjacency_out, &adjacency)?;
    adjacency_out.write_all(b"\n")?;
    Ok(())
}

pub fn save_graph_files(
    graph: &StateActionGraph,
    nodes_path: impl AsRef<std::path::Path>,
    adjacency_path: impl AsRef<std::path::Path>,
) -> std::io::Result<()> {
    let mut nodes = Vec::new();
    let mut adj = Vec::new();
    save_graph(graph, &mut nodes, &mut adj)?;
    std::fs::write(nodes_path, nodes)?;
    std::fs::write(adjacency_path, adj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nodes_json(home: u64, ids: &[u64]) -> String {
        let nodes: Vec<String> = ids
            .iter()
            .map(|id| {
                format!(r#"{{"node_id": {id}, "name": "N{id}", "description": "d", "url": ""}}"#)
            })
            .collect();
        format!(
            r#"{{"graph_id": "g", "home_node": {home}, "nodes": [{}]}}"#,
            nodes.join(",")
        )
    }

    fn adj_json(edges: &[(u64, u64, &str, &str)]) -> String {
        let edges: Vec<String> = edges
            .iter()
            .map(|(s, t, a, k)| {
                format!(r#"{{"src": {s}, "tgt": {t}, "action": "{a}", "kind": "{k}"}}"#)
            })
            .collect();
        format!(r#"{{"graph_id": "g", "edges": [{}]}}"#, edges.join(","))
    }

    fn load(nodes: &str, adj: &str) -> Result<StateActionGraph, GraphError> {
        load_graph(nodes.as_bytes(), adj.as_bytes())
    }

    #[test]
    fn empty_graph_has_no_home() {
        let err = load(&nodes_json(0, &[]), &adj_json(&[])).unwrap_err();
        assert_eq!(err.to_string(), "graph must contain home node");
    }

    #[test]
    fn dangling_edge_is_named() {
        let err = load(&nodes_json(0, &[0]), &adj_json(&[(0, 999, "Go", "link")])).unwrap_err();
        match err {
            GraphError::DanglingEdge { index, missing, .. } => {
                assert_eq!((index, missing), (0, 999));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_node_rejected() {
        let err = load(&nodes_json(0, &[0, 1, 1]), &adj_json(&[])).unwrap_err();
        assert_eq!(err, GraphError::DuplicateNode(1));
    }

    #[test]
    fn duplicate_edge_triple_rejected() {
        let err = load(
            &nodes_json(0, &[0, 1]),
            &adj_json(&[(0, 1, "Go", "link"), (0, 1, "Go", "button")]),
        )
        .unwrap_err();
        assert_eq!(err.class(), "duplicate_edge");
    }

    #[test]
    fn unknown_kind_rejected() {
        let err = load(&nodes_json(0, &[0, 1]), &adj_json(&[(0, 1, "Go", "hover")])).unwrap_err();
        assert_eq!(
            err,
            GraphError::UnknownKind {
                index: 0,
                kind: "hover".into()
            }
        );
    }

    #[test]
    fn malformed_json_reports_line() {
        let err = load("{\n  \"graph_id\": \"g\",\n  oops\n}", &adj_json(&[])).unwrap_err();
        match err {
            GraphError::Parse { file, line, .. } => {
                assert_eq!(file, "nodes");
                assert_eq!(line, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn self_loops_allowed_and_ids_sparse() {
        let g = load(
            &nodes_json(0, &[0, 374]),
            &adj_json(&[(0, 374, "Go", "link"), (374, 374, "Save", "button")]),
        )
        .unwrap();
        assert!(g.edges()[1].is_self_loop());
        assert_eq!(g.node(374).unwrap().name, "N374");
    }

    #[test]
    fn single_home_stats() {
        let g = load(&nodes_json(7, &[7]), &adj_json(&[])).unwrap();
        assert_eq!(
            g.stats(),
            GraphStats {
                nodes: 1,
                edges: 0,
                reachable_fraction: 1.0,
                max_out_degree: 0
            }
        );
    }

    #[test]
    fn unreachable_nodes_reported_not_rejected() {
        let g = load(
            &nodes_json(0, &[0, 1, 2, 3]),
            &adj_json(&[(0, 1, "a", "link"), (2, 3, "b", "link")]),
        )
        .unwrap();
        assert_eq!(g.validate().unreachable, vec![2, 3]);
        assert_eq!(g.stats().reachable_fraction, 0.5);
    }

    #[test]
    fn save_emits_documented_key_order() {
        let g = load(&nodes_json(0, &[0, 1]), &adj_json(&[(0, 1, "Go", "menu")])).unwrap();
        let (mut n, mut a) = (Vec::new(), Vec::new());
        save_graph(&g, &mut n, &mut a).unwrap();
        let n = String::from_utf8(n).unwrap();
        let a = String::from_utf8(a).unwrap();
        assert!(n.starts_with("{\n  \"graph_id\": \"g\",\n  \"home_node\": 0,\n  \"nodes\": ["));
        let src = a.find("\"src\"").unwrap();
        let tgt = a.find("\"tgt\"").unwrap();
        let action = a.find("\"action\"").unwrap();
        let kind = a.find("\"kind\"").unwrap();
        assert!(src < tgt && tgt < action && action < kind);
        assert!(!a.contains("detail"));
    }
}
