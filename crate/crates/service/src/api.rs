//! Request and response bodies of the `/v1` endpoints.

use chrono::{DateTime, Utc};
use grag_core::graph::{AdjacencyFile, EdgeKind, GraphError, GraphStats, NodeId, NodesFile, StateActionGraph};
use grag_core::pcst::Subgraph;
use grag_core::pipeline::{PipelineError, Stage, StageTimings};
use grag_core::retrieval::RetrievalResult;
use grag_core::textualize::PromptBundle;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// Error body shared by every endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub class: String,
    pub stage: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<StageTimings>,
}

impl ApiError {
    pub fn new(status: u16, class: &str, stage: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            class: class.into(),
            stage: stage.into(),
            message: message.into(),
            details: None,
            timings: None,
        }
    }

    pub fn unknown_graph(id: &str) -> Self {
        Self::new(404, "unknown_graph", "input", format!("graph {id:?} is not loaded"))
    }

    pub fn graph(e: &GraphError) -> Self {
        let details = match e {
            GraphError::Parse { file, line, column, .. } => json!({"file": file, "line": line, "column": column}),
            GraphError::MissingHome { home_node } => json!({"home_node": home_node}),
            GraphError::DuplicateNode(id) | GraphError::EmptyName(id) => json!({"node_id": id}),
            GraphError::DanglingEdge {
                index,
                src,
                tgt,
                action,
                missing,
            } => json!({"index": index, "src": src, "tgt": tgt, "action": action, "missing": missing}),
            GraphError::DuplicateEdge { index, src, tgt, action } => {
                json!({"index": index, "src": src, "tgt": tgt, "action": action})
            }
            GraphError::EmptyAction { index } => json!({"index": index}),
            GraphError::UnknownKind { index, kind } => json!({"index": index, "kind": kind}),
            GraphError::GraphIdMismatch { nodes, adjacency } => json!({"nodes": nodes, "adjacency": adjacency}),
            GraphError::Io(_) => Value::Null,
        };
        Self {
            details: (!details.is_null()).then_some(details),
            ..Self::new(422, e.class(), "validate", e.to_string())
        }
    }

    pub fn pipeline(e: &PipelineError) -> Self {
        let class = e.class();
        let status = match (class, e.stage) {
            ("empty_question" | "unknown_current_node" | "invalid_k" | "token_budget", _) => 422,
            (_, Stage::Llm | Stage::EmbedQuery) => 502,
            _ => 500,
        };
        Self {
            timings: Some(e.timings),
            ..Self::new(status, class, e.stage.as_str(), e.to_string())
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UploadRequest {
    pub nodes: NodesFile,
    pub adjacency: AdjacencyFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UploadResponse {
    pub graph_id: String,
    pub home_node: NodeId,
    pub stats: GraphStats,
    /// Nodes not reachable from the home node.
    pub unreachable: Vec<NodeId>,
    /// False when identical content was already loaded.
    pub embedded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub graph_id: String,
    pub home_node: NodeId,
    pub stats: GraphStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrieveRequest {
    pub graph_id: String,
    pub question: String,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub current_node: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeView {
    pub node_id: NodeId,
    pub name: String,
    pub description: String,
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeView {
    /// Position in the graph's edge list.
    pub index: usize,
    pub src: NodeId,
    pub tgt: NodeId,
    pub action: String,
    pub kind: EdgeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgraphView {
    pub nodes: Vec<NodeView>,
    pub edges: Vec<EdgeView>,
    pub objective: f64,
    pub connected: bool,
}

impl SubgraphView {
    pub fn new(sg: &Subgraph, g: &StateActionGraph) -> Self {
        let nodes = sg
            .nodes
            .iter()
            .filter_map(|&id| g.node(id))
            .map(|n| NodeView {
                node_id: n.node_id,
                name: n.name.clone(),
                description: n.description.clone(),
                url: n.url.clone(),
            })
            .collect();
        let edges = sg.edges.iter().map(|&i| edge_view(g, i)).collect();
        Self {
            nodes,
            edges,
            objective: sg.objective,
            connected: sg.connected,
        }
    }
}

pub fn edge_view(g: &StateActionGraph, index: usize) -> EdgeView {
    let e = &g.edges()[index];
    EdgeView {
        index,
        src: e.src,
        tgt: e.tgt,
        action: e.action.clone(),
        kind: e.kind,
        detail: e.detail.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopNode {
    pub node_id: NodeId,
    pub name: String,
    pub similarity: f64,
    pub prize: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopEdge {
    #[serde(flatten)]
    pub edge: EdgeView,
    pub similarity: f64,
    pub prize: f64,
}

pub fn top_lists(r: &RetrievalResult, g: &StateActionGraph) -> (Vec<TopNode>, Vec<TopEdge>) {
    let nodes = r
        .top_nodes
        .iter()
        .map(|s| TopNode {
            node_id: s.node_id,
            name: g.node(s.node_id).map(|n| n.name.clone()).unwrap_or_default(),
            similarity: s.similarity,
            prize: r.node_prize(s.node_id),
        })
        .collect();
    let edges = r
        .top_edges
        .iter()
        .map(|s| TopEdge {
            edge: edge_view(g, s.edge_index),
            similarity: s.similarity,
            prize: r.edge_prize(s.edge_index),
        })
        .collect();
    (nodes, edges)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrieveResponse {
    pub graph_id: String,
    pub question: String,
    pub k: usize,
    pub current_node: NodeId,
    pub top_nodes: Vec<TopNode>,
    pub top_edges: Vec<TopEdge>,
    pub subgraph: SubgraphView,
    pub subgraph_text: String,
    pub timings: StageTimings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRequest {
    pub graph_id: String,
    pub question: String,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub current_node: Option<NodeId>,
    /// Name of a configured model backend; the default one when absent.
    #[serde(default)]
    pub llm: Option<String>,
    /// Ask the model without graph context.
    #[serde(default)]
    pub bare: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub graph_id: String,
    pub question: String,
    pub llm: String,
    pub model_id: String,
    pub bare: bool,
    pub answer: String,
    pub current_node: Option<NodeId>,
    pub subgraph: Option<SubgraphView>,
    pub prompt: PromptBundle,
    pub timings: StageTimings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryLog {
    pub timestamp: DateTime<Utc>,
    pub graph_id: String,
    pub question: String,
    pub llm: String,
    pub bare: bool,
    pub k: usize,
    pub pinned_node: Option<NodeId>,
    pub subgraph_nodes: usize,
    pub subgraph_edges: usize,
    pub max_similarity: Option<f64>,
    pub mean_similarity: Option<f64>,
    pub timings: StageTimings,
    /// `ok` or the error class.
    pub outcome: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<String>,
}
