//! Top-k node and edge retrieval with rank-based prizes.
//!
//! Node at rank `i` (0-based) among the top `k` gets prize `k - i`; anything
//! outside the top `k` gets 0. The user's current node, when given, is
//! pinned with prize `k + 1` so it dominates every rank prize.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{cosine, EmbedError, EmbeddingVector, GraphEmbeddings};
use crate::graph::NodeId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RetrievalError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("current node {0} is not in the graph")]
    UnknownCurrentNode(NodeId),
    #[error(transparent)]
    Embedding(#[from] EmbedError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredNode {
    pub node_id: NodeId,
    pub similarity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredEdge {
    pub edge_index: usize,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub query: String,
    pub k: usize,
    pub top_nodes: Vec<ScoredNode>,
    pub top_edges: Vec<ScoredEdge>,
    pub node_prizes: BTreeMap<NodeId, f64>,
    pub edge_prizes: BTreeMap<usize, f64>,
    pub pinned_node: Option<NodeId>,
}

impl RetrievalResult {
    pub fn node_prize(&self, id: NodeId) -> f64 {
        self.node_prizes.get(&id).copied().unwrap_or(0.0)
    }

    pub fn edge_prize(&self, index: usize) -> f64 {
        self.edge_prizes.get(&index).copied().unwrap_or(0.0)
    }

    pub fn max_similarity(&self) -> Option<f64> {
        self.top_nodes.first().map(|n| n.similarity)
    }

    pub fn mean_similarity(&self) -> Option<f64> {
        if self.top_nodes.is_empty() {
            return None;
        }
        Some(self.top_nodes.iter().map(|n| n.similarity).sum::<f64>() / self.top_nodes.len() as f64)
    }
}

/// Prize of the node or edge at 0-based `rank` within the top `k`.
///
/// # Panics
/// If `rank >= k`.
pub fn prize_of_rank(k: usize, rank: usize) -> f64 {
    assert!(rank < k, "rank {rank} outside top-{k}");
    (k - rank) as f64
}

/// Descending similarity, ascending key on ties.
fn rank_order<K: Ord>(a: &(K, f64), b: &(K, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

/// Exact top-k by exhaustive scan.
pub fn top_k<K: Ord + Copy>(mut scored: Vec<(K, f64)>, k: usize) -> Vec<(K, f64)> {
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, rank_order);
        scored.truncate(k);
    }
    scored.sort_unstable_by(rank_order);
    scored
}

pub fn retrieve(
    embeddings: &GraphEmbeddings,
    query_vector: &EmbeddingVector,
    query: &str,
    k: usize,
    current_node: Option<NodeId>,
) -> Result<RetrievalResult, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::ZeroK);
    }
    if let Some(id) = current_node {
        if !embeddings.node_vectors.contains_key(&id) {
            return Err(RetrievalError::UnknownCurrentNode(id));
        }
    }

    let node_scores = embeddings
        .node_vectors
        .iter()
        .map(|(&id, v)| Ok((id, cosine(query_vector, v)?)))
        .collect::<Result<Vec<_>, EmbedError>>()?;
    let edge_scores = embeddings
        .edge_vectors
        .iter()
        .enumerate()
        .map(|(i, v)| Ok((i, cosine(query_vector, v)?)))
        .collect::<Result<Vec<_>, EmbedError>>()?;

    let top_nodes: Vec<ScoredNode> = top_k(node_scores, k)
        .into_iter()
        .map(|(node_id, similarity)| ScoredNode {
            node_id,
            similarity,
        })
        .collect();
    let top_edges: Vec<ScoredEdge> = top_k(edge_scores, k)
        .into_iter()
        .map(|(edge_index, similarity)| ScoredEdge {
            edge_index,
            similarity,
        })
        .collect();

    let mut node_prizes: BTreeMap<NodeId, f64> = top_nodes
        .iter()
        .enumerate()
        .map(|(rank, n)| (n.node_id, prize_of_rank(k, rank)))
        .collect();
    let edge_prizes = top_edges
        .iter()
        .enumerate()
        .map(|(rank, e)| (e.edge_index, prize_of_rank(k, rank)))
        .collect();
    if let Some(id) = current_node {
        node_prizes.insert(id, (k + 1) as f64);
    }

    Ok(RetrievalResult {
        query: query.to_string(),
        k,
        top_nodes,
        top_edges,
        node_prizes,
        edge_prizes,
        pinned_node: current_node,
    })
}
