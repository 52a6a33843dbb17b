use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::{EmbedError, Embedder, EmbeddingVector};
use crate::graph::{EdgeRecord, NodeId, NodeRecord, StateActionGraph};

/// Which edge attribute is embedded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeText {
    #[default]
    Action,
    ActionAndKind,
}

impl EdgeText {
    pub fn text(self, edge: &EdgeRecord) -> String {
        match self {
            EdgeText::Action => edge.action.clone(),
            EdgeText::ActionAndKind => format!("{} ({})", edge.action, edge.kind),
        }
    }
}

/// Text embedded for a node: its description, or its name when the
/// description is empty (e.g. a page that failed to load during crawling).
pub fn node_text(node: &NodeRecord) -> &str {
    if node.description.trim().is_empty() {
        &node.name
    } else {
        &node.description
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphEmbeddings {
    pub graph_id: String,
    pub embedder_id: String,
    pub dim: usize,
    pub node_vectors: BTreeMap<NodeId, EmbeddingVector>,
    /// Indexed by position in the adjacency file.
    pub edge_vectors: Vec<EmbeddingVector>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    key: u64,
    text: String,
    vector: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheFile {
    graph_id: String,
    embedder_id: String,
    d: usize,
    nodes: Vec<CacheEntry>,
    edges: Vec<CacheEntry>,
}

fn encode(v: &EmbeddingVector) -> String {
    let bytes: Vec<u8> = v.values().iter().flat_map(|f| f.to_le_bytes()).collect();
    B64.encode(bytes)
}

fn decode(s: &str, dim: usize) -> Result<EmbeddingVector, EmbedError> {
    let bytes = B64
        .decode(s)
        .map_err(|e| EmbedError::Cache(e.to_string()))?;
    if bytes.len() != dim * 4 {
        return Err(EmbedError::Cache(format!(
            "expected {} bytes, found {}",
            dim * 4,
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    EmbeddingVector::from_stored(values)
}

/// Directory of `{graph_id}.emb.json` files. Reads are concurrent; writes
/// are serialized and atomic (temp file + rename).
#[derive(Debug)]
pub struct EmbeddingStore {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl EmbeddingStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            write_lock: Mutex::new(()),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, graph_id: &str) -> PathBuf {
        self.dir.join(format!("{graph_id}.emb.json"))
    }

    fn read(&self, graph_id: &str) -> Result<Option<CacheFile>, EmbedError> {
        let path = self.path_for(graph_id);
        match std::fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map(Some)
                .map_err(|e| EmbedError::Cache(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(EmbedError::Cache(e.to_string())),
        }
    }

    /// Loads persisted embeddings for a graph, if any.
    pub fn load(&self, graph_id: &str) -> Result<Option<GraphEmbeddings>, EmbedError> {
        let Some(file) = self.read(graph_id)? else {
            return Ok(None);
        };
        let node_vectors = file
            .nodes
            .iter()
            .map(|e| Ok((e.key, decode(&e.vector, file.d)?)))
            .collect::<Result<_, EmbedError>>()?;
        let mut edges: Vec<&CacheEntry> = file.edges.iter().collect();
        edges.sort_by_key(|e| e.key);
        let edge_vectors = edges
            .iter()
            .map(|e| decode(&e.vector, file.d))
            .collect::<Result<_, _>>()?;
        Ok(Some(GraphEmbeddings {
            graph_id: file.graph_id,
            embedder_id: file.embedder_id,
            dim: file.d,
            node_vectors,
            edge_vectors,
        }))
    }

    /// Persists `ge`, recording the text each vector was computed from.
    pub fn save(
        &self,
        ge: &GraphEmbeddings,
        graph: &StateActionGraph,
        edge_text: EdgeText,
    ) -> Result<(), EmbedError> {
        let file = CacheFile {
            graph_id: ge.graph_id.clone(),
            embedder_id: ge.embedder_id.clone(),
            d: ge.dim,
            nodes: graph
                .nodes()
                .iter()
                .map(|n| CacheEntry {
                    key: n.node_id,
                    text: node_text(n).to_string(),
                    vector: encode(&ge.node_vectors[&n.node_id]),
                })
                .collect(),
            edges: graph
                .edges()
                .iter()
                .zip(&ge.edge_vectors)
                .enumerate()
                .map(|(i, (e, v))| CacheEntry {
                    key: i as u64,
                    text: edge_text.text(e),
                    vector: encode(v),
                })
                .collect(),
        };
        let _guard = self.write_lock.lock().unwrap_or_else(|p| p.into_inner());
        std::fs::create_dir_all(&self.dir).map_err(|e| EmbedError::Cache(e.to_string()))?;
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)
            .map_err(|e| EmbedError::Cache(e.to_string()))?;
        serde_json::to_writer(&mut tmp, &file).map_err(|e| EmbedError::Cache(e.to_string()))?;
        tmp.write_all(b"\n")
            .map_err(|e| EmbedError::Cache(e.to_string()))?;
        tmp.persist(self.path_for(&ge.graph_id))
            .map_err(|e| EmbedError::Cache(e.to_string()))?;
        Ok(())
    }

    /// Text-to-vector map of a compatible cache file.
    fn cached_texts(
        &self,
        graph_id: &str,
        embedder: &dyn Embedder,
    ) -> Result<HashMap<String, EmbeddingVector>, EmbedError> {
        let Some(file) = self.read(graph_id)? else {
            return Ok(HashMap::new());
        };
        if file.embedder_id != embedder.id() || file.d != embedder.dim() {
            return Ok(HashMap::new());
        }
        file.nodes
            .into_iter()
            .chain(file.edges)
            .map(|e| Ok((e.text, decode(&e.vector, file.d)?)))
            .collect()
    }
}

/// Embeds every node and edge of `graph`. With a store, vectors whose text
/// and embedder are unchanged are reused and only misses reach the embedder;
/// the cache file is only written once every miss has been embedded.
pub fn embed_graph(
    embedder: &dyn Embedder,
    graph: &StateActionGraph,
    store: Option<&EmbeddingStore>,
    edge_text: EdgeText,
) -> Result<GraphEmbeddings, EmbedError> {
    let node_texts: Vec<String> = graph
        .nodes()
        .iter()
        .map(|n| node_text(n).to_string())
        .collect();
    let edge_texts: Vec<String> = graph.edges().iter().map(|e| edge_text.text(e)).collect();

    let mut known = match store {
        Some(s) => s.cached_texts(graph.graph_id(), embedder)?,
        None => HashMap::new(),
    };

    let mut misses: Vec<String> = Vec::new();
    let mut queued: HashSet<&str> = HashSet::new();
    for t in node_texts.iter().chain(&edge_texts) {
        if !known.contains_key(t) && queued.insert(t) {
            misses.push(t.clone());
        }
    }
    let wrote_new = !misses.is_empty();
    if wrote_new {
        let vectors = embedder.embed_batch(&misses)?;
        if vectors.len() != misses.len() {
            return Err(EmbedError::Protocol("embedder returned wrong count".into()));
        }
        for (t, v) in misses.into_iter().zip(vectors) {
            if v.dim() != embedder.dim() {
                return Err(EmbedError::DimensionMismatch {
                    left: v.dim(),
                    right: embedder.dim(),
                });
            }
            known.insert(t, v);
        }
    }

    let ge = GraphEmbeddings {
        graph_id: graph.graph_id().to_string(),
        embedder_id: embedder.id().to_string(),
        dim: embedder.dim(),
        node_vectors: graph
            .nodes()
            .iter()
            .zip(&node_texts)
            .map(|(n, t)| (n.node_id, known[t].clone()))
            .collect(),
        edge_vectors: edge_texts.iter().map(|t| known[t].clone()).collect(),
    };

    if let Some(s) = store {
        let stale = !s.path_for(graph.graph_id()).exists();
        if wrote_new || stale {
            s.save(&ge, graph, edge_text)?;
        }
    }
    Ok(ge)
}
