//! In-memory graph store and the request logic behind every endpoint. The
//! HTTP layer and the CLI both call into [`Service`].

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};

use grag_core::embedding::{Embedder, EmbeddingStore};
use grag_core::graph::{load_graph_files, AdjacencyFile, GraphStats, NodesFile, StateActionGraph};
use grag_core::llm::LlmClient;
use grag_core::pipeline::{Engine, EngineConfig, LoadedGraph, QueryOptions};

use crate::api::{
    top_lists, ApiError, GraphSummary, QueryLog, QueryRequest, QueryResponse, RetrieveRequest, RetrieveResponse,
    SubgraphView, UploadRequest, UploadResponse,
};
use crate::config::{ConfigError, ServiceConfig};
use crate::metrics::Metrics;

pub struct GraphEntry {
    pub loaded: LoadedGraph,
    pub stats: GraphStats,
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

pub struct Service {
    engines: BTreeMap<String, Engine>,
    default_llm: String,
    engine_cfg: EngineConfig,
    graphs: RwLock<BTreeMap<String, Arc<GraphEntry>>>,
    /// Serializes uploads per graph id so identical uploads embed once.
    upload_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    store: Option<EmbeddingStore>,
    logs: Mutex<VecDeque<QueryLog>>,
    log_capacity: usize,
    metrics: Metrics,
}

impl Service {
    pub fn from_config(cfg: &ServiceConfig) -> Result<Self, ConfigError> {
        let embedder = cfg.build_embedder()?;
        let (llms, default_llm) = cfg.build_llms()?;
        let svc = Self::new(embedder, llms, default_llm, cfg.engine.clone())
            .with_cache(cfg.cache_dir.as_deref())
            .with_log_capacity(cfg.log_capacity);
        if let Some(dir) = &cfg.graph_dir {
            svc.load_dir(dir).map_err(|e| ConfigError::Invalid(format!("graph_dir: {}", e.message)))?;
        }
        Ok(svc)
    }

    /// # Panics
    /// If `default_llm` is not a key of `llms`.
    pub fn new(
        embedder: Arc<dyn Embedder>,
        llms: BTreeMap<String, Arc<dyn LlmClient>>,
        default_llm: String,
        engine_cfg: EngineConfig,
    ) -> Self {
        assert!(llms.contains_key(&default_llm), "default llm {default_llm:?} not configured");
        let engines = llms
            .into_iter()
            .map(|(name, llm)| (name, Engine::new(embedder.clone(), llm, engine_cfg.clone())))
            .collect();
        Self {
            engines,
            default_llm,
            engine_cfg,
            graphs: RwLock::new(BTreeMap::new()),
            upload_locks: Mutex::new(HashMap::new()),
            store: None,
            logs: Mutex::new(VecDeque::new()),
            log_capacity: 10_000,
            metrics: Metrics::new(),
        }
    }

    pub fn with_cache(mut self, dir: Option<&Path>) -> Self {
        self.store = dir.map(EmbeddingStore::new);
        self
    }

    pub fn with_log_capacity(mut self, n: usize) -> Self {
        self.log_capacity = n;
        self
    }

    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }

    pub fn engine_config(&self) -> &EngineConfig {
        &self.engine_cfg
    }

    pub fn llm_names(&self) -> Vec<String> {
        self.engines.keys().cloned().collect()
    }

    fn default_engine(&self) -> &Engine {
        &self.engines[&self.default_llm]
    }

    /// Validates, embeds and stores a graph. Uploading content identical to
    /// the loaded graph of the same id is a no-op.
    pub fn upload_graph(&self, graph: StateActionGraph) -> Result<UploadResponse, ApiError> {
        let id = graph.graph_id().to_string();
        let gate = lock(&self.upload_locks).entry(id.clone()).or_default().clone();
        let _held = lock(&gate);

        let respond = |e: &GraphEntry, embedded: bool| UploadResponse {
            graph_id: id.clone(),
            home_node: e.loaded.graph.home_node(),
            stats: e.stats.clone(),
            unreachable: e.loaded.graph.validate().unreachable,
            embedded,
        };
        if let Some(existing) = self.get(&id) {
            if existing.loaded.graph == graph {
                self.metrics.uploads.with_label_values(&["unchanged"]).inc();
                return Ok(respond(&existing, false));
            }
        }

        let stats = graph.stats();
        let loaded = self.default_engine().load(graph, self.store.as_ref()).map_err(|e| {
            let mut err = ApiError::new(502, "embedding", "embed", e.to_string());
            if !e.is_retryable() {
                err.status = 500;
            }
            err
        })?;
        let entry = Arc::new(GraphEntry { loaded, stats });
        let replaced = {
            let mut graphs = self.graphs.write().unwrap_or_else(|p| p.into_inner());
            let old = graphs.insert(id.clone(), entry.clone());
            self.metrics.graphs_loaded.set(graphs.len() as i64);
            old.is_some()
        };
        self.metrics
            .uploads
            .with_label_values(&[if replaced { "replaced" } else { "created" }])
            .inc();
        tracing::info!(graph_id = %id, nodes = entry.stats.nodes, edges = entry.stats.edges, replaced, "graph loaded");
        Ok(respond(&entry, true))
    }

    pub fn upload(&self, req: UploadRequest) -> Result<UploadResponse, ApiError> {
        let graph = StateActionGraph::from_files(req.nodes, req.adjacency).map_err(|e| ApiError::graph(&e))?;
        self.upload_graph(graph)
    }

    /// Loads every `{name}.nodes.json` / `{name}.adj.json` pair in `dir`,
    /// in file name order.
    pub fn load_dir(&self, dir: &Path) -> Result<Vec<UploadResponse>, ApiError> {
        let io = |e: std::io::Error| ApiError::new(500, "io", "input", format!("{}: {e}", dir.display()));
        let mut names: Vec<String> = std::fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_str()?.strip_suffix(".nodes.json").map(String::from))
            .collect();
        names.sort();
        let mut out = Vec::new();
        for name in names {
            let adj = dir.join(format!("{name}.adj.json"));
            if !adj.exists() {
                tracing::warn!(graph = %name, "nodes file without adjacency file, skipped");
                continue;
            }
            let g = load_graph_files(dir.join(format!("{name}.nodes.json")), adj).map_err(|e| ApiError::graph(&e))?;
            out.push(self.upload_graph(g)?);
        }
        Ok(out)
    }

    pub fn get(&self, id: &str) -> Option<Arc<GraphEntry>> {
        self.graphs.read().unwrap_or_else(|p| p.into_inner()).get(id).cloned()
    }

    fn require(&self, id: &str) -> Result<Arc<GraphEntry>, ApiError> {
        self.get(id).ok_or_else(|| ApiError::unknown_graph(id))
    }

    /// All loaded graphs, by id.
    pub fn loaded(&self) -> BTreeMap<String, LoadedGraph> {
        self.graphs
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .iter()
            .map(|(k, v)| (k.clone(), v.loaded.clone()))
            .collect()
    }

    pub fn list(&self) -> Vec<GraphSummary> {
        self.graphs
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .values()
            .map(|e| GraphSummary {
                graph_id: e.loaded.graph.graph_id().to_string(),
                home_node: e.loaded.graph.home_node(),
                stats: e.stats.clone(),
            })
            .collect()
    }

    pub fn stats(&self, id: &str) -> Result<GraphSummary, ApiError> {
        let e = self.require(id)?;
        Ok(GraphSummary {
            graph_id: id.to_string(),
            home_node: e.loaded.graph.home_node(),
            stats: e.stats.clone(),
        })
    }

    pub fn graph_files(&self, id: &str) -> Result<(NodesFile, AdjacencyFile), ApiError> {
        Ok(self.require(id)?.loaded.graph.to_files())
    }

    pub fn retrieve(&self, req: &RetrieveRequest) -> Result<RetrieveResponse, ApiError> {
        self.metrics.retrievals.inc();
        let result = self.retrieve_inner(req);
        if let Err(e) = &result {
            self.metrics.errors.with_label_values(&["retrieve", &e.class, &e.stage]).inc();
        }
        result
    }

    fn retrieve_inner(&self, req: &RetrieveRequest) -> Result<RetrieveResponse, ApiError> {
        let entry = self.require(&req.graph_id)?;
        let g = &entry.loaded.graph;
        let opts = QueryOptions {
            k: req.k,
            current_node: req.current_node,
            bare: false,
        };
        let out = self
            .default_engine()
            .retrieve(&entry.loaded, &req.question, &opts)
            .map_err(|e| ApiError::pipeline(&e))?;
        self.metrics.observe(&out.timings, false);
        if let Some(s) = out.retrieval.max_similarity() {
            self.metrics.top_similarity.observe(s);
        }
        let (top_nodes, top_edges) = top_lists(&out.retrieval, g);
        Ok(RetrieveResponse {
            graph_id: req.graph_id.clone(),
            question: req.question.clone(),
            k: out.retrieval.k,
            current_node: out.retrieval.pinned_node.unwrap_or_else(|| g.home_node()),
            top_nodes,
            top_edges,
            subgraph: SubgraphView::new(&out.subgraph, g),
            subgraph_text: out.subgraph_text,
            timings: out.timings,
        })
    }

    pub fn query(&self, req: &QueryRequest) -> Result<QueryResponse, ApiError> {
        self.metrics.queries.inc();
        let llm = req.llm.clone().unwrap_or_else(|| self.default_llm.clone());
        let mut log = QueryLog {
            timestamp: chrono::Utc::now(),
            graph_id: req.graph_id.clone(),
            question: req.question.clone(),
            llm: llm.clone(),
            bare: req.bare,
            k: req.k.unwrap_or(self.engine_cfg.k),
            pinned_node: None,
            subgraph_nodes: 0,
            subgraph_edges: 0,
            max_similarity: None,
            mean_similarity: None,
            timings: Default::default(),
            outcome: "ok".into(),
            stage: None,
        };
        let result = self.query_inner(req, &llm, &mut log);
        match &result {
            Ok(r) => {
                log.timings = r.timings;
                self.metrics.observe(&r.timings, true);
            }
            Err(e) => {
                log.outcome = e.class.clone();
                log.stage = Some(e.stage.clone());
                if let Some(t) = e.timings {
                    log.timings = t;
                }
                self.metrics.errors.with_label_values(&["query", &e.class, &e.stage]).inc();
                tracing::warn!(graph_id = %req.graph_id, class = %e.class, stage = %e.stage, "query failed");
            }
        }
        self.push_log(log);
        result
    }

    fn query_inner(&self, req: &QueryRequest, llm: &str, log: &mut QueryLog) -> Result<QueryResponse, ApiError> {
        let engine = self
            .engines
            .get(llm)
            .ok_or_else(|| ApiError::new(422, "unknown_llm", "input", format!("no model backend named {llm:?}")))?;
        let entry = self.require(&req.graph_id)?;
        let g = &entry.loaded.graph;
        let opts = QueryOptions {
            k: req.k,
            current_node: req.current_node,
            bare: req.bare,
        };
        if !req.bare {
            log.pinned_node = Some(req.current_node.unwrap_or_else(|| g.home_node()));
        }
        let out = engine
            .query(&entry.loaded, &req.question, &opts)
            .map_err(|e| ApiError::pipeline(&e))?;
        if let Some(r) = &out.retrieval {
            log.max_similarity = r.max_similarity();
            log.mean_similarity = r.mean_similarity();
            if let Some(s) = log.max_similarity {
                self.metrics.top_similarity.observe(s);
            }
        }
        if let Some(sg) = &out.subgraph {
            log.subgraph_nodes = sg.nodes.len();
            log.subgraph_edges = sg.edges.len();
        }
        Ok(QueryResponse {
            graph_id: req.graph_id.clone(),
            question: req.question.clone(),
            llm: llm.to_string(),
            model_id: engine.llm().model_id().to_string(),
            bare: req.bare,
            answer: out.answer,
            current_node: log.pinned_node,
            subgraph: out.subgraph.as_ref().map(|sg| SubgraphView::new(sg, g)),
            prompt: out.prompt,
            timings: out.timings,
        })
    }

    fn push_log(&self, log: QueryLog) {
        let mut logs = lock(&self.logs);
        logs.push_back(log);
        while logs.len() > self.log_capacity {
            logs.pop_front();
        }
    }

    /// Most recent logs, oldest first.
    pub fn logs(&self, limit: Option<usize>) -> Vec<QueryLog> {
        let logs = lock(&self.logs);
        let skip = limit.map_or(0, |n| logs.len().saturating_sub(n));
        logs.iter().skip(skip).cloned().collect()
    }

    /// Engine bound to the default model backend.
    pub fn engine(&self) -> &Engine {
        self.default_engine()
    }
}
