//! Question answering over one loaded graph: embed the question, rank nodes
//! and edges, select a connected subgraph, render it, ask the model.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{embed_graph, embed_text, EdgeText, EmbedError, Embedder, EmbeddingStore, GraphEmbeddings};
use crate::graph::{NodeId, StateActionGraph};
use crate::llm::{CompletionRequest, LlmClient, LlmError, DEFAULT_MAX_TOKENS};
use crate::pcst::{extract_subgraph, PcstConfig, PcstError, Subgraph};
use crate::retrieval::{retrieve, RetrievalError, RetrievalResult};
use crate::textualize::{build_bare_prompt, build_prompt, textualize, PromptBundle, PromptConfig, TextualizeError};

pub const DEFAULT_K: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Input,
    EmbedQuery,
    Retrieve,
    Pcst,
    Textualize,
    Llm,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Input => "input",
            Stage::EmbedQuery => "embed_query",
            Stage::Retrieve => "retrieve",
            Stage::Pcst => "pcst",
            Stage::Textualize => "textualize",
            Stage::Llm => "llm",
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineErrorKind {
    #[error("question must not be empty")]
    EmptyQuestion,
    #[error(transparent)]
    Embedding(#[from] EmbedError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Pcst(#[from] PcstError),
    #[error(transparent)]
    Textualize(#[from] TextualizeError),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

/// Failure of one stage, with the timings recorded up to that point.
#[derive(Debug, Error)]
#[error("{} failed: {kind}", stage.as_str())]
pub struct PipelineError {
    pub stage: Stage,
    pub kind: PipelineErrorKind,
    pub timings: StageTimings,
}

impl PipelineError {
    pub fn class(&self) -> &'static str {
        match &self.kind {
            PipelineErrorKind::EmptyQuestion => "empty_question",
            PipelineErrorKind::Embedding(_) => "embedding",
            PipelineErrorKind::Retrieval(RetrievalError::UnknownCurrentNode(_)) => "unknown_current_node",
            PipelineErrorKind::Retrieval(RetrievalError::ZeroK) => "invalid_k",
            PipelineErrorKind::Retrieval(_) => "retrieval",
            PipelineErrorKind::Pcst(_) => "pcst",
            PipelineErrorKind::Textualize(TextualizeError::OverBudget { .. }) => "token_budget",
            PipelineErrorKind::Textualize(_) => "textualize",
            PipelineErrorKind::Llm(e) => e.class(),
        }
    }
}

/// Seconds spent in each stage. Stages that did not run stay at zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub embed_query: f64,
    pub retrieve: f64,
    pub pcst: f64,
    pub llm: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub k: usize,
    pub pcst: PcstConfig,
    pub prompt: PromptConfig,
    pub edge_text: EdgeText,
    pub max_tokens: u32,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            pcst: PcstConfig::default(),
            prompt: PromptConfig::default(),
            edge_text: EdgeText::default(),
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

/// A graph together with its node and edge embeddings.
#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: StateActionGraph,
    pub embeddings: GraphEmbeddings,
}

impl LoadedGraph {
    pub fn build(
        graph: StateActionGraph,
        embedder: &dyn Embedder,
        store: Option<&EmbeddingStore>,
        edge_text: EdgeText,
    ) -> Result<Self, EmbedError> {
        let embeddings = embed_graph(embedder, &graph, store, edge_text)?;
        Ok(Self { graph, embeddings })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrieveOutput {
    pub retrieval: RetrievalResult,
    pub subgraph: Subgraph,
    pub subgraph_text: String,
    pub timings: StageTimings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryOutput {
    pub answer: String,
    /// Absent for bare queries.
    pub retrieval: Option<RetrievalResult>,
    pub subgraph: Option<Subgraph>,
    pub prompt: PromptBundle,
    pub timings: StageTimings,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryOptions {
    pub k: Option<usize>,
    /// Defaults to the graph's home node.
    pub current_node: Option<NodeId>,
    /// Skip retrieval and send the question alone.
    pub bare: bool,
}

pub struct Engine {
    embedder: Arc<dyn Embedder>,
    llm: Arc<dyn LlmClient>,
    cfg: EngineConfig,
}

struct Clock {
    start: Instant,
    timings: StageTimings,
}

impl Clock {
    fn new() -> Self {
        Self {
            start: Instant::now(),
            timings: StageTimings::default(),
        }
    }

    fn fail(&self, stage: Stage, kind: impl Into<PipelineErrorKind>) -> PipelineError {
        let mut timings = self.timings;
        timings.total = self.start.elapsed().as_secs_f64();
        PipelineError {
            stage,
            kind: kind.into(),
            timings,
        }
    }

    fn finish(mut self) -> StageTimings {
        self.timings.total = self.start.elapsed().as_secs_f64();
        self.timings
    }
}

impl Engine {
    pub fn new(embedder: Arc<dyn Embedder>, llm: Arc<dyn LlmClient>, cfg: EngineConfig) -> Self {
        Self { embedder, llm, cfg }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn embedder(&self) -> &Arc<dyn Embedder> {
        &self.embedder
    }

    pub fn llm(&self) -> &Arc<dyn LlmClient> {
        &self.llm
    }

    pub fn load(&self, graph: StateActionGraph, store: Option<&EmbeddingStore>) -> Result<LoadedGraph, EmbedError> {
        LoadedGraph::build(graph, self.embedder.as_ref(), store, self.cfg.edge_text)
    }

    fn retrieve_timed(
        &self,
        lg: &LoadedGraph,
        question: &str,
        opts: &QueryOptions,
        clock: &mut Clock,
    ) -> Result<(RetrievalResult, Subgraph, String), PipelineError> {
        if question.trim().is_empty() {
            return Err(clock.fail(Stage::Input, PipelineErrorKind::EmptyQuestion));
        }
        let k = opts.k.unwrap_or(self.cfg.k);
        let pin = opts.current_node.unwrap_or_else(|| lg.graph.home_node());

        let t = Instant::now();
        let qv = embed_text(self.embedder.as_ref(), question).map_err(|e| clock.fail(Stage::EmbedQuery, e))?;
        clock.timings.embed_query = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let r = retrieve(&lg.embeddings, &qv, question, k, Some(pin)).map_err(|e| clock.fail(Stage::Retrieve, e))?;
        clock.timings.retrieve = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let sg = extract_subgraph(&lg.graph, &r, &self.cfg.pcst).map_err(|e| clock.fail(Stage::Pcst, e))?;
        clock.timings.pcst = t.elapsed().as_secs_f64();

        let text = textualize(&sg, &lg.graph).map_err(|e| clock.fail(Stage::Textualize, e))?;
        Ok((r, sg, text))
    }

    /// Retrieval and subgraph selection without calling the model.
    pub fn retrieve(&self, lg: &LoadedGraph, question: &str, opts: &QueryOptions) -> Result<RetrieveOutput, PipelineError> {
        let mut clock = Clock::new();
        let (retrieval, subgraph, subgraph_text) = self.retrieve_timed(lg, question, opts, &mut clock)?;
        Ok(RetrieveOutput {
            retrieval,
            subgraph,
            subgraph_text,
            timings: clock.finish(),
        })
    }

    pub fn query(&self, lg: &LoadedGraph, question: &str, opts: &QueryOptions) -> Result<QueryOutput, PipelineError> {
        let mut clock = Clock::new();
        let (retrieval, subgraph, prompt) = if opts.bare {
            if question.trim().is_empty() {
                return Err(clock.fail(Stage::Input, PipelineErrorKind::EmptyQuestion));
            }
            let p = build_bare_prompt(question, &self.cfg.prompt).map_err(|e| clock.fail(Stage::Textualize, e))?;
            (None, None, p)
        } else {
            let (r, sg, text) = self.retrieve_timed(lg, question, opts, &mut clock)?;
            let p = build_prompt(&text, question, &self.cfg.prompt).map_err(|e| clock.fail(Stage::Textualize, e))?;
            (Some(r), Some(sg), p)
        };

        let mut req = CompletionRequest::from_bundle(self.llm.model_id(), &prompt);
        req.max_tokens = self.cfg.max_tokens;
        let t = Instant::now();
        let resp = self.llm.complete(&req);
        clock.timings.llm = t.elapsed().as_secs_f64();
        let resp = resp.map_err(|e| clock.fail(Stage::Llm, e))?;
        Ok(QueryOutput {
            answer: resp.text,
            retrieval,
            subgraph,
            prompt,
            timings: clock.finish(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::HashingEmbedder;
    use crate::graph::{EdgeKind, EdgeRecord, NodeRecord};
    use crate::llm::MockLlm;

    fn graph() -> StateActionGraph {
        let node = |id, name: &str, desc: &str| NodeRecord {
            node_id: id,
            name: name.into(),
            description: desc.into(),
            url: String::new(),
        };
        StateActionGraph::new(
            "mini",
            0,
            vec![
                node(0, "Home", "home page"),
                node(1, "Leads", "list of leads"),
                node(2, "New Lead", "create a new lead"),
            ],
            vec![
                EdgeRecord::new(0, 1, "Open Leads", EdgeKind::Menu),
                EdgeRecord::new(1, 2, "Create Lead", EdgeKind::Button),
            ],
        )
        .unwrap()
    }

    fn engine(llm: MockLlm) -> Engine {
        Engine::new(Arc::new(HashingEmbedder::default()), Arc::new(llm), EngineConfig::default())
    }

    #[test]
    fn echo_answer_is_subgraph_text() {
        let e = engine(MockLlm::echo());
        let lg = e.load(graph(), None).unwrap();
        let out = e.query(&lg, "create a lead", &QueryOptions::default()).unwrap();
        let sg = out.subgraph.unwrap();
        assert_eq!(sg.nodes, vec![0, 1, 2]);
        assert_eq!(out.answer, out.prompt.subgraph_text);
        let t = out.timings;
        assert!(t.total + 0.005 >= t.embed_query + t.retrieve + t.pcst + t.llm);
    }

    #[test]
    fn bare_query_skips_retrieval() {
        let e = engine(MockLlm::echo());
        let lg = e.load(graph(), None).unwrap();
        let opts = QueryOptions {
            bare: true,
            ..Default::default()
        };
        let out = e.query(&lg, "create a lead", &opts).unwrap();
        assert!(out.subgraph.is_none());
        assert_eq!(out.answer, "User question: create a lead");
        assert_eq!(out.timings.retrieve, 0.0);
    }

    #[test]
    fn stage_errors() {
        let e = engine(MockLlm::echo());
        let lg = e.load(graph(), None).unwrap();
        let err = e.retrieve(&lg, "  ", &QueryOptions::default()).unwrap_err();
        assert_eq!((err.stage, err.class()), (Stage::Input, "empty_question"));
        let opts = QueryOptions {
            current_node: Some(99),
            ..Default::default()
        };
        let err = e.retrieve(&lg, "lead", &opts).unwrap_err();
        assert_eq!((err.stage, err.class()), (Stage::Retrieve, "unknown_current_node"));

        let e = engine(MockLlm::from_json(r#"{"nothing": "x"}"#).unwrap());
        let err = e.query(&lg, "lead", &QueryOptions::default()).unwrap_err();
        assert_eq!((err.stage, err.class()), (Stage::Llm, "no_script"));
        assert!(err.timings.pcst >= 0.0 && err.timings.total > 0.0);
    }
}
