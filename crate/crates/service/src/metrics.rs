//! Prometheus instrumentation, exposed as text on `/metrics`.

use grag_core::pipeline::StageTimings;
use prometheus::{Encoder, Histogram, HistogramOpts, HistogramVec, IntCounter, IntCounterVec, IntGauge, Opts, Registry, TextEncoder};

const LATENCY_BUCKETS: &[f64] = &[0.001, 0.0025, 0.005, 0.01, 0.025, 0.05, 0.1, 0.25, 0.5, 1.0, 2.5, 5.0, 10.0, 30.0];
const SIMILARITY_BUCKETS: &[f64] = &[0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

pub struct Metrics {
    registry: Registry,
    pub queries: IntCounter,
    pub retrievals: IntCounter,
    pub errors: IntCounterVec,
    pub stage_seconds: HistogramVec,
    pub top_similarity: Histogram,
    pub graphs_loaded: IntGauge,
    pub uploads: IntCounterVec,
}

impl Metrics {
    pub fn new() -> Self {
        let registry = Registry::new();
        let queries = IntCounter::new("grag_queries_total", "Requests to /v1/query").expect("valid metric");
        let retrievals = IntCounter::new("grag_retrievals_total", "Requests to /v1/retrieve").expect("valid metric");
        let errors = IntCounterVec::new(
            Opts::new("grag_errors_total", "Failed requests by error class and stage"),
            &["endpoint", "class", "stage"],
        )
        .expect("valid metric");
        let stage_seconds = HistogramVec::new(
            HistogramOpts::new("grag_stage_seconds", "Pipeline stage latency in seconds").buckets(LATENCY_BUCKETS.to_vec()),
            &["stage"],
        )
        .expect("valid metric");
        let top_similarity = Histogram::with_opts(
            HistogramOpts::new("grag_top_similarity", "Best cosine similarity between question and nodes")
                .buckets(SIMILARITY_BUCKETS.to_vec()),
        )
        .expect("valid metric");
        let graphs_loaded = IntGauge::new("grag_graphs_loaded", "Graphs held in memory").expect("valid metric");
        let uploads = IntCounterVec::new(
            Opts::new("grag_graph_uploads_total", "Graph uploads by outcome"),
            &["outcome"],
        )
        .expect("valid metric");

        for c in [
            Box::new(queries.clone()) as Box<dyn prometheus::core::Collector>,
            Box::new(retrievals.clone()),
            Box::new(errors.clone()),
            Box::new(stage_seconds.clone()),
            Box::new(top_similarity.clone()),
            Box::new(graphs_loaded.clone()),
            Box::new(uploads.clone()),
        ] {
            registry.register(c).expect("unique metric names");
        }
        Self {
            registry,
            queries,
            retrievals,
            errors,
            stage_seconds,
            top_similarity,
            graphs_loaded,
            uploads,
        }
    }

    /// Records the stages that ran. `llm` is skipped when `with_llm` is false.
    pub fn observe(&self, t: &StageTimings, with_llm: bool) {
        let mut stages = vec![
            ("embed_query", t.embed_query),
            ("retrieve", t.retrieve),
            ("pcst", t.pcst),
            ("total", t.total),
        ];
        if with_llm {
            stages.push(("llm", t.llm));
        }
        for (stage, secs) in stages {
            self.stage_seconds.with_label_values(&[stage]).observe(secs);
        }
    }

    pub fn render(&self) -> String {
        let mut buf = Vec::new();
        TextEncoder::new()
            .encode(&self.registry.gather(), &mut buf)
            .expect("text encoding cannot fail");
        String::from_utf8(buf).expect("metrics are utf-8")
    }
}

impl Default for Metrics {
    fn default() -> Self {
        Self::new()
    }
}
