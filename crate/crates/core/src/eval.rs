//! Batch comparison of bare model answers against graph-grounded ones.
//!
//! Only objective quantities are scored: retrieval hit rate against an
//! expected node set, and wall-clock times. Answers are rendered for human
//! review.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::NodeId;
use crate::pipeline::{Engine, LoadedGraph, QueryOptions};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Language {
    #[default]
    En,
    Fr,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCase {
    pub question: String,
    #[serde(default)]
    pub language: Language,
    pub graph_id: String,
    #[serde(default)]
    pub expected_nodes: Option<BTreeSet<NodeId>>,
    #[serde(default)]
    pub current_node: Option<NodeId>,
    #[serde(default)]
    pub notes: Option<String>,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Reads one case per non-blank line.
pub fn read_cases(input: impl BufRead) -> Result<Vec<EvalCase>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let case: EvalCase = serde_json::from_str(&line).map_err(|e| EvalError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if case.question.trim().is_empty() {
            return Err(EvalError::Parse {
                line: i + 1,
                message: "question must not be empty".into(),
            });
        }
        out.push(case);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowFailure {
    /// Which of the two runs failed: `llm` or `grag`.
    pub run: String,
    pub class: String,
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub question: String,
    pub language: Language,
    pub graph_id: String,
    pub llm_answer: Option<String>,
    pub grag_answer: Option<String>,
    pub llm_time: Option<f64>,
    pub grag_time: Option<f64>,
    pub retrieval_hit_rate: Option<f64>,
    pub subgraph_nodes: Vec<NodeId>,
    pub failure: Option<RowFailure>,
}

impl EvalRow {
    pub fn ok(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub cases: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub mean_llm_time: f64,
    pub median_llm_time: f64,
    pub mean_grag_time: f64,
    pub median_grag_time: f64,
    /// Over successful rows that have expected nodes.
    pub mean_hit_rate: f64,
    pub hit_rate_cases: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub aggregates: Aggregates,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    }
}

pub fn aggregate(rows: &[EvalRow]) -> Aggregates {
    let ok: Vec<&EvalRow> = rows.iter().filter(|r| r.ok()).collect();
    let llm: Vec<f64> = ok.iter().filter_map(|r| r.llm_time).collect();
    let grag: Vec<f64> = ok.iter().filter_map(|r| r.grag_time).collect();
    let hits: Vec<f64> = ok.iter().filter_map(|r| r.retrieval_hit_rate).collect();
    Aggregates {
        cases: rows.len(),
        succeeded: ok.len(),
        failed: rows.len() - ok.len(),
        mean_llm_time: mean(&llm),
        median_llm_time: median(&llm),
        mean_grag_time: mean(&grag),
        median_grag_time: median(&grag),
        mean_hit_rate: mean(&hits),
        hit_rate_cases: hits.len(),
    }
}

/// |selected ∩ expected| / |expected|; `None` when nothing is expected.
pub fn hit_rate(selected: &[NodeId], expected: &BTreeSet<NodeId>) -> Option<f64> {
    if expected.is_empty() {
        return None;
    }
    let found = expected.iter().filter(|id| selected.contains(id)).count();
    Some(found as f64 / expected.len() as f64)
}

fn run_case(engine: &Engine, graphs: &BTreeMap<String, LoadedGraph>, case: &EvalCase) -> EvalRow {
    let mut row = EvalRow {
        question: case.question.clone(),
        language: case.language,
        graph_id: case.graph_id.clone(),
        llm_answer: None,
        grag_answer: None,
        llm_time: None,
        grag_time: None,
        retrieval_hit_rate: None,
        subgraph_nodes: Vec::new(),
        failure: None,
    };
    let Some(lg) = graphs.get(&case.graph_id) else {
        row.failure = Some(RowFailure {
            run: "grag".into(),
            class: "unknown_graph".into(),
            stage: "input".into(),
            message: format!("graph {:?} is not loaded", case.graph_id),
        });
        return row;
    };

    let bare = QueryOptions {
        bare: true,
        ..Default::default()
    };
    match engine.query(lg, &case.question, &bare) {
        Ok(out) => {
            row.llm_answer = Some(out.answer);
            row.llm_time = Some(out.timings.total);
        }
        Err(e) => {
            row.failure = Some(RowFailure {
                run: "llm".into(),
                class: e.class().into(),
                stage: e.stage.as_str().into(),
                message: e.to_string(),
            })
        }
    }

    let opts = QueryOptions {
        current_node: case.current_node,
        ..Default::default()
    };
    match engine.query(lg, &case.question, &opts) {
        Ok(out) => {
            let nodes = out.subgraph.map(|s| s.nodes).unwrap_or_default();
            row.retrieval_hit_rate = case.expected_nodes.as_ref().and_then(|e| hit_rate(&nodes, e));
            row.subgraph_nodes = nodes;
            row.grag_answer = Some(out.answer);
            row.grag_time = Some(out.timings.total);
        }
        Err(e) => {
            if row.failure.is_none() {
                row.failure = Some(RowFailure {
                    run: "grag".into(),
                    class: e.class().into(),
                    stage: e.stage.as_str().into(),
                    message: e.to_string(),
                });
            }
        }
    }
    row
}

/// Runs every case. Cases run in parallel; rows keep case order.
pub fn run_eval(engine: &Engine, graphs: &BTreeMap<String, LoadedGraph>, cases: &[EvalCase]) -> EvalReport {
    let rows: Vec<EvalRow> = cases.par_iter().map(|c| run_case(engine, graphs, c)).collect();
    let aggregates = aggregate(&rows);
    EvalReport { rows, aggregates }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Markdown,
    Json,
}

fn cell(text: &str) -> String {
    text.replace('|', "\\|").replace("\r\n", "<br>").replace('\n', "<br>")
}

fn secs(t: Option<f64>) -> String {
    t.map_or_else(|| "n/a".to_string(), |t| format!("{t:.2}"))
}

pub fn render_report(r: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(r).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Markdown => render_markdown(r),
    }
}

fn render_markdown(r: &EvalReport) -> String {
    let a = &r.aggregates;
    let mut out = String::from("# Evaluation report\n\n");
    out.push_str("| Cases | Succeeded | Failed | Mean LLM time (s) | Median LLM time (s) | Mean LLM+G-RAG time (s) | Median LLM+G-RAG time (s) | Mean hit rate |\n");
    out.push_str("|---|---|---|---|---|---|---|---|\n");
    let hit = if a.hit_rate_cases > 0 {
        format!("{:.3} (n={})", a.mean_hit_rate, a.hit_rate_cases)
    } else {
        "n/a".to_string()
    };
    out.push_str(&format!(
        "| {} | {} | {} | {:.2} | {:.2} | {:.2} | {:.2} | {} |\n\n",
        a.cases, a.succeeded, a.failed, a.mean_llm_time, a.median_llm_time, a.mean_grag_time, a.median_grag_time, hit
    ));
    for (i, row) in r.rows.iter().enumerate() {
        out.push_str(&format!("## {}. {}\n\n", i + 1, row.question));
        out.push_str(&format!("Graph: `{}`, language: {:?}", row.graph_id, row.language));
        if let Some(h) = row.retrieval_hit_rate {
            out.push_str(&format!(", retrieval hit rate: {h:.3}"));
        }
        out.push_str("\n\n");
        if let Some(f) = &row.failure {
            out.push_str(&format!(
                "**Failed** ({} run, class `{}`, stage `{}`): {}\n\n",
                f.run,
                f.class,
                f.stage,
                cell(&f.message)
            ));
        }
        out.push_str("| | LLM | LLM+G-RAG |\n|---|---|---|\n");
        out.push_str(&format!(
            "| Answer | {} | {} |\n",
            cell(row.llm_answer.as_deref().unwrap_or("")),
            cell(row.grag_answer.as_deref().unwrap_or(""))
        ));
        out.push_str(&format!("| Time (s) | {} | {} |\n\n", secs(row.llm_time), secs(row.grag_time)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(llm: Option<f64>, grag: Option<f64>, hit: Option<f64>, failed: bool) -> EvalRow {
        EvalRow {
            question: "q".into(),
            language: Language::En,
            graph_id: "g".into(),
            llm_answer: Some("a\nb | c".into()),
            grag_answer: Some("d".into()),
            llm_time: llm,
            grag_time: grag,
            retrieval_hit_rate: hit,
            subgraph_nodes: vec![],
            failure: failed.then(|| RowFailure {
                run: "grag".into(),
                class: "timeout".into(),
                stage: "llm".into(),
                message: "slow".into(),
            }),
        }
    }

    #[test]
    fn aggregates_skip_failed_rows() {
        let rows = vec![
            row(Some(1.0), Some(2.0), Some(1.0), false),
            row(Some(3.0), Some(4.0), None, false),
            row(Some(100.0), None, Some(0.0), true),
        ];
        let a = aggregate(&rows);
        assert_eq!((a.cases, a.succeeded, a.failed), (3, 2, 1));
        assert_eq!(a.mean_llm_time, 2.0);
        assert_eq!(a.median_grag_time, 3.0);
        assert_eq!((a.mean_hit_rate, a.hit_rate_cases), (1.0, 1));
        assert_eq!(aggregate(&[]), Aggregates::default());
    }

    #[test]
    fn markdown_shape() {
        let report = EvalReport {
            rows: vec![row(Some(1.5), Some(2.25), None, false)],
            aggregates: Aggregates::default(),
        };
        let md = render_report(&report, ReportFormat::Markdown);
        assert!(md.contains("| Answer | a<br>b \\| c | d |"));
        assert!(md.contains("| Time (s) | 1.50 | 2.25 |"));

        let failed = EvalReport {
            rows: vec![row(None, None, None, true)],
            aggregates: Aggregates::default(),
        };
        let md = render_report(&failed, ReportFormat::Markdown);
        assert!(md.contains("class `timeout`"));
        let js: EvalReport = serde_json::from_str(&render_report(&failed, ReportFormat::Json)).unwrap();
        assert_eq!(js, failed);
    }

    #[test]
    fn case_parsing() {
        let text = "{\"question\": \"How to create a lead?\", \"graph_id\": \"table2\", \"expected_nodes\": [0, 374]}\n\n{\"question\": \"Comment créer un événement ?\", \"language\": \"fr\", \"graph_id\": \"crm\"}\n";
        let cases = read_cases(text.as_bytes()).unwrap();
        assert_eq!(cases.len(), 2);
        assert_eq!(cases[1].language, Language::Fr);
        assert!(matches!(
            read_cases("{\"question\": \" \", \"graph_id\": \"g\"}".as_bytes()),
            Err(EvalError::Parse { line: 1, .. })
        ));
        assert_eq!(hit_rate(&[0, 1], &[0, 2].into_iter().collect()), Some(0.5));
        assert_eq!(hit_rate(&[0], &BTreeSet::new()), None);
    }
}
