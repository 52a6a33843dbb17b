//! Subgraph serialization and prompt assembly.
//!
//! The graph block is two CSV sections separated by a blank line:
//!
//! ```text
//! node_id,node_name
//! 0,Home
//! 3,Dashboard
//!
//! node_src,node_tgt,action,type
//! 0,3,Dashboard,button
//! ```
//!
//! A fifth `detail` column is added only when at least one edge carries a
//! detail annotation.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{EdgeRecord, NodeId, StateActionGraph};
use crate::pcst::Subgraph;

pub const NODE_HEADER: [&str; 2] = ["node_id", "node_name"];
pub const EDGE_HEADER: [&str; 4] = ["node_src", "node_tgt", "action", "type"];
pub const GRAPH_BEGIN: &str = "GRAPH CONTEXT BEGIN";
pub const GRAPH_END: &str = "GRAPH CONTEXT END";
pub const QUESTION_PREFIX: &str = "User question: ";
pub const SECTION_SEPARATOR: &str = "\n\n";
pub const DEFAULT_TOKEN_BUDGET: usize = 8000;

pub const DEFAULT_SYSTEM_PROMPT: &str = "You are an expert assistant for enterprise software like CRM, ERP, HRMS, or other complex platforms. Help the user complete tasks by giving clear, step-by-step instructions using the actual menus, buttons, and labels in the software. If a step cannot be done, explain why. Avoid guessing or inventing features. Keep instructions precise and actionable.";

#[derive(Debug, Error)]
pub enum TextualizeError {
    #[error("subgraph node {0} is not in the graph")]
    UnknownNode(NodeId),
    #[error("subgraph edge index {0} is out of range")]
    UnknownEdge(usize),
    #[error("edge {src}->{tgt} ({action}) references node {missing} outside the subgraph")]
    MissingEndpoint {
        src: NodeId,
        tgt: NodeId,
        action: String,
        missing: NodeId,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed subgraph text: {0}")]
    Malformed(String),
    #[error("question must not be empty")]
    EmptyQuestion,
    #[error("prompt needs about {estimate} tokens, budget is {budget}")]
    OverBudget { estimate: usize, budget: usize },
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .quote_style(csv::QuoteStyle::Necessary)
        .flexible(true)
        .from_writer(Vec::new())
}

/// Serializes `sg` against its source graph. Deterministic: nodes ascend by
/// id, edges by (src, tgt, action).
pub fn textualize(sg: &Subgraph, g: &StateActionGraph) -> Result<String, TextualizeError> {
    let ids: BTreeSet<NodeId> = sg.nodes.iter().copied().collect();
    let mut nodes = Vec::with_capacity(ids.len());
    for &id in &ids {
        nodes.push(g.node(id).ok_or(TextualizeError::UnknownNode(id))?);
    }
    let mut edges: Vec<&EdgeRecord> = Vec::with_capacity(sg.edges.len());
    for &i in &sg.edges {
        let e = g.edges().get(i).ok_or(TextualizeError::UnknownEdge(i))?;
        for end in [e.src, e.tgt] {
            if !ids.contains(&end) {
                return Err(TextualizeError::MissingEndpoint {
                    src: e.src,
                    tgt: e.tgt,
                    action: e.action.clone(),
                    missing: end,
                });
            }
        }
        edges.push(e);
    }
    edges.sort_by(|a, b| {
        (a.src, a.tgt, &a.action, a.kind.as_str(), &a.detail)
            .cmp(&(b.src, b.tgt, &b.action, b.kind.as_str(), &b.detail))
    });
    edges.dedup_by(|a, b| a == b);
    let with_detail = edges.iter().any(|e| e.detail.is_some());

    let mut w = writer();
    w.write_record(NODE_HEADER)?;
    for n in &nodes {
        w.write_record([n.node_id.to_string().as_str(), n.name.as_str()])?;
    }
    let mut out = w.into_inner().map_err(|e| TextualizeError::Malformed(e.to_string()))?;
    out.push(b'\n');

    let mut w = writer();
    if with_detail {
        w.write_record(EDGE_HEADER.iter().copied().chain(["detail"]))?;
    } else {
        w.write_record(EDGE_HEADER)?;
    }
    for e in &edges {
        let src = e.src.to_string();
        let tgt = e.tgt.to_string();
        let mut row = vec![src.as_str(), tgt.as_str(), e.action.as_str(), e.kind.as_str()];
        if with_detail {
            row.push(e.detail.as_deref().unwrap_or(""));
        }
        w.write_record(&row)?;
    }
    out.extend(w.into_inner().map_err(|e| TextualizeError::Malformed(e.to_string()))?);
    String::from_utf8(out).map_err(|e| TextualizeError::Malformed(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedEdge {
    pub src: NodeId,
    pub tgt: NodeId,
    pub action: String,
    pub kind: String,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedSubgraph {
    pub nodes: Vec<(NodeId, String)>,
    pub edges: Vec<ParsedEdge>,
}

fn parse_id(field: &str) -> Result<NodeId, TextualizeError> {
    field
        .parse()
        .map_err(|_| TextualizeError::Malformed(format!("bad node id {field:?}")))
}

/// Reads a graph block back. Used for round-trip checks.
pub fn parse_subgraph_text(text: &str) -> Result<ParsedSubgraph, TextualizeError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = rdr.records();
    let header = records
        .next()
        .ok_or_else(|| TextualizeError::Malformed("empty text".into()))??;
    if header.iter().ne(NODE_HEADER) {
        return Err(TextualizeError::Malformed("missing node header".into()));
    }
    let mut out = ParsedSubgraph::default();
    let mut with_detail = None;
    for rec in records {
        let rec = rec?;
        match with_detail {
            None if rec.len() == 2 => {
                out.nodes.push((parse_id(&rec[0])?, rec[1].to_string()));
            }
            None => {
                let cols: Vec<&str> = rec.iter().collect();
                with_detail = Some(match cols.as_slice() {
                    c if c == EDGE_HEADER => false,
                    [a, b, c, d, "detail"] if [*a, *b, *c, *d] == EDGE_HEADER => true,
                    _ => return Err(TextualizeError::Malformed("missing edge header".into())),
                });
            }
            Some(detail) => {
                let want = if detail { 5 } else { 4 };
                if rec.len() != want {
                    return Err(TextualizeError::Malformed(format!(
                        "edge row has {} fields, expected {want}",
                        rec.len()
                    )));
                }
                out.edges.push(ParsedEdge {
                    src: parse_id(&rec[0])?,
                    tgt: parse_id(&rec[1])?,
                    action: rec[2].to_string(),
                    kind: rec[3].to_string(),
                    detail: (detail && !rec[4].is_empty()).then(|| rec[4].to_string()),
                });
            }
        }
    }
    if with_detail.is_none() {
        return Err(TextualizeError::Malformed("missing edge header".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptConfig {
    pub system_prompt: String,
    pub token_budget: usize,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            system_prompt: DEFAULT_SYSTEM_PROMPT.to_string(),
            token_budget: DEFAULT_TOKEN_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_prompt: String,
    pub subgraph_text: String,
    pub question: String,
    /// Everything after the system prompt; sent in the user role.
    pub user_message: String,
    pub full_prompt: String,
    pub token_estimate: usize,
}

/// Rough token count: a quarter of the character count, at least one.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4).max(1)
}

fn bundle(
    subgraph_text: &str,
    question: &str,
    user_message: String,
    cfg: &PromptConfig,
) -> Result<PromptBundle, TextualizeError> {
    let full_prompt = format!("{}{SECTION_SEPARATOR}{user_message}", cfg.system_prompt);
    let token_estimate = estimate_tokens(&full_prompt);
    if token_estimate > cfg.token_budget {
        return Err(TextualizeError::OverBudget {
            estimate: token_estimate,
            budget: cfg.token_budget,
        });
    }
    Ok(PromptBundle {
        system_prompt: cfg.system_prompt.clone(),
        subgraph_text: subgraph_text.to_string(),
        question: question.to_string(),
        user_message,
        full_prompt,
        token_estimate,
    })
}

/// Prompt with the fenced graph block ahead of the question.
pub fn build_prompt(
    subgraph_text: &str,
    question: &str,
    cfg: &PromptConfig,
) -> Result<PromptBundle, TextualizeError> {
    if question.trim().is_empty() {
        return Err(TextualizeError::EmptyQuestion);
    }
    let mut user = String::with_capacity(subgraph_text.len() + question.len() + 64);
    user.push_str(GRAPH_BEGIN);
    user.push('\n');
    user.push_str(subgraph_text);
    if !subgraph_text.is_empty() && !subgraph_text.ends_with('\n') {
        user.push('\n');
    }
    user.push_str(GRAPH_END);
    user.push_str(SECTION_SEPARATOR);
    user.push_str(QUESTION_PREFIX);
    user.push_str(question);
    bundle(subgraph_text, question, user, cfg)
}

/// Prompt without graph context, for the standalone baseline.
pub fn build_bare_prompt(question: &str, cfg: &PromptConfig) -> Result<PromptBundle, TextualizeError> {
    if question.trim().is_empty() {
        return Err(TextualizeError::EmptyQuestion);
    }
    bundle("", question, format!("{QUESTION_PREFIX}{question}"), cfg)
}

/// The text between the graph fences of a prompt, if it has them.
pub fn extract_graph_block(prompt: &str) -> Option<&str> {
    let begin = format!("{GRAPH_BEGIN}\n");
    let start = prompt.find(&begin)? + begin.len();
    let len = prompt[start..].find(GRAPH_END)?;
    Some(&prompt[start..start + len])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeKind, NodeRecord};

    fn node(id: NodeId, name: &str) -> NodeRecord {
        NodeRecord {
            node_id: id,
            name: name.into(),
            description: String::new(),
            url: String::new(),
        }
    }

    fn sg(nodes: &[NodeId], edges: &[usize]) -> Subgraph {
        Subgraph {
            nodes: nodes.to_vec(),
            edges: edges.to_vec(),
            objective: 0.0,
            connected: true,
        }
    }

    fn small() -> StateActionGraph {
        StateActionGraph::new(
            "t",
            1,
            vec![node(2, "Save, then exit"), node(1, "Home"), node(3, "Other")],
            vec![
                EdgeRecord::new(1, 2, "Open \"quick\" save", EdgeKind::Button),
                EdgeRecord::new(1, 3, "Go", EdgeKind::Link),
                EdgeRecord::new(1, 2, "Alt", EdgeKind::Menu),
            ],
        )
        .unwrap()
    }

    #[test]
    fn quoting_and_order() {
        let g = small();
        let text = textualize(&sg(&[2, 1], &[0, 2]), &g).unwrap();
        assert_eq!(
            text,
            "node_id,node_name\n1,Home\n2,\"Save, then exit\"\n\n\
             node_src,node_tgt,action,type\n1,2,Alt,menu\n1,2,\"Open \"\"quick\"\" save\",button\n"
        );
        let parsed = parse_subgraph_text(&text).unwrap();
        assert_eq!(parsed.nodes[1], (2, "Save, then exit".to_string()));
        assert_eq!(parsed.edges[1].action, "Open \"quick\" save");
    }

    #[test]
    fn empty_subgraph() {
        let g = small();
        let text = textualize(&Subgraph::empty(), &g).unwrap();
        assert_eq!(text, "node_id,node_name\n\nnode_src,node_tgt,action,type\n");
        assert_eq!(parse_subgraph_text(&text).unwrap(), ParsedSubgraph::default());
    }

    #[test]
    fn integrity_errors() {
        let g = small();
        assert!(matches!(
            textualize(&sg(&[1], &[1]), &g),
            Err(TextualizeError::MissingEndpoint { missing: 3, .. })
        ));
        assert!(matches!(textualize(&sg(&[9], &[]), &g), Err(TextualizeError::UnknownNode(9))));
        assert!(matches!(textualize(&sg(&[1], &[7]), &g), Err(TextualizeError::UnknownEdge(7))));
    }

    #[test]
    fn detail_column_only_when_present() {
        let mut e = EdgeRecord::new(1, 2, "Fill", EdgeKind::Form);
        e.detail = Some("name; email".into());
        let g = StateActionGraph::new(
            "t",
            1,
            vec![node(1, "A"), node(2, "B")],
            vec![e, EdgeRecord::new(2, 1, "Back", EdgeKind::Link)],
        )
        .unwrap();
        let text = textualize(&sg(&[1, 2], &[0, 1]), &g).unwrap();
        assert!(text.ends_with("node_src,node_tgt,action,type,detail\n1,2,Fill,form,name; email\n2,1,Back,link,\n"));
        let parsed = parse_subgraph_text(&text).unwrap();
        assert_eq!(parsed.edges[0].detail.as_deref(), Some("name; email"));
        assert_eq!(parsed.edges[1].detail, None);
    }

    #[test]
    fn prompt_layout() {
        let b = build_prompt("node_id,node_name\n1,Home\n", "How?", &PromptConfig::default()).unwrap();
        assert_eq!(
            b.user_message,
            "GRAPH CONTEXT BEGIN\nnode_id,node_name\n1,Home\nGRAPH CONTEXT END\n\nUser question: How?"
        );
        assert_eq!(b.full_prompt, format!("{DEFAULT_SYSTEM_PROMPT}\n\n{}", b.user_message));
        assert_eq!(extract_graph_block(&b.full_prompt), Some("node_id,node_name\n1,Home\n"));
        assert_eq!(b.token_estimate, b.full_prompt.chars().count().div_ceil(4));

        let empty = build_prompt("", "How?", &PromptConfig::default()).unwrap();
        assert!(empty.full_prompt.contains("GRAPH CONTEXT BEGIN\nGRAPH CONTEXT END"));
        assert_eq!(extract_graph_block(&empty.full_prompt), Some(""));

        let bare = build_bare_prompt("How?", &PromptConfig::default()).unwrap();
        assert_eq!(bare.user_message, "User question: How?");
        assert_eq!(extract_graph_block(&bare.full_prompt), None);
    }

    #[test]
    fn prompt_errors() {
        assert!(matches!(
            build_prompt("x", "  ", &PromptConfig::default()),
            Err(TextualizeError::EmptyQuestion)
        ));
        let cfg = PromptConfig {
            token_budget: 256,
            ..Default::default()
        };
        let big = "1,Node\n".repeat(200);
        match build_prompt(&big, "q?", &cfg) {
            Err(TextualizeError::OverBudget { estimate, budget }) => {
                assert_eq!(budget, 256);
                assert!(estimate > 256);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn token_estimate_floor() {
        assert_eq!(estimate_tokens(""), 1);
        assert_eq!(estimate_tokens("abcde"), 2);
        assert_eq!(estimate_tokens("éééé"), 1);
    }
}
