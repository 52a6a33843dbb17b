//! Graph retrieval-augmented generation over state-action graphs of web
//! applications.

pub mod embedding;
pub mod eval;
pub mod graph;
pub mod llm;
pub mod pcst;
pub mod pipeline;
pub mod retrieval;
pub mod retry;
pub mod synth;
pub mod textualize;
