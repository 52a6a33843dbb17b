use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::fold::folded_edge_count;
use super::{solve_approx, solve_exact, PcstEdge, PcstError, PcstInstance, EXACT_EDGE_LIMIT};
use crate::graph::{EdgeRecord, NodeId, NodeRecord, StateActionGraph};
use crate::retrieval::RetrievalResult;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    /// Exact when the folded instance fits the enumeration bound.
    #[default]
    Auto,
    Exact,
    Approx,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PcstConfig {
    /// Uniform cost of every action.
    pub edge_cost: f64,
    pub mode: SolveMode,
}

impl Default for PcstConfig {
    fn default() -> Self {
        Self {
            edge_cost: 1.0,
            mode: SolveMode::Auto,
        }
    }
}

/// Connected piece of a state-action graph. Edges are indices into the
/// source graph's edge list, so directions and labels are the originals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subgraph {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<usize>,
    pub objective: f64,
    pub connected: bool,
}

impl Subgraph {
    pub fn empty() -> Self {
        Self {
            nodes: Vec::new(),
            edges: Vec::new(),
            objective: 0.0,
            connected: true,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_records<'g>(&self, g: &'g StateActionGraph) -> Vec<&'g NodeRecord> {
        self.nodes.iter().filter_map(|&id| g.node(id)).collect()
    }

    pub fn edge_records<'g>(&self, g: &'g StateActionGraph) -> Vec<&'g EdgeRecord> {
        self.edges.iter().map(|&i| &g.edges()[i]).collect()
    }
}

/// Undirected projection of a graph with prizes from a retrieval result.
struct Projection {
    instance: PcstInstance,
    /// Source directed edges behind each undirected edge.
    members: Vec<Vec<usize>>,
    loops: Vec<usize>,
}

fn project(g: &StateActionGraph, r: &RetrievalResult, cost: f64) -> Projection {
    let node_prizes = g.nodes().iter().map(|n| r.node_prize(n.node_id)).collect();
    let mut pairs: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    let mut loops = Vec::new();
    for (i, e) in g.edges().iter().enumerate() {
        if e.is_self_loop() {
            loops.push(i);
            continue;
        }
        let a = g.position(e.src).expect("validated graph");
        let b = g.position(e.tgt).expect("validated graph");
        pairs.entry((a.min(b), a.max(b))).or_default().push(i);
    }
    let mut edges = Vec::with_capacity(pairs.len());
    let mut members = Vec::with_capacity(pairs.len());
    for ((a, b), idx) in pairs {
        // Parallel actions collapse into one undirected edge carrying the
        // best prize among them.
        let prize = idx.iter().map(|&i| r.edge_prize(i)).fold(0.0, f64::max);
        edges.push(PcstEdge {
            u: a,
            v: b,
            cost,
            prize,
        });
        members.push(idx);
    }
    let root = r.pinned_node.and_then(|id| g.position(id));
    Projection {
        instance: PcstInstance::new(node_prizes, edges, root),
        members,
        loops,
    }
}

/// Builds the prized instance for `g`, solves it and maps the answer back to
/// directed edges of `g`. A selected undirected edge brings back every
/// action between its two endpoints. A self-loop action is kept when its
/// node is selected and its prize exceeds the edge cost.
pub fn extract_subgraph(
    g: &StateActionGraph,
    r: &RetrievalResult,
    cfg: &PcstConfig,
) -> Result<Subgraph, PcstError> {
    let proj = project(g, r, cfg.edge_cost);
    let inst = &proj.instance;
    let all_zero = inst.node_prizes.iter().all(|&p| p == 0.0)
        && inst.edges.iter().all(|e| e.prize == 0.0)
        && proj.loops.iter().all(|&i| r.edge_prize(i) == 0.0);
    if inst.root.is_none() && all_zero {
        return Ok(Subgraph::empty());
    }

    let use_exact = match cfg.mode {
        SolveMode::Exact => true,
        SolveMode::Approx => false,
        SolveMode::Auto => folded_edge_count(inst) <= EXACT_EDGE_LIMIT,
    };
    let sol = if use_exact {
        solve_exact(inst)?
    } else {
        solve_approx(inst)?
    };

    let nodes: BTreeSet<NodeId> = sol
        .nodes
        .iter()
        .map(|&p| g.nodes()[p].node_id)
        .collect();
    let mut edges: BTreeSet<usize> = sol
        .edges
        .iter()
        .flat_map(|&e| proj.members[e].iter().copied())
        .collect();
    let mut objective = sol.objective;
    for &i in &proj.loops {
        let gain = r.edge_prize(i) - cfg.edge_cost;
        if nodes.contains(&g.edges()[i].src) && gain > 0.0 {
            edges.insert(i);
            objective += gain;
        }
    }

    Ok(Subgraph {
        nodes: nodes.into_iter().collect(),
        edges: edges.into_iter().collect(),
        objective,
        connected: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EdgeKind;

    fn node(id: NodeId) -> NodeRecord {
        NodeRecord {
            node_id: id,
            name: format!("N{id}"),
            description: String::new(),
            url: String::new(),
        }
    }

    fn result(k: usize, nodes: &[(NodeId, f64)], edges: &[(usize, f64)], pin: Option<NodeId>) -> RetrievalResult {
        RetrievalResult {
            query: "q".into(),
            k,
            top_nodes: vec![],
            top_edges: vec![],
            node_prizes: nodes.iter().copied().collect(),
            edge_prizes: edges.iter().copied().collect(),
            pinned_node: pin,
        }
    }

    fn graph() -> StateActionGraph {
        StateActionGraph::new(
            "t",
            10,
            vec![node(10), node(20), node(30)],
            vec![
                EdgeRecord::new(10, 20, "Open", EdgeKind::Menu),
                EdgeRecord::new(20, 10, "Back", EdgeKind::Link),
                EdgeRecord::new(20, 30, "Create", EdgeKind::Button),
                EdgeRecord::new(30, 30, "Save", EdgeKind::Button),
            ],
        )
        .unwrap()
    }

    #[test]
    fn restores_both_directions_and_profitable_loops() {
        let g = graph();
        let r = result(3, &[(30, 3.0)], &[(3, 3.0)], Some(10));
        let sg = extract_subgraph(&g, &r, &PcstConfig::default()).unwrap();
        assert_eq!(sg.nodes, vec![10, 20, 30]);
        assert_eq!(sg.edges, vec![0, 1, 2, 3]);
        // node 30 (3) - two edges + loop (3 - 1)
        assert_eq!(sg.objective, 3.0 - 2.0 + 2.0);
    }

    #[test]
    fn nothing_relevant_keeps_root() {
        let g = graph();
        let r = result(3, &[], &[], Some(10));
        let sg = extract_subgraph(&g, &r, &PcstConfig::default()).unwrap();
        assert_eq!(sg.nodes, vec![10]);
        assert!(sg.edges.is_empty());
    }

    #[test]
    fn empty_retrieval_without_root() {
        let g = graph();
        let r = result(3, &[], &[], None);
        assert_eq!(
            extract_subgraph(&g, &r, &PcstConfig::default()).unwrap(),
            Subgraph::empty()
        );
    }

    #[test]
    fn approx_mode_agrees_here() {
        let g = graph();
        let r = result(3, &[(30, 3.0), (20, 2.0)], &[(2, 3.0)], Some(10));
        let exact = extract_subgraph(&g, &r, &PcstConfig { mode: SolveMode::Exact, ..Default::default() }).unwrap();
        let approx = extract_subgraph(&g, &r, &PcstConfig { mode: SolveMode::Approx, ..Default::default() }).unwrap();
        assert_eq!(exact, approx);
    }
}
