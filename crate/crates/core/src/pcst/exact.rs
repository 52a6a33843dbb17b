//! Exact solver by branch-and-bound enumeration of connected edge sets.
//!
//! Edge prizes are handled directly: a prized edge is chosen as a whole,
//! which is the same as choosing both halves of its subdivision.

use super::fold::folded_edge_count;
use super::{PcstError, PcstInstance, PcstSolution, EPS};

/// Largest instance, counted in edges after folding, the enumerator accepts.
pub const EXACT_EDGE_LIMIT: usize = 18;

struct Search<'a> {
    inst: &'a PcstInstance,
    adj: Vec<Vec<(usize, usize)>>,
    in_node: Vec<bool>,
    in_edge: Vec<bool>,
    banned: Vec<bool>,
    nodes: Vec<usize>,
    edges: Vec<usize>,
    value: f64,
    best: Option<PcstSolution>,
}

impl Search<'_> {
    fn offer(&mut self) {
        let cand = PcstSolution::from_parts(self.inst, self.nodes.clone(), self.edges.clone());
        let better = match &self.best {
            None => true,
            Some(b) => cand.preference(b).is_gt(),
        };
        if better {
            self.best = Some(cand);
        }
    }

    /// Optimistic value of anything reachable from the current state.
    fn bound(&self) -> f64 {
        let nodes: f64 = (0..self.inst.num_nodes())
            .filter(|&u| !self.in_node[u])
            .map(|u| self.inst.node_prizes[u])
            .sum();
        let edges: f64 = self
            .inst
            .edges
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.in_edge[*i] && !self.banned[*i])
            .map(|(_, e)| (e.prize - e.cost).max(0.0))
            .sum();
        self.value + nodes + edges
    }

    fn add_node(&mut self, u: usize, frontier: &mut Vec<usize>) {
        self.in_node[u] = true;
        self.nodes.push(u);
        self.value += self.inst.node_prizes[u];
        for &(e, _) in &self.adj[u] {
            if !self.in_edge[e] && !self.banned[e] && !frontier.contains(&e) {
                frontier.push(e);
            }
        }
    }

    fn grow(&mut self, frontier: Vec<usize>) {
        self.offer();
        let Some(&e) = frontier.first() else {
            return;
        };
        if let Some(best) = &self.best {
            if self.bound() < best.objective - EPS {
                return;
            }
        }
        let rest: Vec<usize> = frontier[1..].to_vec();
        let edge = &self.inst.edges[e];

        // Take e.
        let new_node = if self.in_node[edge.u] { edge.v } else { edge.u };
        let adds_node = !self.in_node[new_node];
        self.in_edge[e] = true;
        self.edges.push(e);
        self.value += edge.prize - edge.cost;
        let mut with = rest.clone();
        if adds_node {
            self.add_node(new_node, &mut with);
        }
        self.grow(with);
        if adds_node {
            self.nodes.pop();
            self.in_node[new_node] = false;
            self.value -= self.inst.node_prizes[new_node];
        }
        self.edges.pop();
        self.in_edge[e] = false;
        self.value -= edge.prize - edge.cost;

        // Skip e.
        self.banned[e] = true;
        self.grow(rest);
        self.banned[e] = false;
    }
}

fn rooted(inst: &PcstInstance, root: usize) -> PcstSolution {
    let m = inst.edges.len();
    let mut s = Search {
        inst,
        adj: inst.adjacency(),
        in_node: vec![false; inst.num_nodes()],
        in_edge: vec![false; m],
        banned: vec![false; m],
        nodes: Vec::new(),
        edges: Vec::new(),
        value: 0.0,
        best: None,
    };
    let mut frontier = Vec::new();
    s.add_node(root, &mut frontier);
    s.grow(frontier);
    s.best.expect("root-only solution is always offered")
}

/// Globally optimal connected solution. Rooted instances optimize over
/// sets containing the root; unrooted ones also consider the empty set.
pub fn solve_exact(inst: &PcstInstance) -> Result<PcstSolution, PcstError> {
    inst.validate()?;
    let folded = folded_edge_count(inst);
    if folded > EXACT_EDGE_LIMIT {
        return Err(PcstError::TooLarge {
            edges: folded,
            limit: EXACT_EDGE_LIMIT,
        });
    }
    if let Some(r) = inst.root {
        return Ok(rooted(inst, r));
    }
    // Any solution with positive objective touches a prized node or an edge
    // whose prize exceeds its cost.
    let adj = inst.adjacency();
    let mut best = PcstSolution::empty();
    for u in 0..inst.num_nodes() {
        let promising = inst.node_prizes[u] > 0.0
            || adj[u]
                .iter()
                .any(|&(e, _)| inst.edges[e].prize > inst.edges[e].cost);
        if !promising {
            continue;
        }
        let cand = rooted(inst, u);
        if cand.preference(&best).is_gt() {
            best = cand;
        }
    }
    Ok(best)
}
