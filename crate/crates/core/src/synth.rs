//! Seeded synthetic state-action graphs for scale tests.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{EdgeKind, EdgeRecord, GraphError, NodeRecord, StateActionGraph};

const MODULES: &[&str] = &[
    "Leads", "Contacts", "Accounts", "Opportunities", "Cases", "Campaigns", "Reports", "Dashboards",
    "Calendar", "Tasks", "Products", "Quotes", "Invoices", "Orders", "Contracts", "Suppliers",
    "Employees", "Expenses", "Projects", "Tickets", "Settings", "Users", "Files", "Forecasts",
];

const PAGES: &[(&str, &str)] = &[
    ("List", "list view of all {m} with filters and search"),
    ("New", "form to create a new record in {m}"),
    ("Edit", "form to edit an existing record in {m}"),
    ("Details", "details page of a record in {m} with related items"),
    ("Import", "import {m} from a spreadsheet file"),
    ("Export", "export {m} to a CSV file"),
    ("Settings", "configuration options for {m}"),
    ("Approval", "approval step for pending {m}"),
    ("History", "activity history and audit trail of {m}"),
    ("Search", "advanced search across {m}"),
];

const VERBS: &[&str] = &["Open", "Click", "Go to", "Select", "Show", "Create", "Submit", "View"];

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub graph_id: String,
    pub nodes: usize,
    /// At least `nodes - 1`; the first `nodes - 1` edges form a spanning
    /// tree rooted at node 0.
    pub edges: usize,
    pub seed: u64,
}

impl SynthConfig {
    /// Node and edge counts of the largest crawled enterprise application.
    pub fn salesforce_scale(seed: u64) -> Self {
        Self {
            graph_id: "synthetic-7640".into(),
            nodes: 7640,
            edges: 7655,
            seed,
        }
    }
}

fn kind_for(rng: &mut ChaCha8Rng) -> EdgeKind {
    *[
        EdgeKind::Button,
        EdgeKind::Button,
        EdgeKind::Link,
        EdgeKind::Menu,
        EdgeKind::Form,
        EdgeKind::Dropdown,
        EdgeKind::System,
    ]
    .choose(rng)
    .expect("non-empty")
}

/// Deterministic for a given config. Every node is reachable from node 0.
pub fn synth_graph(cfg: &SynthConfig) -> Result<StateActionGraph, GraphError> {
    assert!(cfg.nodes >= 1, "need at least one node");
    assert!(cfg.edges + 1 >= cfg.nodes, "need a spanning tree");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut nodes = Vec::with_capacity(cfg.nodes);
    nodes.push(NodeRecord {
        node_id: 0,
        name: "Home".into(),
        description: "home page with the main navigation menu".into(),
        url: "https://app.example.com/".into(),
    });
    for i in 1..cfg.nodes {
        let m = MODULES[rng.gen_range(0..MODULES.len())];
        let (page, desc) = PAGES[rng.gen_range(0..PAGES.len())];
        nodes.push(NodeRecord {
            node_id: i as u64,
            name: format!("{m} {page}"),
            description: format!("{} (view {i})", desc.replace("{m}", &m.to_lowercase())),
            url: format!("https://app.example.com/{}/{}/{i}", m.to_lowercase(), page.to_lowercase()),
        });
    }

    let mut edges = Vec::with_capacity(cfg.edges);
    let mut seen = HashSet::new();
    let mut push = |src: u64, tgt: u64, rng: &mut ChaCha8Rng, edges: &mut Vec<EdgeRecord>| {
        let verb = VERBS[rng.gen_range(0..VERBS.len())];
        let action = format!("{verb} {}", nodes[tgt as usize].name);
        if seen.insert((src, tgt, action.clone())) {
            edges.push(EdgeRecord::new(src, tgt, action, kind_for(rng)));
            true
        } else {
            false
        }
    };
    // Parents are drawn from a recent window so the tree has realistic depth.
    for i in 1..cfg.nodes {
        let lo = i.saturating_sub(40);
        let parent = rng.gen_range(lo..i) as u64;
        while !push(parent, i as u64, &mut rng, &mut edges) {}
    }
    while edges.len() < cfg.edges {
        let src = rng.gen_range(0..cfg.nodes) as u64;
        let tgt = rng.gen_range(0..cfg.nodes) as u64;
        push(src, tgt, &mut rng, &mut edges);
    }
    StateActionGraph::new(&cfg.graph_id, 0, nodes, edges)
}
