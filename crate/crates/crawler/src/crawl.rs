//! Breadth-first exploration of a web application.

use std::collections::{HashMap, HashSet, VecDeque};

use grag_core::graph::{EdgeRecord, GraphError, NodeId, NodeRecord, StateActionGraph};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::page::{parse_page, Clickable, Page};
use crate::provider::{PageProvider, ProviderError};
use crate::urls::{is_external, normalize, Normalization};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrawlConfig {
    pub home_url: String,
    pub allowed_host: String,
    pub max_pages: usize,
    #[serde(default)]
    pub strip_query: bool,
    /// Defaults to the allowed host.
    #[serde(default)]
    pub graph_id: Option<String>,
}

impl CrawlConfig {
    pub fn new(home_url: impl Into<String>, allowed_host: impl Into<String>) -> Self {
        Self {
            home_url: home_url.into(),
            allowed_host: allowed_host.into(),
            max_pages: 10_000,
            strip_query: false,
            graph_id: None,
        }
    }

    fn rules(&self) -> Normalization {
        Normalization {
            strip_query: self.strip_query,
        }
    }
}

#[derive(Debug, Error)]
pub enum CrawlError {
    #[error("max_pages must be at least 1")]
    ZeroMaxPages,
    #[error("invalid home url {url:?}: {message}")]
    BadHomeUrl { url: String, message: String },
    #[error("home url {0} is outside the allowed host")]
    ExternalHome(String),
    #[error("home page could not be loaded: {0}")]
    HomeUnloadable(#[source] ProviderError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrawlReport {
    pub graph: StateActionGraph,
    /// URLs in the order they were dequeued.
    pub visit_order: Vec<String>,
    /// Set when some in-app page was not added because of `max_pages`.
    pub truncated: bool,
    pub external_ignored: usize,
    pub duplicate_actions: usize,
    /// In-app pages that were discovered but failed to load.
    pub failed_pages: Vec<String>,
}

/// Loads and parses one page; failures yield an empty list and a warning.
pub fn collect_clickables(provider: &dyn PageProvider, url: &Url, rules: Normalization) -> Vec<Clickable> {
    match provider.fetch(url) {
        Ok(html) => parse_page(url, &html, rules).clickables,
        Err(e) => {
            tracing::warn!(url = %url, error = %e, "page could not be loaded");
            Vec::new()
        }
    }
}

struct Slot {
    url: String,
    page: Option<Page>,
}

struct Builder {
    slots: Vec<Slot>,
    ids: HashMap<String, NodeId>,
    edges: Vec<EdgeRecord>,
    seen: HashSet<(NodeId, NodeId, String)>,
    duplicates: usize,
}

impl Builder {
    fn add_edge(&mut self, src: NodeId, tgt: NodeId, c: &Clickable) {
        if self.seen.insert((src, tgt, c.label.clone())) {
            self.edges.push(EdgeRecord::new(src, tgt, c.label.clone(), c.kind));
        } else {
            self.duplicates += 1;
        }
    }
}

/// Runs the crawl. The home page gets node id 0 and further pages are
/// numbered in discovery order.
///
/// Every in-app navigating action adds an edge, including actions that lead
/// back to known pages. Once the queue drains, a second pass turns each
/// non-navigating control into a self-loop on its page.
pub fn crawl(provider: &dyn PageProvider, cfg: &CrawlConfig) -> Result<CrawlReport, CrawlError> {
    if cfg.max_pages == 0 {
        return Err(CrawlError::ZeroMaxPages);
    }
    let rules = cfg.rules();
    let home = Url::parse(&cfg.home_url).map_err(|e| CrawlError::BadHomeUrl {
        url: cfg.home_url.clone(),
        message: e.to_string(),
    })?;
    let home = normalize(&home, rules);
    if is_external(home.as_str(), &cfg.allowed_host) {
        return Err(CrawlError::ExternalHome(home.to_string()));
    }

    let mut b = Builder {
        slots: vec![Slot {
            url: home.to_string(),
            page: None,
        }],
        ids: HashMap::from([(home.to_string(), 0)]),
        edges: Vec::new(),
        seen: HashSet::new(),
        duplicates: 0,
    };
    let mut queue = VecDeque::from([0 as NodeId]);
    let mut visit_order = Vec::new();
    let mut truncated = false;
    let mut external_ignored = 0;
    let mut failed_pages = Vec::new();

    while let Some(u) = queue.pop_front() {
        let url_str = b.slots[u as usize].url.clone();
        visit_order.push(url_str.clone());
        let url = Url::parse(&url_str).expect("slot urls are normalized absolute urls");
        let page = match provider.fetch(&url) {
            Ok(html) => parse_page(&url, &html, rules),
            Err(e) if u == 0 => return Err(CrawlError::HomeUnloadable(e)),
            Err(e) => {
                tracing::warn!(url = %url_str, error = %e, "page could not be loaded");
                failed_pages.push(url_str);
                continue;
            }
        };

        for c in &page.clickables {
            let Some(target) = &c.target_url else {
                continue;
            };
            if is_external(target, &cfg.allowed_host) {
                tracing::debug!(from = %url, target = %target, "ignoring external action");
                external_ignored += 1;
                continue;
            }
            let v = match b.ids.get(target) {
                Some(&v) => v,
                None if b.slots.len() >= cfg.max_pages => {
                    truncated = true;
                    continue;
                }
                None => {
                    let v = b.slots.len() as NodeId;
                    b.slots.push(Slot {
                        url: target.clone(),
                        page: None,
                    });
                    b.ids.insert(target.clone(), v);
                    queue.push_back(v);
                    v
                }
            };
            b.add_edge(u, v, c);
        }
        b.slots[u as usize].page = Some(page);
    }

    // Revisit pass: button-level actions that stay on the page.
    for u in 0..b.slots.len() {
        let Some(page) = b.slots[u].page.take() else {
            continue;
        };
        for c in page.clickables.iter().filter(|c| c.target_url.is_none()) {
            b.add_edge(u as NodeId, u as NodeId, c);
        }
        b.slots[u].page = Some(page);
    }

    let nodes = b
        .slots
        .iter()
        .enumerate()
        .map(|(i, s)| match &s.page {
            Some(p) => NodeRecord {
                node_id: i as NodeId,
                name: p.display_name(),
                description: p.description(),
                url: s.url.clone(),
            },
            None => NodeRecord {
                node_id: i as NodeId,
                name: s.url.clone(),
                description: String::new(),
                url: s.url.clone(),
            },
        })
        .collect();
    if truncated {
        tracing::warn!(max_pages = cfg.max_pages, "crawl truncated");
    }
    let graph_id = cfg.graph_id.clone().unwrap_or_else(|| cfg.allowed_host.clone());
    let graph = StateActionGraph::new(graph_id, 0, nodes, b.edges)?;
    Ok(CrawlReport {
        graph,
        visit_order,
        truncated,
        external_ignored,
        duplicate_actions: b.duplicates,
        failed_pages,
    })
}
