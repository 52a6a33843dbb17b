//! Goemans-Williamson moat growing with strong pruning.
//!
//! Prized edges are folded into virtual nodes first, so the growth phase
//! only deals with node prizes. Clusters grow lazily: a node's moat load is
//! `offset[u] + growth(cluster(u))`, and growth is a linear function of the
//! global time while a cluster stays active, so advancing time is O(1).
//! Edge events are re-validated when popped and pushed back if a cluster on
//! either side went inactive in the meantime.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, VecDeque};

use super::{fold_edge_prizes, is_connected, PcstError, PcstInstance, PcstSolution, EPS};

#[derive(Debug, Clone, Copy)]
enum EventKind {
    Edge(usize),
    Deactivate { cluster: usize, version: u64 },
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    kind: EventKind,
}

impl Event {
    fn key(&self) -> (u8, usize) {
        match self.kind {
            EventKind::Edge(e) => (0, e),
            EventKind::Deactivate { cluster, .. } => (1, cluster),
        }
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed: BinaryHeap is a max-heap and we want the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.key().cmp(&self.key()))
    }
}

#[derive(Debug, Clone)]
struct Cluster {
    active: bool,
    has_root: bool,
    growth_base: f64,
    budget_base: f64,
    since: f64,
    version: u64,
    members: Vec<usize>,
}

struct Growth<'a> {
    inst: &'a PcstInstance,
    adj: Vec<Vec<(usize, usize)>>,
    parent: Vec<usize>,
    clusters: Vec<Cluster>,
    offset: Vec<f64>,
    heap: BinaryHeap<Event>,
    now: f64,
    active: usize,
    forest: Vec<usize>,
}

impl<'a> Growth<'a> {
    fn new(inst: &'a PcstInstance) -> Self {
        let n = inst.num_nodes();
        let clusters = (0..n)
            .map(|u| {
                let has_root = inst.root == Some(u);
                Cluster {
                    active: !has_root && inst.node_prizes[u] > 0.0,
                    has_root,
                    growth_base: 0.0,
                    budget_base: inst.node_prizes[u],
                    since: 0.0,
                    version: 0,
                    members: vec![u],
                }
            })
            .collect::<Vec<_>>();
        let active = clusters.iter().filter(|c| c.active).count();
        let mut g = Self {
            inst,
            adj: inst.adjacency(),
            parent: (0..n).collect(),
            clusters,
            offset: vec![0.0; n],
            heap: BinaryHeap::new(),
            now: 0.0,
            active,
            forest: Vec::new(),
        };
        for u in 0..n {
            if g.clusters[u].active {
                g.push_deactivation(u);
                g.schedule_edges(u);
            }
        }
        g
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn growth(&self, c: usize) -> f64 {
        let cl = &self.clusters[c];
        cl.growth_base + if cl.active { self.now - cl.since } else { 0.0 }
    }

    fn budget(&self, c: usize) -> f64 {
        let cl = &self.clusters[c];
        cl.budget_base - if cl.active { self.now - cl.since } else { 0.0 }
    }

    fn freeze(&mut self, c: usize) {
        let (g, b) = (self.growth(c), self.budget(c));
        let cl = &mut self.clusters[c];
        cl.growth_base = g;
        cl.budget_base = b;
        cl.since = self.now;
    }

    fn load(&mut self, u: usize) -> f64 {
        let c = self.find(u);
        self.offset[u] + self.growth(c)
    }

    fn push_deactivation(&mut self, c: usize) {
        let time = self.now + self.budget(c).max(0.0);
        let version = self.clusters[c].version;
        self.heap.push(Event {
            time,
            kind: EventKind::Deactivate { cluster: c, version },
        });
    }

    /// Time at which edge `e` goes tight under current rates, if it ever does.
    fn tight_time(&mut self, e: usize) -> Option<(f64, f64)> {
        let edge = &self.inst.edges[e];
        let (u, v, cost) = (edge.u, edge.v, edge.cost);
        let (cu, cv) = (self.find(u), self.find(v));
        if cu == cv {
            return None;
        }
        let rate = u8::from(self.clusters[cu].active) + u8::from(self.clusters[cv].active);
        if rate == 0 {
            return None;
        }
        let slack = cost - self.load(u) - self.load(v);
        Some((self.now + slack.max(0.0) / f64::from(rate), slack))
    }

    fn schedule_edges(&mut self, u: usize) {
        for i in 0..self.adj[u].len() {
            let (e, _) = self.adj[u][i];
            if let Some((time, _)) = self.tight_time(e) {
                self.heap.push(Event {
                    time,
                    kind: EventKind::Edge(e),
                });
            }
        }
    }

    fn merge(&mut self, a: usize, b: usize, e: usize) {
        self.freeze(a);
        self.freeze(b);
        self.forest.push(e);
        let (was_a, was_b) = (self.clusters[a].active, self.clusters[b].active);
        let budget = self.budget(a) + self.budget(b);
        let has_root = self.clusters[a].has_root || self.clusters[b].has_root;
        let active = !has_root && budget > EPS;

        let (large, small) = if self.clusters[a].members.len() >= self.clusters[b].members.len() {
            (a, b)
        } else {
            (b, a)
        };
        let shift = self.growth(small) - self.growth(large);
        let moved = std::mem::take(&mut self.clusters[small].members);
        for &u in &moved {
            self.offset[u] += shift;
        }
        self.parent[small] = large;
        self.clusters[small].active = false;

        // Members that were idle and now grow need fresh edge events.
        let mut wake: Vec<usize> = Vec::new();
        if active {
            if !was_a {
                wake.extend(if a == small { moved.clone() } else { self.clusters[a].members.clone() });
            }
            if !was_b {
                wake.extend(if b == small { moved.clone() } else { self.clusters[b].members.clone() });
            }
        }

        let cl = &mut self.clusters[large];
        cl.members.extend(moved);
        cl.budget_base = budget.max(0.0);
        cl.since = self.now;
        cl.active = active;
        cl.has_root = has_root;
        cl.version += 1;

        self.active = self.active + usize::from(active) - usize::from(was_a) - usize::from(was_b);
        if active {
            self.push_deactivation(large);
            for u in wake {
                self.schedule_edges(u);
            }
        }
    }

    fn run(mut self) -> Vec<usize> {
        while self.active > 0 {
            let Some(ev) = self.heap.pop() else { break };
            self.now = self.now.max(ev.time);
            match ev.kind {
                EventKind::Deactivate { cluster, version } => {
                    if self.parent[cluster] != cluster
                        || self.clusters[cluster].version != version
                        || !self.clusters[cluster].active
                    {
                        continue;
                    }
                    self.freeze(cluster);
                    let cl = &mut self.clusters[cluster];
                    cl.active = false;
                    cl.budget_base = 0.0;
                    cl.version += 1;
                    self.active -= 1;
                }
                EventKind::Edge(e) => {
                    let Some((time, slack)) = self.tight_time(e) else {
                        continue;
                    };
                    let tol = EPS * self.inst.edges[e].cost.max(1.0);
                    if slack > tol {
                        self.heap.push(Event {
                            time,
                            kind: EventKind::Edge(e),
                        });
                        continue;
                    }
                    let edge = &self.inst.edges[e];
                    let (a, b) = (self.find(edge.u), self.find(edge.v));
                    self.merge(a, b, e);
                }
            }
        }
        self.forest
    }
}

/// Tree view of one forest component, rooted at its smallest node.
struct Tree {
    order: Vec<usize>,
    parent: Vec<Option<(usize, usize)>>,
    children: Vec<Vec<(usize, usize)>>,
}

fn components(n: usize, inst: &PcstInstance, forest: &[usize]) -> (Vec<Vec<(usize, usize)>>, Vec<Vec<usize>>) {
    let mut adj = vec![Vec::new(); n];
    for &e in forest {
        let edge = &inst.edges[e];
        adj[edge.u].push((e, edge.v));
        adj[edge.v].push((e, edge.u));
    }
    let mut seen = vec![false; n];
    let mut comps = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut i = 0;
        while i < comp.len() {
            let u = comp[i];
            for &(_, w) in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    comp.push(w);
                }
            }
            i += 1;
        }
        comps.push(comp);
    }
    (adj, comps)
}

fn root_tree(adj: &[Vec<(usize, usize)>], root: usize, n: usize) -> Tree {
    let mut parent = vec![None; n];
    let mut children = vec![Vec::new(); n];
    let mut order = vec![root];
    let mut visited = vec![false; n];
    visited[root] = true;
    let mut i = 0;
    while i < order.len() {
        let u = order[i];
        for &(e, w) in &adj[u] {
            if !visited[w] {
                visited[w] = true;
                parent[w] = Some((u, e));
                children[u].push((w, e));
                order.push(w);
            }
        }
        i += 1;
    }
    Tree {
        order,
        parent,
        children,
    }
}

/// Best subtree of a tree that contains `root`; returns nodes and edges.
fn prune_rooted(inst: &PcstInstance, tree: &Tree) -> (Vec<usize>, Vec<usize>) {
    let n = inst.num_nodes();
    let mut value = vec![0.0; n];
    for &u in tree.order.iter().rev() {
        value[u] = inst.node_prizes[u]
            + tree.children[u]
                .iter()
                .map(|&(c, e)| (value[c] - inst.edges[e].cost).max(0.0))
                .sum::<f64>();
    }
    let mut nodes = vec![tree.order[0]];
    let mut edges = Vec::new();
    let mut queue = VecDeque::from([tree.order[0]]);
    while let Some(u) = queue.pop_front() {
        for &(c, e) in &tree.children[u] {
            if value[c] - inst.edges[e].cost > EPS {
                nodes.push(c);
                edges.push(e);
                queue.push_back(c);
            }
        }
    }
    (nodes, edges)
}

/// Best subtree anywhere in a tree, via rerooting: picks the root with the
/// largest all-directions value (smallest id on ties) and prunes from it.
fn best_root(inst: &PcstInstance, tree: &Tree) -> usize {
    let n = inst.num_nodes();
    let mut down = vec![0.0; n];
    for &u in tree.order.iter().rev() {
        down[u] = inst.node_prizes[u]
            + tree.children[u]
                .iter()
                .map(|&(c, e)| (down[c] - inst.edges[e].cost).max(0.0))
                .sum::<f64>();
    }
    let mut full = vec![0.0; n];
    for &u in &tree.order {
        full[u] = match tree.parent[u] {
            None => down[u],
            Some((p, e)) => {
                let cost = inst.edges[e].cost;
                let up = full[p] - (down[u] - cost).max(0.0);
                down[u] + (up - cost).max(0.0)
            }
        };
    }
    let mut best = tree.order[0];
    for &u in &tree.order {
        if full[u] > full[best] + EPS || ((full[u] - full[best]).abs() <= EPS && u < best) {
            best = u;
        }
    }
    best
}

#[derive(Debug, Clone, Copy)]
enum Metric {
    /// Plain edge cost.
    Cost,
    /// Cost minus the prizes a step collects, clipped at zero.
    Net,
    /// Label-correcting search for the largest gain itself.
    Gain,
}

/// Shortest paths out of the selected set under `metric`. Returns the path to the node whose path gain (new
/// prizes minus cost) is largest, when that gain is positive. Among equal
/// gains the nearer node wins, so no tail of the path is dead weight.
fn best_path(
    inst: &PcstInstance,
    adj: &[Vec<(usize, usize)>],
    in_node: &[bool],
    parallel: &[f64],
    metric: Metric,
) -> Option<(f64, Vec<(usize, usize)>)> {
    /// Nearest first, then the larger gain, then the smaller id.
    #[derive(PartialEq)]
    struct Item(f64, f64, usize);
    impl Eq for Item {}
    impl PartialOrd for Item {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Item {
        fn cmp(&self, other: &Self) -> Ordering {
            other
                .0
                .total_cmp(&self.0)
                .then(self.1.total_cmp(&other.1))
                .then(other.2.cmp(&self.2))
        }
    }

    let n = inst.num_nodes();
    let mut dist = vec![f64::INFINITY; n];
    let mut gain = vec![0.0; n];
    let mut via: Vec<Option<(usize, usize)>> = vec![None; n];
    // Profitable chords a newly reached node would close against the tree.
    let mut chords = vec![0.0; n];
    for e in &inst.edges {
        let net_value = (e.prize - e.cost).max(0.0);
        match (in_node[e.u], in_node[e.v]) {
            (true, false) => chords[e.v] += net_value,
            (false, true) => chords[e.u] += net_value,
            _ => {}
        }
    }
    let step = |e: usize, v: usize| {
        let edge = &inst.edges[e];
        inst.node_prizes[v] + edge.prize - edge.cost + parallel[e] + chords[v]
    };
    let mut heap = BinaryHeap::new();
    for u in (0..n).filter(|&u| in_node[u]) {
        dist[u] = 0.0;
        heap.push(Item(0.0, 0.0, u));
    }
    // Walks at most MAX_WALK predecessors; a longer branch counts as a hit,
    // which only forgoes an update.
    const MAX_WALK: usize = 64;
    let on_branch = |via: &[Option<(usize, usize)>], mut x: usize, target: usize| {
        for _ in 0..MAX_WALK {
            if x == target {
                return true;
            }
            match via[x] {
                Some((_, p)) => x = p,
                None => return false,
            }
        }
        true
    };
    // Equal-length routes may still differ in gain, so a node is reopened
    // when a route of the same length collects more. The branch check keeps
    // predecessor chains acyclic and the pop budget bounds the work.
    let mut budget = 4 * (n + inst.edges.len()) + 16;
    while let Some(Item(d, g, u)) = heap.pop() {
        if d > dist[u] + EPS || g < gain[u] - EPS {
            continue;
        }
        if budget == 0 {
            break;
        }
        budget -= 1;
        for &(e, v) in &adj[u] {
            if in_node[v] {
                continue;
            }
            let step_gain = step(e, v);
            let ng = gain[u] + step_gain;
            let nd = match metric {
                Metric::Cost => d + inst.edges[e].cost,
                Metric::Net => d + (-step_gain).max(0.0),
                Metric::Gain => -ng,
            };
            let shorter = nd < dist[v] - EPS;
            let richer = !shorter && nd <= dist[v] + EPS && ng > gain[v] + EPS;
            // A strictly shorter nonnegative route cannot pass through v,
            // so only the other updates need the branch check.
            let safe = shorter && !matches!(metric, Metric::Gain);
            if (shorter || richer) && (safe || !on_branch(&via, u, v)) {
                dist[v] = nd;
                gain[v] = ng;
                via[v] = Some((e, u));
                heap.push(Item(nd, ng, v));
            }
        }
    }

    let mut best: Option<(f64, f64, usize)> = None;
    for t in (0..n).filter(|&t| !in_node[t] && dist[t].is_finite()) {
        let better = match best {
            None => true,
            Some((g, d, _)) => gain[t] > g + EPS || (gain[t] > g - EPS && dist[t] < d - EPS),
        };
        if better {
            best = Some((gain[t], dist[t], t));
        }
    }
    let (_, _, mut t) = best?;
    let mut path = Vec::new();
    let mut total = 0.0;
    while let Some((e, prev)) = via[t] {
        total += step(e, t);
        path.push((e, t));
        t = prev;
    }
    (total > EPS).then_some((total, path))
}

fn add_chords(inst: &PcstInstance, in_node: &[bool], in_edge: &mut [bool]) -> bool {
    let mut changed = false;
    for (i, e) in inst.edges.iter().enumerate() {
        if !in_edge[i] && in_node[e.u] && in_node[e.v] && e.prize - e.cost > EPS {
            in_edge[i] = true;
            changed = true;
        }
    }
    changed
}

/// Local clean-up in the source instance: drop unprofitable leaves, close
/// profitable cycles, and extend by profitable paths.
fn improve(inst: &PcstInstance, nodes: Vec<usize>, edges: Vec<usize>) -> (Vec<usize>, Vec<usize>) {
    let n = inst.num_nodes();
    let m = inst.edges.len();
    let adj = inst.adjacency();
    // Net value of the profitable edges parallel to each edge.
    let mut by_pair: HashMap<(usize, usize), f64> = HashMap::new();
    for e in &inst.edges {
        *by_pair.entry((e.u.min(e.v), e.u.max(e.v))).or_default() += (e.prize - e.cost).max(0.0);
    }
    let parallel: Vec<f64> = inst
        .edges
        .iter()
        .map(|e| by_pair[&(e.u.min(e.v), e.u.max(e.v))] - (e.prize - e.cost).max(0.0))
        .collect();
    let mut in_node = vec![false; n];
    let mut in_edge = vec![false; m];
    for &u in &nodes {
        in_node[u] = true;
    }
    for &e in &edges {
        in_edge[e] = true;
    }
    let mut queue: VecDeque<usize> = nodes.iter().copied().collect();
    for _ in 0..=n {
        let mut changed = false;

        // Unprofitable leaves; removing one may expose its neighbour.
        while let Some(u) = queue.pop_front() {
            if !in_node[u] || Some(u) == inst.root {
                continue;
            }
            let mut live = adj[u].iter().filter(|&&(e, _)| in_edge[e]);
            let (Some(&(e, other)), None) = (live.next(), live.next()) else {
                continue;
            };
            let edge = &inst.edges[e];
            if inst.node_prizes[u] + edge.prize - edge.cost <= EPS {
                in_edge[e] = false;
                in_node[u] = false;
                queue.push_back(other);
                changed = true;
            }
        }

        if !in_node.iter().any(|&x| x) {
            break;
        }

        changed |= add_chords(inst, &in_node, &mut in_edge);

        // Most profitable path out of the current tree.
        let pick = [Metric::Cost, Metric::Net, Metric::Gain]
            .into_iter()
            .filter_map(|metric| best_path(inst, &adj, &in_node, &parallel, metric))
            .reduce(|a, b| if b.0 > a.0 + EPS { b } else { a });
        if let Some((_, path)) = pick {
            for (e, v) in path {
                in_edge[e] = true;
                in_node[v] = true;
            }
            // Chords the path relied on must land before the next pruning.
            add_chords(inst, &in_node, &mut in_edge);
            changed = true;
        }

        if !changed {
            break;
        }
        queue.extend((0..n).filter(|&u| in_node[u]));
    }
    let nodes: Vec<usize> = (0..n).filter(|&u| in_node[u]).collect();
    let mut edges: Vec<usize> = (0..m).filter(|&e| in_edge[e]).collect();
    // Edges that earn nothing and only close a cycle.
    let mut i = 0;
    while i < edges.len() && edges.len() >= nodes.len() {
        let e = &inst.edges[edges[i]];
        if e.prize - e.cost <= EPS {
            let removed = edges.remove(i);
            if is_connected(inst, &nodes, &edges) {
                continue;
            }
            edges.insert(i, removed);
        }
        i += 1;
    }
    (nodes, edges)
}

/// Approximate solution for instances of any size. The result is connected,
/// contains the root when one is given, and is never worse than the
/// trivial solution (root alone, or the empty set when unrooted).
pub fn solve_approx(inst: &PcstInstance) -> Result<PcstSolution, PcstError> {
    inst.validate()?;
    let folded = fold_edge_prizes(inst);
    let finst = &folded.instance;
    let n = finst.num_nodes();
    let forest = Growth::new(finst).run();
    let (adj, comps) = components(n, finst, &forest);

    let mut candidates: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    match inst.root {
        Some(r) => {
            let tree = root_tree(&adj, r, n);
            candidates.push(prune_rooted(finst, &tree));
        }
        None => {
            for comp in comps {
                let has_prize = comp.iter().any(|&u| finst.node_prizes[u] > 0.0);
                if !has_prize {
                    continue;
                }
                let tree = root_tree(&adj, comp[0], n);
                let b = best_root(finst, &tree);
                let tree = root_tree(&adj, b, n);
                candidates.push(prune_rooted(finst, &tree));
            }
        }
    }

    let mut best = match inst.root {
        Some(r) => PcstSolution::from_parts(inst, vec![r], vec![]),
        None => {
            let mut base = PcstSolution::empty();
            for u in 0..inst.num_nodes() {
                let single = PcstSolution::from_parts(inst, vec![u], vec![]);
                if single.preference(&base).is_gt() {
                    base = single;
                }
            }
            base
        }
    };
    let mut starts: Vec<(Vec<usize>, Vec<usize>)> = candidates
        .into_iter()
        .map(|(nodes, edges)| folded.unfold(&nodes, &edges))
        .collect();
    // The local search also runs from the trivial solution, which rescues
    // instances where the moats merged in an unlucky order.
    if !best.nodes.is_empty() {
        starts.push((best.nodes.clone(), best.edges.clone()));
    }
    for (nodes, edges) in starts {
        if nodes.is_empty() {
            continue;
        }
        let (nodes, edges) = improve(inst, nodes, edges);
        let cand = PcstSolution::from_parts(inst, nodes, edges);
        if cand.preference(&best).is_gt() {
            best = cand;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pcst::{solve_exact, PcstEdge};

    fn unit(u: usize, v: usize) -> PcstEdge {
        PcstEdge {
            u,
            v,
            cost: 1.0,
            prize: 0.0,
        }
    }

    #[test]
    fn path_matches_exact() {
        let inst = PcstInstance::new(vec![0.0, 0.0, 5.0], vec![unit(0, 1), unit(1, 2)], Some(0));
        assert_eq!(solve_approx(&inst).unwrap(), solve_exact(&inst).unwrap());
    }

    #[test]
    fn root_alone_when_nothing_pays() {
        let inst = PcstInstance::new(vec![0.0, 0.0, 1.5], vec![unit(0, 1), unit(1, 2)], Some(0));
        let s = solve_approx(&inst).unwrap();
        assert_eq!(s.nodes, vec![0]);
    }

    #[test]
    fn isolated_root() {
        let inst = PcstInstance::new(vec![2.0, 7.0], vec![], Some(0));
        let s = solve_approx(&inst).unwrap();
        assert_eq!((s.nodes, s.objective), (vec![0], 2.0));
    }

    #[test]
    fn unrooted_picks_best_component() {
        let inst = PcstInstance::new(
            vec![3.0, 0.0, 3.0, 0.0, 10.0],
            vec![unit(0, 1), unit(1, 2), unit(3, 4)],
            None,
        );
        let s = solve_approx(&inst).unwrap();
        assert_eq!(s.nodes, vec![4]);
        assert_eq!(s.objective, 10.0);
        assert!(is_connected(&inst, &s.nodes, &s.edges));
    }

    #[test]
    fn long_path_does_not_recurse() {
        let n = 20_000;
        let edges: Vec<PcstEdge> = (0..n - 1).map(|i| unit(i, i + 1)).collect();
        let mut prizes = vec![0.0; n];
        prizes[n - 1] = 1e6;
        let inst = PcstInstance::new(prizes, edges, Some(0));
        let s = solve_approx(&inst).unwrap();
        assert_eq!(s.nodes.len(), n);
        assert_eq!(s.objective, 1e6 - (n - 1) as f64);
    }
}
