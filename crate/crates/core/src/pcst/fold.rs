use super::{PcstEdge, PcstInstance};

/// Node-prize-only instance obtained by subdividing every prized edge.
///
/// An edge `(a, b)` with cost `c` and prize `p > 0` becomes a virtual node
/// `v` with prize `p` joined to `a` and `b` by edges of cost `c / 2`.
/// Unprized edges are copied unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldedInstance {
    pub instance: PcstInstance,
    /// Number of nodes of the source instance; higher ids are virtual.
    pub original_nodes: usize,
    /// Source edge of each folded edge.
    pub edge_origin: Vec<usize>,
    /// Source edge of each virtual node, indexed by `id - original_nodes`.
    pub virtual_origin: Vec<usize>,
}

impl FoldedInstance {
    pub fn is_virtual(&self, node: usize) -> bool {
        node >= self.original_nodes
    }

    /// Virtual node standing for source edge `e`, if it was prized.
    pub fn virtual_of(&self, e: usize) -> Option<usize> {
        self.virtual_origin
            .iter()
            .position(|&o| o == e)
            .map(|i| i + self.original_nodes)
    }

    /// Maps a folded solution back to source indices. A prized source edge
    /// is kept only when both of its halves were selected; virtual nodes
    /// never leak through.
    pub fn unfold(&self, nodes: &[usize], edges: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let mut out_nodes: Vec<usize> = nodes
            .iter()
            .copied()
            .filter(|&u| !self.is_virtual(u))
            .collect();
        let mut half_count = vec![0u8; self.virtual_origin.len()];
        let mut out_edges = Vec::new();
        for &fe in edges {
            let src = self.edge_origin[fe];
            let e = &self.instance.edges[fe];
            let virt = [e.u, e.v].into_iter().find(|&x| self.is_virtual(x));
            match virt {
                None => out_edges.push(src),
                Some(v) => {
                    let slot = v - self.original_nodes;
                    half_count[slot] += 1;
                    if half_count[slot] == 2 {
                        out_edges.push(src);
                    }
                }
            }
        }
        out_nodes.sort_unstable();
        out_edges.sort_unstable();
        (out_nodes, out_edges)
    }
}

pub fn fold_edge_prizes(inst: &PcstInstance) -> FoldedInstance {
    let n = inst.num_nodes();
    let mut node_prizes = inst.node_prizes.clone();
    let mut edges = Vec::with_capacity(inst.edges.len());
    let mut edge_origin = Vec::with_capacity(inst.edges.len());
    let mut virtual_origin = Vec::new();
    for (i, e) in inst.edges.iter().enumerate() {
        if e.prize > 0.0 {
            let v = node_prizes.len();
            node_prizes.push(e.prize);
            virtual_origin.push(i);
            for (a, b) in [(e.u, v), (v, e.v)] {
                edges.push(PcstEdge {
                    u: a,
                    v: b,
                    cost: e.cost / 2.0,
                    prize: 0.0,
                });
                edge_origin.push(i);
            }
        } else {
            edges.push(e.clone());
            edge_origin.push(i);
        }
    }
    FoldedInstance {
        instance: PcstInstance {
            node_prizes,
            edges,
            root: inst.root,
            num_clusters: inst.num_clusters,
        },
        original_nodes: n,
        edge_origin,
        virtual_origin,
    }
}

/// Edge count after folding, without building the folded instance.
pub(crate) fn folded_edge_count(inst: &PcstInstance) -> usize {
    inst.edges.len() + inst.edges.iter().filter(|e| e.prize > 0.0).count()
}
