//! Graph surgery primitives and splice-site sampling.

use super::EngineError;
use crate::cfg::{ControlFlowGraph, NodeId, NodeKind};
use crate::Rational;
use num::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Attaches a fresh gadget: a trunk statement off the entry followed by a
/// chain of `k` diamonds into the exit. Adds `2^k` classes whose interiors
/// are disjoint from every existing path.
pub fn attach_isolated(graph: &mut ControlFlowGraph, k: u32) {
    let trunk = graph.add_statement();
    graph
        .add_edge(graph.entry(), trunk)
        .expect("fresh trunk edge");
    let mut junction = graph.exit();
    for _ in 0..k {
        junction = prepend_diamond(graph, junction);
    }
    graph.add_edge(trunk, junction).expect("fresh trunk link");
}

/// Builds one diamond draining into `junction`; returns its branch node.
fn prepend_diamond(graph: &mut ControlFlowGraph, junction: NodeId) -> NodeId {
    let b = graph.add_branch();
    let a0 = graph.add_statement();
    let a1 = graph.add_statement();
    graph.add_edge(b, a0).expect("fresh arm");
    graph.add_edge(b, a1).expect("fresh arm");
    graph.add_edge(a0, junction).expect("fresh arm link");
    graph.add_edge(a1, junction).expect("fresh arm link");
    b
}

/// Replaces the out-edge of statement `site` with a diamond. Every path
/// through `site` is rewritten into two successors; paths avoiding `site`
/// are untouched.
pub fn splice_diamond(graph: &mut ControlFlowGraph, site: NodeId) {
    debug_assert_eq!(graph.kind(site), Some(NodeKind::Statement));
    let next = graph.successors(site)[0];
    let b = prepend_diamond(graph, next);
    graph.remove_edge(site, next).expect("site out-edge");
    graph.add_edge(site, b).expect("site relink");
}

/// Splices `k` diamonds, each at an independently sampled statement site.
/// Intensity 1 always takes the most-shared site; lower intensities mix the
/// share weighting toward a uniform choice. Deterministic in
/// `(seed, stream)`.
pub fn coupled_splices(
    graph: &mut ControlFlowGraph,
    k: u32,
    share: Rational,
    seed: u64,
    stream: u64,
) -> Result<(), EngineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, stream));
    let share = share.to_f64().unwrap_or(0.5).clamp(0.0, 1.0);
    for _ in 0..k {
        let counts = path_counts(graph).ok_or_else(|| {
            EngineError::Unsupported("coupled splice requires an acyclic graph".to_string())
        })?;
        let sites = statement_sites(graph, &counts);
        if sites.is_empty() {
            return Err(EngineError::Unsupported(
                "no statement node available as a splice site".to_string(),
            ));
        }
        let site = pick_site(&sites, share, &mut rng);
        splice_diamond(graph, site);
    }
    Ok(())
}

fn mix(seed: u64, stream: u64) -> u64 {
    // splitmix64 step keeps candidate streams decorrelated.
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Entry-to-exit path counts of an acyclic graph.
pub struct PathCounts {
    into: std::collections::BTreeMap<NodeId, u128>,
    out_of: std::collections::BTreeMap<NodeId, u128>,
    total: u128,
}

impl PathCounts {
    /// Number of paths passing through `node`.
    pub fn through(&self, node: NodeId) -> Option<u128> {
        Some(self.into.get(&node)? * self.out_of.get(&node)?)
    }

    pub fn total(&self) -> u128 {
        self.total
    }
}

/// Dynamic-programming path counts; `None` when the graph has a cycle.
pub fn path_counts(graph: &ControlFlowGraph) -> Option<PathCounts> {
    use std::collections::BTreeMap;
    let mut in_degree: BTreeMap<NodeId, usize> = graph.node_ids().map(|n| (n, 0)).collect();
    for (_, to) in graph.edges() {
        *in_degree.get_mut(&to).expect("edge endpoint exists") += 1;
    }
    let mut queue: Vec<NodeId> = in_degree
        .iter()
        .filter(|&(_, &d)| d == 0)
        .map(|(&n, _)| n)
        .collect();
    let mut topo = Vec::with_capacity(graph.node_count());
    while let Some(n) = queue.pop() {
        topo.push(n);
        for &m in graph.successors(n) {
            let d = in_degree.get_mut(&m).expect("edge endpoint exists");
            *d -= 1;
            if *d == 0 {
                queue.push(m);
            }
        }
    }
    if topo.len() != graph.node_count() {
        return None;
    }

    let mut into: BTreeMap<NodeId, u128> = graph.node_ids().map(|n| (n, 0)).collect();
    into.insert(graph.entry(), 1);
    for &n in &topo {
        let value = into[&n];
        for &m in graph.successors(n) {
            *into.get_mut(&m).expect("node exists") += value;
        }
    }
    let mut out_of: BTreeMap<NodeId, u128> = graph.node_ids().map(|n| (n, 0)).collect();
    out_of.insert(graph.exit(), 1);
    for &n in topo.iter().rev() {
        let sum: u128 = graph.successors(n).iter().map(|m| out_of[m]).sum();
        if n != graph.exit() {
            out_of.insert(n, sum);
        }
    }
    let total = into[&graph.exit()];
    Some(PathCounts {
        into,
        out_of,
        total,
    })
}

/// Statement nodes with the fraction of paths passing through each, in id
/// order.
fn statement_sites(graph: &ControlFlowGraph, counts: &PathCounts) -> Vec<(NodeId, f64)> {
    let total = counts.total().to_f64().unwrap_or(0.0);
    if total <= 0.0 {
        return Vec::new();
    }
    graph
        .nodes()
        .filter(|&(_, kind)| kind == NodeKind::Statement)
        .map(|(id, _)| {
            let through = counts
                .through(id)
                .and_then(|t| t.to_f64())
                .unwrap_or(0.0);
            (id, through / total)
        })
        .filter(|&(_, frac)| frac > 0.0)
        .collect()
}

fn pick_site(sites: &[(NodeId, f64)], share: f64, rng: &mut ChaCha8Rng) -> NodeId {
    if share >= 1.0 {
        // Deterministic full sharing: the most-shared site, ties toward
        // the oldest node.
        let mut best = sites[0];
        for &(id, frac) in &sites[1..] {
            if frac > best.1 {
                best = (id, frac);
            }
        }
        return best.0;
    }
    let weights: Vec<f64> = sites
        .iter()
        .map(|&(_, frac)| (1.0 - share) + share * frac)
        .collect();
    let total: f64 = weights.iter().sum();
    let mut draw = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        draw -= w;
        if draw <= 0.0 {
            return sites[i].0;
        }
    }
    sites[sites.len() - 1].0
}
