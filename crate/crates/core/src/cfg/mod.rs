//! Control-flow graphs, code paths, and equivalence-class partitions.
//!
//! A graph has exactly one entry (in-degree 0) and one exit (out-degree 0).
//! Statement nodes have out-degree 1, branch nodes out-degree 2; the entry
//! may fan out to any number of successors so that isolated feature gadgets
//! can be attached without rewriting existing paths. Every distinct
//! entry-to-exit path (traversing each back-edge at most once) is one
//! equivalence class of inputs.

mod text;

pub use text::{parse_graph, print_graph, ParseError};

use crate::spec::OutputVector;
use crate::{BigRational, Rational};
use num::BigInt;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

/// Stable node identifier. Ids are unique for the lifetime of a graph and
/// are never reused, so a surviving path keeps its fingerprint through
/// every growth step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(u32);

impl NodeId {
    pub fn index(self) -> u32 {
        self.0
    }

    pub fn from_raw(value: u32) -> Self {
        NodeId(value)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Role of a node in the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Entry,
    Exit,
    Statement,
    Branch,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Entry => "entry",
            NodeKind::Exit => "exit",
            NodeKind::Statement => "statement",
            NodeKind::Branch => "branch",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Error from a structural edit.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphEditError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("duplicate edge {from} -> {to}")]
    DuplicateEdge { from: NodeId, to: NodeId },
    #[error("no edge {from} -> {to}")]
    NoSuchEdge { from: NodeId, to: NodeId },
}

/// Directed control-flow graph with one entry and one exit.
///
/// Successor lists are kept sorted by node id, which fixes branch-arm order
/// (decision 0 takes the smaller-id arm) and makes every traversal
/// deterministic. Back-edges are recomputed after each edit from a
/// depth-first walk rooted at the entry, visiting successors in id order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlFlowGraph {
    kinds: BTreeMap<NodeId, NodeKind>,
    succ: BTreeMap<NodeId, Vec<NodeId>>,
    entry: NodeId,
    exit: NodeId,
    back_edges: BTreeSet<(NodeId, NodeId)>,
    edge_count: usize,
    next_id: u32,
}

impl ControlFlowGraph {
    /// Creates a graph holding only the entry and exit nodes, not yet
    /// connected. The result is invalid until a route entry -> exit exists.
    pub fn new() -> Self {
        let mut kinds = BTreeMap::new();
        let entry = NodeId(0);
        let exit = NodeId(1);
        kinds.insert(entry, NodeKind::Entry);
        kinds.insert(exit, NodeKind::Exit);
        let mut succ = BTreeMap::new();
        succ.insert(entry, Vec::new());
        succ.insert(exit, Vec::new());
        ControlFlowGraph {
            kinds,
            succ,
            entry,
            exit,
            back_edges: BTreeSet::new(),
            edge_count: 0,
            next_id: 2,
        }
    }

    /// Rebuilds a graph from explicit parts, e.g. when parsing the text
    /// format. Node ids are taken as given; the allocator resumes past the
    /// largest one.
    pub fn from_parts(
        nodes: &[(NodeId, NodeKind)],
        edges: &[(NodeId, NodeId)],
        entry: NodeId,
        exit: NodeId,
    ) -> Result<Self, GraphEditError> {
        let mut kinds = BTreeMap::new();
        let mut succ = BTreeMap::new();
        let mut max_id = 1;
        for &(id, kind) in nodes {
            kinds.insert(id, kind);
            succ.insert(id, Vec::new());
            max_id = max_id.max(id.0);
        }
        let mut graph = ControlFlowGraph {
            kinds,
            succ,
            entry,
            exit,
            back_edges: BTreeSet::new(),
            edge_count: 0,
            next_id: max_id + 1,
        };
        for &(from, to) in edges {
            graph.add_edge(from, to)?;
        }
        Ok(graph)
    }

    pub fn entry(&self) -> NodeId {
        self.entry
    }

    pub fn exit(&self) -> NodeId {
        self.exit
    }

    pub fn node_count(&self) -> usize {
        self.kinds.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn kind(&self, id: NodeId) -> Option<NodeKind> {
        self.kinds.get(&id).copied()
    }

    /// Node ids in ascending order.
    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.kinds.keys().copied()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, NodeKind)> + '_ {
        self.kinds.iter().map(|(&id, &k)| (id, k))
    }

    /// Successors of `id`, sorted by node id. Decision 0 at a choice point
    /// selects the first arm.
    pub fn successors(&self, id: NodeId) -> &[NodeId] {
        self.succ.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// All edges in (from, to) order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.succ
            .iter()
            .flat_map(|(&from, tos)| tos.iter().map(move |&to| (from, to)))
    }

    pub fn in_degree(&self, id: NodeId) -> usize {
        self.edges().filter(|&(_, to)| to == id).count()
    }

    pub fn branch_count(&self) -> usize {
        self.kinds
            .values()
            .filter(|&&k| k == NodeKind::Branch)
            .count()
    }

    pub fn add_statement(&mut self) -> NodeId {
        self.add_node(NodeKind::Statement)
    }

    pub fn add_branch(&mut self) -> NodeId {
        self.add_node(NodeKind::Branch)
    }

    fn add_node(&mut self, kind: NodeKind) -> NodeId {
        let id = NodeId(self.next_id);
        self.next_id += 1;
        self.kinds.insert(id, kind);
        self.succ.insert(id, Vec::new());
        id
    }

    /// Adds the edge `from -> to`. Edges form a set: duplicates are
    /// rejected, so the two arms of a branch always reach distinct nodes.
    pub fn add_edge(&mut self, from: NodeId, to: NodeId) -> Result<(), GraphEditError> {
        if !self.kinds.contains_key(&from) {
            return Err(GraphEditError::UnknownNode(from));
        }
        if !self.kinds.contains_key(&to) {
            return Err(GraphEditError::UnknownNode(to));
        }
        let list = self.succ.get_mut(&from).expect("successor list exists");
        match list.binary_search(&to) {
            Ok(_) => return Err(GraphEditError::DuplicateEdge { from, to }),
            Err(pos) => list.insert(pos, to),
        }
        self.edge_count += 1;
        self.recompute_back_edges();
        Ok(())
    }

    pub fn remove_edge(&mut self, from: NodeId, to: NodeId) -> Result<(), GraphEditError> {
        let list = self
            .succ
            .get_mut(&from)
            .ok_or(GraphEditError::UnknownNode(from))?;
        match list.binary_search(&to) {
            Ok(pos) => {
                list.remove(pos);
            }
            Err(_) => return Err(GraphEditError::NoSuchEdge { from, to }),
        }
        self.edge_count -= 1;
        self.recompute_back_edges();
        Ok(())
    }

    /// Cycle-closing edges under the fixed depth-first order from the entry.
    pub fn back_edges(&self) -> &BTreeSet<(NodeId, NodeId)> {
        &self.back_edges
    }

    pub fn is_back_edge(&self, from: NodeId, to: NodeId) -> bool {
        self.back_edges.contains(&(from, to))
    }

    fn recompute_back_edges(&mut self) {
        #[derive(Clone, Copy, PartialEq)]
        enum Color {
            White,
            Gray,
            Black,
        }
        let mut color: BTreeMap<NodeId, Color> =
            self.kinds.keys().map(|&id| (id, Color::White)).collect();
        let mut back = BTreeSet::new();
        // Iterative DFS; (node, next successor index) frames.
        let mut stack: Vec<(NodeId, usize)> = vec![(self.entry, 0)];
        color.insert(self.entry, Color::Gray);
        while let Some(&mut (node, ref mut idx)) = stack.last_mut() {
            let succ = self.succ.get(&node).map(Vec::as_slice).unwrap_or(&[]);
            if *idx < succ.len() {
                let next = succ[*idx];
                *idx += 1;
                match color[&next] {
                    Color::White => {
                        color.insert(next, Color::Gray);
                        stack.push((next, 0));
                    }
                    Color::Gray => {
                        back.insert((node, next));
                    }
                    Color::Black => {}
                }
            } else {
                color.insert(node, Color::Black);
                stack.pop();
            }
        }
        self.back_edges = back;
    }
}

impl Default for ControlFlowGraph {
    fn default() -> Self {
        Self::new()
    }
}

/// Structural rule broken by a graph, reported by [`validate_cfg`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Node cannot be reached from the entry.
    Unreachable(NodeId),
    /// Node cannot reach the exit.
    NoExitRoute(NodeId),
    /// Statement node whose out-degree is not exactly 1.
    StatementArity { node: NodeId, out_degree: usize },
    /// Branch node whose out-degree is not exactly 2.
    BranchArity { node: NodeId, out_degree: usize },
    /// The entry node has incoming edges.
    EntryHasPredecessors { count: usize },
    /// The exit node has outgoing edges.
    ExitHasSuccessors { count: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Unreachable(n) => write!(f, "node {n} unreachable from entry"),
            Violation::NoExitRoute(n) => write!(f, "node {n} cannot reach exit"),
            Violation::StatementArity { node, out_degree } => {
                write!(f, "statement arity: node {node} has out-degree {out_degree}")
            }
            Violation::BranchArity { node, out_degree } => {
                write!(f, "branch arity: node {node} has out-degree {out_degree}")
            }
            Violation::EntryHasPredecessors { count } => {
                write!(f, "entry has {count} incoming edge(s)")
            }
            Violation::ExitHasSuccessors { count } => {
                write!(f, "exit has {count} outgoing edge(s)")
            }
        }
    }
}

/// Checks every structural invariant and returns the complete violation
/// list; an empty list means the graph is well formed.
pub fn validate_cfg(graph: &ControlFlowGraph) -> Vec<Violation> {
    let mut violations = Vec::new();

    let entry_preds = graph.in_degree(graph.entry());
    if entry_preds > 0 {
        violations.push(Violation::EntryHasPredecessors { count: entry_preds });
    }
    let exit_succs = graph.successors(graph.exit()).len();
    if exit_succs > 0 {
        violations.push(Violation::ExitHasSuccessors { count: exit_succs });
    }

    for (id, kind) in graph.nodes() {
        let out = graph.successors(id).len();
        match kind {
            NodeKind::Statement if out != 1 => {
                violations.push(Violation::StatementArity {
                    node: id,
                    out_degree: out,
                });
            }
            NodeKind::Branch if out != 2 => {
                violations.push(Violation::BranchArity {
                    node: id,
                    out_degree: out,
                });
            }
            _ => {}
        }
    }

    // Forward reachability from entry.
    let mut seen: BTreeSet<NodeId> = BTreeSet::new();
    let mut work = vec![graph.entry()];
    seen.insert(graph.entry());
    while let Some(n) = work.pop() {
        for &m in graph.successors(n) {
            if seen.insert(m) {
                work.push(m);
            }
        }
    }
    for id in graph.node_ids() {
        if !seen.contains(&id) {
            violations.push(Violation::Unreachable(id));
        }
    }

    // Backward reachability to exit.
    let mut preds: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for (from, to) in graph.edges() {
        preds.entry(to).or_default().push(from);
    }
    let mut co_seen: BTreeSet<NodeId> = BTreeSet::new();
    let mut work = vec![graph.exit()];
    co_seen.insert(graph.exit());
    while let Some(n) = work.pop() {
        if let Some(ps) = preds.get(&n) {
            for &p in ps {
                if co_seen.insert(p) {
                    work.push(p);
                }
            }
        }
    }
    for id in graph.node_ids() {
        if !co_seen.contains(&id) {
            violations.push(Violation::NoExitRoute(id));
        }
    }

    violations
}

/// An entry-to-exit walk. Back-edges appear at most once; segments between
/// back-edge uses follow forward edges only.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CodePath {
    sequence: Arc<[NodeId]>,
}

impl CodePath {
    pub fn new(sequence: Vec<NodeId>) -> Self {
        CodePath {
            sequence: sequence.into(),
        }
    }

    pub fn sequence(&self) -> &[NodeId] {
        &self.sequence
    }

    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    /// Interior node set: every visited node except the first (entry) and
    /// last (exit). This is what the coupling measure compares.
    pub fn interior(&self) -> BTreeSet<NodeId> {
        let n = self.sequence.len();
        if n <= 2 {
            return BTreeSet::new();
        }
        self.sequence[1..n - 1].iter().copied().collect()
    }

    /// Canonical fingerprint: the exact node-id sequence. Equal sequences
    /// give equal keys and unequal sequences give unequal keys.
    pub fn key(&self) -> PathKey {
        PathKey(Arc::clone(&self.sequence))
    }
}

/// Injective path fingerprint used as class identity across growth steps.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathKey(Arc<[NodeId]>);

impl PathKey {
    pub fn ids(&self) -> &[NodeId] {
        &self.0
    }
}

impl fmt::Display for PathKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for id in self.0.iter() {
            if !first {
                write!(f, "-")?;
            }
            write!(f, "{id}")?;
            first = false;
        }
        Ok(())
    }
}

/// Path enumeration hit the configured cap: the class count is in its
/// exponential blow-up regime.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("path count exceeds cap {cap}")]
pub struct ExplosionError {
    pub cap: usize,
}

/// Enumerates every distinct entry-to-exit path, traversing each back-edge
/// at most once, in lexicographic node-id order. Fails once more than `cap`
/// paths exist.
pub fn enumerate_paths(
    graph: &ControlFlowGraph,
    cap: usize,
) -> Result<Vec<CodePath>, ExplosionError> {
    let mut out = Vec::new();
    let mut prefix = vec![graph.entry()];
    let mut used_back: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
    walk(graph, graph.entry(), &mut prefix, &mut used_back, &mut out, cap)?;
    Ok(out)
}

fn walk(
    graph: &ControlFlowGraph,
    node: NodeId,
    prefix: &mut Vec<NodeId>,
    used_back: &mut BTreeSet<(NodeId, NodeId)>,
    out: &mut Vec<CodePath>,
    cap: usize,
) -> Result<(), ExplosionError> {
    if node == graph.exit() {
        if out.len() >= cap {
            return Err(ExplosionError { cap });
        }
        out.push(CodePath::new(prefix.clone()));
        return Ok(());
    }
    for &next in graph.successors(node) {
        let edge = (node, next);
        let is_back = graph.is_back_edge(node, next);
        if is_back && used_back.contains(&edge) {
            continue;
        }
        if is_back {
            used_back.insert(edge);
        }
        prefix.push(next);
        let result = walk(graph, next, prefix, used_back, out, cap);
        prefix.pop();
        if is_back {
            used_back.remove(&edge);
        }
        result?;
    }
    Ok(())
}

/// Maps code paths to output labels.
pub trait PathLabeler {
    fn label(&self, path: &CodePath) -> Option<OutputVector>;
}

/// Labels every path with a stable token derived from its node-id sequence,
/// so a class that survives a growth step keeps its output. Total over all
/// graphs.
#[derive(Debug, Clone, Copy, Default)]
pub struct SequenceLabeler;

impl PathLabeler for SequenceLabeler {
    fn label(&self, path: &CodePath) -> Option<OutputVector> {
        // FNV-1a over the id bytes; collisions would only make two classes
        // share an output label, which the model permits.
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for id in path.sequence() {
            for byte in id.index().to_le_bytes() {
                hash ^= u64::from(byte);
                hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        Some(OutputVector::new(format!("o{hash:016x}")))
    }
}

/// Labels only the explicitly listed fingerprints.
#[derive(Debug, Clone, Default)]
pub struct MapLabeler {
    labels: BTreeMap<PathKey, OutputVector>,
}

impl MapLabeler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: PathKey, label: OutputVector) {
        self.labels.insert(key, label);
    }
}

impl PathLabeler for MapLabeler {
    fn label(&self, path: &CodePath) -> Option<OutputVector> {
        self.labels.get(&path.key()).cloned()
    }
}

/// One equivalence class: a distinct code path, its canonical branch
/// decisions, and the output label shared by every input that takes it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivalenceClass {
    path: CodePath,
    interior: Box<[NodeId]>,
    decisions: Vec<bool>,
    label: OutputVector,
}

impl EquivalenceClass {
    pub fn path(&self) -> &CodePath {
        &self.path
    }

    pub fn key(&self) -> PathKey {
        self.path.key()
    }

    /// Interior node ids, sorted and deduplicated.
    pub fn interior(&self) -> &[NodeId] {
        &self.interior
    }

    /// The canonical decision sequence that selects this class's path.
    pub fn decisions(&self) -> &[bool] {
        &self.decisions
    }

    pub fn output_label(&self) -> &OutputVector {
        &self.label
    }
}

/// Failure while deriving the class partition.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DeriveError {
    #[error(transparent)]
    Explosion(#[from] ExplosionError),
    #[error("no label for path {0}")]
    PathUnlabeled(PathKey),
}

/// The set of equivalence classes of a graph, keyed by path fingerprint.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EqcpSet {
    classes: BTreeMap<PathKey, EquivalenceClass>,
}

impl EqcpSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub(crate) fn from_classes(classes: BTreeMap<PathKey, EquivalenceClass>) -> Self {
        EqcpSet { classes }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn get(&self, key: &PathKey) -> Option<&EquivalenceClass> {
        self.classes.get(key)
    }

    pub fn contains(&self, key: &PathKey) -> bool {
        self.classes.contains_key(key)
    }

    /// Classes in fingerprint order.
    pub fn iter(&self) -> impl Iterator<Item = &EquivalenceClass> {
        self.classes.values()
    }

    /// Fingerprints in ascending order.
    pub fn keys(&self) -> impl Iterator<Item = &PathKey> {
        self.classes.keys()
    }
}

/// Derives one equivalence class per distinct path of `graph`.
pub fn derive_eqcp(
    graph: &ControlFlowGraph,
    labeler: &dyn PathLabeler,
    cap: usize,
) -> Result<EqcpSet, DeriveError> {
    let paths = enumerate_paths(graph, cap)?;
    let mut classes = BTreeMap::new();
    for path in paths {
        let label = labeler
            .label(&path)
            .ok_or_else(|| DeriveError::PathUnlabeled(path.key()))?;
        let mut interior: Vec<NodeId> = path.interior().into_iter().collect();
        interior.dedup();
        let decisions = read_decisions(graph, &path);
        classes.insert(
            path.key(),
            EquivalenceClass {
                path,
                interior: interior.into_boxed_slice(),
                decisions,
                label,
            },
        );
    }
    Ok(EqcpSet { classes })
}

/// Reads the canonical decision sequence off a path: one bit per binary
/// branch, and a chained unary selection at any wider fan (arm `j` of `m`
/// encodes as `j` ones followed by a zero, except the last arm).
pub fn read_decisions(graph: &ControlFlowGraph, path: &CodePath) -> Vec<bool> {
    let mut bits = Vec::new();
    let seq = path.sequence();
    for window in seq.windows(2) {
        let (node, next) = (window[0], window[1]);
        let arms = graph.successors(node);
        if arms.len() < 2 {
            continue;
        }
        let j = arms
            .iter()
            .position(|&a| a == next)
            .expect("path step follows an edge");
        for _ in 0..j {
            bits.push(true);
        }
        if j < arms.len() - 1 {
            bits.push(false);
        }
    }
    bits
}

/// Jaccard coupling between two classes: shared interior code over total
/// interior code. Empty-over-empty is 0 by convention (no code, no
/// coupling). Exact rational, symmetric, and 1 on a class with itself
/// whenever its interior is non-empty.
pub fn coupling(a: &EquivalenceClass, b: &EquivalenceClass) -> Rational {
    let (inter, union) = interior_overlap(a.interior(), b.interior());
    if union == 0 {
        return Rational::new(0, 1);
    }
    Rational::new(inter, union)
}

fn interior_overlap(a: &[NodeId], b: &[NodeId]) -> (u64, u64) {
    // Merge scan over sorted, deduplicated interiors.
    let mut i = 0;
    let mut j = 0;
    let mut inter = 0u64;
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() as u64 + b.len() as u64 - inter;
    (inter, union)
}

/// Total pairwise coupling over all unordered distinct class pairs.
pub fn total_coupling(eqcp: &EqcpSet) -> BigRational {
    // Accumulate numerators per union size, then combine the few distinct
    // denominators exactly.
    let classes: Vec<&EquivalenceClass> = eqcp.iter().collect();
    let mut buckets: BTreeMap<u64, u64> = BTreeMap::new();
    for (i, a) in classes.iter().enumerate() {
        for b in classes.iter().skip(i + 1) {
            let (inter, union) = interior_overlap(a.interior(), b.interior());
            if union == 0 || inter == 0 {
                continue;
            }
            *buckets.entry(union).or_insert(0) += inter;
        }
    }
    let mut total = BigRational::from_integer(BigInt::from(0));
    for (union, inter_sum) in buckets {
        total += BigRational::new(BigInt::from(inter_sum), BigInt::from(union));
    }
    total
}

/// Code-size stand-in: node count plus edge count. Monotone under node and
/// edge insertion.
pub fn code_size_proxy(graph: &ControlFlowGraph) -> usize {
    graph.node_count() + graph.edge_count()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// entry -> s1 -> exit
    fn chain() -> ControlFlowGraph {
        let mut g = ControlFlowGraph::new();
        let s = g.add_statement();
        g.add_edge(g.entry(), s).unwrap();
        g.add_edge(s, g.exit()).unwrap();
        g
    }

    /// entry -> b -> {a0 | a1} -> exit
    fn diamond() -> ControlFlowGraph {
        let mut g = ControlFlowGraph::new();
        let b = g.add_branch();
        let a0 = g.add_statement();
        let a1 = g.add_statement();
        g.add_edge(g.entry(), b).unwrap();
        g.add_edge(b, a0).unwrap();
        g.add_edge(b, a1).unwrap();
        g.add_edge(a0, g.exit()).unwrap();
        g.add_edge(a1, g.exit()).unwrap();
        g
    }

    /// Three sequential, independent diamonds.
    fn three_diamonds() -> ControlFlowGraph {
        let mut g = ControlFlowGraph::new();
        let mut junction = g.exit();
        for _ in 0..3 {
            let b = g.add_branch();
            let a0 = g.add_statement();
            let a1 = g.add_statement();
            g.add_edge(b, a0).unwrap();
            g.add_edge(b, a1).unwrap();
            g.add_edge(a0, junction).unwrap();
            g.add_edge(a1, junction).unwrap();
            junction = b;
        }
        g.add_edge(g.entry(), junction).unwrap();
        g
    }

    #[test]
    fn minimal_chain_is_valid() {
        assert!(validate_cfg(&chain()).is_empty());
    }

    #[test]
    fn unreachable_node_is_reported() {
        let mut g = chain();
        let orphan = g.add_statement();
        g.add_edge(orphan, g.exit()).unwrap();
        let violations = validate_cfg(&g);
        assert!(violations.contains(&Violation::Unreachable(orphan)));
    }

    #[test]
    fn branch_arity_violation_is_reported() {
        let mut g = diamond();
        // Give the branch a third arm.
        let b = NodeId::from_raw(2);
        let extra = g.add_statement();
        g.add_edge(b, extra).unwrap();
        g.add_edge(extra, g.exit()).unwrap();
        let violations = validate_cfg(&g);
        assert!(violations
            .iter()
            .any(|v| matches!(v, Violation::BranchArity { node, out_degree: 3 } if *node == b)));
        assert!(violations
            .iter()
            .any(|v| v.to_string().contains("branch arity")));
    }

    #[test]
    fn statement_dead_end_is_reported() {
        let mut g = chain();
        let dead = g.add_statement();
        g.add_edge(g.entry(), dead).unwrap();
        let violations = validate_cfg(&g);
        assert!(violations
            .iter()
            .any(|v| matches!(v, Violation::StatementArity { node, out_degree: 0 } if *node == dead)));
        assert!(violations.contains(&Violation::NoExitRoute(dead)));
    }

    #[test]
    fn edge_into_entry_is_reported() {
        let mut g = chain();
        let s = g.add_statement();
        g.add_edge(g.entry(), s).unwrap();
        // s needs an out-edge; route it back to entry to trigger the check.
        g.add_edge(s, g.entry()).unwrap();
        let violations = validate_cfg(&g);
        assert!(violations
            .iter()
            .any(|v| matches!(v, Violation::EntryHasPredecessors { .. })));
    }

    #[test]
    fn duplicate_edge_rejected() {
        let mut g = chain();
        let err = g.add_edge(g.entry(), NodeId::from_raw(2)).unwrap_err();
        assert!(matches!(err, GraphEditError::DuplicateEdge { .. }));
    }

    #[test]
    fn chain_has_one_path() {
        let paths = enumerate_paths(&chain(), 100).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].sequence().first(), Some(&NodeId::from_raw(0)));
        assert_eq!(paths[0].sequence().last(), Some(&NodeId::from_raw(1)));
    }

    #[test]
    fn diamond_has_two_paths() {
        let paths = enumerate_paths(&diamond(), 100).unwrap();
        assert_eq!(paths.len(), 2);
    }

    #[test]
    fn three_diamonds_have_eight_paths() {
        // Oracle: independent brute-force count. Each diamond doubles the
        // path count, so 2^3 = 8.
        let g = three_diamonds();
        let paths = enumerate_paths(&g, 1000).unwrap();
        assert_eq!(paths.len(), 8);
        assert_eq!(paths.len(), brute_force_count(&g));
        // Deterministic lexicographic order.
        let mut sorted = paths.clone();
        sorted.sort();
        assert_eq!(paths, sorted);
        let again = enumerate_paths(&g, 1000).unwrap();
        assert_eq!(paths, again);
    }

    /// Brute-force DFS oracle, written independently of `enumerate_paths`:
    /// counts entry-to-exit walks in an acyclic graph by recursion on
    /// successor lists.
    fn brute_force_count(g: &ControlFlowGraph) -> usize {
        fn go(g: &ControlFlowGraph, at: NodeId) -> usize {
            if at == g.exit() {
                return 1;
            }
            g.successors(at).iter().map(|&n| go(g, n)).sum()
        }
        go(g, g.entry())
    }

    #[test]
    fn explosion_cap_enforced() {
        let err = enumerate_paths(&three_diamonds(), 7).unwrap_err();
        assert_eq!(err, ExplosionError { cap: 7 });
        assert!(enumerate_paths(&three_diamonds(), 8).is_ok());
    }

    #[test]
    fn cycle_uses_back_edge_once() {
        // entry -> b1 -> s -> b2 -> exit, with b2's other arm looping to s
        // and b1's other arm a short statement into the loop body.
        let mut g = ControlFlowGraph::new();
        let b1 = g.add_branch();
        let s = g.add_statement();
        let b2 = g.add_branch();
        let alt = g.add_statement();
        g.add_edge(g.entry(), b1).unwrap();
        g.add_edge(b1, s).unwrap();
        g.add_edge(b1, alt).unwrap();
        g.add_edge(alt, g.exit()).unwrap();
        g.add_edge(s, b2).unwrap();
        g.add_edge(b2, g.exit()).unwrap();
        g.add_edge(b2, s).unwrap();
        assert!(validate_cfg(&g).is_empty());
        assert_eq!(g.back_edges().len(), 1);
        assert!(g.is_back_edge(b2, s));

        let paths = enumerate_paths(&g, 100).unwrap();
        // entry-b1-alt-exit, entry-b1-s-b2-exit, entry-b1-s-b2-s-b2-exit.
        assert_eq!(paths.len(), 3);
        for p in &paths {
            let back_uses = p
                .sequence()
                .windows(2)
                .filter(|w| g.is_back_edge(w[0], w[1]))
                .count();
            assert!(back_uses <= 1);
        }
    }

    #[test]
    fn derive_sizes_match_path_counts() {
        let labeler = SequenceLabeler;
        assert_eq!(derive_eqcp(&chain(), &labeler, 10).unwrap().len(), 1);
        assert_eq!(derive_eqcp(&diamond(), &labeler, 10).unwrap().len(), 2);
        let set = derive_eqcp(&three_diamonds(), &labeler, 100).unwrap();
        assert_eq!(set.len(), 8);
        assert!(set.len() <= 1 << 3);
    }

    #[test]
    fn unlabeled_path_is_an_error() {
        let labeler = MapLabeler::new();
        let err = derive_eqcp(&diamond(), &labeler, 10).unwrap_err();
        assert!(matches!(err, DeriveError::PathUnlabeled(_)));
    }

    fn class_with_interior(ids: &[u32]) -> EquivalenceClass {
        let mut seq = vec![NodeId::from_raw(0)];
        seq.extend(ids.iter().map(|&i| NodeId::from_raw(i)));
        seq.push(NodeId::from_raw(1));
        let path = CodePath::new(seq);
        let mut interior: Vec<NodeId> = path.interior().into_iter().collect();
        interior.dedup();
        EquivalenceClass {
            path,
            interior: interior.into_boxed_slice(),
            decisions: Vec::new(),
            label: OutputVector::new("x"),
        }
    }

    #[test]
    fn coupling_of_class_with_itself_is_one() {
        let c = class_with_interior(&[10, 11, 12]);
        assert_eq!(coupling(&c, &c), Rational::new(1, 1));
    }

    #[test]
    fn coupling_disjoint_is_zero() {
        let a = class_with_interior(&[10, 11]);
        let b = class_with_interior(&[20, 21]);
        assert_eq!(coupling(&a, &b), Rational::new(0, 1));
    }

    #[test]
    fn coupling_matches_set_arithmetic() {
        // {a,b,c} vs {b,c,d}: |∩| = 2, |∪| = 4, so 1/2.
        let a = class_with_interior(&[10, 11, 12]);
        let b = class_with_interior(&[11, 12, 13]);
        assert_eq!(coupling(&a, &b), Rational::new(1, 2));
        assert_eq!(coupling(&b, &a), Rational::new(1, 2));
    }

    #[test]
    fn coupling_empty_interiors_is_zero() {
        let a = class_with_interior(&[]);
        let b = class_with_interior(&[]);
        assert_eq!(coupling(&a, &b), Rational::new(0, 1));
    }

    #[test]
    fn total_coupling_examples() {
        // All disjoint.
        let disjoint = [
            class_with_interior(&[10]),
            class_with_interior(&[11]),
            class_with_interior(&[12]),
        ];
        let set = EqcpSet {
            classes: disjoint.iter().map(|c| (c.key(), c.clone())).collect(),
        };
        assert_eq!(total_coupling(&set), BigRational::from_integer(0.into()));

        // Two classes with identical interiors: one unordered pair, J = 1.
        // Distinct paths can share an interior set when a node repeats.
        let c1 = class_with_interior(&[10, 11]);
        let c2 = class_with_interior(&[10, 11, 10]);
        assert_ne!(c1.key(), c2.key());
        assert_eq!(c1.interior(), c2.interior());
        let set = EqcpSet {
            classes: [&c1, &c2].iter().map(|c| (c.key(), (*c).clone())).collect(),
        };
        assert_eq!(total_coupling(&set), BigRational::from_integer(1.into()));

        // Three classes with pairwise J = 1/2 sum to 3/2.
        let triple = [
            class_with_interior(&[10, 11, 12]),
            class_with_interior(&[11, 12, 13]),
            class_with_interior(&[10, 12, 13]),
        ];
        for i in 0..3 {
            for j in (i + 1)..3 {
                assert_eq!(coupling(&triple[i], &triple[j]), Rational::new(1, 2));
            }
        }
        let set = EqcpSet {
            classes: triple.iter().map(|c| (c.key(), c.clone())).collect(),
        };
        assert_eq!(
            total_coupling(&set),
            BigRational::new(3.into(), 2.into())
        );
    }

    #[test]
    fn size_proxy_counts_nodes_plus_edges() {
        let mut g = ControlFlowGraph::new();
        g.add_edge(g.entry(), g.exit()).unwrap();
        assert_eq!(code_size_proxy(&g), 3);

        assert_eq!(code_size_proxy(&diamond()), 10);

        // Inserting a statement on an edge adds one node and nets one edge.
        let mut g = diamond();
        let before = code_size_proxy(&g);
        let a0 = NodeId::from_raw(3);
        let s = g.add_statement();
        g.remove_edge(a0, g.exit()).unwrap();
        g.add_edge(a0, s).unwrap();
        g.add_edge(s, g.exit()).unwrap();
        assert_eq!(code_size_proxy(&g), before + 2);
    }

    #[test]
    fn decisions_read_off_paths() {
        let g = diamond();
        let set = derive_eqcp(&g, &SequenceLabeler, 10).unwrap();
        let decisions: Vec<Vec<bool>> = set.iter().map(|c| c.decisions().to_vec()).collect();
        assert!(decisions.contains(&vec![false]));
        assert!(decisions.contains(&vec![true]));

        let chain_set = derive_eqcp(&chain(), &SequenceLabeler, 10).unwrap();
        assert!(chain_set.iter().all(|c| c.decisions().is_empty()));
    }
}
