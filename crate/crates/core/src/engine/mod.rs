//! The growth-step iteration: each applied delta grows the graph under a
//! branch budget and produces the next class set.
//!
//! Attachment is graph surgery. An isolated attachment hangs a fresh
//! diamond-chain gadget off the entry so every existing path survives and
//! the new classes share no interior code. A coupled splice replaces the
//! out-edge of a shared statement node with a diamond, which invalidates
//! every path through that node and multiplies it into two successors —
//! repeated under one budget this is what drives class churn.

mod surgery;
mod trajectory;

pub use trajectory::{run_trajectory, run_trajectory_perturbed, Trajectory, TruncatedRun};

use crate::cfg::{
    code_size_proxy, derive_eqcp, validate_cfg, ControlFlowGraph, DeriveError, EqcpSet,
    ExplosionError, PathKey, SequenceLabeler,
};
use crate::spec::{validate_consistency, AttachHint, ConsistencyError, SpecDelta};
use crate::Rational;
use num::ToPrimitive;

/// How each delta turns into code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DevelopmentPolicy {
    /// Every delta becomes an isolated gadget; existing classes are never
    /// touched and new classes share no interior code with old ones.
    Decoupled,
    /// Deltas splice diamonds into existing statement nodes, sampled with
    /// weight `(1 - share) + share * fraction-of-paths-through-node`.
    /// Intensity 1 deterministically picks the most-shared node.
    DryCoupled { share_intensity: Rational },
    /// Greedy search: build `alternatives` candidate steps and keep the one
    /// with the lowest churn.
    Guided { alternatives: usize },
}

/// Work limits for a run. Path enumeration aborts once the class count
/// passes `max_classes`/`max_paths`; the pairwise coupling total is only
/// recorded while the class count stays within `coupling_classes`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Caps {
    pub max_classes: usize,
    pub max_paths: usize,
    pub coupling_classes: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_classes: 100_000,
            max_paths: 100_000,
            coupling_classes: 1024,
        }
    }
}

impl Caps {
    fn enumeration_cap(&self) -> usize {
        self.max_classes.min(self.max_paths)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Explosion(#[from] ExplosionError),
    #[error(transparent)]
    Consistency(#[from] ConsistencyError),
    #[error("no label for path {0}")]
    Unlabeled(PathKey),
    #[error("unsupported graph: {0}")]
    Unsupported(String),
}

impl From<DeriveError> for EngineError {
    fn from(err: DeriveError) -> Self {
        match err {
            DeriveError::Explosion(e) => EngineError::Explosion(e),
            DeriveError::PathUnlabeled(key) => EngineError::Unlabeled(key),
        }
    }
}

/// One point of the iteration: the graph after `step` applied deltas and
/// its class partition. The partition is always exactly
/// `derive_eqcp(graph)`; it is cached here and revalidated in debug builds.
#[derive(Debug, Clone, PartialEq)]
pub struct TddState {
    step: usize,
    graph: ControlFlowGraph,
    eqcp: EqcpSet,
    history: Vec<SpecDelta>,
}

impl TddState {
    /// The pre-bootstrap state: entry and exit only, no classes.
    pub fn initial() -> Self {
        TddState {
            step: 0,
            graph: ControlFlowGraph::new(),
            eqcp: EqcpSet::empty(),
            history: Vec::new(),
        }
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn graph(&self) -> &ControlFlowGraph {
        &self.graph
    }

    pub fn eqcp(&self) -> &EqcpSet {
        &self.eqcp
    }

    pub fn history(&self) -> &[SpecDelta] {
        &self.history
    }
}

/// Internal attachment recipe a candidate step is built from.
#[derive(Debug, Clone)]
enum Attachment {
    Isolated,
    CoupledSplice { share: Rational, stream: u64 },
}

/// Applies one delta under a policy and returns the next state. The first
/// application to an empty state bootstraps the initial gadget regardless
/// of policy. Every class of the result passes its own generated test by
/// construction.
pub fn apply_delta(
    state: &TddState,
    delta: &SpecDelta,
    policy: &DevelopmentPolicy,
    caps: &Caps,
) -> Result<TddState, EngineError> {
    apply_delta_inner(state, delta, policy, caps, false)
}

pub(crate) fn apply_delta_inner(
    state: &TddState,
    delta: &SpecDelta,
    policy: &DevelopmentPolicy,
    caps: &Caps,
    perturb_bootstrap: bool,
) -> Result<TddState, EngineError> {
    validate_consistency(&delta.new_points)?;
    if state.eqcp.is_empty() {
        return bootstrap(state, delta, caps, perturb_bootstrap);
    }
    let attachment = match policy {
        DevelopmentPolicy::Decoupled => Attachment::Isolated,
        DevelopmentPolicy::DryCoupled { share_intensity } => match delta.attach_hint {
            AttachHint::Isolated => Attachment::Isolated,
            AttachHint::Shared => Attachment::CoupledSplice {
                share: *share_intensity,
                stream: 0,
            },
        },
        DevelopmentPolicy::Guided { alternatives } => {
            return guided_step(state, delta, *alternatives, caps);
        }
    };
    apply_attachment(state, delta, &attachment, caps)
}

fn bootstrap(
    state: &TddState,
    delta: &SpecDelta,
    caps: &Caps,
    perturbed: bool,
) -> Result<TddState, EngineError> {
    let mut graph = state.graph.clone();
    surgery::attach_isolated(&mut graph, delta.branch_budget);
    if perturbed {
        // A nearby starting point: one extra minimal gadget.
        surgery::attach_isolated(&mut graph, 1);
    }
    finish_step(state, delta, graph, caps)
}

fn apply_attachment(
    state: &TddState,
    delta: &SpecDelta,
    attachment: &Attachment,
    caps: &Caps,
) -> Result<TddState, EngineError> {
    let mut graph = state.graph.clone();
    match attachment {
        Attachment::Isolated => surgery::attach_isolated(&mut graph, delta.branch_budget),
        Attachment::CoupledSplice { share, stream } => {
            surgery::coupled_splices(&mut graph, delta.branch_budget, *share, delta.seed, *stream)?;
        }
    }
    finish_step(state, delta, graph, caps)
}

fn finish_step(
    state: &TddState,
    delta: &SpecDelta,
    graph: ControlFlowGraph,
    caps: &Caps,
) -> Result<TddState, EngineError> {
    debug_assert!(
        validate_cfg(&graph).is_empty(),
        "surgery broke the graph: {:?}",
        validate_cfg(&graph)
    );
    let eqcp = derive_eqcp(&graph, &SequenceLabeler, caps.enumeration_cap())?;
    if eqcp.len() > caps.max_classes {
        return Err(EngineError::Explosion(ExplosionError {
            cap: caps.max_classes,
        }));
    }
    let mut history = state.history.clone();
    history.push(delta.clone());
    Ok(TddState {
        step: state.step + 1,
        graph,
        eqcp,
        history,
    })
}

/// Share-intensity grid cycled by non-default candidates.
const SHARE_GRID: [(u64, u64); 4] = [(1, 4), (1, 2), (3, 4), (1, 1)];

/// Builds `m` candidate next-states for one delta, deterministic in
/// `delta.seed`. Candidate 0 is the default coupled splice (intensity 1/2),
/// candidate 1 attaches in isolation, and later candidates vary both the
/// sampling stream and the share intensity.
pub fn generate_alternatives(
    state: &TddState,
    delta: &SpecDelta,
    m: usize,
    caps: &Caps,
) -> Result<Vec<TddState>, EngineError> {
    assert!(m >= 1, "at least one alternative required");
    validate_consistency(&delta.new_points)?;
    if state.eqcp.is_empty() {
        // Bootstrap is attachment-independent; all candidates coincide.
        let built = bootstrap(state, delta, caps, false)?;
        return Ok(vec![built; m]);
    }
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let attachment = match i {
            0 => Attachment::CoupledSplice {
                share: Rational::new(1, 2),
                stream: 0,
            },
            1 => Attachment::Isolated,
            _ => {
                let (num, den) = SHARE_GRID[(i - 2) % SHARE_GRID.len()];
                Attachment::CoupledSplice {
                    share: Rational::new(num, den),
                    stream: i as u64,
                }
            }
        };
        out.push(apply_attachment(state, delta, &attachment, caps)?);
    }
    Ok(out)
}

/// Greedy guided step: of `m` candidates, keep the one with minimal churn
/// against the current class set; ties break toward the smaller code size,
/// then the earlier candidate.
pub fn guided_step(
    state: &TddState,
    delta: &SpecDelta,
    m: usize,
    caps: &Caps,
) -> Result<TddState, EngineError> {
    let candidates = generate_alternatives(state, delta, m, caps)?;
    let mut best: Option<(usize, Rational, usize)> = None;
    for (i, candidate) in candidates.iter().enumerate() {
        let sigma = candidate_sigma(state, candidate);
        let size = code_size_proxy(candidate.graph());
        let better = match &best {
            None => true,
            Some((_, best_sigma, best_size)) => {
                sigma < *best_sigma || (sigma == *best_sigma && size < *best_size)
            }
        };
        if better {
            best = Some((i, sigma, size));
        }
    }
    let (idx, _, _) = best.expect("m >= 1 candidates");
    Ok(candidates.into_iter().nth(idx).expect("index in range"))
}

/// Churn a candidate would cause, as an exact rational. The current set is
/// non-empty whenever candidates are generated past bootstrap, so the
/// metric is always defined.
fn candidate_sigma(state: &TddState, candidate: &TddState) -> Rational {
    crate::stability::stability_metric(&state.eqcp, &candidate.eqcp)
        .expect("class sets non-empty")
        .value()
}

/// Fraction of entry-to-exit paths through `node`, for tests and
/// diagnostics. The graph must be acyclic.
pub fn path_fraction(graph: &ControlFlowGraph, node: crate::cfg::NodeId) -> Option<f64> {
    let counts = surgery::path_counts(graph)?;
    let through = counts.through(node)?;
    let total = counts.total();
    if total == 0 {
        return None;
    }
    Some(through.to_f64().unwrap_or(0.0) / total.to_f64().unwrap_or(1.0))
}
