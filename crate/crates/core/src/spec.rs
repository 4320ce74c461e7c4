//! Point-pair specifications and the executable test semantics.
//!
//! An input is the sequence of binary choices taken at the choice points of
//! a walk; an output is an opaque label. A test fixes one input/output pair
//! and passes iff executing the graph on the input reproduces the expected
//! label. Two inputs that select the same path always produce the same
//! output, which is exactly the equivalence relation the class partition
//! captures.

use crate::cfg::{CodePath, ControlFlowGraph, EqcpSet, PathKey, PathLabeler};
use std::fmt;

/// Ordered binary choices, one per two-way decision taken during a walk.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct InputVector {
    decisions: Vec<bool>,
}

impl InputVector {
    pub fn new(decisions: Vec<bool>) -> Self {
        InputVector { decisions }
    }

    pub fn decisions(&self) -> &[bool] {
        &self.decisions
    }

    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    /// Bitstring form; the empty input prints as `-`.
    pub fn to_bitstring(&self) -> String {
        if self.decisions.is_empty() {
            return "-".to_string();
        }
        self.decisions
            .iter()
            .map(|&d| if d { '1' } else { '0' })
            .collect()
    }

    /// Parses a bitstring as printed by [`to_bitstring`](Self::to_bitstring).
    pub fn from_bitstring(text: &str) -> Option<Self> {
        if text == "-" {
            return Some(InputVector::default());
        }
        let mut decisions = Vec::with_capacity(text.len());
        for c in text.chars() {
            match c {
                '0' => decisions.push(false),
                '1' => decisions.push(true),
                _ => return None,
            }
        }
        if decisions.is_empty() {
            return None;
        }
        Some(InputVector { decisions })
    }
}

impl fmt::Display for InputVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bitstring())
    }
}

/// Opaque output token, comparable for exact equality.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OutputVector(String);

impl OutputVector {
    pub fn new(label: impl Into<String>) -> Self {
        OutputVector(label.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for OutputVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One fixed input/output point of the desired behavior.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointSpec {
    pub input: InputVector,
    pub expected: OutputVector,
}

/// A batch of point specifications.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SpecSet {
    points: Vec<PointSpec>,
}

impl SpecSet {
    pub fn new(points: Vec<PointSpec>) -> Self {
        SpecSet { points }
    }

    pub fn points(&self) -> &[PointSpec] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// One `point <bits> <label>` line per entry.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.points {
            out.push_str(&format!("point {} {}\n", p.input.to_bitstring(), p.expected));
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Self, SpecParseError> {
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let tag = parts.next();
            let bits = parts.next();
            let label = parts.next();
            match (tag, bits, label, parts.next()) {
                (Some("point"), Some(bits), Some(label), None) => {
                    let input = InputVector::from_bitstring(bits)
                        .ok_or(SpecParseError { line: lineno + 1 })?;
                    points.push(PointSpec {
                        input,
                        expected: OutputVector::new(label),
                    });
                }
                _ => return Err(SpecParseError { line: lineno + 1 }),
            }
        }
        Ok(SpecSet { points })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed point line {line}")]
pub struct SpecParseError {
    pub line: usize,
}

/// Two points that re-map one input to different outputs.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("inconsistent points: input {} maps to both {} and {}", first.input, first.expected, second.expected)]
pub struct ConsistencyError {
    pub first: PointSpec,
    pub second: PointSpec,
}

/// A set of points describes a function only if no input is mapped to two
/// different outputs. Exact duplicates are allowed. On conflict, reports
/// the first offending pair in scan order.
pub fn validate_consistency(specs: &SpecSet) -> Result<(), ConsistencyError> {
    let mut seen: std::collections::BTreeMap<&InputVector, &PointSpec> =
        std::collections::BTreeMap::new();
    for point in specs.points() {
        match seen.get(&point.input) {
            Some(prev) if prev.expected != point.expected => {
                return Err(ConsistencyError {
                    first: (*prev).clone(),
                    second: point.clone(),
                });
            }
            Some(_) => {}
            None => {
                seen.insert(&point.input, point);
            }
        }
    }
    Ok(())
}

/// A single runnable check: input, expected output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestCase {
    pub input: InputVector,
    pub expected: OutputVector,
}

/// Exports test cases in the point-line format for external replay.
pub fn suite_to_text(suite: &[TestCase]) -> String {
    let mut out = String::new();
    for t in suite {
        out.push_str(&format!("point {} {}\n", t.input.to_bitstring(), t.expected));
    }
    out
}

/// Where a growth step should put new code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttachHint {
    /// Attach as a standalone gadget sharing nothing with existing paths.
    Isolated,
    /// Let the active policy splice into shared nodes.
    Shared,
}

/// One increment of specification: a branch budget, an attachment hint, the
/// new points, and the seed that fixes all sampling done while applying it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecDelta {
    pub branch_budget: u32,
    pub attach_hint: AttachHint,
    pub new_points: SpecSet,
    pub seed: u64,
}

impl SpecDelta {
    pub fn new(branch_budget: u32, attach_hint: AttachHint, seed: u64) -> Self {
        assert!(branch_budget >= 1, "branch budget must be at least 1");
        SpecDelta {
            branch_budget,
            attach_hint,
            new_points: SpecSet::default(),
            seed,
        }
    }

    pub fn with_points(mut self, points: SpecSet) -> Self {
        self.new_points = points;
        self
    }
}

/// Walk failure.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    /// The decision list ran out before the walk reached the exit.
    #[error("input exhausted at node {node}")]
    InputExhausted { node: crate::cfg::NodeId },
    /// The labeler has no output for the walked path.
    #[error("no label for path {0}")]
    PathUnlabeled(PathKey),
    /// The walk reached a node with no successors other than the exit.
    #[error("walk dead-ends at node {node}")]
    DeadEnd { node: crate::cfg::NodeId },
}

/// Runs the graph on an input: walk from the entry, take one decision per
/// two-way choice (wider fans consume a chained unary selection), and
/// return the reached path's label.
pub fn execute(
    graph: &ControlFlowGraph,
    labeler: &dyn PathLabeler,
    input: &InputVector,
) -> Result<OutputVector, ExecError> {
    let mut at = graph.entry();
    let mut sequence = vec![at];
    let mut cursor = 0usize;
    let decisions = input.decisions();
    while at != graph.exit() {
        let arms = graph.successors(at);
        let next = match arms.len() {
            0 => return Err(ExecError::DeadEnd { node: at }),
            1 => arms[0],
            m => {
                let mut pick = None;
                for (j, &arm) in arms.iter().enumerate() {
                    if j == m - 1 {
                        pick = Some(arm);
                        break;
                    }
                    let Some(&bit) = decisions.get(cursor) else {
                        return Err(ExecError::InputExhausted { node: at });
                    };
                    cursor += 1;
                    if !bit {
                        pick = Some(arm);
                        break;
                    }
                }
                pick.expect("selection always resolves")
            }
        };
        sequence.push(next);
        at = next;
    }
    let path = CodePath::new(sequence);
    labeler
        .label(&path)
        .ok_or_else(|| ExecError::PathUnlabeled(path.key()))
}

/// Boolean test verdict: does the graph produce the expected output?
/// A failing walk is an error, reported separately from `false`.
pub fn run_test(
    test: &TestCase,
    graph: &ControlFlowGraph,
    labeler: &dyn PathLabeler,
) -> Result<bool, ExecError> {
    let actual = execute(graph, labeler, &test.input)?;
    Ok(actual == test.expected)
}

/// The minimal complete suite: one test per equivalence class, using the
/// class's canonical decision sequence and its output label. Ordered by
/// fingerprint.
pub fn tests_from_eqcp(eqcp: &EqcpSet) -> Vec<TestCase> {
    eqcp.iter()
        .map(|class| TestCase {
            input: InputVector::new(class.decisions().to_vec()),
            expected: class.output_label().clone(),
        })
        .collect()
}
