//! Model of iterative test-driven code growth as a dynamical system.
//!
//! "Software" is a control-flow graph with a single entry and exit; every
//! entry-to-exit path is an equivalence class of inputs. A development step
//! grows the graph under a branch budget, either by attaching isolated
//! gadgets or by splicing diamonds into shared nodes, and the churn between
//! consecutive class sets is tracked as a stability value in [0, 1]. The
//! stability trace is then analyzed for chaotic behavior with twin-trajectory
//! divergence and a Kantz-style maximal Lyapunov estimator.
//!
//! Modules:
//! - [`cfg`]: graphs, path enumeration, equivalence classes, coupling.
//! - [`spec`]: point specifications, executable test semantics, suites.
//! - [`engine`]: the growth-step iteration and trajectory runner.
//! - [`stability`]: the churn metric, regime estimates, Lyapunov analysis.

pub mod cfg;
pub mod engine;
pub mod spec;
pub mod stability;

/// Exact rational used for all set-ratio metrics.
pub type Rational = num::rational::Ratio<u64>;
/// Arbitrary-precision rational for pairwise-coupling totals.
pub type BigRational = num::BigRational;

pub use cfg::{
    code_size_proxy, coupling, derive_eqcp, enumerate_paths, total_coupling, validate_cfg,
    CodePath, ControlFlowGraph, EquivalenceClass, EqcpSet, MapLabeler, NodeId, NodeKind, PathKey,
    PathLabeler, SequenceLabeler,
};
pub use engine::{
    apply_delta, generate_alternatives, guided_step, run_trajectory, run_trajectory_perturbed,
    Caps, DevelopmentPolicy, EngineError, TddState, Trajectory, TruncatedRun,
};
pub use spec::{
    execute, run_test, tests_from_eqcp, validate_consistency, AttachHint, ConsistencyError,
    ExecError, InputVector, OutputVector, PointSpec, SpecDelta, SpecSet, TestCase,
};
pub use stability::{
    classify_trace, kantz_lyapunov, predicted_sigma, stability_metric, twin_divergence,
    twin_estimate, AnalysisReport, Classification, ClassifyConfig, DivergenceKind, KantzError,
    KantzParams, LyapunovEstimate, LyapunovMethod, Regime, StabilityError, StabilityTrace,
    StabilityValue, TwinDivergence, TwinError,
};
