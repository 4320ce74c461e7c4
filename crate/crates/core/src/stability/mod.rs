//! Stability of the class set between growth steps, and chaos detection on
//! the resulting trace.
//!
//! The churn between consecutive class sets is `1 - |prev ∩ next| / |prev ∪
//! next|` over path fingerprints: 0 means nothing changed, 1 means a total
//! rewrite. A run's sequence of these values is the trajectory analyzed for
//! sensitive dependence, either directly from twin runs or from a single
//! trace with the Kantz estimator.

mod kantz;

pub use kantz::{kantz_lyapunov, KantzError, KantzParams};

use crate::cfg::EqcpSet;
use crate::engine::Trajectory;
use crate::Rational;
use num::ToPrimitive;
use serde::Serialize;
use std::fmt;

/// Churn value in [0, 1]: 0 iff the two class sets are equal, 1 iff they
/// are disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct StabilityValue(Rational);

impl StabilityValue {
    pub fn value(&self) -> Rational {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().expect("ratio of machine integers")
    }

    /// Metric-space distance |a - b|.
    pub fn distance(&self, other: &StabilityValue) -> Rational {
        if self.0 >= other.0 {
            self.0 - other.0
        } else {
            other.0 - self.0
        }
    }
}

impl fmt::Display for StabilityValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

/// The per-step churn values of one trajectory, in step order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StabilityTrace {
    values: Vec<StabilityValue>,
}

impl StabilityTrace {
    pub fn new(values: Vec<StabilityValue>) -> Self {
        StabilityTrace { values }
    }

    pub fn push(&mut self, value: StabilityValue) {
        self.values.push(value);
    }

    pub fn values(&self) -> &[StabilityValue] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.values.iter().map(StabilityValue::to_f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StabilityError {
    /// Both class sets are empty; 0/0 has no meaningful churn value.
    #[error("stability undefined for two empty class sets")]
    DegenerateInput,
}

/// Churn between consecutive class sets: `1 - |prev ∩ next| / |prev ∪
/// next|` in exact rationals. Symmetric in its arguments.
pub fn stability_metric(
    prev: &EqcpSet,
    next: &EqcpSet,
) -> Result<StabilityValue, StabilityError> {
    if prev.is_empty() && next.is_empty() {
        return Err(StabilityError::DegenerateInput);
    }
    // Two-pointer intersection over fingerprint-sorted keys.
    let mut a = prev.keys();
    let mut b = next.keys();
    let mut ka = a.next();
    let mut kb = b.next();
    let mut inter = 0u64;
    while let (Some(x), Some(y)) = (ka, kb) {
        match x.cmp(y) {
            std::cmp::Ordering::Less => ka = a.next(),
            std::cmp::Ordering::Greater => kb = b.next(),
            std::cmp::Ordering::Equal => {
                inter += 1;
                ka = a.next();
                kb = b.next();
            }
        }
    }
    let union = prev.len() as u64 + next.len() as u64 - inter;
    Ok(StabilityValue(Rational::new(union - inter, union)))
}

/// Growth regime assumed by the closed-form churn estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Uncoupled,
    Coupled,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Uncoupled => "uncoupled",
            Regime::Coupled => "coupled",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Closed-form churn estimate for a step that adds `k` branches to a system
/// with `b` effective branches: uncoupled growth adds classes, giving
/// `1 - 1/(1 + 2^(k-b))`; coupled growth multiplies them, giving
/// `1 - 2^-k` independent of `b`.
pub fn predicted_sigma(regime: Regime, b: u32, k: u32) -> f64 {
    match regime {
        Regime::Uncoupled => {
            let ratio = (f64::from(k) - f64::from(b)).exp2();
            1.0 - 1.0 / (1.0 + ratio)
        }
        Regime::Coupled => 1.0 - (-f64::from(k)).exp2(),
    }
}

/// One-step separation change between twin trajectories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwinDivergence {
    /// Ratio of the next separation to the current one.
    pub delta: f64,
    /// `ln(delta)`; negative infinity when the separations collapse.
    pub lambda: f64,
    pub kind: DivergenceKind,
}

/// Exhaustive one-step classification of defined separation ratios.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceKind {
    /// Separation grew (delta > 1).
    Stretch,
    /// Separation shrank (delta < 1).
    Fold,
    /// Separation unchanged (delta = 1).
    Neutral,
}

impl fmt::Display for DivergenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DivergenceKind::Stretch => "stretch",
            DivergenceKind::Fold => "fold",
            DivergenceKind::Neutral => "neutral",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TwinError {
    /// The two trajectories coincide at this step; the ratio is undefined
    /// and must not be fabricated.
    #[error("zero separation at step {step}")]
    ZeroSeparation { step: usize },
    #[error("step {step} out of range for traces of length {len}")]
    OutOfRange { step: usize, len: usize },
}

/// Separation ratio between twin runs at `step` (0-based index into the
/// stability traces): `|a[step+1] - b[step+1]| / |a[step] - b[step]|`.
pub fn twin_divergence(
    a: &Trajectory,
    b: &Trajectory,
    step: usize,
) -> Result<TwinDivergence, TwinError> {
    twin_divergence_series(
        &a.sigma_trace.to_f64_vec(),
        &b.sigma_trace.to_f64_vec(),
        step,
    )
}

/// [`twin_divergence`] over raw stability series, e.g. columns read back
/// from trace files.
pub fn twin_divergence_series(
    a: &[f64],
    b: &[f64],
    step: usize,
) -> Result<TwinDivergence, TwinError> {
    let len = a.len().min(b.len());
    if step + 1 >= len {
        return Err(TwinError::OutOfRange { step, len });
    }
    let sep_now = (a[step] - b[step]).abs();
    let sep_next = (a[step + 1] - b[step + 1]).abs();
    if sep_now == 0.0 {
        return Err(TwinError::ZeroSeparation { step });
    }
    let delta = sep_next / sep_now;
    let lambda = delta.ln();
    let kind = if delta > 1.0 {
        DivergenceKind::Stretch
    } else if delta < 1.0 {
        DivergenceKind::Fold
    } else {
        DivergenceKind::Neutral
    };
    Ok(TwinDivergence { delta, lambda, kind })
}

/// How a Lyapunov value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LyapunovMethod {
    DirectTwin,
    Kantz,
}

impl fmt::Display for LyapunovMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LyapunovMethod::DirectTwin => "direct_twin",
            LyapunovMethod::Kantz => "kantz",
        })
    }
}

/// A maximal-Lyapunov estimate with its fit diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovEstimate {
    pub lambda: f64,
    pub method: LyapunovMethod,
    /// (step, mean log divergence) curve the fit was taken from.
    pub fit_points: Vec<(usize, f64)>,
    /// Goodness of the linear fit over the configured window, in [0, 1].
    pub fit_r2: f64,
}

/// Direct estimate from twin stability series: per-step `ln` separation
/// ratios, summarized by their median, with the log-separation curve and
/// its linear-fit quality as diagnostics.
pub fn twin_estimate(a: &[f64], b: &[f64]) -> Option<LyapunovEstimate> {
    let len = a.len().min(b.len());
    if len < 2 {
        return None;
    }
    let mut lambdas = Vec::new();
    let mut fit_points = Vec::new();
    for step in 0..len {
        let sep = (a[step] - b[step]).abs();
        if sep > 0.0 {
            fit_points.push((step, sep.ln()));
        }
        if step + 1 < len {
            if let Ok(d) = twin_divergence_series(a, b, step) {
                if d.lambda.is_finite() {
                    lambdas.push(d.lambda);
                }
            }
        }
    }
    if lambdas.is_empty() {
        return None;
    }
    lambdas.sort_by(|x, y| x.partial_cmp(y).expect("finite lambdas"));
    let mid = lambdas.len() / 2;
    let median = if lambdas.len() % 2 == 1 {
        lambdas[mid]
    } else {
        0.5 * (lambdas[mid - 1] + lambdas[mid])
    };
    let (_, r2) = fit_line(&fit_points);
    Some(LyapunovEstimate {
        lambda: median,
        method: LyapunovMethod::DirectTwin,
        fit_points,
        fit_r2: r2,
    })
}

/// Least-squares slope and R^2 of `(x, y)` points.
pub(crate) fn fit_line(points: &[(usize, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    if points.len() < 2 {
        return (0.0, 0.0);
    }
    let sx: f64 = points.iter().map(|&(x, _)| x as f64).sum();
    let sy: f64 = points.iter().map(|&(_, y)| y).sum();
    let sxx: f64 = points.iter().map(|&(x, _)| (x as f64) * (x as f64)).sum();
    let sxy: f64 = points.iter().map(|&(x, y)| (x as f64) * y).sum();
    let denom = n * sxx - sx * sx;
    if denom == 0.0 {
        return (0.0, 0.0);
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let mean_y = sy / n;
    let ss_tot: f64 = points.iter().map(|&(_, y)| (y - mean_y).powi(2)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|&(x, y)| (y - (slope * (x as f64) + intercept)).powi(2))
        .sum();
    let r2 = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (slope, r2)
}

/// Verdict over a stability trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Stable,
    Drifting,
    ChaoticIndicative,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Stable => "stable",
            Classification::Drifting => "drifting",
            Classification::ChaoticIndicative => "chaotic_indicative",
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Thresholds for [`classify_trace`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyConfig {
    /// A trace is stable only if its running mean stays below this.
    pub stable_mean: f64,
    /// Minimum fit quality for a positive exponent to indicate chaos.
    pub chaotic_fit_r2: f64,
    /// Minimum trace length before the Kantz estimator is attempted.
    pub kantz_min_len: usize,
    /// Minimum trace length for any classification at all.
    pub min_len: usize,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            stable_mean: 0.1,
            chaotic_fit_r2: 0.8,
            kantz_min_len: 200,
            min_len: 50,
        }
    }
}

/// Classification outcome with its supporting evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceAssessment {
    pub classification: Classification,
    pub mean: f64,
    pub kantz: Option<LyapunovEstimate>,
    pub notes: Vec<String>,
}

/// Classifies a stability trace: `stable` when the running mean stays low
/// and the estimated exponent is non-positive, `chaotic_indicative` when a
/// positive exponent comes with a good fit, `drifting` otherwise (including
/// every case where evidence is missing).
pub fn classify_trace(trace: &[f64], params: &KantzParams, config: &ClassifyConfig) -> TraceAssessment {
    let mut notes = Vec::new();
    if trace.len() < config.min_len {
        notes.push(format!(
            "insufficient length: {} < {}",
            trace.len(),
            config.min_len
        ));
        return TraceAssessment {
            classification: Classification::Drifting,
            mean: mean(trace),
            kantz: None,
            notes,
        };
    }
    let mean = mean(trace);
    let variance = trace.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / trace.len() as f64;

    let mut estimate = None;
    let mut lambda = None;
    if variance == 0.0 {
        // No divergence is possible at all; treat the exponent as zero.
        notes.push("zero variance: exponent taken as 0".to_string());
        lambda = Some(0.0);
    } else if trace.len() < config.kantz_min_len {
        notes.push(format!(
            "kantz skipped: short trace ({} < {})",
            trace.len(),
            config.kantz_min_len
        ));
    } else {
        match kantz_lyapunov(trace, params) {
            Ok(est) => {
                lambda = Some(est.lambda);
                estimate = Some(est);
            }
            Err(err) => {
                notes.push(format!("kantz failed: {err}"));
            }
        }
    }

    let classification = match lambda {
        Some(l) if mean < config.stable_mean && l <= 0.0 => Classification::Stable,
        Some(l)
            if l > 0.0
                && estimate
                    .as_ref()
                    .map(|e| e.fit_r2 >= config.chaotic_fit_r2)
                    // A zero-variance "estimate" has no fit to judge.
                    .unwrap_or(false) =>
        {
            Classification::ChaoticIndicative
        }
        Some(_) => Classification::Drifting,
        // No estimator evidence: fall back to the mean alone.
        None if mean < config.stable_mean => Classification::Stable,
        None => Classification::Drifting,
    };

    TraceAssessment {
        classification,
        mean,
        kantz: estimate,
        notes,
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// The JSON analysis document emitted for a trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub method: String,
    pub lambda: Option<f64>,
    pub fit_r2: Option<f64>,
    pub classification: Classification,
    pub params: KantzParams,
    pub trace_length: usize,
    pub mean_sigma: f64,
    pub notes: Vec<String>,
}

impl AnalysisReport {
    pub fn from_assessment(
        assessment: &TraceAssessment,
        params: &KantzParams,
        trace_length: usize,
    ) -> Self {
        AnalysisReport {
            method: assessment
                .kantz
                .as_ref()
                .map(|e| e.method.to_string())
                .unwrap_or_else(|| "none".to_string()),
            lambda: assessment.kantz.as_ref().map(|e| e.lambda),
            fit_r2: assessment.kantz.as_ref().map(|e| e.fit_r2),
            classification: assessment.classification,
            params: params.clone(),
            trace_length,
            mean_sigma: assessment.mean,
            notes: assessment.notes.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
