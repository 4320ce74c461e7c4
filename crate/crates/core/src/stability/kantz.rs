//! Maximal-Lyapunov estimation from a scalar series: delay-embed, collect
//! the epsilon-neighborhood of each reference point, average the log of the
//! forward divergence over a horizon, and fit a line to the scaling region.
//! A positive slope with a good fit indicates exponential separation.

use super::{fit_line, LyapunovEstimate, LyapunovMethod};
use serde::Serialize;

/// Estimator parameters. `defaults_for` derives the neighborhood radius
/// from the series itself (10% of its standard deviation); the remaining
/// defaults are m=3, delay=1, horizon=8, at least 5 neighbors, fit window
/// steps 1..=5.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KantzParams {
    /// Embedding dimension m.
    pub embedding_dim: usize,
    /// Delay between embedding coordinates.
    pub delay: usize,
    /// Neighborhood radius in series units.
    pub epsilon: f64,
    /// Number of forward steps the divergence is followed.
    pub horizon: usize,
    /// Minimum neighborhood size for a reference point to count.
    pub min_neighbors: usize,
    /// Inclusive window of horizon steps the slope is fitted over.
    pub fit_window: (usize, usize),
}

impl KantzParams {
    /// Defaults with epsilon scaled to the given series.
    pub fn defaults_for(trace: &[f64]) -> Self {
        KantzParams {
            embedding_dim: 3,
            delay: 1,
            epsilon: 0.1 * std_dev(trace),
            horizon: 8,
            min_neighbors: 5,
            fit_window: (1, 5),
        }
    }

    fn validate(&self, trace_len: usize) -> Result<(), KantzError> {
        if self.embedding_dim == 0
            || self.delay == 0
            || self.horizon == 0
            || self.min_neighbors == 0
        {
            return Err(KantzError::InvalidParams(
                "all parameters must be positive".to_string(),
            ));
        }
        if !(self.epsilon > 0.0) {
            return Err(KantzError::InvalidParams(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.horizon >= trace_len / 2 {
            return Err(KantzError::InvalidParams(format!(
                "horizon {} too long for trace of {trace_len}",
                self.horizon
            )));
        }
        if self.fit_window.0 > self.fit_window.1 || self.fit_window.1 > self.horizon {
            return Err(KantzError::InvalidParams(format!(
                "fit window {:?} outside horizon {}",
                self.fit_window, self.horizon
            )));
        }
        Ok(())
    }
}

fn std_dev(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KantzError {
    /// Fewer than 10% of reference points had a usable neighborhood:
    /// epsilon too small or the trace too short.
    #[error("insufficient neighbors: {valid} of {total} reference points usable")]
    InsufficientNeighbors { valid: usize, total: usize },
    #[error("trace too short: {len} < {min}")]
    TraceTooShort { len: usize, min: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Minimum series length the estimator accepts.
pub const MIN_TRACE_LEN: usize = 200;

// Divergences of exactly coincident trajectories would give ln(0); clamp
// instead so periodic series fit a flat line rather than poisoning the sum.
const LOG_FLOOR: f64 = 1e-12;

/// Runs the estimator. The returned `fit_points` hold the full
/// (horizon step, mean log divergence) curve; `lambda` is the least-squares
/// slope over the configured fit window.
pub fn kantz_lyapunov(trace: &[f64], params: &KantzParams) -> Result<LyapunovEstimate, KantzError> {
    if trace.len() < MIN_TRACE_LEN {
        return Err(KantzError::TraceTooShort {
            len: trace.len(),
            min: MIN_TRACE_LEN,
        });
    }
    params.validate(trace.len())?;

    let m = params.embedding_dim;
    let delay = params.delay;
    let span = (m - 1) * delay;
    let horizon = params.horizon;
    // Reference vectors start at i and end at i + span; the divergence is
    // followed `horizon` steps past the vector end.
    let refs = trace.len().saturating_sub(span + horizon);
    if refs < 2 {
        return Err(KantzError::TraceTooShort {
            len: trace.len(),
            min: span + horizon + 2,
        });
    }
    // Exclude temporally adjacent candidates from the neighborhood.
    let theiler = span.max(1);

    let mut sums = vec![0.0f64; horizon + 1];
    let mut valid_refs = 0usize;
    let mut neighbors: Vec<usize> = Vec::new();
    for i in 0..refs {
        neighbors.clear();
        'candidates: for j in 0..refs {
            if i.abs_diff(j) <= theiler {
                continue;
            }
            // Max-norm distance between embedding vectors.
            for c in 0..m {
                if (trace[i + c * delay] - trace[j + c * delay]).abs() >= params.epsilon {
                    continue 'candidates;
                }
            }
            neighbors.push(j);
        }
        if neighbors.len() < params.min_neighbors {
            continue;
        }
        valid_refs += 1;
        for h in 0..=horizon {
            let mut total = 0.0;
            for &j in &neighbors {
                total += (trace[i + span + h] - trace[j + span + h]).abs();
            }
            let mean = (total / neighbors.len() as f64).max(LOG_FLOOR);
            sums[h] += mean.ln();
        }
    }

    if valid_refs * 10 < refs {
        return Err(KantzError::InsufficientNeighbors {
            valid: valid_refs,
            total: refs,
        });
    }

    let fit_points: Vec<(usize, f64)> = sums
        .iter()
        .enumerate()
        .map(|(h, s)| (h, s / valid_refs as f64))
        .collect();
    let window: Vec<(usize, f64)> = fit_points
        .iter()
        .copied()
        .filter(|&(h, _)| h >= params.fit_window.0 && h <= params.fit_window.1)
        .collect();
    let (slope, r2) = fit_line(&window);

    Ok(LyapunovEstimate {
        lambda: slope,
        method: LyapunovMethod::Kantz,
        fit_points,
        fit_r2: r2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub fn logistic_series(n: usize, x0: f64) -> Vec<f64> {
        let mut x = x0;
        let mut out = Vec::with_capacity(n);
        for i in 0..(n + 100) {
            x = 4.0 * x * (1.0 - x);
            if i >= 100 {
                out.push(x);
            }
        }
        out
    }

    #[test]
    fn logistic_map_lambda_near_ln2() {
        // The r=4 logistic map is conjugate to the tent map; its exponent
        // is ln 2. The band allows for estimator variance.
        let series = logistic_series(2000, 0.4);
        let params = KantzParams::defaults_for(&series);
        let est = kantz_lyapunov(&series, &params).unwrap();
        assert!(
            est.lambda > 0.55 && est.lambda < 0.85,
            "lambda {} outside band",
            est.lambda
        );
        assert!(est.fit_r2 >= 0.8, "poor fit: {}", est.fit_r2);
    }

    #[test]
    fn constant_series_has_no_neighbors() {
        let series = vec![0.5; 2000];
        let params = KantzParams::defaults_for(&series);
        // Epsilon collapses to zero on a constant series.
        let result = kantz_lyapunov(&series, &params);
        match result {
            Err(KantzError::InsufficientNeighbors { .. }) | Err(KantzError::InvalidParams(_)) => {}
            other => panic!("expected degenerate outcome, got {other:?}"),
        }
    }

    #[test]
    fn period_two_series_is_non_expanding() {
        let series: Vec<f64> = (0..2000)
            .map(|i| if i % 2 == 0 { 0.2 } else { 0.8 })
            .collect();
        let params = KantzParams::defaults_for(&series);
        let est = kantz_lyapunov(&series, &params).unwrap();
        assert!(est.lambda <= 0.05, "lambda {} too high", est.lambda);
    }

    #[test]
    fn shift_invariance() {
        let series = logistic_series(2000, 0.4);
        let shifted: Vec<f64> = series.iter().map(|x| x + 7.0).collect();
        let params = KantzParams::defaults_for(&series);
        let shifted_params = KantzParams::defaults_for(&shifted);
        let a = kantz_lyapunov(&series, &params).unwrap();
        let b = kantz_lyapunov(&shifted, &shifted_params).unwrap();
        assert!((a.lambda - b.lambda).abs() < 1e-9);
    }

    #[test]
    fn scale_invariance_with_scaled_epsilon() {
        let series = logistic_series(2000, 0.4);
        let scaled: Vec<f64> = series.iter().map(|x| x * 3.5).collect();
        // defaults_for scales epsilon with the series.
        let a = kantz_lyapunov(&series, &KantzParams::defaults_for(&series)).unwrap();
        let b = kantz_lyapunov(&scaled, &KantzParams::defaults_for(&scaled)).unwrap();
        assert!((a.lambda - b.lambda).abs() < 0.05);
    }

    #[test]
    fn short_trace_rejected() {
        let series = vec![0.1; 50];
        let params = KantzParams {
            embedding_dim: 3,
            delay: 1,
            epsilon: 0.1,
            horizon: 8,
            min_neighbors: 5,
            fit_window: (1, 5),
        };
        assert!(matches!(
            kantz_lyapunov(&series, &params),
            Err(KantzError::TraceTooShort { .. })
        ));
    }

    #[test]
    fn estimator_is_deterministic() {
        let series = logistic_series(2000, 0.123);
        let params = KantzParams::defaults_for(&series);
        let a = kantz_lyapunov(&series, &params).unwrap();
        let b = kantz_lyapunov(&series, &params).unwrap();
        assert_eq!(a, b);
    }
}
