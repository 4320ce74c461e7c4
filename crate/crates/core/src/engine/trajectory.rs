//! End-to-end runs of the iteration and their trace output.

use super::{apply_delta_inner, Caps, DevelopmentPolicy, EngineError, TddState};
use crate::cfg::{code_size_proxy, total_coupling};
use crate::spec::SpecDelta;
use crate::stability::{stability_metric, StabilityTrace};
use crate::BigRational;
use num::ToPrimitive;
use std::fmt::Write as _;

/// A completed (or truncated) run: all states plus the per-step traces.
/// The stability trace has one entry fewer than the state list.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub states: Vec<TddState>,
    pub sigma_trace: StabilityTrace,
    /// Total pairwise coupling per state; `None` where the class count
    /// exceeded the coupling cap.
    pub coupling_trace: Vec<Option<BigRational>>,
    pub size_trace: Vec<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        self.states.iter().map(|s| s.eqcp().len()).collect()
    }

    pub fn branch_counts(&self) -> Vec<usize> {
        self.states.iter().map(|s| s.graph().branch_count()).collect()
    }

    fn push_state(&mut self, state: TddState, caps: &Caps) {
        if let Some(prev) = self.states.last() {
            let sigma = stability_metric(prev.eqcp(), state.eqcp())
                .expect("states past bootstrap have non-empty class sets");
            self.sigma_trace.push(sigma);
        }
        let coupling = if state.eqcp().len() <= caps.coupling_classes {
            Some(total_coupling(state.eqcp()))
        } else {
            None
        };
        self.coupling_trace.push(coupling);
        self.size_trace.push(code_size_proxy(state.graph()));
        self.states.push(state);
    }
}

/// A run aborted by the triggering error, carrying everything completed
/// before it.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("run truncated after {} state(s): {error}", partial.len())]
pub struct TruncatedRun {
    pub partial: Trajectory,
    pub error: EngineError,
}

/// Runs the whole delta schedule from the empty system. Fully deterministic
/// in the deltas' seeds.
pub fn run_trajectory(
    deltas: &[SpecDelta],
    policy: &DevelopmentPolicy,
    caps: &Caps,
) -> Result<Trajectory, Box<TruncatedRun>> {
    run(deltas, policy, caps, false)
}

/// Same schedule, but the bootstrap carries one extra minimal gadget — a
/// nearby starting point for twin-divergence experiments.
pub fn run_trajectory_perturbed(
    deltas: &[SpecDelta],
    policy: &DevelopmentPolicy,
    caps: &Caps,
) -> Result<Trajectory, Box<TruncatedRun>> {
    run(deltas, policy, caps, true)
}

fn run(
    deltas: &[SpecDelta],
    policy: &DevelopmentPolicy,
    caps: &Caps,
    perturb_bootstrap: bool,
) -> Result<Trajectory, Box<TruncatedRun>> {
    let mut trajectory = Trajectory::default();
    let mut state = TddState::initial();
    for delta in deltas {
        match apply_delta_inner(&state, delta, policy, caps, perturb_bootstrap) {
            Ok(next) => {
                state = next.clone();
                trajectory.push_state(next, caps);
            }
            Err(error) => {
                return Err(Box::new(TruncatedRun {
                    partial: trajectory,
                    error,
                }));
            }
        }
    }
    Ok(trajectory)
}

/// CSV header shared by every trace file.
pub const CSV_HEADER: &str = "n,class_count,sigma,total_coupling,size_proxy,branch_count";

/// Renders the trace CSV: one row per state, `nan` where a value is
/// undefined (the bootstrap row's sigma, and coupling past its cap). A
/// truncated run gains a trailing `# truncated=true` marker line.
pub fn trajectory_csv(trajectory: &Trajectory, truncated: bool) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (i, state) in trajectory.states.iter().enumerate() {
        let sigma = if i == 0 {
            "nan".to_string()
        } else {
            format!("{}", trajectory.sigma_trace.values()[i - 1].to_f64())
        };
        let coupling = match &trajectory.coupling_trace[i] {
            Some(value) => format!("{}", value.to_f64().unwrap_or(f64::NAN)),
            None => "nan".to_string(),
        };
        writeln!(
            out,
            "{},{},{},{},{},{}",
            i + 1,
            state.eqcp().len(),
            sigma,
            coupling,
            trajectory.size_trace[i],
            state.graph().branch_count()
        )
        .expect("write to string");
    }
    if truncated {
        out.push_str("# truncated=true\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::AttachHint;
    use crate::Rational;

    fn schedule(ks: &[u32], base_seed: u64) -> Vec<SpecDelta> {
        ks.iter()
            .enumerate()
            .map(|(i, &k)| SpecDelta::new(k, AttachHint::Shared, base_seed.wrapping_add(i as u64)))
            .collect()
    }

    #[test]
    fn trace_lengths_follow_state_count() {
        let caps = Caps::default();
        let one = run_trajectory(&schedule(&[2], 1), &DevelopmentPolicy::Decoupled, &caps).unwrap();
        assert_eq!(one.states.len(), 1);
        assert!(one.sigma_trace.is_empty());

        let two = run_trajectory(&schedule(&[2, 1], 1), &DevelopmentPolicy::Decoupled, &caps)
            .unwrap();
        assert_eq!(two.states.len(), 2);
        assert_eq!(two.sigma_trace.len(), 1);
        assert_eq!(two.coupling_trace.len(), 2);
        assert_eq!(two.size_trace.len(), 2);
    }

    #[test]
    fn decoupled_sigma_decreases_once_the_base_grows() {
        let caps = Caps::default();
        let mut ks = vec![6];
        ks.extend(std::iter::repeat(1).take(29));
        let traj = run_trajectory(&schedule(&ks, 3), &DevelopmentPolicy::Decoupled, &caps).unwrap();
        assert_eq!(traj.states.len(), 30);
        let sigmas = traj.sigma_trace.to_f64_vec();
        // With a fixed budget and a growing base the churn strictly falls
        // after the early steps.
        for w in sigmas.windows(2).skip(2) {
            assert!(w[1] < w[0], "sigma not decreasing: {w:?}");
        }
    }

    #[test]
    fn identical_seeds_give_identical_csv() {
        let caps = Caps::default();
        let policy = DevelopmentPolicy::DryCoupled {
            share_intensity: Rational::new(1, 2),
        };
        let a = run_trajectory(&schedule(&[2, 1, 2, 1], 9), &policy, &caps).unwrap();
        let b = run_trajectory(&schedule(&[2, 1, 2, 1], 9), &policy, &caps).unwrap();
        assert_eq!(trajectory_csv(&a, false), trajectory_csv(&b, false));
    }

    #[test]
    fn truncated_run_keeps_partial_trajectory() {
        let caps = Caps {
            max_classes: 40,
            max_paths: 40,
            coupling_classes: 40,
        };
        let policy = DevelopmentPolicy::DryCoupled {
            share_intensity: Rational::new(1, 1),
        };
        // Full sharing with budget 2 quadruples classes each step:
        // 4, 16, 64 -> the third step explodes.
        let err = run_trajectory(&schedule(&[2, 2, 2, 2], 5), &policy, &caps).unwrap_err();
        assert_eq!(err.partial.states.len(), 2);
        assert!(matches!(err.error, EngineError::Explosion(_)));
        let csv = trajectory_csv(&err.partial, true);
        assert!(csv.ends_with("# truncated=true\n"));
        assert_eq!(csv.lines().count(), 1 + 2 + 1);
    }

    #[test]
    fn csv_layout_is_stable() {
        let caps = Caps::default();
        let traj = run_trajectory(&schedule(&[1, 1], 2), &DevelopmentPolicy::Decoupled, &caps)
            .unwrap();
        let csv = trajectory_csv(&traj, false);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first[0], "1");
        assert_eq!(first[1], "2");
        assert_eq!(first[2], "nan");
        let second: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(second[0], "2");
        assert_eq!(second[1], "4");
        // sigma_2 = 1 - 2/4 = 0.5.
        assert_eq!(second[2], "0.5");
    }

    #[test]
    fn perturbed_bootstrap_starts_nearby() {
        let caps = Caps::default();
        let deltas = schedule(&[3, 2, 2], 4);
        let policy = DevelopmentPolicy::DryCoupled {
            share_intensity: Rational::new(1, 2),
        };
        let plain = run_trajectory(&deltas, &policy, &caps).unwrap();
        let perturbed = run_trajectory_perturbed(&deltas, &policy, &caps).unwrap();
        assert_eq!(plain.states[0].eqcp().len() + 2, perturbed.states[0].eqcp().len());
    }
}
