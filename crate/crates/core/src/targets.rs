//! Pure regression-target constructors: Monte Carlo returns, one-step
//! bootstrapped targets, and forward-view lambda-returns.
//!
//! All three are computed by one backward recursion over each trajectory,
//!   g_t = r_t + gamma * ((1 - lambda) * V(s_{t+1}) + lambda * g_{t+1}),
//! so the lambda = 0 and lambda = 1 boundaries reproduce the one-step target
//! and the Monte Carlo return bit for bit. Terminal states bootstrap a value
//! of zero. Trajectories cut by the step cap bootstrap the current estimate
//! at the cut state instead of silently dropping the remaining reward mass,
//! and every target from such a trajectory carries a `truncated` flag.

use crate::approx::ValueApproximator;
use crate::error::{Error, Result};
use crate::mdp::{Dataset, State, Trajectory, Transition};

/// A state occurrence paired with its regression target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetEntry {
    pub state: State,
    pub target: f64,
    pub trajectory_id: usize,
    pub step_index: usize,
    pub truncated: bool,
}

/// One entry per visited state occurrence across a dataset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TargetSet {
    pub entries: Vec<TargetEntry>,
}

impl TargetSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn states(&self) -> Vec<State> {
        self.entries.iter().map(|e| e.state).collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.target).collect()
    }
}

/// Tail value used when a trajectory was cut by the step cap.
#[derive(Clone, Copy)]
pub enum TruncationTail<'a> {
    /// Treat the missing tail as zero reward.
    Zero,
    /// Bootstrap the current value estimate at the cut state.
    Bootstrap(&'a dyn ValueApproximator),
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be in (0,1], got {gamma}"
        )));
    }
    Ok(())
}

/// Monte Carlo return targets: the observed tail discounted reward sum from
/// each state occurrence.
pub fn mc_targets(dataset: &Dataset, gamma: f64) -> Result<TargetSet> {
    mc_targets_with_tail(dataset, gamma, TruncationTail::Zero)
}

/// Monte Carlo targets with an explicit policy for truncated episodes.
pub fn mc_targets_with_tail(
    dataset: &Dataset,
    gamma: f64,
    tail: TruncationTail<'_>,
) -> Result<TargetSet> {
    check_gamma(gamma)?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut entries = Vec::with_capacity(dataset.num_transitions());
    for (traj_id, traj) in dataset.trajectories.iter().enumerate() {
        let truncated = traj.is_truncated();
        let mut g = match (&tail, truncated, traj.final_state()) {
            (TruncationTail::Bootstrap(v), true, Some(cut_state)) => v.predict(&cut_state),
            _ => 0.0,
        };
        let start = entries.len();
        for (t, tr) in traj.transitions.iter().enumerate().rev() {
            g = tr.reward + gamma * g;
            entries.push(TargetEntry {
                state: tr.state,
                target: g,
                trajectory_id: traj_id,
                step_index: t,
                truncated,
            });
        }
        entries[start..].reverse();
    }
    Ok(TargetSet { entries })
}

/// One-step bootstrapped target `r + gamma * V(s')`, with terminal
/// transitions bootstrapping zero.
pub fn td0_target(transition: &Transition, value: &dyn ValueApproximator, gamma: f64) -> f64 {
    if transition.terminal {
        transition.reward
    } else {
        transition.reward + gamma * value.predict(&transition.next_state)
    }
}

/// Forward-view lambda-returns for every step of one trajectory.
///
/// Computed by the backward recursion in the module docs; equivalent to the
/// geometrically weighted average of all n-step bootstrapped returns with the
/// full observed return carrying the residual weight.
pub fn lambda_targets(
    trajectory: &Trajectory,
    value: &dyn ValueApproximator,
    gamma: f64,
    lambda: f64,
) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be in [0,1], got {lambda}"
        )));
    }
    let n = trajectory.len();
    let mut out = vec![0.0; n];
    let mut g_next = 0.0;
    for (t, tr) in trajectory.transitions.iter().enumerate().rev() {
        let g = if tr.terminal {
            tr.reward
        } else if t + 1 == n {
            // Cut by the step cap: bootstrap the estimate at the cut state.
            tr.reward + gamma * value.predict(&tr.next_state)
        } else {
            let bootstrap = value.predict(&tr.next_state);
            tr.reward + gamma * ((1.0 - lambda) * bootstrap + lambda * g_next)
        };
        out[t] = g;
        g_next = g;
    }
    Ok(out)
}

/// Lambda-return targets over a whole dataset, one entry per state occurrence.
pub fn lambda_target_set(
    dataset: &Dataset,
    value: &dyn ValueApproximator,
    gamma: f64,
    lambda: f64,
) -> Result<TargetSet> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut entries = Vec::with_capacity(dataset.num_transitions());
    for (traj_id, traj) in dataset.trajectories.iter().enumerate() {
        let truncated = traj.is_truncated();
        let returns = lambda_targets(traj, value, gamma, lambda)?;
        for (t, (tr, g)) in traj.transitions.iter().zip(returns).enumerate() {
            entries.push(TargetEntry {
                state: tr.state,
                target: g,
                trajectory_id: traj_id,
                step_index: t,
                truncated,
            });
        }
    }
    Ok(TargetSet { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::TabularApprox;
    use crate::mdp::Transition;

    fn traj(rewards: &[f64], terminal: bool) -> Trajectory {
        let n = rewards.len();
        Trajectory::new(
            rewards
                .iter()
                .enumerate()
                .map(|(t, &r)| Transition {
                    state: State::Discrete(t),
                    action: 0,
                    reward: r,
                    next_state: State::Discrete(t + 1),
                    terminal: terminal && t + 1 == n,
                })
                .collect(),
        )
    }

    fn dataset(trajs: Vec<Trajectory>) -> Dataset {
        Dataset {
            trajectories: trajs,
            env_id: "test".into(),
            policy_id: "p".into(),
            seed: 0,
        }
    }

    fn fitted(pairs: &[(usize, f64)]) -> TabularApprox {
        let mut v = TabularApprox::new();
        let states: Vec<State> = pairs.iter().map(|&(s, _)| State::Discrete(s)).collect();
        let targets: Vec<f64> = pairs.iter().map(|&(_, t)| t).collect();
        v.fit(&states, &targets, 0).unwrap();
        v
    }

    #[test]
    fn mc_targets_undiscounted_terminal_reward() {
        let ts = mc_targets(&dataset(vec![traj(&[0.0, 0.0, 30.0], true)]), 1.0).unwrap();
        assert_eq!(ts.targets(), vec![30.0, 30.0, 30.0]);
    }

    #[test]
    fn mc_targets_geometric_sum() {
        let ts = mc_targets(&dataset(vec![traj(&[1.0, 1.0, 1.0], true)]), 0.5).unwrap();
        assert_eq!(ts.targets(), vec![1.75, 1.5, 1.0]);
    }

    #[test]
    fn mc_targets_reject_empty_dataset() {
        assert!(matches!(
            mc_targets(&dataset(vec![]), 1.0),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn mc_truncated_trajectories_are_flagged_and_can_bootstrap() {
        let data = dataset(vec![traj(&[1.0, 1.0], false)]);
        let plain = mc_targets(&data, 1.0).unwrap();
        assert!(plain.entries.iter().all(|e| e.truncated));
        assert_eq!(plain.targets(), vec![2.0, 1.0]);

        // Cut state is Discrete(2); bootstrapping adds its estimate.
        let v = fitted(&[(2, 10.0)]);
        let boot = mc_targets_with_tail(&data, 1.0, TruncationTail::Bootstrap(&v)).unwrap();
        assert_eq!(boot.targets(), vec![12.0, 11.0]);
    }

    #[test]
    fn td0_examples() {
        let v = fitted(&[(1, 10.0)]);
        let tr = Transition {
            state: State::Discrete(0),
            action: 0,
            reward: 1.0,
            next_state: State::Discrete(1),
            terminal: false,
        };
        assert_eq!(td0_target(&tr, &v, 0.9), 10.0);
        let terminal = Transition {
            terminal: true,
            reward: 30.0,
            ..tr
        };
        assert_eq!(td0_target(&terminal, &v, 0.9), 30.0);
    }

    #[test]
    fn lambda_boundaries_match_td0_and_mc() {
        let t = traj(&[1.0, -2.0, 3.0, 0.5], true);
        let v = fitted(&[(1, 5.0), (2, -1.0), (3, 2.0), (4, 7.0)]);
        let gamma = 0.9;

        let lam0 = lambda_targets(&t, &v, gamma, 0.0).unwrap();
        for (step, &g) in lam0.iter().enumerate() {
            assert_eq!(g, td0_target(&t.transitions[step], &v, gamma));
        }

        let lam1 = lambda_targets(&t, &v, gamma, 1.0).unwrap();
        let data = dataset(vec![t.clone()]);
        assert_eq!(lam1, mc_targets(&data, gamma).unwrap().targets());
    }

    #[test]
    fn lambda_half_matches_bruteforce_nstep_average() {
        // 3-step trajectory, hand-set value estimates, lambda = 0.5.
        let t = traj(&[1.0, 2.0, 4.0], true);
        let v = fitted(&[(1, 10.0), (2, 20.0), (3, 40.0)]);
        let (gamma, lambda) = (0.5f64, 0.5f64);

        // n-step returns from step 0:
        //   G^(1) = 1 + 0.5*10 = 6
        //   G^(2) = 1 + 0.5*2 + 0.25*20 = 7
        //   G (MC) = 1 + 0.5*2 + 0.25*4 = 3
        // G^lambda = (1-l)(G1 + l*G2) + l^2 * G = 0.5*6 + 0.25*7 + 0.25*3
        let expected0 = 0.5 * 6.0 + 0.25 * 7.0 + 0.25 * 3.0;
        let got = lambda_targets(&t, &v, gamma, lambda).unwrap();
        assert!((got[0] - expected0).abs() < 1e-12, "got {got:?}");

        // Step 1: G^(1) = 2 + 0.5*20 = 12, MC tail = 2 + 0.5*4 = 4.
        let expected1 = 0.5 * 12.0 + 0.5 * 4.0;
        assert!((got[1] - expected1).abs() < 1e-12);
        // Final step is the terminal reward.
        assert_eq!(got[2], 4.0);
    }

    #[test]
    fn lambda_rejects_out_of_range() {
        let t = traj(&[1.0], true);
        let v = TabularApprox::new();
        assert!(lambda_targets(&t, &v, 1.0, -0.1).is_err());
        assert!(lambda_targets(&t, &v, 1.0, 1.1).is_err());
    }

    #[test]
    fn truncated_lambda_bootstraps_cut_state() {
        let t = traj(&[1.0, 1.0], false);
        let v = fitted(&[(1, 0.0), (2, 8.0)]);
        // lambda = 1: MC tail with bootstrap at the cut state Discrete(2).
        let got = lambda_targets(&t, &v, 1.0, 1.0).unwrap();
        assert_eq!(got, vec![10.0, 9.0]);
    }
}
