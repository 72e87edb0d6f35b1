//! Core MDP abstractions: states, trajectories, datasets, and the
//! environment/policy interfaces shared by every evaluation algorithm.

mod collect;
mod io;

pub use collect::{collect_trajectories, rollout_return};
pub use io::{read_dataset_jsonl, write_dataset_jsonl};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A state is either a discrete id (tabular environments) or a point in a
/// 2-d continuous state space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum State {
    Discrete(usize),
    Coords([f64; 2]),
}

impl State {
    pub fn discrete_id(&self) -> Option<usize> {
        match self {
            State::Discrete(id) => Some(*id),
            State::Coords(_) => None,
        }
    }

    pub fn coords(&self) -> Option<[f64; 2]> {
        match self {
            State::Discrete(_) => None,
            State::Coords(c) => Some(*c),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            State::Discrete(_) => true,
            State::Coords(c) => c[0].is_finite() && c[1].is_finite(),
        }
    }
}

/// One environment step: `(s, a, r, s', terminal)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: State,
    pub action: usize,
    pub reward: f64,
    pub next_state: State,
    pub terminal: bool,
}

/// An ordered sequence of transitions produced by one episode.
///
/// Chaining invariant: `transitions[t].next_state == transitions[t + 1].state`.
/// At most the final transition is terminal; a trajectory whose final
/// transition is *not* terminal was truncated by the step cap.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
}

impl Trajectory {
    pub fn new(transitions: Vec<Transition>) -> Self {
        Self { transitions }
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// True when the episode was cut by the step cap rather than ending in a
    /// terminal transition.
    pub fn is_truncated(&self) -> bool {
        self.transitions.last().is_some_and(|t| !t.terminal)
    }

    /// The state the trajectory was cut at (next state of the final
    /// transition); used for bootstrapped tails of truncated episodes.
    pub fn final_state(&self) -> Option<State> {
        self.transitions.last().map(|t| t.next_state)
    }

    /// Checks the chaining and terminal-placement invariants.
    pub fn validate(&self) -> Result<()> {
        for (t, pair) in self.transitions.windows(2).enumerate() {
            if pair[0].next_state != pair[1].state {
                return Err(Error::InvalidConfig(format!(
                    "trajectory broken at step {t}: next_state != following state"
                )));
            }
            if pair[0].terminal {
                return Err(Error::InvalidConfig(format!(
                    "non-final terminal transition at step {t}"
                )));
            }
        }
        Ok(())
    }
}

/// A bag of trajectories plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub trajectories: Vec<Trajectory>,
    pub env_id: String,
    pub policy_id: String,
    pub seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn num_transitions(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }
}

/// Declared state-space descriptor, used to build evaluation grids and to
/// scale approximator inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateSpace {
    Discrete { count: usize },
    Box2 { lo: [f64; 2], hi: [f64; 2] },
}

/// An immutable episodic environment. `step` is a pure function of
/// `(state, action, rng)`, so environments are safe to share across threads.
pub trait Environment: Send + Sync {
    fn id(&self) -> String;

    /// Discount factor, in (0, 1].
    fn discount(&self) -> f64;

    fn num_actions(&self) -> usize;

    fn state_space(&self) -> StateSpace;

    fn initial_state(&self, rng: &mut dyn RngCore) -> State;

    /// Returns `(next_state, reward, terminal)`.
    fn step(&self, state: &State, action: usize, rng: &mut dyn RngCore) -> (State, f64, bool);

    /// Analytic state value, for environments where it is known exactly.
    fn true_value(&self, _state: &State) -> Option<f64> {
        None
    }

    /// States the environment prefers MSVE to be measured on, when the
    /// benchmark protocol pins a specific set (e.g. chain intermediate
    /// states). `None` means "use a grid over the state space".
    fn eval_states(&self) -> Option<Vec<State>> {
        None
    }

    /// True when a point of the state space is unreachable (e.g. wall
    /// interior); such points are excluded from evaluation grids.
    fn is_blocked(&self, _state: &State) -> bool {
        false
    }
}

/// A stationary stochastic policy over an environment's action ids.
pub trait Policy: Send + Sync {
    fn id(&self) -> String;

    fn sample_action(&self, state: &State, rng: &mut dyn RngCore) -> usize;
}

/// Uniform random policy over `num_actions` actions.
#[derive(Debug, Clone)]
pub struct UniformPolicy {
    pub num_actions: usize,
}

impl Policy for UniformPolicy {
    fn id(&self) -> String {
        "uniform".to_string()
    }

    fn sample_action(&self, _state: &State, rng: &mut dyn RngCore) -> usize {
        use rand::Rng;
        rng.random_range(0..self.num_actions)
    }
}

/// Discounted return of a trajectory tail: sum of `gamma^k * r_{from+k}` over
/// the remaining transitions, accumulated back-to-front so the recursive
/// identity `g_t = r_t + gamma * g_{t+1}` holds bitwise.
pub fn discounted_return(trajectory: &Trajectory, gamma: f64, from: usize) -> Result<f64> {
    let len = trajectory.len();
    if from >= len {
        return Err(Error::IndexOutOfRange { index: from, len });
    }
    let mut g = 0.0;
    for t in (from..len).rev() {
        g = trajectory.transitions[t].reward + gamma * g;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj_from_rewards(rewards: &[f64]) -> Trajectory {
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
                    terminal: t + 1 == n,
                })
                .collect(),
        )
    }

    #[test]
    fn discounted_return_direct_sum() {
        let traj = traj_from_rewards(&[1.0, 0.0, 2.0]);
        assert_eq!(discounted_return(&traj, 0.5, 0).unwrap(), 1.5);
        assert_eq!(discounted_return(&traj, 0.5, 2).unwrap(), 2.0);
    }

    #[test]
    fn discounted_return_terminal_reward_undiscounted() {
        let traj = traj_from_rewards(&[0.0, 0.0, 0.0, 30.0]);
        for from in 0..4 {
            assert_eq!(discounted_return(&traj, 1.0, from).unwrap(), 30.0);
        }
    }

    #[test]
    fn discounted_return_out_of_range() {
        let traj = traj_from_rewards(&[1.0]);
        assert!(matches!(
            discounted_return(&traj, 1.0, 1),
            Err(Error::IndexOutOfRange { index: 1, len: 1 })
        ));
    }

    #[test]
    fn truncation_flag_follows_terminal_marker() {
        let mut traj = traj_from_rewards(&[1.0, 2.0]);
        assert!(!traj.is_truncated());
        traj.transitions.last_mut().unwrap().terminal = false;
        assert!(traj.is_truncated());
    }

    #[test]
    fn validate_catches_broken_chain() {
        let mut traj = traj_from_rewards(&[1.0, 2.0, 3.0]);
        assert!(traj.validate().is_ok());
        traj.transitions[1].state = State::Discrete(99);
        assert!(traj.validate().is_err());
    }
}
