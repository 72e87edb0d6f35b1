//! Classic mountain-car dynamics with an epsilon-greedy energy-pumping
//! reference policy.

use rand::{Rng, RngCore};

use crate::mdp::{Environment, Policy, State, StateSpace};

pub const POSITION_MIN: f64 = -1.2;
pub const POSITION_MAX: f64 = 0.6;
pub const VELOCITY_MAX: f64 = 0.07;
pub const GOAL_POSITION: f64 = 0.5;

const FORCE: f64 = 0.001;
const GRAVITY: f64 = 0.0025;

/// Actions 0, 1, 2 map to thrust -1, 0, +1. Reward is -1 per step until the
/// car reaches the goal position; gamma is 0.99. Position and velocity are
/// clamped to their bounds after every step, and hitting the left boundary
/// zeroes the velocity.
#[derive(Debug, Clone, Default)]
pub struct MountainCarEnv;

impl MountainCarEnv {
    pub fn new() -> Self {
        Self
    }

    /// The near-optimal reference policy: thrust along the current velocity,
    /// with probability `eps` replaced by a uniformly random action.
    pub fn reference_policy(&self, eps: f64) -> NearOptimalEps {
        NearOptimalEps { eps }
    }
}

impl Environment for MountainCarEnv {
    fn id(&self) -> String {
        "mountain_car".to_string()
    }

    fn discount(&self) -> f64 {
        0.99
    }

    fn num_actions(&self) -> usize {
        3
    }

    fn state_space(&self) -> StateSpace {
        StateSpace::Box2 {
            lo: [POSITION_MIN, -VELOCITY_MAX],
            hi: [POSITION_MAX, VELOCITY_MAX],
        }
    }

    fn initial_state(&self, rng: &mut dyn RngCore) -> State {
        let position = -0.6 + 0.2 * rng.random::<f64>();
        State::Coords([position, 0.0])
    }

    fn step(&self, state: &State, action: usize, _rng: &mut dyn RngCore) -> (State, f64, bool) {
        let [position, velocity] = state
            .coords()
            .expect("mountain car takes coordinate states");
        let thrust = action as f64 - 1.0;
        let mut velocity = velocity + FORCE * thrust - GRAVITY * (3.0 * position).cos();
        velocity = velocity.clamp(-VELOCITY_MAX, VELOCITY_MAX);
        let mut position = position + velocity;
        if position < POSITION_MIN {
            position = POSITION_MIN;
            if velocity < 0.0 {
                velocity = 0.0;
            }
        } else if position > POSITION_MAX {
            position = POSITION_MAX;
        }
        let terminal = position >= GOAL_POSITION;
        (State::Coords([position, velocity]), -1.0, terminal)
    }
}

/// `sign(velocity)` thrust (push right from rest) with epsilon-uniform noise.
#[derive(Debug, Clone, Copy)]
pub struct NearOptimalEps {
    pub eps: f64,
}

impl Policy for NearOptimalEps {
    fn id(&self) -> String {
        format!("near_optimal_eps{}", self.eps)
    }

    fn sample_action(&self, state: &State, rng: &mut dyn RngCore) -> usize {
        if self.eps > 0.0 && rng.random::<f64>() < self.eps {
            return rng.random_range(0..3);
        }
        let [_, velocity] = state.coords().expect("mountain car state");
        if velocity < 0.0 {
            0
        } else {
            2
        }
    }
}
