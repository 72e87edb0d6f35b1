//! Benchmark environments: the branching chain MDP, the 2-d labyrinth maps,
//! and mountain car, each with its reference policy.

mod chain;
mod labyrinth;
mod mountain_car;

pub use chain::{ChainConfig, ChainEnv};
pub use labyrinth::{
    Goal, LabMap, LabyrinthEnv, Wall, DEFAULT_P_END, DEFAULT_REWARD, DEFAULT_STEP_SIZE,
};
pub use mountain_car::{
    MountainCarEnv, NearOptimalEps, GOAL_POSITION, POSITION_MAX, POSITION_MIN, VELOCITY_MAX,
};
