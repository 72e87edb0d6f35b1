//! 2-d labyrinth: random-walk navigation over a walled map with disk goals.
//!
//! The state is the agent's `(x, y)` position. Each step draws a uniformly
//! random direction and attempts a fixed-size move; moves that would cross a
//! wall or leave the map are rejected and the agent stays in place. Reward is
//! granted on every step whose resulting position lies inside a goal disk,
//! and the episode ends after each step with a fixed probability, giving
//! geometrically distributed episode lengths (mean `1 / p_end`).

use std::f64::consts::TAU;
use std::path::Path;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Environment, State, StateSpace, UniformPolicy};

pub const DEFAULT_STEP_SIZE: f64 = 5.0;
pub const DEFAULT_P_END: f64 = 0.0005;
pub const DEFAULT_REWARD: f64 = 30.0;

/// Axis-aligned rectangular wall; `(x, y)` is the lower-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Wall {
    pub fn contains(&self, px: f64, py: f64) -> bool {
        px >= self.x && px <= self.x + self.w && py >= self.y && py <= self.y + self.h
    }

    /// Segment-rectangle intersection via slab clipping. Touching the
    /// boundary counts as crossing, so grazing moves are rejected too and a
    /// position trace can never pass through a wall of any thickness.
    pub fn crosses(&self, from: [f64; 2], to: [f64; 2]) -> bool {
        let dx = to[0] - from[0];
        let dy = to[1] - from[1];
        let mut t0 = 0.0f64;
        let mut t1 = 1.0f64;
        for (p, q0, q1) in [
            (dx, self.x - from[0], self.x + self.w - from[0]),
            (dy, self.y - from[1], self.y + self.h - from[1]),
        ] {
            if p == 0.0 {
                if q0 > 0.0 || q1 < 0.0 {
                    return false; // parallel and outside the slab
                }
            } else {
                let (mut ta, mut tb) = (q0 / p, q1 / p);
                if ta > tb {
                    std::mem::swap(&mut ta, &mut tb);
                }
                t0 = t0.max(ta);
                t1 = t1.min(tb);
                if t0 > t1 {
                    return false;
                }
            }
        }
        true
    }
}

/// Circular goal region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

impl Goal {
    pub fn contains(&self, px: f64, py: f64) -> bool {
        let dx = px - self.cx;
        let dy = py - self.cy;
        dx * dx + dy * dy <= self.r * self.r
    }
}

fn default_reward() -> f64 {
    DEFAULT_REWARD
}

fn default_p_end() -> f64 {
    DEFAULT_P_END
}

/// Map geometry plus the reward/termination parameters stored in map files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabMap {
    pub width: f64,
    pub height: f64,
    pub walls: Vec<Wall>,
    pub goals: Vec<Goal>,
    #[serde(default = "default_reward")]
    pub reward: f64,
    #[serde(default = "default_p_end")]
    pub p_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map_id: Option<usize>,
}

const BUILTIN_MAPS: [&str; 6] = [
    include_str!("../../maps/map_0.json"),
    include_str!("../../maps/map_1.json"),
    include_str!("../../maps/map_2.json"),
    include_str!("../../maps/map_3.json"),
    include_str!("../../maps/map_4.json"),
    include_str!("../../maps/map_5.json"),
];

impl LabMap {
    /// One of the six shipped maps (0 = open room, 1 = partial wall,
    /// 2 = two fully separated rooms, 3 = locked chamber, 4 = two goals,
    /// 5 = corridor maze).
    pub fn builtin(map_id: usize) -> Result<Self> {
        let text = BUILTIN_MAPS
            .get(map_id)
            .ok_or_else(|| Error::InvalidParameter(format!("map id {map_id} not in 0..=5")))?;
        let mut map: LabMap = serde_json::from_str(text)?;
        map.map_id = Some(map_id);
        map.validate()?;
        Ok(map)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let map: LabMap = serde_json::from_str(&text)?;
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(Error::InvalidGeometry("map dimensions must be positive".into()));
        }
        if self.goals.is_empty() {
            return Err(Error::InvalidGeometry("map needs at least one goal".into()));
        }
        if !(self.p_end > 0.0 && self.p_end < 1.0) {
            return Err(Error::InvalidGeometry(format!(
                "p_end must be in (0,1), got {}",
                self.p_end
            )));
        }
        for wall in &self.walls {
            let inside = wall.w > 0.0
                && wall.h > 0.0
                && wall.x >= 0.0
                && wall.y >= 0.0
                && wall.x + wall.w <= self.width
                && wall.y + wall.h <= self.height;
            if !inside {
                return Err(Error::InvalidGeometry(format!("wall {wall:?} outside map bounds")));
            }
        }
        for goal in &self.goals {
            let inside = goal.r > 0.0
                && goal.cx - goal.r >= 0.0
                && goal.cy - goal.r >= 0.0
                && goal.cx + goal.r <= self.width
                && goal.cy + goal.r <= self.height;
            if !inside {
                return Err(Error::InvalidGeometry(format!("goal {goal:?} outside map bounds")));
            }
            for wall in &self.walls {
                let covered = goal.cx - goal.r >= wall.x
                    && goal.cx + goal.r <= wall.x + wall.w
                    && goal.cy - goal.r >= wall.y
                    && goal.cy + goal.r <= wall.y + wall.h;
                if covered {
                    return Err(Error::InvalidGeometry(format!(
                        "goal {goal:?} fully covered by wall {wall:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn in_bounds(&self, px: f64, py: f64) -> bool {
        px >= 0.0 && px <= self.width && py >= 0.0 && py <= self.height
    }

    pub fn in_wall(&self, px: f64, py: f64) -> bool {
        self.walls.iter().any(|w| w.contains(px, py))
    }

    pub fn in_goal(&self, px: f64, py: f64) -> bool {
        self.goals.iter().any(|g| g.contains(px, py))
    }

    /// A move is legal when it stays in bounds and crosses no wall.
    pub fn move_allowed(&self, from: [f64; 2], to: [f64; 2]) -> bool {
        self.in_bounds(to[0], to[1]) && !self.walls.iter().any(|w| w.crosses(from, to))
    }
}

/// The labyrinth environment. The uniform-random direction draw is part of
/// the environment dynamics, so the reference policy has a single action.
#[derive(Debug, Clone)]
pub struct LabyrinthEnv {
    map: LabMap,
    step_size: f64,
    p_end: f64,
}

impl LabyrinthEnv {
    pub fn new(map: LabMap, step_size: f64, p_end: f64) -> Result<Self> {
        map.validate()?;
        if !(step_size > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "step_size must be > 0, got {step_size}"
            )));
        }
        if !(p_end > 0.0 && p_end < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "p_end must be in (0,1), got {p_end}"
            )));
        }
        Ok(Self {
            map,
            step_size,
            p_end,
        })
    }

    /// Uses the map's own termination probability and the default step size.
    pub fn from_map(map: LabMap) -> Result<Self> {
        let p_end = map.p_end;
        Self::new(map, DEFAULT_STEP_SIZE, p_end)
    }

    pub fn map(&self) -> &LabMap {
        &self.map
    }

    pub fn reference_policy(&self) -> UniformPolicy {
        UniformPolicy { num_actions: 1 }
    }
}

impl Environment for LabyrinthEnv {
    fn id(&self) -> String {
        match self.map.map_id {
            Some(id) => format!("labyrinth_map{id}"),
            None => "labyrinth_custom".to_string(),
        }
    }

    fn discount(&self) -> f64 {
        1.0
    }

    fn num_actions(&self) -> usize {
        1
    }

    fn state_space(&self) -> StateSpace {
        StateSpace::Box2 {
            lo: [0.0, 0.0],
            hi: [self.map.width, self.map.height],
        }
    }

    fn initial_state(&self, rng: &mut dyn RngCore) -> State {
        // Uniform over free space by rejection; walls never fill the map in
        // any usable geometry, so this terminates quickly.
        for _ in 0..100_000 {
            let px = rng.random::<f64>() * self.map.width;
            let py = rng.random::<f64>() * self.map.height;
            if !self.map.in_wall(px, py) {
                return State::Coords([px, py]);
            }
        }
        panic!("could not sample a free initial position; map is almost fully walled");
    }

    fn step(&self, state: &State, _action: usize, rng: &mut dyn RngCore) -> (State, f64, bool) {
        let [x, y] = state.coords().expect("labyrinth takes coordinate states");
        let angle = rng.random::<f64>() * TAU;
        let proposal = [x + self.step_size * angle.cos(), y + self.step_size * angle.sin()];
        let next = if self.map.move_allowed([x, y], proposal) {
            proposal
        } else {
            [x, y]
        };
        let reward = if self.map.in_goal(next[0], next[1]) {
            self.map.reward
        } else {
            0.0
        };
        let terminal = rng.random::<f64>() < self.p_end;
        (State::Coords(next), reward, terminal)
    }

    fn is_blocked(&self, state: &State) -> bool {
        match state.coords() {
            Some([px, py]) => !self.map.in_bounds(px, py) || self.map.in_wall(px, py),
            None => true,
        }
    }
}
