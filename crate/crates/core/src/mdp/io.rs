//! Line-delimited JSON serialization for datasets.
//!
//! File layout: a header line `{"env_id", "policy_id", "seed"}` followed by
//! one line per trajectory `{"states", "actions", "rewards", "terminal"}`,
//! where `states` has one more entry than `actions`/`rewards` (the chained
//! visit sequence) and `terminal` records whether the episode ended rather
//! than being cut by the step cap.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Dataset, State, Trajectory, Transition};

#[derive(Serialize, Deserialize)]
struct Header {
    env_id: String,
    policy_id: String,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct TrajectoryLine {
    states: Vec<State>,
    actions: Vec<usize>,
    rewards: Vec<f64>,
    terminal: bool,
}

impl From<&Trajectory> for TrajectoryLine {
    fn from(traj: &Trajectory) -> Self {
        let mut states = Vec::with_capacity(traj.len() + 1);
        let mut actions = Vec::with_capacity(traj.len());
        let mut rewards = Vec::with_capacity(traj.len());
        for tr in &traj.transitions {
            states.push(tr.state);
            actions.push(tr.action);
            rewards.push(tr.reward);
        }
        if let Some(last) = traj.transitions.last() {
            states.push(last.next_state);
        }
        TrajectoryLine {
            states,
            actions,
            rewards,
            terminal: traj.transitions.last().is_some_and(|t| t.terminal),
        }
    }
}

impl TrajectoryLine {
    fn into_trajectory(self) -> Result<Trajectory> {
        let n = self.actions.len();
        if self.rewards.len() != n || self.states.len() != n + 1 {
            return Err(Error::InvalidConfig(
                "trajectory line has inconsistent field lengths".into(),
            ));
        }
        let transitions = (0..n)
            .map(|t| Transition {
                state: self.states[t],
                action: self.actions[t],
                reward: self.rewards[t],
                next_state: self.states[t + 1],
                terminal: self.terminal && t + 1 == n,
            })
            .collect();
        Ok(Trajectory::new(transitions))
    }
}

pub fn write_dataset_jsonl<W: Write>(dataset: &Dataset, mut out: W) -> Result<()> {
    let header = Header {
        env_id: dataset.env_id.clone(),
        policy_id: dataset.policy_id.clone(),
        seed: dataset.seed,
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for traj in &dataset.trajectories {
        serde_json::to_writer(&mut out, &TrajectoryLine::from(traj))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_dataset_jsonl<R: Read>(input: R) -> Result<Dataset> {
    let mut lines = BufReader::new(input).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::InvalidConfig("dataset file is empty".into()))??;
    let header: Header = serde_json::from_str(&header_line)?;
    let mut trajectories = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TrajectoryLine = serde_json::from_str(&line)?;
        trajectories.push(parsed.into_trajectory()?);
    }
    Ok(Dataset {
        trajectories,
        env_id: header.env_id,
        policy_id: header.policy_id,
        seed: header.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_dataset() {
        let dataset = Dataset {
            trajectories: vec![
                Trajectory::new(vec![
                    Transition {
                        state: State::Discrete(0),
                        action: 1,
                        reward: 0.5,
                        next_state: State::Discrete(2),
                        terminal: false,
                    },
                    Transition {
                        state: State::Discrete(2),
                        action: 0,
                        reward: -1.25,
                        next_state: State::Discrete(3),
                        terminal: true,
                    },
                ]),
                Trajectory::new(vec![Transition {
                    state: State::Coords([1.5, 2.5]),
                    action: 0,
                    reward: 30.0,
                    next_state: State::Coords([3.0, 4.0]),
                    terminal: false, // truncated episode
                }]),
            ],
            env_id: "test_env".into(),
            policy_id: "uniform".into(),
            seed: 99,
        };
        let mut buf = Vec::new();
        write_dataset_jsonl(&dataset, &mut buf).unwrap();
        let back = read_dataset_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, dataset);
        assert!(back.trajectories[1].is_truncated());
    }

    #[test]
    fn serialization_is_byte_stable() {
        let dataset = Dataset {
            trajectories: vec![Trajectory::new(vec![Transition {
                state: State::Discrete(0),
                action: 0,
                reward: 1.0,
                next_state: State::Discrete(1),
                terminal: true,
            }])],
            env_id: "e".into(),
            policy_id: "p".into(),
            seed: 1,
        };
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_dataset_jsonl(&dataset, &mut a).unwrap();
        write_dataset_jsonl(&dataset, &mut b).unwrap();
        assert_eq!(a, b);
    }
}
