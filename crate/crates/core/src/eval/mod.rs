//! Ground-truth estimation, MSVE scoring, score normalization, and
//! confidence-violation maps.

pub mod sweep;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approx::ValueApproximator;
use crate::confidence::ConfidenceFunction;
use crate::error::{Error, Result};
use crate::mdp::{rollout_return, Environment, Policy, State, StateSpace};
use crate::rng::stream_rng;

/// Evaluation lattice resolution for 2-d state spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { nx: 40, ny: 30 }
    }
}

/// Cell centers of the evaluation lattice, skipping blocked cells (walls).
/// Empty for discrete state spaces.
pub fn grid_states(env: &dyn Environment, grid: &GridSpec) -> Vec<(usize, usize, State)> {
    match env.state_space() {
        StateSpace::Box2 { lo, hi } => {
            let dx = (hi[0] - lo[0]) / grid.nx as f64;
            let dy = (hi[1] - lo[1]) / grid.ny as f64;
            let mut cells = Vec::with_capacity(grid.nx * grid.ny);
            for iy in 0..grid.ny {
                for ix in 0..grid.nx {
                    let state = State::Coords([
                        lo[0] + (ix as f64 + 0.5) * dx,
                        lo[1] + (iy as f64 + 0.5) * dy,
                    ]);
                    if !env.is_blocked(&state) {
                        cells.push((ix, iy, state));
                    }
                }
            }
            cells
        }
        StateSpace::Discrete { .. } => Vec::new(),
    }
}

/// The states MSVE is measured on: the environment's pinned set when it has
/// one, otherwise the evaluation lattice (or all ids for discrete spaces).
pub fn evaluation_states(env: &dyn Environment, grid: &GridSpec) -> Vec<State> {
    if let Some(states) = env.eval_states() {
        return states;
    }
    match env.state_space() {
        StateSpace::Box2 { .. } => grid_states(env, grid).into_iter().map(|(_, _, s)| s).collect(),
        StateSpace::Discrete { count } => (0..count).map(State::Discrete).collect(),
    }
}

/// Per-state true-value estimates over the evaluation states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub states: Vec<State>,
    pub values: Vec<f64>,
    /// Episodes averaged per state; 0 marks an analytically known value.
    pub samples: Vec<usize>,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Estimates the true value of every evaluation state by averaging fresh
/// episodes started there; environments with an analytic value accessor skip
/// the sampling entirely. Per-state RNG streams keep the result identical
/// under any parallel schedule.
pub fn estimate_ground_truth(
    env: &dyn Environment,
    policy: &dyn Policy,
    grid: &GridSpec,
    episodes_per_state: usize,
    max_steps: usize,
    seed: u64,
) -> Result<GroundTruth> {
    if episodes_per_state == 0 {
        return Err(Error::InvalidParameter("episodes_per_state must be >= 1".into()));
    }
    let states = evaluation_states(env, grid);
    if states.is_empty() {
        return Err(Error::InvalidConfig("no evaluation states".into()));
    }
    let gamma = env.discount();
    let results: Vec<(f64, usize)> = states
        .par_iter()
        .enumerate()
        .map(|(idx, state)| {
            if let Some(v) = env.true_value(state) {
                return (v, 0);
            }
            let mut rng = stream_rng(seed, idx as u64);
            let total: f64 = (0..episodes_per_state)
                .map(|_| rollout_return(env, policy, *state, gamma, max_steps, &mut rng))
                .sum();
            (total / episodes_per_state as f64, episodes_per_state)
        })
        .collect();
    Ok(GroundTruth {
        states,
        values: results.iter().map(|r| r.0).collect(),
        samples: results.iter().map(|r| r.1).collect(),
    })
}

/// Weighted mean squared value error against the ground truth. `None`
/// weights every state equally (the grid protocol); explicit weights
/// reproduce an initial-state distribution.
pub fn msve(
    value: &dyn ValueApproximator,
    gt: &GroundTruth,
    weights: Option<&[f64]>,
) -> Result<f64> {
    if gt.is_empty() {
        return Err(Error::InvalidParameter("empty ground truth".into()));
    }
    if let Some(w) = weights {
        if w.len() != gt.len() {
            return Err(Error::LengthMismatch {
                states: gt.len(),
                targets: w.len(),
            });
        }
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidParameter("weights must sum to > 0".into()));
        }
        let sum: f64 = gt
            .states
            .iter()
            .zip(&gt.values)
            .zip(w)
            .map(|((s, &v), &wi)| {
                let e = v - value.predict(s);
                wi * e * e
            })
            .sum();
        Ok(sum / total)
    } else {
        let sum: f64 = gt
            .states
            .iter()
            .zip(&gt.values)
            .map(|(s, &v)| {
                let e = v - value.predict(s);
                e * e
            })
            .sum();
        Ok(sum / gt.len() as f64)
    }
}

/// Relative scores where the worst algorithm maps to 1 and the rest to their
/// share of it.
pub fn normalize_by_max(results: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>> {
    let max = results.values().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if results.is_empty() || !(max > 0.0) {
        return Err(Error::InvalidParameter(
            "max normalization needs a positive worst score".into(),
        ));
    }
    Ok(results.iter().map(|(k, &v)| (k.clone(), v / max)).collect())
}

/// Affine scores in [0, 1] with the best algorithm at 0 and the worst at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxScores {
    pub scores: BTreeMap<String, f64>,
    /// All algorithms tied; every score was set to 0 by convention.
    pub tied: bool,
}

pub fn normalize_minmax(results: &BTreeMap<String, f64>) -> Result<MinMaxScores> {
    if results.is_empty() {
        return Err(Error::InvalidParameter("no scores to normalize".into()));
    }
    let max = results.values().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let min = results.values().fold(f64::INFINITY, |a, &b| a.min(b));
    if max == min {
        return Ok(MinMaxScores {
            scores: results.keys().map(|k| (k.clone(), 0.0)).collect(),
            tied: true,
        });
    }
    Ok(MinMaxScores {
        scores: results
            .iter()
            .map(|(k, &v)| (k.clone(), (v - min) / (max - min)))
            .collect(),
        tied: false,
    })
}

/// Equal-weight average of per-scenario normalized scores; every scenario
/// counts the same regardless of its absolute error scale.
pub fn average_scores(per_scenario: &[BTreeMap<String, f64>]) -> BTreeMap<String, f64> {
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for scenario in per_scenario {
        for (k, &v) in scenario {
            let e = sums.entry(k.clone()).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    sums.into_iter()
        .map(|(k, (sum, n))| (k, sum / n as f64))
        .collect()
}

/// Where a reference value sits relative to the confidence interval.
/// Convention (recorded in the file header): `over` means the reference
/// exceeds the upper bound, `under` means it falls below the lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellLabel {
    Inside,
    Over,
    Under,
}

impl fmt::Display for CellLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellLabel::Inside => write!(f, "inside"),
            CellLabel::Over => write!(f, "over"),
            CellLabel::Under => write!(f, "under"),
        }
    }
}

/// The per-state reference compared against the intervals: the ground truth
/// (interval-quality maps) or a trained estimate (gating maps).
pub enum Reference<'a> {
    GroundTruth(&'a GroundTruth),
    Approx(&'a dyn ValueApproximator),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationMap {
    pub cells: Vec<(usize, usize, CellLabel)>,
}

impl ViolationMap {
    pub fn count(&self, label: CellLabel) -> usize {
        self.cells.iter().filter(|c| c.2 == label).count()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# label convention: over <=> reference > U, under <=> reference < L")?;
        writeln!(out, "cell_x,cell_y,label")?;
        for (ix, iy, label) in &self.cells {
            writeln!(out, "{ix},{iy},{label}")?;
        }
        Ok(())
    }
}

/// Labels every free lattice cell by whether the reference value falls
/// inside the closed interval, above it, or below it.
pub fn violation_map(
    cf: &ConfidenceFunction,
    reference: &Reference<'_>,
    env: &dyn Environment,
    grid: &GridSpec,
) -> Result<ViolationMap> {
    let lattice = grid_states(env, grid);
    if lattice.is_empty() {
        return Err(Error::InvalidConfig(
            "violation maps need a 2-d state space".into(),
        ));
    }
    let mut cells = Vec::with_capacity(lattice.len());
    for (pos, (ix, iy, state)) in lattice.iter().enumerate() {
        let value = match reference {
            Reference::Approx(v) => v.predict(state),
            Reference::GroundTruth(gt) => {
                // Ground truth built on the same lattice aligns by position.
                if gt.states.get(pos) != Some(state) {
                    return Err(Error::InvalidConfig(
                        "ground truth grid does not match the requested grid".into(),
                    ));
                }
                gt.values[pos]
            }
        };
        let (lo, hi) = cf.interval(state);
        let label = if value > hi {
            CellLabel::Over
        } else if value < lo {
            CellLabel::Under
        } else {
            CellLabel::Inside
        };
        cells.push((*ix, *iy, label));
    }
    Ok(ViolationMap { cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::TabularApprox;
    use crate::envs::{ChainConfig, ChainEnv};

    fn chain() -> ChainEnv {
        ChainEnv::new(ChainConfig {
            k: 4,
            p: 2,
            mu: 2.0,
            sigma: 1.0,
        })
        .unwrap()
    }

    #[test]
    fn chain_ground_truth_is_analytic() {
        let env = chain();
        let policy = env.reference_policy();
        let gt =
            estimate_ground_truth(&env, &policy, &GridSpec::default(), 10, 100, 0).unwrap();
        assert_eq!(gt.len(), 4); // intermediate states only
        assert!(gt.values.iter().all(|&v| v == 2.0));
        assert!(gt.samples.iter().all(|&s| s == 0));
    }

    #[test]
    fn msve_constant_offset_is_squared_offset() {
        let env = chain();
        let policy = env.reference_policy();
        let gt =
            estimate_ground_truth(&env, &policy, &GridSpec::default(), 10, 100, 0).unwrap();
        let mut approx = TabularApprox::new();
        let targets: Vec<f64> = gt.values.iter().map(|v| v + 3.0).collect();
        approx.fit(&gt.states, &targets, 0).unwrap();
        let err = msve(&approx, &gt, None).unwrap();
        assert!((err - 9.0).abs() < 1e-12);
    }

    #[test]
    fn msve_two_state_example() {
        let gt = GroundTruth {
            states: vec![State::Discrete(0), State::Discrete(1)],
            values: vec![0.0, 2.0],
            samples: vec![0, 0],
        };
        let mut approx = TabularApprox::new();
        approx
            .fit(&[State::Discrete(0), State::Discrete(1)], &[1.0, 1.0], 0)
            .unwrap();
        assert_eq!(msve(&approx, &gt, None).unwrap(), 1.0);
        // Weighted variant.
        let weighted = msve(&approx, &gt, Some(&[3.0, 1.0])).unwrap();
        assert_eq!(weighted, 1.0);
        assert!(msve(&approx, &gt, Some(&[1.0])).is_err());
    }

    #[test]
    fn normalize_by_max_examples() {
        let scores: BTreeMap<String, f64> =
            [("a".to_string(), 2.0), ("b".to_string(), 4.0)].into();
        let norm = normalize_by_max(&scores).unwrap();
        assert_eq!(norm["a"], 0.5);
        assert_eq!(norm["b"], 1.0);

        let single: BTreeMap<String, f64> = [("solo".to_string(), 7.0)].into();
        assert_eq!(normalize_by_max(&single).unwrap()["solo"], 1.0);

        // Scaling invariance.
        let scaled: BTreeMap<String, f64> = scores.iter().map(|(k, v)| (k.clone(), v * 13.0)).collect();
        assert_eq!(normalize_by_max(&scaled).unwrap(), norm);

        let zeros: BTreeMap<String, f64> = [("a".to_string(), 0.0)].into();
        assert!(normalize_by_max(&zeros).is_err());
    }

    #[test]
    fn normalize_minmax_examples() {
        let scores: BTreeMap<String, f64> = [
            ("a".to_string(), 2.0),
            ("b".to_string(), 4.0),
            ("c".to_string(), 6.0),
        ]
        .into();
        let norm = normalize_minmax(&scores).unwrap();
        assert!(!norm.tied);
        assert_eq!(norm.scores["a"], 0.0);
        assert_eq!(norm.scores["b"], 0.5);
        assert_eq!(norm.scores["c"], 1.0);

        let tied: BTreeMap<String, f64> =
            [("a".to_string(), 3.0), ("b".to_string(), 3.0)].into();
        let norm = normalize_minmax(&tied).unwrap();
        assert!(norm.tied);
        assert!(norm.scores.values().all(|&v| v == 0.0));
    }

    #[test]
    fn scenario_averaging_is_equal_weight() {
        let s1: BTreeMap<String, f64> = [("a".to_string(), 0.0), ("b".to_string(), 1.0)].into();
        let s2: BTreeMap<String, f64> = [("a".to_string(), 1.0), ("b".to_string(), 0.0)].into();
        let avg = average_scores(&[s1, s2]);
        assert_eq!(avg["a"], 0.5);
        assert_eq!(avg["b"], 0.5);
    }
}
