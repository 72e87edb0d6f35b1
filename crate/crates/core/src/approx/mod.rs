//! Value-function approximators with a uniform train/predict contract.
//!
//! All approximators regress states onto scalar targets by (approximately)
//! minimizing mean squared error. Targets are plain numbers by the time they
//! reach `fit`, so no gradient ever flows into target construction — the
//! stop-gradient contract holds by design of the interface.

mod grid;
mod mlp;
mod tabular;

pub use grid::GridApprox;
pub use mlp::{MlpApprox, MlpConfig};
pub use tabular::{BiasedTabularApprox, TabularApprox};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{State, StateSpace};

/// A trainable map `state -> value`.
///
/// `predict` is deterministic between `fit` calls. `fit` treats the provided
/// targets as constants. Approximators are paired with environments of the
/// matching state kind (discrete vs coordinates); mixing them is a
/// programming error and panics.
pub trait ValueApproximator: Send {
    fn predict(&self, state: &State) -> f64;

    /// Regress toward `targets`. Exact per-cell least squares for tabular and
    /// grid families (budget ignored); `budget` optimizer minibatch steps for
    /// parametric families.
    fn fit(&mut self, states: &[State], targets: &[f64], budget: usize) -> Result<()>;

    /// Same architecture, freshly initialized parameters.
    fn clone_fresh(&self, seed: u64) -> Box<dyn ValueApproximator>;

    fn checkpoint(&self) -> Checkpoint;
}

pub(crate) fn validate_fit_input(states: &[State], targets: &[f64]) -> Result<()> {
    if states.is_empty() {
        return Err(Error::EmptyFit);
    }
    if states.len() != targets.len() {
        return Err(Error::LengthMismatch {
            states: states.len(),
            targets: targets.len(),
        });
    }
    if let Some(&bad) = targets.iter().find(|t| !t.is_finite()) {
        return Err(Error::NonFiniteTarget(bad));
    }
    Ok(())
}

/// Declarative approximator choice; doubles as the factory used for ensemble
/// members and sweep configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ApproxSpec {
    Tabular,
    /// Tabular with hard-clamped predictions on selected states, modelling a
    /// hypothesis class that cannot represent those states' values.
    BiasedTabular { clamps: Vec<(usize, f64)> },
    /// Piecewise-constant function on a 2-d grid with square cells.
    Grid { cell: f64 },
    Mlp(MlpConfig),
}

impl ApproxSpec {
    pub fn grid_default() -> Self {
        ApproxSpec::Grid { cell: 19.0 }
    }

    pub fn mlp_default() -> Self {
        ApproxSpec::Mlp(MlpConfig::default())
    }

    /// Builds a fresh approximator for an environment's state space.
    pub fn build(&self, space: &StateSpace, seed: u64) -> Result<Box<dyn ValueApproximator>> {
        match (self, space) {
            (ApproxSpec::Tabular, StateSpace::Discrete { .. }) => {
                Ok(Box::new(TabularApprox::new()))
            }
            (ApproxSpec::BiasedTabular { clamps }, StateSpace::Discrete { .. }) => Ok(Box::new(
                BiasedTabularApprox::new(clamps.iter().copied().collect()),
            )),
            (ApproxSpec::Grid { cell }, StateSpace::Box2 { lo, hi }) => {
                Ok(Box::new(GridApprox::new(*lo, *hi, *cell)?))
            }
            (ApproxSpec::Mlp(cfg), StateSpace::Box2 { lo, hi }) => {
                Ok(Box::new(MlpApprox::new(cfg.clone(), *lo, *hi, seed)?))
            }
            _ => Err(Error::InvalidConfig(format!(
                "approximator {self:?} incompatible with state space {space:?}"
            ))),
        }
    }
}

/// Serialized parameters plus enough structure to rebuild the approximator.
/// Optimizer state is not captured; a restored approximator predicts
/// identically but restarts training from fresh moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Checkpoint {
    Tabular {
        state_ids: Vec<usize>,
        counts: Vec<u64>,
        params: Vec<f64>,
    },
    BiasedTabular {
        clamps: Vec<(usize, f64)>,
        state_ids: Vec<usize>,
        counts: Vec<u64>,
        params: Vec<f64>,
    },
    Grid {
        lo: [f64; 2],
        hi: [f64; 2],
        cell: f64,
        counts: Vec<u64>,
        params: Vec<f64>,
    },
    Mlp {
        config: MlpConfig,
        lo: [f64; 2],
        hi: [f64; 2],
        seed: u64,
        params: Vec<f64>,
    },
    EnsembleMean {
        members: Vec<Checkpoint>,
    },
}

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct VersionedCheckpoint {
    version: u32,
    approx: Checkpoint,
}

impl Checkpoint {
    pub fn restore(&self) -> Result<Box<dyn ValueApproximator>> {
        match self {
            Checkpoint::Tabular {
                state_ids,
                counts,
                params,
            } => Ok(Box::new(TabularApprox::from_checkpoint(
                state_ids, counts, params,
            )?)),
            Checkpoint::BiasedTabular {
                clamps,
                state_ids,
                counts,
                params,
            } => Ok(Box::new(BiasedTabularApprox::from_checkpoint(
                clamps, state_ids, counts, params,
            )?)),
            Checkpoint::Grid {
                lo,
                hi,
                cell,
                counts,
                params,
            } => Ok(Box::new(GridApprox::from_checkpoint(
                *lo, *hi, *cell, counts, params,
            )?)),
            Checkpoint::Mlp {
                config,
                lo,
                hi,
                seed,
                params,
            } => Ok(Box::new(MlpApprox::from_checkpoint(
                config.clone(),
                *lo,
                *hi,
                *seed,
                params,
            )?)),
            Checkpoint::EnsembleMean { members } => {
                let restored = members
                    .iter()
                    .map(|m| m.restore())
                    .collect::<Result<Vec<_>>>()?;
                Ok(Box::new(EnsembleMeanApprox::new(restored)))
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let versioned = VersionedCheckpoint {
            version: CHECKPOINT_VERSION,
            approx: self.clone(),
        };
        let text = serde_json::to_string_pretty(&versioned)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let text = std::fs::read_to_string(path)?;
        let versioned: VersionedCheckpoint = serde_json::from_str(&text)?;
        if versioned.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {}",
                versioned.version
            )));
        }
        Ok(versioned.approx)
    }
}

/// Read-only predictor averaging a set of trained members; the value function
/// exposed by the MC-ensemble baseline.
pub struct EnsembleMeanApprox {
    members: Vec<Box<dyn ValueApproximator>>,
}

impl EnsembleMeanApprox {
    pub fn new(members: Vec<Box<dyn ValueApproximator>>) -> Self {
        Self { members }
    }
}

impl ValueApproximator for EnsembleMeanApprox {
    fn predict(&self, state: &State) -> f64 {
        let sum: f64 = self.members.iter().map(|m| m.predict(state)).sum();
        sum / self.members.len() as f64
    }

    fn fit(&mut self, _states: &[State], _targets: &[f64], _budget: usize) -> Result<()> {
        Err(Error::Unsupported(
            "ensemble-mean predictor is read-only; fit its members instead".into(),
        ))
    }

    fn clone_fresh(&self, seed: u64) -> Box<dyn ValueApproximator> {
        let members = self
            .members
            .iter()
            .enumerate()
            .map(|(i, m)| m.clone_fresh(crate::rng::derive_seed(seed, i as u64)))
            .collect();
        Box::new(EnsembleMeanApprox::new(members))
    }

    fn checkpoint(&self) -> Checkpoint {
        Checkpoint::EnsembleMean {
            members: self.members.iter().map(|m| m.checkpoint()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_rejects_mismatched_state_space() {
        let discrete = StateSpace::Discrete { count: 5 };
        let planar = StateSpace::Box2 {
            lo: [0.0, 0.0],
            hi: [1.0, 1.0],
        };
        assert!(ApproxSpec::Tabular.build(&planar, 0).is_err());
        assert!(ApproxSpec::grid_default().build(&discrete, 0).is_err());
        assert!(ApproxSpec::mlp_default().build(&discrete, 0).is_err());
        assert!(ApproxSpec::Tabular.build(&discrete, 0).is_ok());
    }

    #[test]
    fn checkpoint_round_trip_through_file() {
        let mut approx = TabularApprox::new();
        approx
            .fit(
                &[State::Discrete(3), State::Discrete(3), State::Discrete(7)],
                &[1.0, 3.0, -2.0],
                0,
            )
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.json");
        approx.checkpoint().save(&path).unwrap();
        let restored = Checkpoint::load(&path).unwrap().restore().unwrap();
        assert_eq!(restored.predict(&State::Discrete(3)), 2.0);
        assert_eq!(restored.predict(&State::Discrete(7)), -2.0);
        assert_eq!(restored.predict(&State::Discrete(0)), 0.0);
    }
}
