//! Policy-evaluation benchmark toolkit.
//!
//! Estimates state-value functions of a fixed policy from batches of
//! simulated trajectories and scores the estimates against sampled or
//! analytic ground truth. Five evaluators share one interface: Monte Carlo
//! regression, an ensemble of Monte Carlo regressors, one-step bootstrapped
//! TD, forward-view TD(lambda), and an adaptive algorithm that accepts each
//! bootstrapped target only when it falls inside an ensemble-based
//! predictive interval of the Monte Carlo return.
//!
//! The crate is organized around the experiment pipeline:
//! [`mdp`] (environments, trajectories, datasets), [`envs`] (the chain MDP,
//! labyrinth maps, mountain car), [`approx`] (tabular/grid/MLP value
//! functions), [`targets`] (return constructors), [`confidence`] (ensembles
//! and Student-t intervals), [`adaptive`] (the evaluators), and [`eval`]
//! (ground truth, MSVE, normalization, sweeps).

pub mod adaptive;
pub mod approx;
pub mod confidence;
pub mod envs;
pub mod error;
pub mod eval;
pub mod mdp;
pub mod rng;
pub mod targets;

pub use adaptive::{
    evaluate, run_adaptive_td, run_baseline, select_target, Algorithm, EpochStats, EvalRun,
    EvaluatorConfig, Fallback, RunArtifact, WidthLimit,
};
pub use approx::{
    ApproxSpec, BiasedTabularApprox, Checkpoint, EnsembleMeanApprox, GridApprox, MlpApprox,
    MlpConfig, TabularApprox, ValueApproximator,
};
pub use confidence::{t_quantile, train_ensemble, ConfidenceFunction, Ensemble};
pub use error::{Error, Result};
pub use eval::{
    estimate_ground_truth, msve, normalize_by_max, normalize_minmax, violation_map, CellLabel,
    GridSpec, GroundTruth, Reference, ViolationMap,
};
pub use mdp::{
    collect_trajectories, discounted_return, read_dataset_jsonl, rollout_return,
    write_dataset_jsonl, Dataset, Environment, Policy, State, StateSpace, Trajectory, Transition,
    UniformPolicy,
};
pub use targets::{
    lambda_target_set, lambda_targets, mc_targets, mc_targets_with_tail, td0_target, TargetEntry,
    TargetSet, TruncationTail,
};
