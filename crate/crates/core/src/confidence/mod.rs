//! Ensembles trained on Monte Carlo targets and the predictive intervals
//! built from them.
//!
//! Member predictions at a state are treated as i.i.d. draws from a Gaussian
//! with unknown mean and variance; the interval for a hypothetical next draw
//! is then mean +- z * s * sqrt(1 + 1/m), with z the two-sided Student-t
//! quantile at the configured confidence level and m - 1 degrees of freedom.
//! A one-step bootstrapped target that should "look like another Monte Carlo
//! sample" can be tested for membership in that interval.

mod student_t;

pub use student_t::{ln_gamma, reg_inc_beta, t_cdf, t_quantile};

use rand::Rng;

use crate::approx::{Checkpoint, ValueApproximator};
use crate::error::{Error, Result};
use crate::mdp::{Dataset, State};
use crate::rng::{derive_seed, stream_rng};
use crate::targets::mc_targets;

/// A factory producing freshly initialized approximators from a seed.
pub type ApproxFactory<'a> = dyn Fn(u64) -> Result<Box<dyn ValueApproximator>> + 'a;

/// A set of independently trained value approximators.
pub struct Ensemble {
    members: Vec<Box<dyn ValueApproximator>>,
    /// Trajectory indices each member was fit on (identity when the data was
    /// not resampled).
    resamples: Vec<Vec<usize>>,
}

impl Ensemble {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn members(&self) -> &[Box<dyn ValueApproximator>] {
        &self.members
    }

    pub fn into_members(self) -> Vec<Box<dyn ValueApproximator>> {
        self.members
    }

    pub fn resample_indices(&self) -> &[Vec<usize>] {
        &self.resamples
    }

    pub fn member_predictions(&self, state: &State) -> Vec<f64> {
        self.members.iter().map(|m| m.predict(state)).collect()
    }

    pub fn mean(&self, state: &State) -> f64 {
        let sum: f64 = self.members.iter().map(|m| m.predict(state)).sum();
        sum / self.members.len() as f64
    }

    /// Ensemble mean and sample standard deviation (divisor m - 1).
    pub fn mean_and_std(&self, state: &State) -> (f64, f64) {
        let preds = self.member_predictions(state);
        let m = preds.len() as f64;
        let mean = preds.iter().sum::<f64>() / m;
        let ss: f64 = preds.iter().map(|v| (v - mean) * (v - mean)).sum();
        (mean, (ss / (m - 1.0)).sqrt())
    }

    pub fn checkpoints(&self) -> Vec<Checkpoint> {
        self.members.iter().map(|m| m.checkpoint()).collect()
    }
}

/// Trains `m` approximators on Monte Carlo targets.
///
/// With `bootstrap` set, each member sees its own rollout-level resample:
/// `n` trajectories drawn with replacement from the dataset. Members always
/// use independent initialization seeds.
pub fn train_ensemble(
    dataset: &Dataset,
    gamma: f64,
    m: usize,
    factory: &ApproxFactory<'_>,
    bootstrap: bool,
    budget: usize,
    seed: u64,
) -> Result<Ensemble> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!(
            "ensemble size must be >= 2, got {m}"
        )));
    }
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = dataset.len();
    let mut members = Vec::with_capacity(m);
    let mut resamples = Vec::with_capacity(m);
    for j in 0..m {
        let indices: Vec<usize> = if bootstrap {
            let mut rng = stream_rng(seed, 2 * j as u64);
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let member_data = Dataset {
            trajectories: indices
                .iter()
                .map(|&i| dataset.trajectories[i].clone())
                .collect(),
            env_id: dataset.env_id.clone(),
            policy_id: dataset.policy_id.clone(),
            seed: dataset.seed,
        };
        let targets = mc_targets(&member_data, gamma)?;
        let mut member = factory(derive_seed(seed, 2 * j as u64 + 1))?;
        member.fit(&targets.states(), &targets.targets(), budget)?;
        members.push(member);
        resamples.push(indices);
    }
    Ok(Ensemble { members, resamples })
}

/// What the interval half-width does at a state.
#[derive(Debug, Clone, Copy, PartialEq)]
enum WidthMode {
    /// z * s * sqrt(1 + 1/m) with the cached Student-t quantile.
    Student(f64),
    /// Intervals are infinitely wide: every bootstrapped target is accepted.
    Infinite,
    /// Intervals collapse to the ensemble mean.
    Zero,
}

/// Per-state predictive interval `(L(s), U(s))` at a confidence level.
pub struct ConfidenceFunction {
    ensemble: Ensemble,
    alpha: f64,
    width: WidthMode,
}

impl ConfidenceFunction {
    pub fn new(ensemble: Ensemble, alpha: f64) -> Result<Self> {
        let z = t_quantile(ensemble.size() - 1, alpha)?;
        Ok(Self {
            ensemble,
            alpha,
            width: WidthMode::Student(z),
        })
    }

    /// Forces infinitely wide intervals (the alpha -> 1 limit, where gated
    /// updates degenerate to plain bootstrapping).
    pub fn with_infinite_width(ensemble: Ensemble) -> Self {
        Self {
            ensemble,
            alpha: 1.0,
            width: WidthMode::Infinite,
        }
    }

    /// Collapses intervals to the ensemble mean (the alpha -> 0 limit, where
    /// every update regresses on the ensemble's Monte Carlo estimate).
    pub fn with_zero_width(ensemble: Ensemble) -> Self {
        Self {
            ensemble,
            alpha: 0.0,
            width: WidthMode::Zero,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    pub fn into_ensemble(self) -> Ensemble {
        self.ensemble
    }

    /// The cached quantile multiplier, when in the Student-t regime.
    pub fn z_quantile(&self) -> Option<f64> {
        match self.width {
            WidthMode::Student(z) => Some(z),
            _ => None,
        }
    }

    /// `(L(s), U(s))`; the midpoint is always the ensemble mean.
    pub fn interval(&self, state: &State) -> (f64, f64) {
        let (mean, sd) = self.ensemble.mean_and_std(state);
        let half = match self.width {
            WidthMode::Student(z) => {
                let m = self.ensemble.size() as f64;
                z * sd * (1.0 + 1.0 / m).sqrt()
            }
            WidthMode::Infinite => f64::INFINITY,
            WidthMode::Zero => 0.0,
        };
        (mean - half, mean + half)
    }

    pub fn mean(&self, state: &State) -> f64 {
        self.ensemble.mean(state)
    }
}
