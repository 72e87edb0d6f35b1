//! Tabular value functions over discrete state ids.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::mdp::State;

use super::{validate_fit_input, Checkpoint, ValueApproximator};

fn state_id(state: &State) -> usize {
    state
        .discrete_id()
        .expect("tabular approximator takes discrete states")
}

/// One value per visited state id; unvisited states predict 0. `fit` is the
/// exact least-squares minimizer: each state's value becomes the mean of the
/// targets supplied for it in that call.
#[derive(Debug, Clone, Default)]
pub struct TabularApprox {
    values: BTreeMap<usize, f64>,
    counts: BTreeMap<usize, u64>,
}

impl TabularApprox {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn visit_count(&self, id: usize) -> u64 {
        self.counts.get(&id).copied().unwrap_or(0)
    }

    pub(super) fn from_checkpoint(
        state_ids: &[usize],
        counts: &[u64],
        params: &[f64],
    ) -> Result<Self> {
        if state_ids.len() != params.len() || state_ids.len() != counts.len() {
            return Err(crate::error::Error::Checkpoint(
                "tabular checkpoint length mismatch".into(),
            ));
        }
        Ok(Self {
            values: state_ids.iter().copied().zip(params.iter().copied()).collect(),
            counts: state_ids.iter().copied().zip(counts.iter().copied()).collect(),
        })
    }
}

impl ValueApproximator for TabularApprox {
    fn predict(&self, state: &State) -> f64 {
        self.values.get(&state_id(state)).copied().unwrap_or(0.0)
    }

    fn fit(&mut self, states: &[State], targets: &[f64], _budget: usize) -> Result<()> {
        validate_fit_input(states, targets)?;
        let mut sums: BTreeMap<usize, (f64, u64)> = BTreeMap::new();
        for (state, &target) in states.iter().zip(targets) {
            let entry = sums.entry(state_id(state)).or_insert((0.0, 0));
            entry.0 += target;
            entry.1 += 1;
        }
        for (id, (sum, n)) in sums {
            self.values.insert(id, sum / n as f64);
            *self.counts.entry(id).or_insert(0) += n;
        }
        Ok(())
    }

    fn clone_fresh(&self, _seed: u64) -> Box<dyn ValueApproximator> {
        Box::new(TabularApprox::new())
    }

    fn checkpoint(&self) -> Checkpoint {
        Checkpoint::Tabular {
            state_ids: self.values.keys().copied().collect(),
            counts: self.values.keys().map(|id| self.visit_count(*id)).collect(),
            params: self.values.values().copied().collect(),
        }
    }
}

/// Tabular approximator whose predictions on a clamp set are pinned to fixed
/// values no matter what is fitted — a stand-in for a hypothesis class that
/// cannot represent certain states correctly.
#[derive(Debug, Clone, Default)]
pub struct BiasedTabularApprox {
    inner: TabularApprox,
    clamps: BTreeMap<usize, f64>,
}

impl BiasedTabularApprox {
    pub fn new(clamps: BTreeMap<usize, f64>) -> Self {
        Self {
            inner: TabularApprox::new(),
            clamps,
        }
    }

    pub fn clamps(&self) -> &BTreeMap<usize, f64> {
        &self.clamps
    }

    pub(super) fn from_checkpoint(
        clamps: &[(usize, f64)],
        state_ids: &[usize],
        counts: &[u64],
        params: &[f64],
    ) -> Result<Self> {
        Ok(Self {
            inner: TabularApprox::from_checkpoint(state_ids, counts, params)?,
            clamps: clamps.iter().copied().collect(),
        })
    }
}

impl ValueApproximator for BiasedTabularApprox {
    fn predict(&self, state: &State) -> f64 {
        match self.clamps.get(&state_id(state)) {
            Some(&forced) => forced,
            None => self.inner.predict(state),
        }
    }

    fn fit(&mut self, states: &[State], targets: &[f64], budget: usize) -> Result<()> {
        self.inner.fit(states, targets, budget)
    }

    fn clone_fresh(&self, _seed: u64) -> Box<dyn ValueApproximator> {
        Box::new(BiasedTabularApprox::new(self.clamps.clone()))
    }

    fn checkpoint(&self) -> Checkpoint {
        match self.inner.checkpoint() {
            Checkpoint::Tabular {
                state_ids,
                counts,
                params,
            } => Checkpoint::BiasedTabular {
                clamps: self.clamps.iter().map(|(&k, &v)| (k, v)).collect(),
                state_ids,
                counts,
                params,
            },
            _ => unreachable!(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn fit_sets_cell_means() {
        let mut approx = TabularApprox::new();
        approx
            .fit(&[State::Discrete(3), State::Discrete(3)], &[1.0, 3.0], 0)
            .unwrap();
        assert_eq!(approx.predict(&State::Discrete(3)), 2.0);
        assert_eq!(approx.predict(&State::Discrete(4)), 0.0);
        assert_eq!(approx.visit_count(3), 2);
    }

    #[test]
    fn refit_overwrites_with_new_means() {
        let mut approx = TabularApprox::new();
        approx.fit(&[State::Discrete(0)], &[10.0], 0).unwrap();
        approx.fit(&[State::Discrete(0)], &[4.0], 0).unwrap();
        assert_eq!(approx.predict(&State::Discrete(0)), 4.0);
        assert_eq!(approx.visit_count(0), 2);
    }

    #[test]
    fn per_cell_residuals_sum_to_zero() {
        let mut approx = TabularApprox::new();
        let states: Vec<State> = [0, 1, 0, 1, 0].iter().map(|&i| State::Discrete(i)).collect();
        let targets = [1.0, -2.0, 5.0, 4.0, 0.5];
        approx.fit(&states, &targets, 0).unwrap();
        let mut residual = [0.0f64; 2];
        for (s, &t) in states.iter().zip(&targets) {
            residual[s.discrete_id().unwrap()] += t - approx.predict(s);
        }
        assert!(residual[0].abs() < 1e-12);
        assert!(residual[1].abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_bad_input() {
        let mut approx = TabularApprox::new();
        assert!(matches!(approx.fit(&[], &[], 0), Err(Error::EmptyFit)));
        assert!(matches!(
            approx.fit(&[State::Discrete(0)], &[f64::NAN], 0),
            Err(Error::NonFiniteTarget(_))
        ));
        assert!(matches!(
            approx.fit(&[State::Discrete(0)], &[1.0, 2.0], 0),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn clamped_states_ignore_training() {
        let mut approx = BiasedTabularApprox::new([(5, 1.5)].into_iter().collect());
        approx
            .fit(&[State::Discrete(5), State::Discrete(6)], &[100.0, 100.0], 0)
            .unwrap();
        assert_eq!(approx.predict(&State::Discrete(5)), 1.5);
        assert_eq!(approx.predict(&State::Discrete(6)), 100.0);
    }

    #[test]
    fn clone_fresh_resets_table_but_keeps_clamps() {
        let mut approx = BiasedTabularApprox::new([(1, 9.0)].into_iter().collect());
        approx.fit(&[State::Discrete(0)], &[3.0], 0).unwrap();
        let fresh = approx.clone_fresh(0);
        assert_eq!(fresh.predict(&State::Discrete(0)), 0.0);
        assert_eq!(fresh.predict(&State::Discrete(1)), 9.0);
    }
}
