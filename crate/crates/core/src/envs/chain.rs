//! Branching chain MDP with a single noisy terminal reward.
//!
//! From the initial state `s0`, each of `k` actions deterministically reaches
//! one of the intermediate states `s_1..s_k`. The first `p` of those funnel
//! into bottleneck `b1`, the rest into `b2`; both lead to `q`, whose single
//! outgoing transition emits `R ~ N(mu, sigma^2)` and ends the episode. Under
//! the uniform policy with gamma = 1 the true value of every non-terminal
//! state is `mu`, while only ~n/k of n episodes pass through each
//! intermediate state — the setting where bootstrapped estimates cut
//! estimator variance by a factor of k.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Environment, State, StateSpace, UniformPolicy};

/// Configuration of the chain MDP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// Branch count (actions available at `s0`); must exceed 1.
    pub k: usize,
    /// Count of intermediate states routed to `b1` (the rest go to `b2`).
    pub p: usize,
    /// Mean of the terminal reward.
    pub mu: f64,
    /// Standard deviation of the terminal reward.
    pub sigma: f64,
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidConfig(format!("k must be > 1, got {}", self.k)));
        }
        if self.p == 0 || self.p >= self.k {
            return Err(Error::InvalidConfig(format!(
                "p must satisfy 1 <= p < k, got p={} k={}",
                self.p, self.k
            )));
        }
        if !(self.sigma >= 0.0) || !self.mu.is_finite() {
            return Err(Error::InvalidConfig("mu must be finite and sigma >= 0".into()));
        }
        Ok(())
    }
}

/// State-id layout: `s0` = 0, `s_i` = i for 1..=k, then `b1`, `b2`, `q`, `end`.
#[derive(Debug, Clone)]
pub struct ChainEnv {
    cfg: ChainConfig,
}

impl ChainEnv {
    pub fn new(cfg: ChainConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &ChainConfig {
        &self.cfg
    }

    pub fn s0(&self) -> usize {
        0
    }

    pub fn b1(&self) -> usize {
        self.cfg.k + 1
    }

    pub fn b2(&self) -> usize {
        self.cfg.k + 2
    }

    pub fn q(&self) -> usize {
        self.cfg.k + 3
    }

    pub fn end(&self) -> usize {
        self.cfg.k + 4
    }

    pub fn num_states(&self) -> usize {
        self.cfg.k + 5
    }

    /// Intermediate states `s_1..s_k`, the set MSVE is reported on.
    pub fn intermediate_states(&self) -> Vec<State> {
        (1..=self.cfg.k).map(State::Discrete).collect()
    }

    /// The uniform reference policy over the k branch actions.
    pub fn reference_policy(&self) -> UniformPolicy {
        UniformPolicy {
            num_actions: self.cfg.k,
        }
    }
}

impl Environment for ChainEnv {
    fn id(&self) -> String {
        format!(
            "chain_k{}_p{}_mu{}_sigma{}",
            self.cfg.k, self.cfg.p, self.cfg.mu, self.cfg.sigma
        )
    }

    fn discount(&self) -> f64 {
        1.0
    }

    fn num_actions(&self) -> usize {
        self.cfg.k
    }

    fn state_space(&self) -> StateSpace {
        StateSpace::Discrete {
            count: self.num_states(),
        }
    }

    fn initial_state(&self, _rng: &mut dyn RngCore) -> State {
        State::Discrete(0)
    }

    fn step(&self, state: &State, action: usize, rng: &mut dyn RngCore) -> (State, f64, bool) {
        let id = state
            .discrete_id()
            .expect("chain env takes discrete states");
        let k = self.cfg.k;
        if id == 0 {
            // Action i at s0 reaches s_{i+1}; only this state reads the action.
            let branch = 1 + action.min(k - 1);
            (State::Discrete(branch), 0.0, false)
        } else if (1..=k).contains(&id) {
            let bottleneck = if id <= self.cfg.p { self.b1() } else { self.b2() };
            (State::Discrete(bottleneck), 0.0, false)
        } else if id == self.b1() || id == self.b2() {
            (State::Discrete(self.q()), 0.0, false)
        } else if id == self.q() {
            let reward = if self.cfg.sigma > 0.0 {
                let normal = Normal::new(self.cfg.mu, self.cfg.sigma)
                    .expect("validated sigma is non-negative");
                normal.sample(rng)
            } else {
                let _ = rng.random::<f64>(); // keep stream alignment with sigma > 0
                self.cfg.mu
            };
            (State::Discrete(self.end()), reward, true)
        } else {
            // Stepping the terminal state is a no-op.
            (State::Discrete(self.end()), 0.0, true)
        }
    }

    fn true_value(&self, state: &State) -> Option<f64> {
        let id = state.discrete_id()?;
        if id == self.end() {
            Some(0.0)
        } else if id < self.num_states() {
            Some(self.cfg.mu)
        } else {
            None
        }
    }

    fn eval_states(&self) -> Option<Vec<State>> {
        Some(self.intermediate_states())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::collect_trajectories;

    fn cfg(k: usize, p: usize, mu: f64, sigma: f64) -> ChainConfig {
        ChainConfig { k, p, mu, sigma }
    }

    #[test]
    fn rejects_invalid_configs() {
        assert!(ChainEnv::new(cfg(1, 1, 0.0, 1.0)).is_err());
        assert!(ChainEnv::new(cfg(4, 0, 0.0, 1.0)).is_err());
        assert!(ChainEnv::new(cfg(4, 4, 0.0, 1.0)).is_err());
        assert!(ChainEnv::new(cfg(4, 2, 0.0, -1.0)).is_err());
    }

    #[test]
    fn every_trajectory_is_four_steps_through_the_chain() {
        let env = ChainEnv::new(cfg(4, 2, 0.0, 1.0)).unwrap();
        let policy = env.reference_policy();
        let data = collect_trajectories(&env, &policy, 3, 100, 11).unwrap();
        assert_eq!(data.len(), 3);
        for traj in &data.trajectories {
            assert_eq!(traj.len(), 4);
            let ids: Vec<usize> = traj
                .transitions
                .iter()
                .map(|t| t.state.discrete_id().unwrap())
                .collect();
            assert_eq!(ids[0], 0);
            assert!((1..=4).contains(&ids[1]));
            assert!(ids[2] == env.b1() || ids[2] == env.b2());
            assert_eq!(ids[3], env.q());
            assert!(traj.transitions[3].terminal);
            // Branch routing: s_i with i <= p goes through b1.
            let expected = if ids[1] <= 2 { env.b1() } else { env.b2() };
            assert_eq!(ids[2], expected);
        }
    }

    #[test]
    fn deterministic_reward_means_constant_returns() {
        let env = ChainEnv::new(cfg(4, 2, 5.0, 0.0)).unwrap();
        let policy = env.reference_policy();
        let data = collect_trajectories(&env, &policy, 10, 100, 3).unwrap();
        for traj in &data.trajectories {
            let total: f64 = traj.transitions.iter().map(|t| t.reward).sum();
            assert_eq!(total, 5.0);
        }
    }

    #[test]
    fn branch_visits_are_roughly_uniform() {
        // Binomial counts: n/k +- 3*sqrt(n/k) per branch at n=10000, k=10.
        let env = ChainEnv::new(cfg(10, 5, 0.0, 1.0)).unwrap();
        let policy = env.reference_policy();
        let data = collect_trajectories(&env, &policy, 10_000, 100, 202).unwrap();
        let mut counts = vec![0usize; 11];
        for traj in &data.trajectories {
            counts[traj.transitions[1].state.discrete_id().unwrap()] += 1;
        }
        let expected = 1000.0f64;
        let band = 3.0 * expected.sqrt();
        for &c in &counts[1..=10] {
            assert!(
                (c as f64 - expected).abs() <= band,
                "branch count {c} outside {expected} +- {band}"
            );
        }
    }

    #[test]
    fn true_value_is_mu_everywhere() {
        let env = ChainEnv::new(cfg(4, 2, 3.5, 1.0)).unwrap();
        for id in 0..env.num_states() - 1 {
            assert_eq!(env.true_value(&State::Discrete(id)), Some(3.5));
        }
        assert_eq!(env.true_value(&State::Discrete(env.end())), Some(0.0));
    }
}
