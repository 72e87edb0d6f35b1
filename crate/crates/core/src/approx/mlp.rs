//! Minimal fully-connected ReLU network with its own backpropagation and
//! Adam optimizer, sized for 2-d state inputs.
//!
//! Parameters live in one flat vector laid out layer by layer (row-major
//! weights, then biases), which keeps the optimizer, checkpointing, and the
//! finite-difference tests straightforward.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::State;

use super::{validate_fit_input, Checkpoint, ValueApproximator};

/// Architecture and optimizer hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: vec![50, 50],
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 512,
        }
    }
}

impl MlpConfig {
    fn validate(&self) -> Result<()> {
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::InvalidConfig("hidden layer of width 0".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning rate must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidConfig("betas must be in [0,1)".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be >= 1".into()));
        }
        Ok(())
    }
}

const INPUT_DIM: usize = 2;

pub struct MlpApprox {
    cfg: MlpConfig,
    /// Layer widths, input to output: `[2, hidden..., 1]`.
    sizes: Vec<usize>,
    params: Vec<f64>,
    adam_m: Vec<f64>,
    adam_v: Vec<f64>,
    adam_step: u64,
    /// Input scaling box: coordinates map affinely onto [-1, 1]^2.
    lo: [f64; 2],
    hi: [f64; 2],
    seed: u64,
    rng: ChaCha8Rng,
}

impl MlpApprox {
    pub fn new(cfg: MlpConfig, lo: [f64; 2], hi: [f64; 2], seed: u64) -> Result<Self> {
        cfg.validate()?;
        if hi[0] <= lo[0] || hi[1] <= lo[1] {
            return Err(Error::InvalidConfig(format!(
                "degenerate input box lo={lo:?} hi={hi:?}"
            )));
        }
        let mut sizes = Vec::with_capacity(cfg.hidden.len() + 2);
        sizes.push(INPUT_DIM);
        sizes.extend_from_slice(&cfg.hidden);
        sizes.push(1);
        let n_params: usize = sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; n_params];
        let mut offset = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in params[offset..offset + fan_out * fan_in].iter_mut() {
                *p = (rng.random::<f64>() * 2.0 - 1.0) * bound;
            }
            offset += fan_out * fan_in + fan_out; // biases stay zero
        }
        Ok(Self {
            cfg,
            sizes,
            adam_m: vec![0.0; n_params],
            adam_v: vec![0.0; n_params],
            adam_step: 0,
            params,
            lo,
            hi,
            seed,
            rng,
        })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.cfg
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params_flat(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} params, got {}",
                self.params.len(),
                params.len()
            )));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    pub(super) fn from_checkpoint(
        cfg: MlpConfig,
        lo: [f64; 2],
        hi: [f64; 2],
        seed: u64,
        params: &[f64],
    ) -> Result<Self> {
        let mut mlp = Self::new(cfg, lo, hi, seed)?;
        if params.len() != mlp.params.len() {
            return Err(Error::Checkpoint("mlp checkpoint length mismatch".into()));
        }
        mlp.params.copy_from_slice(params);
        Ok(mlp)
    }

    fn scale_input(&self, state: &State) -> [f64; 2] {
        let [x, y] = state.coords().expect("mlp takes coordinate states");
        [
            2.0 * (x - self.lo[0]) / (self.hi[0] - self.lo[0]) - 1.0,
            2.0 * (y - self.lo[1]) / (self.hi[1] - self.lo[1]) - 1.0,
        ]
    }

    /// Forward pass returning per-layer pre-activations; `acts[l]` is the
    /// activation entering layer l's weights.
    fn forward_trace(&self, input: [f64; 2]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let depth = self.sizes.len() - 1;
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(depth + 1);
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(depth);
        acts.push(input.to_vec());
        let mut offset = 0;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + n_out * n_in];
            let biases = &self.params[offset + n_out * n_in..offset + n_out * n_in + n_out];
            let prev = &acts[l];
            let mut z = vec![0.0; n_out];
            for o in 0..n_out {
                let row = &weights[o * n_in..(o + 1) * n_in];
                let mut sum = biases[o];
                for i in 0..n_in {
                    sum += row[i] * prev[i];
                }
                z[o] = sum;
            }
            let a = if l + 1 == depth {
                z.clone() // linear output layer
            } else {
                z.iter().map(|&v| v.max(0.0)).collect()
            };
            zs.push(z);
            acts.push(a);
            offset += n_out * n_in + n_out;
        }
        (acts, zs)
    }

    /// Mean squared error over the batch and its exact gradient with respect
    /// to every parameter, in flat layout.
    pub fn loss_and_gradient(&self, states: &[State], targets: &[f64]) -> (f64, Vec<f64>) {
        assert_eq!(states.len(), targets.len());
        let batch = states.len() as f64;
        let depth = self.sizes.len() - 1;
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        for (state, &target) in states.iter().zip(targets) {
            let (acts, zs) = self.forward_trace(self.scale_input(state));
            let y = acts[depth][0];
            let err = y - target;
            loss += err * err / batch;
            // Output delta of the mean-over-batch MSE.
            let mut delta = vec![2.0 * err / batch];
            let mut offset_end = self.params.len();
            for l in (0..depth).rev() {
                let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
                let offset = offset_end - (n_out * n_in + n_out);
                {
                    let prev = &acts[l];
                    for o in 0..n_out {
                        grad[offset + n_out * n_in + o] += delta[o];
                        let g_row = &mut grad[offset + o * n_in..offset + (o + 1) * n_in];
                        for i in 0..n_in {
                            g_row[i] += delta[o] * prev[i];
                        }
                    }
                }
                if l > 0 {
                    let weights = &self.params[offset..offset + n_out * n_in];
                    let mut next_delta = vec![0.0; n_in];
                    for (i, nd) in next_delta.iter_mut().enumerate() {
                        let mut sum = 0.0;
                        for o in 0..n_out {
                            sum += weights[o * n_in + i] * delta[o];
                        }
                        // a_l = relu(z_l) on hidden layers.
                        *nd = if zs[l - 1][i] > 0.0 { sum } else { 0.0 };
                    }
                    delta = next_delta;
                }
                offset_end = offset;
            }
        }
        (loss, grad)
    }

    fn adam_update(&mut self, grad: &[f64]) {
        self.adam_step += 1;
        let t = self.adam_step as i32;
        let (b1, b2) = (self.cfg.beta1, self.cfg.beta2);
        let bias1 = 1.0 - b1.powi(t);
        let bias2 = 1.0 - b2.powi(t);
        for i in 0..self.params.len() {
            let g = grad[i];
            self.adam_m[i] = b1 * self.adam_m[i] + (1.0 - b1) * g;
            self.adam_v[i] = b2 * self.adam_v[i] + (1.0 - b2) * g * g;
            let m_hat = self.adam_m[i] / bias1;
            let v_hat = self.adam_v[i] / bias2;
            self.params[i] -= self.cfg.learning_rate * m_hat / (v_hat.sqrt() + self.cfg.epsilon);
        }
    }

    /// One optimizer step toward `targets`; exposed so tests can drive the
    /// optimizer directly.
    pub fn adam_step_toward(&mut self, states: &[State], targets: &[f64]) -> f64 {
        let (loss, grad) = self.loss_and_gradient(states, targets);
        self.adam_update(&grad);
        loss
    }
}

impl ValueApproximator for MlpApprox {
    fn predict(&self, state: &State) -> f64 {
        let (acts, _) = self.forward_trace(self.scale_input(state));
        acts[self.sizes.len() - 1][0]
    }

    fn fit(&mut self, states: &[State], targets: &[f64], budget: usize) -> Result<()> {
        validate_fit_input(states, targets)?;
        let n = states.len();
        let batch = self.cfg.batch_size.min(n);
        let mut indices: Vec<usize> = (0..n).collect();
        let mut batch_states = Vec::with_capacity(batch);
        let mut batch_targets = Vec::with_capacity(batch);
        for _ in 0..budget {
            batch_states.clear();
            batch_targets.clear();
            if batch == n {
                batch_states.extend_from_slice(states);
                batch_targets.extend_from_slice(targets);
            } else {
                // Partial Fisher-Yates: `batch` distinct uniform indices.
                for j in 0..batch {
                    let pick = j + self.rng.random_range(0..n - j);
                    indices.swap(j, pick);
                    batch_states.push(states[indices[j]]);
                    batch_targets.push(targets[indices[j]]);
                }
            }
            let (_, grad) = self.loss_and_gradient(&batch_states, &batch_targets);
            self.adam_update(&grad);
            if let Some(&bad) = self.params.iter().find(|p| !p.is_finite()) {
                return Err(Error::NumericFailure(format!(
                    "mlp parameter became non-finite ({bad}) at adam step {}",
                    self.adam_step
                )));
            }
        }
        Ok(())
    }

    fn clone_fresh(&self, seed: u64) -> Box<dyn ValueApproximator> {
        Box::new(
            MlpApprox::new(self.cfg.clone(), self.lo, self.hi, seed)
                .expect("config already validated"),
        )
    }

    fn checkpoint(&self) -> Checkpoint {
        Checkpoint::Mlp {
            config: self.cfg.clone(),
            lo: self.lo,
            hi: self.hi,
            seed: self.seed,
            params: self.params.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_mlp(hidden: &[usize], seed: u64) -> MlpApprox {
        let cfg = MlpConfig {
            hidden: hidden.to_vec(),
            batch_size: 8,
            ..MlpConfig::default()
        };
        MlpApprox::new(cfg, [-1.0, -1.0], [1.0, 1.0], seed).unwrap()
    }

    #[test]
    fn zero_gradient_adam_step_is_a_no_op() {
        let mut mlp = small_mlp(&[4], 3);
        let before = mlp.params_flat().to_vec();
        let grad = vec![0.0; mlp.num_params()];
        mlp.adam_update(&grad);
        assert_eq!(mlp.params_flat(), &before[..]);
    }

    #[test]
    fn zero_weights_zero_targets_give_zero_gradient() {
        let mut mlp = small_mlp(&[4], 0);
        let zeros = vec![0.0; mlp.num_params()];
        mlp.set_params_flat(&zeros).unwrap();
        let states = [State::Coords([0.3, -0.2]), State::Coords([-0.7, 0.9])];
        let (loss, grad) = mlp.loss_and_gradient(&states, &[0.0, 0.0]);
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn single_linear_unit_matches_hand_chain_rule() {
        // Architecture 2 -> 1 -> 1. Wire the input weight row to (w1, w2),
        // hidden bias 0, output weight u, output bias 0. For positive
        // pre-activation h = w.x the prediction is u*h, and with one sample
        // the loss (y - t)^2 has gradients:
        //   dL/du = 2(y - t) * h,  dL/dw_i = 2(y - t) * u * x_i.
        let cfg = MlpConfig {
            hidden: vec![1],
            batch_size: 1,
            ..MlpConfig::default()
        };
        let mut mlp = MlpApprox::new(cfg, [-1.0, -1.0], [1.0, 1.0], 0).unwrap();
        // Layout: [w1, w2, b_h, u, b_y]
        mlp.set_params_flat(&[0.5, -0.25, 0.0, 2.0, 0.0]).unwrap();
        let x = [0.4, 0.4]; // already in [-1,1]: scaling is identity for this box
        let h = 0.5 * x[0] - 0.25 * x[1];
        assert!(h > 0.0);
        let y = 2.0 * h;
        let t = -1.0;
        let (loss, grad) = mlp.loss_and_gradient(&[State::Coords(x)], &[t]);
        let d = 2.0 * (y - t);
        assert!((loss - (y - t) * (y - t)).abs() < 1e-12);
        assert!((grad[0] - d * 2.0 * x[0]).abs() < 1e-12, "dL/dw1");
        assert!((grad[1] - d * 2.0 * x[1]).abs() < 1e-12, "dL/dw2");
        assert!((grad[2] - d * 2.0).abs() < 1e-12, "dL/db_h");
        assert!((grad[3] - d * h).abs() < 1e-12, "dL/du");
        assert!((grad[4] - d).abs() < 1e-12, "dL/db_y");
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut mlp = small_mlp(&[3, 4], 17);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let states: Vec<State> = (0..6)
            .map(|_| State::Coords([rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0]))
            .collect();
        let targets: Vec<f64> = (0..6).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let (_, grad) = mlp.loss_and_gradient(&states, &targets);
        let h = 1e-5;
        let base = mlp.params_flat().to_vec();
        for i in 0..base.len() {
            let mut plus = base.clone();
            plus[i] += h;
            mlp.set_params_flat(&plus).unwrap();
            let (lp, _) = mlp.loss_and_gradient(&states, &targets);
            let mut minus = base.clone();
            minus[i] -= h;
            mlp.set_params_flat(&minus).unwrap();
            let (lm, _) = mlp.loss_and_gradient(&states, &targets);
            let fd = (lp - lm) / (2.0 * h);
            let denom = grad[i].abs().max(fd.abs());
            if denom > 1e-8 {
                let rel = (grad[i] - fd).abs() / denom;
                assert!(rel < 1e-4, "param {i}: analytic {} vs fd {fd}", grad[i]);
            }
        }
        mlp.set_params_flat(&base).unwrap();
    }

    #[test]
    fn clone_fresh_changes_predictions_but_not_shape() {
        let mlp = small_mlp(&[5], 1);
        let fresh = mlp.clone_fresh(2);
        let probe = State::Coords([0.25, -0.5]);
        assert_ne!(mlp.predict(&probe), fresh.predict(&probe));
        match fresh.checkpoint() {
            Checkpoint::Mlp { params, .. } => assert_eq!(params.len(), mlp.num_params()),
            _ => panic!("wrong checkpoint kind"),
        }
    }

    #[test]
    fn fits_a_smooth_function() {
        // Regression sanity: training MSE well under the target variance.
        let cfg = MlpConfig {
            hidden: vec![16, 16],
            batch_size: 64,
            ..MlpConfig::default()
        };
        let mut mlp = MlpApprox::new(cfg, [-1.0, -1.0], [1.0, 1.0], 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut states = Vec::new();
        let mut targets = Vec::new();
        for _ in 0..256 {
            let x = rng.random::<f64>() * 2.0 - 1.0;
            let y = rng.random::<f64>() * 2.0 - 1.0;
            states.push(State::Coords([x, y]));
            targets.push(x * x + 0.5 * y);
        }
        mlp.fit(&states, &targets, 2000).unwrap();
        let mse: f64 = states
            .iter()
            .zip(&targets)
            .map(|(s, &t)| (mlp.predict(s) - t) * (mlp.predict(s) - t))
            .sum::<f64>()
            / states.len() as f64;
        let mean = targets.iter().sum::<f64>() / targets.len() as f64;
        let var = targets.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / targets.len() as f64;
        assert!(mse < 0.01 * var, "mse {mse} not below 1% of variance {var}");
    }
}
