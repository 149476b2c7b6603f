//! Adam with bias correction, operating on flat parameter slices.

use serde::{Deserialize, Serialize};

use super::DiffError;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First/second moment accumulators for one parameter slice.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub cfg: AdamConfig,
}

impl AdamState {
    pub fn new(len: usize, cfg: AdamConfig) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], step: 0, cfg }
    }
}

/// One Adam update in place. `step` must have been incremented by the
/// caller-facing wrapper before the bias correction applies; here we
/// bump it internally.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64]) -> Result<(), DiffError> {
    if params.len() != state.m.len() || grads.len() != state.m.len() {
        return Err(DiffError::ShapeMismatch {
            context: "adam_step",
            expected: (state.m.len(), 1),
            got: (params.len(), grads.len()),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let c = state.cfg;
    let bc1 = 1.0 - c.beta1.powi(t);
    let bc2 = 1.0 - c.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
        state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
    }
    Ok(())
}

/// Adam over a list of parameter slices sharing one step counter, for
/// stepping a whole model at once.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamOpt {
    pub states: Vec<AdamState>,
}

impl AdamOpt {
    pub fn new(slice_lens: &[usize], cfg: AdamConfig) -> Self {
        Self { states: slice_lens.iter().map(|&l| AdamState::new(l, cfg)).collect() }
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<(), DiffError> {
        if params.len() != self.states.len() || grads.len() != self.states.len() {
            return Err(DiffError::ShapeMismatch {
                context: "AdamOpt::step",
                expected: (self.states.len(), 1),
                got: (params.len(), grads.len()),
            });
        }
        for ((state, p), g) in self.states.iter_mut().zip(params.iter_mut()).zip(grads) {
            adam_step(state, p, g)?;
        }
        Ok(())
    }

    pub fn step_count(&self) -> u64 {
        self.states.first().map_or(0, |s| s.step)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_exactly_unchanged() {
        let mut st = AdamState::new(3, AdamConfig::default());
        let mut p = vec![1.0, -2.0, 0.5];
        let before = p.clone();
        for _ in 0..10 {
            adam_step(&mut st, &mut p, &[0.0, 0.0, 0.0]).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn constant_gradient_step_approaches_lr_sign() {
        let cfg = AdamConfig { lr: 1e-2, ..AdamConfig::default() };
        let mut st = AdamState::new(1, cfg);
        let mut p = vec![0.0];
        let g = [0.37];
        let mut prev = p[0];
        let mut last_step = 0.0;
        for _ in 0..2000 {
            adam_step(&mut st, &mut p, &g).unwrap();
            last_step = prev - p[0];
            prev = p[0];
        }
        // with constant g, m_hat -> g and v_hat -> g^2, so |step| -> lr
        assert!((last_step - cfg.lr).abs() < 1e-6, "step was {last_step}");
    }

    #[test]
    fn first_step_matches_hand_computed_bias_corrected_value() {
        let cfg = AdamConfig { lr: 0.1, beta1: 0.9, beta2: 0.999, eps: 1e-8 };
        let mut st = AdamState::new(1, cfg);
        let mut p = vec![2.0];
        let g = 0.8;
        adam_step(&mut st, &mut p, &[g]).unwrap();
        // m = 0.1*g, m_hat = m/(1-0.9) = g; v = 0.001*g^2, v_hat = g^2
        // update = lr * g / (|g| + eps)
        let expect = 2.0 - 0.1 * g / (g.abs() + 1e-8);
        assert!((p[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn mismatched_lengths_error() {
        let mut st = AdamState::new(2, AdamConfig::default());
        let mut p = vec![0.0; 3];
        assert!(adam_step(&mut st, &mut p, &[0.0; 3]).is_err());
    }
}
