use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::tensor::ParameterSet;

/// First/second moment estimates for ADAM, one slot per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &ParameterSet, lr: f64) -> Self {
        Self::with_betas(params, lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(params: &ParameterSet, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|(_, t)| vec![0.0; t.len()]).collect();
        AdamState {
            lr,
            beta1,
            beta2,
            eps,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self, idx: usize) -> &[f64] {
        &self.m[idx]
    }

    pub fn second_moment(&self, idx: usize) -> &[f64] {
        &self.v[idx]
    }

    /// One bias-corrected ADAM update. Gradients are read, not cleared.
    pub fn step(&mut self, params: &mut ParameterSet) -> Result<()> {
        check_grads(params)?;
        if params.len() != self.m.len() {
            return Err(Error::dim("adam_step", &[params.len()], &[self.m.len()]));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, (_, tensor)) in params.iter_mut().enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let g = tensor.grad().expect("checked above").to_vec();
            for (j, w) in tensor.data_mut().iter_mut().enumerate() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                *w -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Plain stochastic gradient descent.
#[derive(Clone, Debug, PartialEq)]
pub struct Sgd {
    pub lr: f64,
}

impl Sgd {
    pub fn step(&mut self, params: &mut ParameterSet) -> Result<()> {
        check_grads(params)?;
        for (_, tensor) in params.iter_mut() {
            let g = tensor.grad().expect("checked above").to_vec();
            for (w, gj) in tensor.data_mut().iter_mut().zip(g) {
                *w -= self.lr * gj;
            }
        }
        Ok(())
    }
}

fn check_grads(params: &ParameterSet) -> Result<()> {
    for (name, t) in params.iter() {
        match t.grad() {
            None => {
                return Err(Error::Contract(format!(
                    "parameter {name:?} has no gradient"
                )))
            }
            Some(g) if g.iter().any(|v| !v.is_finite()) => {
                return Err(Error::Contract(format!(
                    "parameter {name:?} has a non-finite gradient"
                )))
            }
            Some(_) => {}
        }
    }
    Ok(())
}

/// Optimizer selection for a training run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerConfig {
    Adam { lr: f64 },
    Sgd { lr: f64 },
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::Adam { lr: 1e-3 }
    }
}

#[derive(Clone, Debug)]
pub enum Optimizer {
    Adam(AdamState),
    Sgd(Sgd),
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, params: &ParameterSet) -> Self {
        match config {
            OptimizerConfig::Adam { lr } => Optimizer::Adam(AdamState::new(params, lr)),
            OptimizerConfig::Sgd { lr } => Optimizer::Sgd(Sgd { lr }),
        }
    }

    pub fn step(&mut self, params: &mut ParameterSet) -> Result<()> {
        match self {
            Optimizer::Adam(s) => s.step(params),
            Optimizer::Sgd(s) => s.step(params),
        }
    }
}
