//! Physics-informed surrogate of gradient-descent dynamics.
//!
//! The network maps `(t_hat, theta)` to `(E_hat, theta_next)`. Training
//! combines a data term with two residuals of the gradient flow:
//! `d theta_j/dt = -dE/d theta_j` and
//! `dE/dt = -|grad E|^2 + (eta/2) grad E^T H grad E`.

pub mod checkpoint;
pub mod jet;
pub mod loss;
pub mod mlp;
pub mod train;

pub use loss::{LossBreakdown, Sample, TrainingSet};
pub use mlp::MlpParams;
pub use train::{train, TrainReport};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PinnConfig {
    /// Hidden width; `None` means `50 p`.
    pub width: Option<usize>,
    pub hidden_layers: usize,
    pub lambda_d: f64,
    pub lambda_p1: f64,
    pub lambda_p2: f64,
    /// Learning rate of the quantum-side gradient descent.
    pub eta_vqe: f64,
    pub epochs: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    pub train_seed: u64,
    pub p2_enabled: bool,
    pub p1_per_component: bool,
}

impl Default for PinnConfig {
    fn default() -> Self {
        PinnConfig {
            width: None,
            hidden_layers: 2,
            lambda_d: 1e-4,
            lambda_p1: 1.0,
            lambda_p2: 1.0,
            eta_vqe: 0.05,
            epochs: 3400,
            lr_initial: 1e-3,
            lr_final: 1e-5,
            train_seed: 0,
            p2_enabled: true,
            p1_per_component: false,
        }
    }
}

impl PinnConfig {
    pub fn validate(&self) -> Result<()> {
        let lambdas = [self.lambda_d, self.lambda_p1, self.lambda_p2];
        if lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::InvalidConfig(format!("loss weights must be >= 0, got {lambdas:?}")));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if !(self.lr_final > 0.0 && self.lr_initial >= self.lr_final) {
            return Err(Error::InvalidConfig(format!(
                "need lr_initial >= lr_final > 0, got {} and {}",
                self.lr_initial, self.lr_final
            )));
        }
        if self.width == Some(0) {
            return Err(Error::InvalidConfig("width must be >= 1".into()));
        }
        if !(self.eta_vqe >= 0.0 && self.eta_vqe.is_finite()) {
            return Err(Error::InvalidConfig(format!("eta_vqe must be >= 0, got {}", self.eta_vqe)));
        }
        Ok(())
    }

    pub fn width_for(&self, p: usize) -> usize {
        self.width.unwrap_or(50 * p)
    }

    pub fn sizes_for(&self, p: usize) -> Vec<usize> {
        MlpParams::pinn_sizes(p + 1, self.width_for(p), self.hidden_layers)
    }

    /// Fresh `U[-1, 1]` network for `p` parameters, seeded by `train_seed`.
    pub fn init_network(&self, p: usize) -> Result<MlpParams> {
        MlpParams::uniform(&self.sizes_for(p), self.train_seed)
    }

    /// Linearly decayed learning rate for `epoch` in `0..epochs`.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            return self.lr_initial;
        }
        let f = epoch as f64 / (self.epochs - 1) as f64;
        self.lr_initial + (self.lr_final - self.lr_initial) * f
    }
}
