use super::loss::{loss_and_gradient, LossBreakdown, TrainingSet};
use super::mlp::MlpParams;
use super::PinnConfig;
use crate::error::{Error, Result};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub params: MlpParams,
    /// Loss components before each update.
    pub history: Vec<LossBreakdown>,
}

/// Full-batch Adam with linearly decayed learning rate.
pub fn train(w0: MlpParams, set: &TrainingSet, cfg: &PinnConfig) -> Result<TrainReport> {
    train_epochs(w0, set, cfg, cfg.epochs)
}

/// As [`train`] with an explicit epoch count (zero returns `w0`).
pub fn train_epochs(w0: MlpParams, set: &TrainingSet, cfg: &PinnConfig, epochs: usize) -> Result<TrainReport> {
    let mut w = w0;
    let n = w.num_entries();
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut history = Vec::with_capacity(epochs);
    let sched = PinnConfig {
        epochs: epochs.max(1),
        ..cfg.clone()
    };
    for epoch in 0..epochs {
        let (loss, grad) = loss_and_gradient(&w, set, cfg)?;
        if !loss.is_finite() {
            log::error!("non-finite PINN loss at epoch {epoch}: {loss:?}");
            return Err(Error::NonFinite("PINN loss"));
        }
        history.push(loss);
        let lr = sched.learning_rate(epoch);
        let t = (epoch + 1) as i32;
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        let g = grad.flat();
        for (i, x) in w.flat_mut().into_iter().enumerate() {
            m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
            v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
            let mh = m[i] / c1;
            let vh = v[i] / c2;
            *x -= lr * mh / (vh.sqrt() + ADAM_EPS);
        }
    }
    Ok(TrainReport { params: w, history })
}
