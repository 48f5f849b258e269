//! Linear one-step extrapolation of parameter trajectories (exact DMD).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::predictor::Cycler;
use crate::vqe::{EnergyModel, Trajectory, VqeConfig};

/// Relative singular-value cutoff of the pseudo-inverse.
pub const PINV_RCOND: f64 = 1e-12;
/// Prediction norm above which a divergence warning is logged.
pub const DIVERGENCE_NORM: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct DmdModel {
    pub a: DMatrix<f64>,
}

/// `A = Y pinv(X)` over consecutive snapshot pairs, optionally truncated to
/// the leading `rank` singular values.
pub fn fit_dmd(snapshots: &[Vec<f64>], rank: Option<usize>) -> Result<DmdModel> {
    fit_dmd_multi(&[snapshots.to_vec()], rank)
}

/// Like [`fit_dmd`], pooling the consecutive pairs of several trajectories.
/// A single trajectory of a scalar-multiple map is rank one; pooling
/// independent starts is what makes full recovery of `A` possible.
pub fn fit_dmd_multi(trajectories: &[Vec<Vec<f64>>], rank: Option<usize>) -> Result<DmdModel> {
    let pairs: usize = trajectories.iter().map(|t| t.len().saturating_sub(1)).sum();
    if pairs == 0 {
        return Err(Error::InvalidConfig("DMD needs at least 2 snapshots".into()));
    }
    let p = trajectories.iter().find(|t| !t.is_empty()).map_or(0, |t| t[0].len());
    if let Some(s) = trajectories.iter().flatten().find(|s| s.len() != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: s.len(),
        });
    }
    let mut x = DMatrix::zeros(p, pairs);
    let mut y = DMatrix::zeros(p, pairs);
    let mut c = 0;
    for t in trajectories {
        for w in t.windows(2) {
            x.column_mut(c).copy_from_slice(&w[0]);
            y.column_mut(c).copy_from_slice(&w[1]);
            c += 1;
        }
    }
    fit_pairs(x, &y, rank)
}

fn fit_pairs(x: DMatrix<f64>, y: &DMatrix<f64>, rank: Option<usize>) -> Result<DmdModel> {
    let svd = x.svd(true, true);
    let (u, vt) = (svd.u.expect("requested U"), svd.v_t.expect("requested V^T"));
    let smax = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
    let keep = rank.unwrap_or(usize::MAX);
    let mut sinv = DVector::zeros(svd.singular_values.len());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if i < keep && s > PINV_RCOND * smax {
            sinv[i] = 1.0 / s;
        }
    }
    let pinv = vt.transpose() * DMatrix::from_diagonal(&sinv) * u.transpose();
    let a = y * pinv;
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("DMD operator"));
    }
    Ok(DmdModel { a })
}

/// `A^steps theta`.
pub fn predict_dmd(model: &DmdModel, theta: &[f64], steps: usize) -> Result<Vec<f64>> {
    if theta.len() != model.a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: model.a.ncols(),
            found: theta.len(),
        });
    }
    let mut v = DVector::from_column_slice(theta);
    let mut warned = false;
    for _ in 0..steps {
        v = &model.a * v;
        if !warned && v.norm() > DIVERGENCE_NORM {
            log::warn!("DMD prediction norm exceeds {DIVERGENCE_NORM:e}");
            warned = true;
        }
    }
    Ok(v.iter().copied().collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmdConfig {
    /// Gradient-descent steps per fit window.
    pub window: usize,
    pub rank: Option<usize>,
    /// Cap on predicted steps per cycle.
    pub max_steps: usize,
    pub max_cycles: usize,
}

impl Default for DmdConfig {
    fn default() -> Self {
        DmdConfig {
            window: 3,
            rank: None,
            max_steps: 2000,
            max_cycles: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmdOutcome {
    pub trajectory: Trajectory,
    pub cycles: usize,
}

/// Bursts of `window` quantum steps, each followed by a DMD extrapolation
/// whose every step is measured; extrapolation stops at the first energy
/// increase and the best point seen becomes the next start.
pub fn run_dmd(model: &dyn EnergyModel, theta0: Vec<f64>, vqe: &VqeConfig, cfg: &DmdConfig) -> Result<DmdOutcome> {
    if cfg.window < 1 || cfg.max_steps < 1 {
        return Err(Error::InvalidConfig("DMD window and max_steps must be >= 1".into()));
    }
    let mut cyc = Cycler::start(model, theta0, vqe)?;
    let mut cycles = 0;
    loop {
        let start = cyc.burst(cfg.window)?;
        if cyc.done || !cyc.budget_left() || cycles >= cfg.max_cycles {
            break;
        }
        let window = &cyc.traj.records[start..];
        if window.len() < 2 {
            break;
        }
        let snaps: Vec<Vec<f64>> = window.iter().map(|r| r.theta.clone()).collect();
        let model_a = fit_dmd(&snaps, cfg.rank)?;
        let end = cyc.traj.records.last().expect("nonempty").clone();
        let (mut best_theta, mut best_e) = (end.theta.clone(), end.energy);
        let mut theta = end.theta.clone();
        let mut prev_e = end.energy;
        for _ in 0..cfg.max_steps {
            if cyc.done || !cyc.budget_left() {
                break;
            }
            theta = predict_dmd(&model_a, &theta, 1)?;
            if theta.iter().any(|v| !v.is_finite()) {
                break;
            }
            let e = match cyc.measure(&theta) {
                Ok(e) => e,
                Err(Error::Diverged(_)) => break,
                Err(e) => return Err(e),
            };
            cyc.push_predicted(theta.clone(), e);
            if e < best_e {
                best_e = e;
                best_theta = theta.clone();
            }
            if e > prev_e {
                break;
            }
            prev_e = e;
        }
        cyc.push_restart(best_theta, best_e);
        cycles += 1;
        if cyc.done {
            break;
        }
    }
    Ok(DmdOutcome {
        trajectory: cyc.finish(),
        cycles,
    })
}
