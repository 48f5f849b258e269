//! Data and PDE-residual losses with exact weight gradients.
//!
//! Per sample, one first-order pass with directions `e_0..e_p` yields the
//! output and the full input Jacobian. A second pass along `d = (0, g)`,
//! where `g` is the energy's theta-gradient, yields `g^T H g` without
//! forming `H`. Reverse passes through both jets give the weight gradient;
//! the second pass's direction cotangent is routed back into `g`.

use nalgebra::DMatrix;

use super::jet::{self, JetLayout};
use super::mlp::MlpParams;
use super::PinnConfig;
use crate::error::{Error, Result};
use crate::vqe::{TrajectoryRecord, DT};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t_hat: f64,
    pub theta: Vec<f64>,
    pub energy: f64,
    pub theta_next: Vec<f64>,
}

impl Sample {
    pub fn input(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.theta.len() + 1);
        x.push(self.t_hat);
        x.extend_from_slice(&self.theta);
        x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    samples: Vec<Sample>,
    p: usize,
}

impl TrainingSet {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        let p = samples.first().ok_or(Error::Empty("training set"))?.theta.len();
        for s in &samples {
            if s.theta.len() != p || s.theta_next.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: s.theta.len().max(s.theta_next.len()),
                });
            }
        }
        Ok(TrainingSet { samples, p })
    }

    /// Pairs record `j` with record `j + 1`, for `tau + 1` consecutive
    /// records. Scaled time restarts at `0.01` in every window.
    pub fn from_window(records: &[TrajectoryRecord]) -> Result<Self> {
        if records.len() < 2 {
            return Err(Error::Empty("training window"));
        }
        let samples = records
            .windows(2)
            .enumerate()
            .map(|(j, w)| Sample {
                t_hat: window_time(j),
                theta: w[0].theta.clone(),
                energy: w[0].energy,
                theta_next: w[1].theta.clone(),
            })
            .collect();
        Self::new(samples)
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_params(&self) -> usize {
        self.p
    }
}

/// Scaled time of the `j`-th sample in a window.
pub fn window_time(j: usize) -> f64 {
    (j + 1) as f64 * DT
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    pub data: f64,
    pub p1: f64,
    pub p2: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        self.data.is_finite() && self.p1.is_finite() && self.p2.is_finite() && self.total.is_finite()
    }
}

struct PassA {
    y: DMatrix<f64>,
    tape: jet::Tape,
    c: usize,
}

impl PassA {
    fn out(&self, s: usize, i: usize) -> f64 {
        self.y[(i, s * self.c)]
    }

    /// `d out_i / d in_j`.
    fn jac(&self, s: usize, i: usize, j: usize) -> f64 {
        self.y[(i, s * self.c + 1 + j)]
    }

    fn grad(&self, s: usize, p: usize) -> Vec<f64> {
        (1..=p).map(|j| self.jac(s, 0, j)).collect()
    }
}

fn check_dims(w: &MlpParams, set: &TrainingSet) -> Result<()> {
    let d = set.num_params() + 1;
    if w.input_dim() != d || w.output_dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: w.input_dim(),
        });
    }
    Ok(())
}

fn pass_a(w: &MlpParams, set: &TrainingSet) -> Result<PassA> {
    let d = set.num_params() + 1;
    let layout = JetLayout::first_order(d);
    let inputs: Vec<Vec<f64>> = set.samples.iter().map(Sample::input).collect();
    let points: Vec<&[f64]> = inputs.iter().map(|v| v.as_slice()).collect();
    let eye: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            e
        })
        .collect();
    let dirs = vec![eye; set.len()];
    let (y, tape) = jet::forward(w, jet::seed_jet(&points, &dirs, &layout), &layout)?;
    Ok(PassA { y, tape, c: layout.width() })
}

const B_LAYOUT_WIDTH: usize = 3;

fn pass_b_layout() -> JetLayout {
    JetLayout {
        directions: 1,
        pairs: vec![(0, 0)],
    }
}

/// `g^T H g` per sample, with the tape for the reverse pass.
fn pass_b(w: &MlpParams, set: &TrainingSet, a: &PassA) -> Result<(Vec<f64>, jet::Tape)> {
    let p = set.num_params();
    let layout = pass_b_layout();
    let inputs: Vec<Vec<f64>> = set.samples.iter().map(Sample::input).collect();
    let points: Vec<&[f64]> = inputs.iter().map(|v| v.as_slice()).collect();
    let dirs: Vec<Vec<Vec<f64>>> = (0..set.len())
        .map(|s| {
            let mut d = vec![0.0];
            d.extend(a.grad(s, p));
            vec![d]
        })
        .collect();
    let (y, tape) = jet::forward(w, jet::seed_jet(&points, &dirs, &layout), &layout)?;
    let q = (0..set.len()).map(|s| y[(0, s * B_LAYOUT_WIDTH + 2)]).collect();
    Ok((q, tape))
}

fn data_residuals(a: &PassA, set: &TrainingSet, s: usize) -> (f64, Vec<f64>) {
    let smp = &set.samples[s];
    let re = smp.energy - a.out(s, 0);
    let rt = (0..set.p).map(|j| smp.theta_next[j] - a.out(s, j + 1)).collect();
    (re, rt)
}

fn p1_components(a: &PassA, p: usize, s: usize) -> Vec<f64> {
    (1..=p).map(|j| a.jac(s, j, 0) + a.jac(s, 0, j)).collect()
}

fn p1_value(comp: &[f64], per_component: bool) -> f64 {
    if per_component {
        comp.iter().map(|r| r * r).sum()
    } else {
        let r: f64 = comp.iter().sum();
        r * r
    }
}

fn p2_residual(a: &PassA, p: usize, s: usize, q: f64, eta: f64) -> f64 {
    let g = a.grad(s, p);
    a.jac(s, 0, 0) + g.iter().map(|x| x * x).sum::<f64>() - 0.5 * eta * q
}

pub fn loss_data(w: &MlpParams, set: &TrainingSet) -> Result<f64> {
    check_dims(w, set)?;
    let mut total = 0.0;
    for smp in &set.samples {
        let y = w.forward(&smp.input())?;
        total += (smp.energy - y[0]).powi(2);
        total += smp.theta_next.iter().zip(&y[1..]).map(|(t, o)| (t - o).powi(2)).sum::<f64>();
    }
    Ok(total)
}

pub fn loss_p1(w: &MlpParams, set: &TrainingSet, per_component: bool) -> Result<f64> {
    check_dims(w, set)?;
    let a = pass_a(w, set)?;
    Ok((0..set.len())
        .map(|s| p1_value(&p1_components(&a, set.p, s), per_component))
        .sum())
}

pub fn loss_p2(w: &MlpParams, set: &TrainingSet, eta: f64) -> Result<f64> {
    check_dims(w, set)?;
    let a = pass_a(w, set)?;
    let q = if eta != 0.0 {
        pass_b(w, set, &a)?.0
    } else {
        vec![0.0; set.len()]
    };
    Ok((0..set.len())
        .map(|s| p2_residual(&a, set.p, s, q[s], eta).powi(2))
        .sum())
}

/// Same as [`loss_p2`] but through the materialized input Hessian.
pub fn loss_p2_full_hessian(w: &MlpParams, set: &TrainingSet, eta: f64) -> Result<f64> {
    check_dims(w, set)?;
    let mut total = 0.0;
    for smp in &set.samples {
        let x = smp.input();
        let j = jet::input_jacobian(w, &x)?;
        let h = jet::energy_input_hessian(w, &x)?;
        let g = nalgebra::DVector::from_iterator(set.p, (1..=set.p).map(|k| j[(0, k)]));
        let q = g.dot(&(&h * &g));
        let r = j[(0, 0)] + g.norm_squared() - 0.5 * eta * q;
        total += r * r;
    }
    Ok(total)
}

pub fn total_loss(w: &MlpParams, set: &TrainingSet, cfg: &PinnConfig) -> Result<LossBreakdown> {
    Ok(evaluate(w, set, cfg, false)?.0)
}

pub fn loss_weight_gradient(w: &MlpParams, set: &TrainingSet, cfg: &PinnConfig) -> Result<MlpParams> {
    Ok(evaluate(w, set, cfg, true)?.1)
}

/// Loss components and the exact gradient of the weighted total.
pub fn loss_and_gradient(w: &MlpParams, set: &TrainingSet, cfg: &PinnConfig) -> Result<(LossBreakdown, MlpParams)> {
    evaluate(w, set, cfg, true)
}

fn evaluate(w: &MlpParams, set: &TrainingSet, cfg: &PinnConfig, want_grad: bool) -> Result<(LossBreakdown, MlpParams)> {
    check_dims(w, set)?;
    let p = set.p;
    let ns = set.len();
    let eta = cfg.eta_vqe;
    let lambda_p2 = if cfg.p2_enabled { cfg.lambda_p2 } else { 0.0 };

    let a = pass_a(w, set)?;
    let b = if cfg.p2_enabled && eta != 0.0 {
        Some(pass_b(w, set, &a)?)
    } else {
        None
    };

    let mut out = LossBreakdown::default();
    let mut ybar_a = DMatrix::zeros(p + 1, a.y.ncols());
    let mut ybar_b = DMatrix::zeros(p + 1, ns * B_LAYOUT_WIDTH);
    for s in 0..ns {
        let base = s * a.c;
        let (re, rt) = data_residuals(&a, set, s);
        out.data += re * re + rt.iter().map(|r| r * r).sum::<f64>();
        ybar_a[(0, base)] -= 2.0 * cfg.lambda_d * re;
        for (j, r) in rt.iter().enumerate() {
            ybar_a[(j + 1, base)] -= 2.0 * cfg.lambda_d * r;
        }

        let comp = p1_components(&a, p, s);
        out.p1 += p1_value(&comp, cfg.p1_per_component);
        let total_r1: f64 = comp.iter().sum();
        for (j, r) in comp.iter().enumerate() {
            let c = 2.0 * cfg.lambda_p1 * if cfg.p1_per_component { *r } else { total_r1 };
            ybar_a[(j + 1, base + 1)] += c;
            ybar_a[(0, base + 1 + j + 1)] += c;
        }

        if cfg.p2_enabled {
            let q = b.as_ref().map_or(0.0, |(q, _)| q[s]);
            let r2 = p2_residual(&a, p, s, q, eta);
            out.p2 += r2 * r2;
            let c = 2.0 * lambda_p2 * r2;
            ybar_a[(0, base + 1)] += c;
            for j in 1..=p {
                ybar_a[(0, base + 1 + j)] += c * 2.0 * a.jac(s, 0, j);
            }
            ybar_b[(0, s * B_LAYOUT_WIDTH + 2)] = -0.5 * eta * c;
        }
    }
    out.total = cfg.lambda_d * out.data + cfg.lambda_p1 * out.p1 + lambda_p2 * out.p2;

    let mut grad = MlpParams::zeros(&w.sizes)?;
    if want_grad {
        if let Some((_, tape_b)) = &b {
            let xbar = jet::backward(w, tape_b, ybar_b, &mut grad);
            for s in 0..ns {
                for j in 1..=p {
                    ybar_a[(0, s * a.c + 1 + j)] += xbar[(j, s * B_LAYOUT_WIDTH + 1)];
                }
            }
        }
        jet::backward(w, &a.tape, ybar_a, &mut grad);
    }
    Ok((out, grad))
}

/// Central-difference gradient of the weighted total. Validation only.
pub fn finite_difference_gradient(w: &MlpParams, set: &TrainingSet, cfg: &PinnConfig, h: f64) -> Result<MlpParams> {
    let mut grad = MlpParams::zeros(&w.sizes)?;
    let n = w.num_entries();
    let mut probe = w.clone();
    for i in 0..n {
        let orig = *probe.flat_mut()[i];
        *probe.flat_mut()[i] = orig + h;
        let plus = total_loss(&probe, set, cfg)?.total;
        *probe.flat_mut()[i] = orig - h;
        let minus = total_loss(&probe, set, cfg)?.total;
        *probe.flat_mut()[i] = orig;
        *grad.flat_mut()[i] = (plus - minus) / (2.0 * h);
    }
    Ok(grad)
}
