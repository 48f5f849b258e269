//! Network rollout and the alternating quantum/classical outer loop.

use crate::error::{Error, Result};
use crate::pinn::loss::window_time;
use crate::pinn::{train, MlpParams, PinnConfig, TrainingSet};
use crate::rng::derive_seed;
use crate::vqe::{
    converged_pair, energy_seed, gd_step, gradient_seed, EnergyModel, Source, Trajectory, VqeConfig, DIVERGENCE_LIMIT,
    DT,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutConfig {
    pub max_steps: usize,
    pub delta_tol: f64,
    pub dt: f64,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        RolloutConfig {
            max_steps: 2000,
            delta_tol: 1e-4,
            dt: DT,
        }
    }
}

impl RolloutConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("rollout max_steps must be >= 1".into()));
        }
        if !(self.delta_tol > 0.0) {
            return Err(Error::InvalidConfig("rollout delta_tol must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub theta: Vec<f64>,
    /// `|theta_{k+1} - theta_k|` of the step that produced `theta`.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    /// Minimal-delta point first, final point second.
    pub candidates: Vec<Candidate>,
    pub steps: usize,
    pub aborted: bool,
}

/// Feeds the network's theta outputs back as inputs, advancing scaled time
/// by `dt`, until a step moves less than `delta_tol` or `max_steps` runs out.
pub fn rollout(w: &MlpParams, t_start: f64, theta_start: &[f64], cfg: &RolloutConfig) -> Result<Rollout> {
    cfg.validate()?;
    let p = theta_start.len();
    if w.input_dim() != p + 1 || w.output_dim() != p + 1 {
        return Err(Error::DimensionMismatch {
            expected: p + 1,
            found: w.input_dim(),
        });
    }
    let mut x = Vec::with_capacity(p + 1);
    x.push(t_start);
    x.extend_from_slice(theta_start);
    let mut best: Option<Candidate> = None;
    let mut last: Option<Candidate> = None;
    let mut steps = 0;
    let mut aborted = false;
    for k in 0..cfg.max_steps {
        let y = w.forward(&x)?;
        steps += 1;
        if y[1..].iter().any(|v| !v.is_finite()) {
            log::warn!("rollout produced a non-finite prediction at step {k}");
            aborted = true;
            break;
        }
        let delta = y[1..]
            .iter()
            .zip(&x[1..])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let cand = Candidate {
            theta: y[1..].to_vec(),
            delta,
        };
        if best.as_ref().is_none_or(|b| delta < b.delta) {
            best = Some(cand.clone());
        }
        x[0] = t_start + (k + 1) as f64 * cfg.dt;
        x[1..].copy_from_slice(&y[1..]);
        last = Some(cand);
        if delta < cfg.delta_tol {
            break;
        }
    }
    Ok(Rollout {
        candidates: best.into_iter().chain(last).collect(),
        steps,
        aborted,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub index: usize,
    /// Measured energy per candidate; duplicates share one measurement.
    pub energies: Vec<f64>,
    /// Indices that needed their own energy measurement.
    pub evaluated: Vec<usize>,
}

/// Measures each distinct candidate and returns the lowest-energy one,
/// breaking ties toward smaller delta. Entries of `known` skip measurement.
pub fn select_restart(
    model: &dyn EnergyModel,
    candidates: &[Candidate],
    known: &[Option<f64>],
    seed: u64,
) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidate list"));
    }
    let mut energies = Vec::with_capacity(candidates.len());
    let mut evaluated = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        let e = if let Some(Some(e)) = known.get(i) {
            *e
        } else if let Some(j) = (0..i).find(|&j| candidates[j].theta == c.theta) {
            energies[j]
        } else {
            evaluated.push(i);
            model.energy(&c.theta, derive_seed(seed, &[i as u64]))?
        };
        energies.push(e);
    }
    let index = (0..candidates.len())
        .min_by(|&a, &b| {
            energies[a]
                .total_cmp(&energies[b])
                .then(candidates[a].delta.total_cmp(&candidates[b].delta))
                .then(a.cmp(&b))
        })
        .expect("nonempty");
    Ok(Selection {
        index,
        energies,
        evaluated,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PalqoConfig {
    pub tau: usize,
    pub tau_first: Option<usize>,
    pub max_cycles: usize,
    /// Re-initialize the network every cycle instead of warm-starting.
    pub reset_network: bool,
    pub vqe: VqeConfig,
    pub pinn: PinnConfig,
    pub rollout: RolloutConfig,
}

impl Default for PalqoConfig {
    fn default() -> Self {
        PalqoConfig {
            tau: 2,
            tau_first: None,
            max_cycles: 1000,
            reset_network: false,
            vqe: VqeConfig::default(),
            pinn: PinnConfig::default(),
            rollout: RolloutConfig::default(),
        }
    }
}

impl PalqoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau == 0 || self.tau_first == Some(0) {
            return Err(Error::InvalidConfig("tau must be >= 1".into()));
        }
        self.vqe.validate()?;
        self.pinn.validate()?;
        self.rollout.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PalqoOutcome {
    pub trajectory: Trajectory,
    pub cycles: usize,
    /// Final training loss of each cycle's network.
    pub train_losses: Vec<f64>,
}

/// Shared bookkeeping for burst-and-extrapolate loops.
pub(crate) struct Cycler<'a> {
    pub model: &'a dyn EnergyModel,
    pub vqe: &'a VqeConfig,
    pub traj: Trajectory,
    grad_calls: u64,
    pub done: bool,
}

impl<'a> Cycler<'a> {
    pub fn start(model: &'a dyn EnergyModel, theta0: Vec<f64>, vqe: &'a VqeConfig) -> Result<Self> {
        vqe.validate()?;
        if theta0.len() != model.num_params() {
            return Err(Error::ParameterCount {
                expected: model.num_params(),
                found: theta0.len(),
            });
        }
        let mut traj = Trajectory::default();
        let e0 = model.energy(&theta0, energy_seed(vqe.init_seed, 0))?;
        guard(e0)?;
        traj.push(theta0, e0, Source::Quantum);
        let done = vqe.reached_target(e0);
        traj.converged = done;
        Ok(Cycler {
            model,
            vqe,
            traj,
            grad_calls: 0,
            done,
        })
    }

    pub fn budget_left(&self) -> bool {
        (self.traj.quantum_iterations as usize) < self.vqe.max_iters
    }

    /// Up to `tau` gradient-descent updates. Returns the index of the
    /// record the burst started from.
    pub fn burst(&mut self, tau: usize) -> Result<usize> {
        let start = self.traj.records.len() - 1;
        for _ in 0..tau {
            if self.done || !self.budget_left() {
                break;
            }
            let theta = &self.traj.records.last().expect("nonempty").theta;
            let grad = self.model.gradient(theta, gradient_seed(self.vqe.init_seed, self.grad_calls))?;
            self.grad_calls += 1;
            let next = gd_step(theta, &grad, self.vqe.eta)?;
            let e = self.measure(&next)?;
            let prev_quantum = self.traj.records.last().expect("nonempty").source == Source::Quantum;
            self.traj.push(next, e, Source::Quantum);
            self.traj.quantum_iterations += 1;
            let n = self.traj.records.len();
            let conv = prev_quantum
                && n >= 2
                && converged_pair(&self.traj.records[n - 2], &self.traj.records[n - 1], self.vqe.varsigma);
            if self.vqe.reached_target(e) || conv {
                self.done = true;
                self.traj.converged = true;
            }
        }
        Ok(start)
    }

    pub fn measure(&self, theta: &[f64]) -> Result<f64> {
        let e = self
            .model
            .energy(theta, energy_seed(self.vqe.init_seed, self.traj.records.len() as u64))?;
        guard(e)
    }

    /// Records a measured prediction and charges one evaluation.
    pub fn push_predicted(&mut self, theta: Vec<f64>, e: f64) {
        self.traj.push(theta, e, Source::Predicted);
        self.traj.quantum_iterations += 1;
        if self.vqe.reached_target(e) {
            self.done = true;
            self.traj.converged = true;
        }
    }

    pub fn push_restart(&mut self, theta: Vec<f64>, e: f64) {
        self.traj.push(theta, e, Source::Restart);
    }

    pub fn finish(mut self) -> Trajectory {
        if let Some(sm) = self.model.shot_model() {
            self.traj.shot_total = shot_total(&self.traj, &sm);
        }
        self.traj
    }
}

fn guard(e: f64) -> Result<f64> {
    if !e.is_finite() || e.abs() > DIVERGENCE_LIMIT {
        return Err(Error::Diverged(e));
    }
    Ok(e)
}

/// Shots implied by a trajectory's record sources.
pub fn shot_total(traj: &Trajectory, sm: &crate::vqe::ShotModel) -> u128 {
    let mut total = 0u128;
    for (i, r) in traj.records.iter().enumerate() {
        match r.source {
            Source::Quantum if i > 0 => total += sm.gradient_cost(),
            Source::Predicted => total += sm.energy_cost(),
            _ => {}
        }
    }
    total
}

/// Alternates `tau`-step quantum bursts with network training and rollout.
pub fn run_palqo(model: &dyn EnergyModel, theta0: Vec<f64>, cfg: &PalqoConfig) -> Result<PalqoOutcome> {
    cfg.validate()?;
    let p = model.num_params();
    let pinn = PinnConfig {
        eta_vqe: cfg.vqe.eta,
        ..cfg.pinn.clone()
    };
    let mut cyc = Cycler::start(model, theta0, &cfg.vqe)?;
    let mut net: Option<MlpParams> = None;
    let mut train_losses = Vec::new();
    let mut cycles = 0;
    loop {
        let tau = if cycles == 0 { cfg.tau_first.unwrap_or(cfg.tau) } else { cfg.tau };
        let start = cyc.burst(tau)?;
        if cyc.done || !cyc.budget_left() || cycles >= cfg.max_cycles {
            break;
        }
        let window = &cyc.traj.records[start..];
        if window.len() < 2 {
            break;
        }
        let set = TrainingSet::from_window(window)?;
        let w0 = match net.take() {
            Some(w) if !cfg.reset_network => w,
            _ => {
                let seed = if cfg.reset_network {
                    derive_seed(pinn.train_seed, &[cycles as u64])
                } else {
                    pinn.train_seed
                };
                MlpParams::uniform(&pinn.sizes_for(p), seed)?
            }
        };
        let report = train(w0, &set, &pinn)?;
        train_losses.push(report.history.last().map_or(f64::NAN, |l| l.total));
        let w = report.params;

        let end = cyc.traj.records.last().expect("nonempty").clone();
        let t_start = window_time(set.len());
        let ro = rollout(&w, t_start, &end.theta, &cfg.rollout)?;
        net = Some(w);

        let mut cands = ro.candidates;
        let mut known = vec![None; cands.len()];
        cands.push(Candidate {
            theta: end.theta.clone(),
            delta: f64::INFINITY,
        });
        known.push(Some(end.energy));
        let sel = select_restart(model, &cands, &known, derive_seed(cfg.vqe.init_seed, &[0x5e1, cycles as u64]))?;
        for &i in &sel.evaluated {
            cyc.push_predicted(cands[i].theta.clone(), sel.energies[i]);
        }
        cyc.push_restart(cands[sel.index].theta.clone(), sel.energies[sel.index]);
        cycles += 1;
        log::debug!(
            "cycle {cycles}: rollout {} steps, restart E = {:.6}, iterations {}",
            ro.steps,
            sel.energies[sel.index],
            cyc.traj.quantum_iterations
        );
        if cyc.done {
            break;
        }
    }
    Ok(PalqoOutcome {
        trajectory: cyc.finish(),
        cycles,
        train_losses,
    })
}
