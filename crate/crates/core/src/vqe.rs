//! Energy evaluation, parameter-shift gradients and plain gradient descent.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::ansatz::AnsatzSpec;
use crate::error::{Error, Result};
use crate::pauli::Hamiltonian;
use crate::rng::{derive_seed, rng_from_seed};
use crate::statevector::NoiseModel;

/// Energies above this magnitude abort a run.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Scaled time per optimizer step.
pub const DT: f64 = 0.01;

/// Per-iteration measurement budget `2 p M / eps^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotModel {
    pub num_terms: usize,
    pub epsilon: f64,
    pub num_params: usize,
}

impl ShotModel {
    pub fn new(num_terms: usize, epsilon: f64, num_params: usize) -> Result<Self> {
        if num_terms == 0 || num_params == 0 || !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "shot model needs M >= 1, p >= 1, eps > 0 (got M={num_terms}, p={num_params}, eps={epsilon})"
            )));
        }
        Ok(ShotModel {
            num_terms,
            epsilon,
            num_params,
        })
    }

    /// Shots for one parameter-shift gradient, `ceil(2 p M / eps^2)`.
    pub fn gradient_cost(&self) -> u128 {
        ceil_count(2.0 * self.num_params as f64 * self.num_terms as f64 / (self.epsilon * self.epsilon))
    }

    /// Shots for one energy estimate, `ceil(M / eps^2)`.
    pub fn energy_cost(&self) -> u128 {
        ceil_count(self.num_terms as f64 / (self.epsilon * self.epsilon))
    }
}

/// Ceiling that ignores sub-ulp noise from `eps^2` not being representable.
fn ceil_count(x: f64) -> u128 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.max(1.0) {
        r as u128
    } else {
        x.ceil() as u128
    }
}

/// Shots spent by `iterations` gradient-descent updates.
pub fn shot_cost(model: &ShotModel, iterations: u64) -> u128 {
    model.gradient_cost() * iterations as u128
}

/// Anything gradient descent can run on.
pub trait EnergyModel {
    fn num_params(&self) -> usize;
    /// Energy as the optimizer sees it (sampled when noisy).
    fn energy(&self, theta: &[f64], seed: u64) -> Result<f64>;
    fn gradient(&self, theta: &[f64], seed: u64) -> Result<Vec<f64>>;
    /// Noise-free energy, for reporting.
    fn exact_energy(&self, theta: &[f64]) -> Result<f64>;
    fn shot_model(&self) -> Option<ShotModel> {
        None
    }
}

/// A Hamiltonian paired with an ansatz.
#[derive(Debug, Clone)]
pub struct VqeProblem {
    h: Hamiltonian,
    ansatz: AnsatzSpec,
    noise: Option<NoiseModel>,
    shots: Option<ShotModel>,
}

impl VqeProblem {
    pub fn new(h: Hamiltonian, ansatz: AnsatzSpec) -> Result<Self> {
        if h.num_qubits() != ansatz.num_qubits() {
            return Err(Error::DimensionMismatch {
                expected: h.num_qubits(),
                found: ansatz.num_qubits(),
            });
        }
        Ok(VqeProblem {
            h,
            ansatz,
            noise: None,
            shots: None,
        })
    }

    pub fn with_noise(mut self, noise: Option<NoiseModel>) -> Self {
        self.noise = noise.filter(|n| !n.is_noiseless());
        self
    }

    /// Attaches shot bookkeeping with accuracy `epsilon`.
    pub fn with_shot_accuracy(mut self, epsilon: f64) -> Result<Self> {
        self.shots = Some(ShotModel::new(
            self.h.num_terms(),
            epsilon,
            self.ansatz.param_count(),
        )?);
        Ok(self)
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.h
    }

    pub fn ansatz(&self) -> &AnsatzSpec {
        &self.ansatz
    }

    pub fn noise(&self) -> Option<&NoiseModel> {
        self.noise.as_ref()
    }

    /// Parameter-shift gradient from `2p` shifted energies.
    pub fn parameter_shift_gradient(&self, theta: &[f64], seed: u64) -> Result<Vec<f64>> {
        let mut shifted = theta.to_vec();
        let mut grad = Vec::with_capacity(theta.len());
        for i in 0..theta.len() {
            shifted[i] = theta[i] + FRAC_PI_2;
            let plus = self.energy(&shifted, derive_seed(seed, &[i as u64, 0]))?;
            shifted[i] = theta[i] - FRAC_PI_2;
            let minus = self.energy(&shifted, derive_seed(seed, &[i as u64, 1]))?;
            shifted[i] = theta[i];
            grad.push((plus - minus) / 2.0);
        }
        Ok(grad)
    }
}

impl EnergyModel for VqeProblem {
    fn num_params(&self) -> usize {
        self.ansatz.param_count()
    }

    fn energy(&self, theta: &[f64], seed: u64) -> Result<f64> {
        let psi = self.ansatz.prepare_state(theta)?;
        match &self.noise {
            Some(nm) => psi.noisy_expectation(&self.h, nm, seed),
            None => psi.expectation(&self.h),
        }
    }

    fn gradient(&self, theta: &[f64], seed: u64) -> Result<Vec<f64>> {
        self.parameter_shift_gradient(theta, seed)
    }

    fn exact_energy(&self, theta: &[f64]) -> Result<f64> {
        self.ansatz.prepare_state(theta)?.expectation(&self.h)
    }

    fn shot_model(&self) -> Option<ShotModel> {
        self.shots
    }
}

/// `E(theta) = e_min + 1/2 (theta - c)^T A (theta - c)` with analytic gradient.
#[derive(Debug, Clone)]
pub struct QuadraticLandscape {
    a: DMatrix<f64>,
    center: DVector<f64>,
    e_min: f64,
}

impl QuadraticLandscape {
    pub fn new(a: DMatrix<f64>, center: Vec<f64>, e_min: f64) -> Result<Self> {
        if a.nrows() != a.ncols() || a.nrows() != center.len() || center.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: center.len(),
                found: a.nrows(),
            });
        }
        let sym = (&a + a.transpose()) * 0.5;
        Ok(QuadraticLandscape {
            a: sym,
            center: DVector::from_vec(center),
            e_min,
        })
    }

    pub fn minimum(&self) -> f64 {
        self.e_min
    }

    fn offset(&self, theta: &[f64]) -> Result<DVector<f64>> {
        if theta.len() != self.center.len() {
            return Err(Error::ParameterCount {
                expected: self.center.len(),
                found: theta.len(),
            });
        }
        Ok(DVector::from_column_slice(theta) - &self.center)
    }
}

impl EnergyModel for QuadraticLandscape {
    fn num_params(&self) -> usize {
        self.center.len()
    }

    fn energy(&self, theta: &[f64], _seed: u64) -> Result<f64> {
        self.exact_energy(theta)
    }

    fn gradient(&self, theta: &[f64], _seed: u64) -> Result<Vec<f64>> {
        let d = self.offset(theta)?;
        Ok((&self.a * d).iter().copied().collect())
    }

    fn exact_energy(&self, theta: &[f64]) -> Result<f64> {
        let d = self.offset(theta)?;
        Ok(self.e_min + 0.5 * d.dot(&(&self.a * &d)))
    }
}

/// `theta - eta * grad`.
pub fn gd_step(theta: &[f64], grad: &[f64], eta: f64) -> Result<Vec<f64>> {
    if theta.len() != grad.len() {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            found: grad.len(),
        });
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    Ok(theta.iter().zip(grad).map(|(t, g)| t - eta * g).collect())
}

/// Squared norm of the energy gradient.
pub fn qntk_scalar(model: &dyn EnergyModel, theta: &[f64], seed: u64) -> Result<f64> {
    Ok(model.gradient(theta, seed)?.iter().map(|g| g * g).sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VqeConfig {
    pub eta: f64,
    pub max_iters: usize,
    pub init_seed: u64,
    pub noise: Option<NoiseModel>,
    pub varsigma: f64,
    pub accuracy_target: f64,
    /// When set, runs stop at the first energy within `accuracy_target` of it.
    pub reference_energy: Option<f64>,
}

impl Default for VqeConfig {
    fn default() -> Self {
        VqeConfig {
            eta: 0.05,
            max_iters: 1000,
            init_seed: 0,
            noise: None,
            varsigma: 1e-6,
            accuracy_target: 1e-3,
            reference_energy: None,
        }
    }
}

impl VqeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidConfig(format!("eta must be > 0, got {}", self.eta)));
        }
        if !(self.varsigma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "varsigma must be > 0, got {}",
                self.varsigma
            )));
        }
        if !(self.accuracy_target > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "accuracy_target must be > 0, got {}",
                self.accuracy_target
            )));
        }
        Ok(())
    }

    pub fn reached_target(&self, energy: f64) -> bool {
        self.reference_energy
            .is_some_and(|r| (energy - r).abs() <= self.accuracy_target)
    }
}

/// Where a trajectory record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Quantum,
    Predicted,
    Restart,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Quantum => "quantum",
            Source::Predicted => "predicted",
            Source::Restart => "restart",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "quantum" => Some(Source::Quantum),
            "predicted" => Some(Source::Predicted),
            "restart" => Some(Source::Restart),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub t_scaled: f64,
    pub theta: Vec<f64>,
    pub energy: f64,
    pub source: Source,
}

impl TrajectoryRecord {
    pub fn new(step: usize, theta: Vec<f64>, energy: f64, source: Source) -> Self {
        TrajectoryRecord {
            step,
            t_scaled: step as f64 * DT,
            theta,
            energy,
            source,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    pub quantum_iterations: u64,
    pub shot_total: u128,
    pub converged: bool,
}

impl Trajectory {
    pub fn push(&mut self, theta: Vec<f64>, energy: f64, source: Source) {
        let step = self.records.len();
        self.records.push(TrajectoryRecord::new(step, theta, energy, source));
    }

    pub fn last(&self) -> Option<&TrajectoryRecord> {
        self.records.last()
    }

    pub fn final_energy(&self) -> Option<f64> {
        self.records.last().map(|r| r.energy)
    }
}

/// Uniform draw from `[0, 1]^p`.
pub fn initial_theta(p: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(derive_seed(seed, &[0x7e7a]));
    (0..p).map(|_| rng.random::<f64>()).collect()
}

fn guard(e: f64) -> Result<f64> {
    if !e.is_finite() || e.abs() > DIVERGENCE_LIMIT {
        return Err(Error::Diverged(e));
    }
    Ok(e)
}

/// Stream tags for per-evaluation seeds.
pub(crate) const TAG_GRADIENT: u64 = 1;
pub(crate) const TAG_ENERGY: u64 = 2;

/// Seed for the `k`-th gradient evaluation of a run.
pub(crate) fn gradient_seed(init_seed: u64, k: u64) -> u64 {
    derive_seed(init_seed, &[TAG_GRADIENT, k])
}

/// Seed for the `k`-th energy evaluation of a run.
pub(crate) fn energy_seed(init_seed: u64, k: u64) -> u64 {
    derive_seed(init_seed, &[TAG_ENERGY, k])
}

pub(crate) fn converged_pair(a: &TrajectoryRecord, b: &TrajectoryRecord, varsigma: f64) -> bool {
    let dtheta: f64 = a
        .theta
        .iter()
        .zip(&b.theta)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    dtheta + (a.energy - b.energy).abs() <= varsigma
}

/// Plain gradient descent from `theta0` for at most `config.max_iters` updates.
pub fn run_gd(model: &dyn EnergyModel, theta0: Vec<f64>, config: &VqeConfig) -> Result<Trajectory> {
    config.validate()?;
    if theta0.len() != model.num_params() {
        return Err(Error::ParameterCount {
            expected: model.num_params(),
            found: theta0.len(),
        });
    }
    let mut traj = Trajectory::default();
    let e0 = guard(model.energy(&theta0, energy_seed(config.init_seed, 0))?)?;
    traj.push(theta0, e0, Source::Quantum);
    if config.reached_target(e0) {
        traj.converged = true;
        return Ok(traj);
    }
    for t in 0..config.max_iters {
        let theta = &traj.records[t].theta;
        let grad = model.gradient(theta, gradient_seed(config.init_seed, t as u64))?;
        let next = gd_step(theta, &grad, config.eta)?;
        let e = guard(model.energy(&next, energy_seed(config.init_seed, t as u64 + 1))?)?;
        traj.push(next, e, Source::Quantum);
        traj.quantum_iterations += 1;
        let n = traj.records.len();
        if config.reached_target(e) || converged_pair(&traj.records[n - 2], &traj.records[n - 1], config.varsigma) {
            traj.converged = true;
            break;
        }
    }
    if let Some(sm) = model.shot_model() {
        traj.shot_total = shot_cost(&sm, traj.quantum_iterations);
    }
    Ok(traj)
}

/// Vanilla VQE from a uniform `[0, 1]^p` start drawn with `config.init_seed`.
pub fn run_vqe(h: &Hamiltonian, spec: &AnsatzSpec, config: &VqeConfig) -> Result<Trajectory> {
    let problem = VqeProblem::new(h.clone(), spec.clone())?.with_noise(config.noise);
    let theta0 = initial_theta(problem.num_params(), config.init_seed);
    run_gd(&problem, theta0, config)
}
