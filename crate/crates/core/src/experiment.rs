//! Config-driven experiment runs with CSV trajectories and JSON metrics.
//!
//! Layout of an output directory:
//!
//! ```text
//! <out>/seed_<s>/vanilla.csv     baseline trajectory (always written)
//! <out>/seed_<s>/<method>.csv    palqo.csv or dmd.csv when the method is not vanilla
//! <out>/metrics.json             per-seed and aggregate metrics, deterministic
//! <out>/timing.json              wall-clock seconds per seed and method
//! <out>/plot.csv                 seed, method, iteration, delta_e
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ansatz::{load_generators_file, AnsatzSpec};
use crate::dmd::{run_dmd, DmdConfig};
use crate::error::{Error, Result};
use crate::pauli::{build_heisenberg, build_tfim, build_xxz, exact_ground_energy, parse_hamiltonian_file, Hamiltonian};
use crate::pinn::PinnConfig;
use crate::predictor::{run_palqo, PalqoConfig, RolloutConfig};
use crate::rng::derive_seed;
use crate::statevector::NoiseModel;
use crate::vqe::{initial_theta, run_gd, ShotModel, Source, Trajectory, TrajectoryRecord, VqeConfig, VqeProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Vanilla,
    Palqo,
    Dmd,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Vanilla => "vanilla",
            Method::Palqo => "palqo",
            Method::Dmd => "dmd",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSection {
    /// `tfim`, `heisenberg` or `xxz`; mutually exclusive with `file`.
    pub builder: Option<String>,
    pub file: Option<PathBuf>,
    pub n: Option<usize>,
    pub j: Option<f64>,
    pub h: Option<f64>,
    pub jx: Option<f64>,
    pub jy: Option<f64>,
    pub jz: Option<f64>,
    pub j_even: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzSection {
    /// `hea`, `hva` or `generators`.
    pub kind: String,
    pub layers: Option<usize>,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VqeSection {
    pub eta: f64,
    pub max_iters: usize,
    /// Iteration cap of the vanilla baseline; defaults to `max_iters`.
    pub baseline_max_iters: Option<usize>,
    pub varsigma: f64,
    pub accuracy: f64,
    /// Stop every run once the energy is within `accuracy` of the reference.
    pub stop_at_target: bool,
    /// Overrides the exact ground energy (required above 14 qubits).
    pub reference_energy: Option<f64>,
    pub shots_per_term: Option<u64>,
    pub depolarizing: f64,
    /// Measurement accuracy used for shot bookkeeping.
    pub shot_epsilon: Option<f64>,
}

impl Default for VqeSection {
    fn default() -> Self {
        let d = VqeConfig::default();
        VqeSection {
            eta: d.eta,
            max_iters: d.max_iters,
            baseline_max_iters: None,
            varsigma: d.varsigma,
            accuracy: d.accuracy_target,
            stop_at_target: true,
            reference_energy: None,
            shots_per_term: None,
            depolarizing: 0.0,
            shot_epsilon: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PinnSection {
    pub width: Option<usize>,
    pub hidden_layers: usize,
    pub lambda_d: f64,
    pub lambda_p1: f64,
    pub lambda_p2: f64,
    pub epochs: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    pub train_seed: u64,
    pub p2_enabled: bool,
    pub p1_per_component: bool,
}

impl Default for PinnSection {
    fn default() -> Self {
        let d = PinnConfig::default();
        PinnSection {
            width: d.width,
            hidden_layers: d.hidden_layers,
            lambda_d: d.lambda_d,
            lambda_p1: d.lambda_p1,
            lambda_p2: d.lambda_p2,
            epochs: d.epochs,
            lr_initial: d.lr_initial,
            lr_final: d.lr_final,
            train_seed: d.train_seed,
            p2_enabled: d.p2_enabled,
            p1_per_component: d.p1_per_component,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PalqoSection {
    pub tau: usize,
    pub tau_first: Option<usize>,
    pub max_cycles: usize,
    pub reset_network: bool,
    pub rollout_max_steps: usize,
    pub delta_tol: f64,
}

impl Default for PalqoSection {
    fn default() -> Self {
        let d = PalqoConfig::default();
        PalqoSection {
            tau: d.tau,
            tau_first: d.tau_first,
            max_cycles: d.max_cycles,
            reset_network: d.reset_network,
            rollout_max_steps: d.rollout.max_steps,
            delta_tol: d.rollout.delta_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DmdSection {
    pub window: usize,
    pub rank: Option<usize>,
    pub max_steps: usize,
    pub max_cycles: usize,
}

impl Default for DmdSection {
    fn default() -> Self {
        let d = DmdConfig::default();
        DmdSection {
            window: d.window,
            rank: d.rank,
            max_steps: d.max_steps,
            max_cycles: d.max_cycles,
        }
    }
}

/// Top-level TOML document. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub hamiltonian: HamiltonianSection,
    pub ansatz: AnsatzSection,
    #[serde(default)]
    pub vqe: VqeSection,
    #[serde(default)]
    pub pinn: PinnSection,
    #[serde(default)]
    pub palqo: PalqoSection,
    #[serde(default)]
    pub dmd: DmdSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string().trim_end().to_string()))
    }

    /// `output_dir` joined onto `root` when it is relative.
    pub fn output_path(&self, root: Option<&Path>) -> PathBuf {
        match root {
            Some(r) if self.output_dir.is_relative() => r.join(&self.output_dir),
            _ => self.output_dir.clone(),
        }
    }
}

/// A validated experiment with every referenced file loaded.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub hamiltonian: Hamiltonian,
    pub ansatz: AnsatzSpec,
    pub reference_energy: f64,
    pub noise: Option<NoiseModel>,
}

fn need<T: Copy>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidConfig(format!("missing key `{key}`")))
}

fn read_relative(base: &Path, file: &Path, what: &str) -> Result<String> {
    let path = if file.is_relative() { base.join(file) } else { file.to_path_buf() };
    std::fs::read_to_string(&path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {what} file {}: {e}", path.display())))
}

fn build_hamiltonian(s: &HamiltonianSection, base: &Path) -> Result<Hamiltonian> {
    match (&s.builder, &s.file) {
        (Some(_), Some(_)) => Err(Error::InvalidConfig(
            "hamiltonian: set either `builder` or `file`, not both".into(),
        )),
        (None, None) => Err(Error::InvalidConfig("hamiltonian: one of `builder` or `file` is required".into())),
        (None, Some(f)) => parse_hamiltonian_file(&read_relative(base, f, "hamiltonian")?),
        (Some(b), None) => {
            let n = need(s.n, "hamiltonian.n")?;
            match b.as_str() {
                "tfim" => build_tfim(n, need(s.j, "hamiltonian.j")?, need(s.h, "hamiltonian.h")?),
                "heisenberg" => build_heisenberg(
                    n,
                    need(s.jx, "hamiltonian.jx")?,
                    need(s.jy, "hamiltonian.jy")?,
                    need(s.jz, "hamiltonian.jz")?,
                    s.h.unwrap_or(0.0),
                ),
                "xxz" => build_xxz(
                    n,
                    need(s.j, "hamiltonian.j")?,
                    need(s.j_even, "hamiltonian.j_even")?,
                    need(s.delta, "hamiltonian.delta")?,
                ),
                other => Err(Error::InvalidConfig(format!("unknown hamiltonian builder `{other}`"))),
            }
        }
    }
}

fn build_ansatz(s: &AnsatzSection, h: &Hamiltonian, base: &Path) -> Result<AnsatzSpec> {
    match s.kind.as_str() {
        "hea" => AnsatzSpec::hea(h.num_qubits(), need(s.layers, "ansatz.layers")?),
        "hva" => AnsatzSpec::hva_for(h, need(s.layers, "ansatz.layers")?),
        "generators" => {
            let f = s
                .file
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("missing key `ansatz.file`".into()))?;
            load_generators_file(&read_relative(base, f, "generators")?)
        }
        other => Err(Error::InvalidConfig(format!("unknown ansatz kind `{other}`"))),
    }
}

impl Experiment {
    /// Parses and validates a TOML config; relative file paths resolve
    /// against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        Self::new(ExperimentConfig::from_toml(text)?, base)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn new(config: ExperimentConfig, base: &Path) -> Result<Self> {
        if config.seeds.is_empty() {
            return Err(Error::InvalidConfig("`seeds` must not be empty".into()));
        }
        let mut sorted = config.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig("`seeds` must be distinct".into()));
        }
        let hamiltonian = build_hamiltonian(&config.hamiltonian, base)?;
        let ansatz = build_ansatz(&config.ansatz, &hamiltonian, base)?;
        if ansatz.num_qubits() != hamiltonian.num_qubits() {
            return Err(Error::DimensionMismatch {
                expected: hamiltonian.num_qubits(),
                found: ansatz.num_qubits(),
            });
        }
        let noise = NoiseModel::new(config.vqe.depolarizing, config.vqe.shots_per_term)?;
        let noise = (!noise.is_noiseless()).then_some(noise);
        let reference_energy = match config.vqe.reference_energy {
            Some(e) => e,
            None => exact_ground_energy(&hamiltonian)?,
        };
        let exp = Experiment {
            config,
            hamiltonian,
            ansatz,
            reference_energy,
            noise,
        };
        exp.vqe_config(0, false).validate()?;
        exp.pinn_config(0).validate()?;
        exp.palqo_config(0).validate()?;
        if let Some(eps) = exp.config.vqe.shot_epsilon {
            ShotModel::new(exp.hamiltonian.num_terms(), eps, exp.ansatz.param_count())?;
        }
        Ok(exp)
    }

    pub fn vqe_config(&self, seed: u64, baseline: bool) -> VqeConfig {
        let v = &self.config.vqe;
        VqeConfig {
            eta: v.eta,
            max_iters: if baseline {
                v.baseline_max_iters.unwrap_or(v.max_iters)
            } else {
                v.max_iters
            },
            init_seed: seed,
            noise: self.noise,
            varsigma: v.varsigma,
            accuracy_target: v.accuracy,
            reference_energy: v.stop_at_target.then_some(self.reference_energy),
        }
    }

    pub fn pinn_config(&self, seed: u64) -> PinnConfig {
        let s = &self.config.pinn;
        PinnConfig {
            width: s.width,
            hidden_layers: s.hidden_layers,
            lambda_d: s.lambda_d,
            lambda_p1: s.lambda_p1,
            lambda_p2: s.lambda_p2,
            eta_vqe: self.config.vqe.eta,
            epochs: s.epochs,
            lr_initial: s.lr_initial,
            lr_final: s.lr_final,
            train_seed: derive_seed(s.train_seed, &[seed]),
            p2_enabled: s.p2_enabled,
            p1_per_component: s.p1_per_component,
        }
    }

    pub fn palqo_config(&self, seed: u64) -> PalqoConfig {
        let s = &self.config.palqo;
        PalqoConfig {
            tau: s.tau,
            tau_first: s.tau_first,
            max_cycles: s.max_cycles,
            reset_network: s.reset_network,
            vqe: self.vqe_config(seed, false),
            pinn: self.pinn_config(seed),
            rollout: RolloutConfig {
                max_steps: s.rollout_max_steps,
                delta_tol: s.delta_tol,
                ..RolloutConfig::default()
            },
        }
    }

    pub fn dmd_config(&self) -> DmdConfig {
        let s = &self.config.dmd;
        DmdConfig {
            window: s.window,
            rank: s.rank,
            max_steps: s.max_steps,
            max_cycles: s.max_cycles,
        }
    }

    pub fn problem(&self) -> Result<VqeProblem> {
        let p = VqeProblem::new(self.hamiltonian.clone(), self.ansatz.clone())?.with_noise(self.noise);
        match self.config.vqe.shot_epsilon {
            Some(eps) => p.with_shot_accuracy(eps),
            None => Ok(p),
        }
    }

    fn shot_model(&self) -> Option<ShotModel> {
        self.config
            .vqe
            .shot_epsilon
            .map(|eps| ShotModel::new(self.hamiltonian.num_terms(), eps, self.ansatz.param_count()).expect("validated"))
    }
}

/// `|e_hat - e_target|`.
pub fn compute_delta_e(e_hat: f64, e_target: f64) -> f64 {
    (e_hat - e_target).abs()
}

/// `baseline_iters / method_iters`; `None` when either run never reached
/// the accuracy target or needed no iterations at all.
pub fn compute_speedup(baseline_iters: Option<u64>, method_iters: Option<u64>) -> Option<f64> {
    match (baseline_iters, method_iters) {
        (Some(b), Some(m)) if b >= 1 && m >= 1 => Some(b as f64 / m as f64),
        _ => None,
    }
}

/// Quantum cost charged for each record: the first record and restarts are
/// free, every update or measured prediction costs one.
pub fn record_costs(records: &[TrajectoryRecord]) -> Vec<u64> {
    let mut acc = 0;
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if i > 0 && matches!(r.source, Source::Quantum | Source::Predicted) {
                acc += 1;
            }
            acc
        })
        .collect()
}

/// Cumulative cost at the first record within `accuracy` of `reference`.
pub fn iterations_to_accuracy(records: &[TrajectoryRecord], reference: f64, accuracy: f64) -> Option<u64> {
    let costs = record_costs(records);
    records
        .iter()
        .zip(costs)
        .find(|(r, _)| compute_delta_e(r.energy, reference) <= accuracy)
        .map(|(_, c)| c)
}

/// Shots spent up to and including record `upto`.
pub fn shots_through(records: &[TrajectoryRecord], sm: &ShotModel, upto: usize) -> u128 {
    records
        .iter()
        .enumerate()
        .take(upto + 1)
        .map(|(i, r)| match r.source {
            Source::Quantum if i > 0 => sm.gradient_cost(),
            Source::Predicted => sm.energy_cost(),
            _ => 0,
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub delta_e: f64,
    pub final_energy: f64,
    pub quantum_iterations: u64,
    pub iterations_to_accuracy: Option<u64>,
    pub shot_total: Option<u64>,
    pub shots_to_accuracy: Option<u64>,
    pub converged: bool,
}

impl RunSummary {
    pub fn from_records(
        records: &[TrajectoryRecord],
        converged: bool,
        reference: f64,
        accuracy: f64,
        sm: Option<&ShotModel>,
    ) -> Result<Self> {
        let last = records.last().ok_or(Error::Empty("trajectory"))?;
        let costs = record_costs(records);
        let hit = records
            .iter()
            .position(|r| compute_delta_e(r.energy, reference) <= accuracy);
        let to_u64 = |s: u128| u64::try_from(s).unwrap_or(u64::MAX);
        Ok(RunSummary {
            delta_e: compute_delta_e(last.energy, reference),
            final_energy: last.energy,
            quantum_iterations: *costs.last().expect("nonempty"),
            iterations_to_accuracy: hit.map(|i| costs[i]),
            shot_total: sm.map(|m| to_u64(shots_through(records, m, records.len() - 1))),
            shots_to_accuracy: sm.zip(hit).map(|(m, i)| to_u64(shots_through(records, m, i))),
            converged,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub baseline: RunSummary,
    /// Absent when the method is vanilla.
    pub method: Option<RunSummary>,
    pub speedup: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupStats {
    pub defined: usize,
    pub median: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl SpeedupStats {
    pub fn from_values(values: &[Option<f64>]) -> Self {
        let mut v: Vec<f64> = values.iter().flatten().copied().collect();
        v.sort_by(f64::total_cmp);
        SpeedupStats {
            defined: v.len(),
            median: median(&v),
            min: v.first().copied(),
            max: v.last().copied(),
        }
    }
}

fn median(sorted: &[f64]) -> Option<f64> {
    let n = sorted.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(sorted[n / 2]),
        _ => Some(0.5 * (sorted[n / 2 - 1] + sorted[n / 2])),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotSettings {
    pub num_terms: usize,
    pub epsilon: f64,
    pub num_params: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub method: Method,
    pub num_qubits: usize,
    pub num_params: usize,
    pub reference_energy: f64,
    pub accuracy: f64,
    pub shots: Option<ShotSettings>,
    pub seeds: Vec<SeedMetrics>,
    pub speedup: SpeedupStats,
}

impl Metrics {
    fn shot_model(&self) -> Option<ShotModel> {
        self.shots.as_ref().map(|s| ShotModel {
            num_terms: s.num_terms,
            epsilon: s.epsilon,
            num_params: s.num_params,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedTiming {
    pub seed: u64,
    pub baseline_seconds: f64,
    pub method_seconds: Option<f64>,
}

/// Everything a run produced, in memory.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub output_dir: PathBuf,
    pub metrics: Metrics,
    pub timing: Vec<SeedTiming>,
    pub baselines: Vec<Trajectory>,
    pub methods: Vec<Option<Trajectory>>,
}

pub fn trajectory_csv(records: &[TrajectoryRecord], with_source: bool) -> Result<String> {
    let p = records.first().map_or(0, |r| r.theta.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["step".to_string(), "t_scaled".into(), "energy".into()];
    header.extend((0..p).map(|i| format!("theta_{i}")));
    if with_source {
        header.push("source".into());
    }
    w.write_record(&header).map_err(csv_err)?;
    for r in records {
        let mut row = vec![r.step.to_string(), r.t_scaled.to_string(), r.energy.to_string()];
        row.extend(r.theta.iter().map(f64::to_string));
        if with_source {
            row.push(r.source.as_str().into());
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn field<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::Io(format!("trajectory CSV line {line}: bad value `{tok}`")))
}

/// Inverse of [`trajectory_csv`]; a missing `source` column means every
/// record is a quantum step.
pub fn parse_trajectory_csv(text: &str) -> Result<Vec<TrajectoryRecord>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header = rd.headers().map_err(csv_err)?.clone();
    let has_source = header.iter().last() == Some("source");
    let p = header.len() - 3 - usize::from(has_source);
    let mut out = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let line = i + 2;
        if row.len() != header.len() {
            return Err(Error::Io(format!("trajectory CSV line {line}: wrong column count")));
        }
        let theta = (0..p).map(|k| field(&row[3 + k], line)).collect::<Result<Vec<f64>>>()?;
        let source = if has_source {
            Source::parse(&row[3 + p]).ok_or_else(|| Error::Io(format!("trajectory CSV line {line}: bad source")))?
        } else {
            Source::Quantum
        };
        out.push(TrajectoryRecord {
            step: field(&row[0], line)?,
            t_scaled: field(&row[1], line)?,
            theta,
            energy: field(&row[2], line)?,
            source,
        });
    }
    Ok(out)
}

fn plot_rows(out: &mut String, seed: u64, method: Method, records: &[TrajectoryRecord], reference: f64) {
    for (r, c) in records.iter().zip(record_costs(records)) {
        out.push_str(&format!("{seed},{method},{c},{}\n", compute_delta_e(r.energy, reference)));
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Runs the configured method and the vanilla baseline for every seed,
/// then writes all artifacts below `out`. Nothing is written if a run fails.
pub fn run_experiment(exp: &Experiment, out: &Path) -> Result<ExperimentReport> {
    let problem = exp.problem()?;
    let p = exp.ansatz.param_count();
    let method = exp.config.method;
    let acc = exp.config.vqe.accuracy;
    let sm = exp.shot_model();
    let mut seeds = Vec::new();
    let mut timing = Vec::new();
    let mut baselines = Vec::new();
    let mut methods = Vec::new();
    for &seed in &exp.config.seeds {
        let theta0 = initial_theta(p, seed);
        let t = Instant::now();
        let base = run_gd(&problem, theta0.clone(), &exp.vqe_config(seed, true))?;
        let baseline_seconds = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let traj = match method {
            Method::Vanilla => None,
            Method::Palqo => Some(run_palqo(&problem, theta0, &exp.palqo_config(seed))?.trajectory),
            Method::Dmd => Some(run_dmd(&problem, theta0, &exp.vqe_config(seed, false), &exp.dmd_config())?.trajectory),
        };
        let method_seconds = traj.as_ref().map(|_| t.elapsed().as_secs_f64());
        let b = RunSummary::from_records(&base.records, base.converged, exp.reference_energy, acc, sm.as_ref())?;
        let m = traj
            .as_ref()
            .map(|tr| RunSummary::from_records(&tr.records, tr.converged, exp.reference_energy, acc, sm.as_ref()))
            .transpose()?;
        let speedup = m
            .as_ref()
            .and_then(|m| compute_speedup(b.iterations_to_accuracy, m.iterations_to_accuracy));
        log::info!(
            "seed {seed}: baseline dE {:.3e}, {} dE {}, speedup {:?}",
            b.delta_e,
            method,
            m.as_ref().map_or("-".into(), |m| format!("{:.3e}", m.delta_e)),
            speedup
        );
        seeds.push(SeedMetrics {
            seed,
            baseline: b,
            method: m,
            speedup,
        });
        timing.push(SeedTiming {
            seed,
            baseline_seconds,
            method_seconds,
        });
        baselines.push(base);
        methods.push(traj);
    }
    let speedup = SpeedupStats::from_values(&seeds.iter().map(|s| s.speedup).collect::<Vec<_>>());
    let metrics = Metrics {
        method,
        num_qubits: exp.hamiltonian.num_qubits(),
        num_params: p,
        reference_energy: exp.reference_energy,
        accuracy: acc,
        shots: sm.map(|s| ShotSettings {
            num_terms: s.num_terms,
            epsilon: s.epsilon,
            num_params: s.num_params,
        }),
        seeds,
        speedup,
    };

    std::fs::create_dir_all(out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
    let mut plot = String::from("seed,method,iteration,delta_e\n");
    for ((s, base), traj) in exp.config.seeds.iter().zip(&baselines).zip(&methods) {
        let dir = out.join(format!("seed_{s}"));
        std::fs::create_dir_all(&dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        write(&dir.join("vanilla.csv"), &trajectory_csv(&base.records, false)?)?;
        plot_rows(&mut plot, *s, Method::Vanilla, &base.records, exp.reference_energy);
        if let Some(tr) = traj {
            write(&dir.join(format!("{method}.csv")), &trajectory_csv(&tr.records, true)?)?;
            plot_rows(&mut plot, *s, method, &tr.records, exp.reference_energy);
        }
    }
    write(&out.join("plot.csv"), &plot)?;
    write(&out.join("metrics.json"), &to_json(&metrics)?)?;
    write(&out.join("timing.json"), &to_json(&timing)?)?;
    Ok(ExperimentReport {
        output_dir: out.to_path_buf(),
        metrics,
        timing,
        baselines,
        methods,
    })
}

pub fn load_metrics(path: &Path) -> Result<Metrics> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Recomputes every per-seed number of `dir/metrics.json` from the
/// trajectory CSVs alone. Convergence flags are carried over.
pub fn rederive_metrics(dir: &Path) -> Result<Metrics> {
    let stored = load_metrics(&dir.join("metrics.json"))?;
    let sm = stored.shot_model();
    let read = |seed: u64, name: &str| -> Result<Vec<TrajectoryRecord>> {
        let path = dir.join(format!("seed_{seed}")).join(format!("{name}.csv"));
        let text = std::fs::read_to_string(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        parse_trajectory_csv(&text)
    };
    let mut seeds = Vec::new();
    for s in &stored.seeds {
        let summary = |recs: &[TrajectoryRecord], conv: bool| {
            RunSummary::from_records(recs, conv, stored.reference_energy, stored.accuracy, sm.as_ref())
        };
        let baseline = summary(&read(s.seed, "vanilla")?, s.baseline.converged)?;
        let method = match &s.method {
            Some(m) => Some(summary(&read(s.seed, stored.method.as_str())?, m.converged)?),
            None => None,
        };
        let speedup = method
            .as_ref()
            .and_then(|m| compute_speedup(baseline.iterations_to_accuracy, m.iterations_to_accuracy));
        seeds.push(SeedMetrics {
            seed: s.seed,
            baseline,
            method,
            speedup,
        });
    }
    let speedup = SpeedupStats::from_values(&seeds.iter().map(|s| s.speedup).collect::<Vec<_>>());
    Ok(Metrics {
        seeds,
        speedup,
        ..stored
    })
}
