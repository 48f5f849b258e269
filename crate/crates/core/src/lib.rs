//! Statevector VQE with physics-informed trajectory extrapolation.

pub mod ansatz;
pub mod dmd;
pub mod error;
pub mod experiment;
pub mod pauli;
pub mod pinn;
pub mod predictor;
pub mod rng;
pub mod statevector;
pub mod vqe;

pub use ansatz::AnsatzSpec;
pub use dmd::{run_dmd, DmdConfig, DmdModel};
pub use error::{Error, Result};
pub use experiment::{compute_delta_e, compute_speedup, run_experiment, Experiment, ExperimentConfig, Method, Metrics};
pub use pauli::{exact_ground_energy, Hamiltonian, PauliString, PauliTerm};
pub use pinn::{MlpParams, PinnConfig};
pub use predictor::{run_palqo, PalqoConfig, RolloutConfig};
pub use statevector::{NoiseModel, StateVector};
pub use vqe::{EnergyModel, ShotModel, Source, Trajectory, TrajectoryRecord, VqeConfig, VqeProblem};
