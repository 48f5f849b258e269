use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: malformed coefficient `{token}`")]
    MalformedCoefficient { line: usize, token: String },
    #[error("line {line}: invalid Pauli string `{token}`")]
    InvalidPauli { line: usize, token: String },
    #[error("line {line}: expected width {expected}, found {found}")]
    InconsistentWidth {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("Hamiltonian has no nonzero terms")]
    EmptyHamiltonian,
    #[error("generator file has no entries")]
    EmptyGenerators,
    #[error("coefficient must be finite, got {0}")]
    NonFiniteCoefficient(f64),
    #[error("chain models need at least 2 qubits, got {0}")]
    TooFewQubits(usize),
    #[error("qubit count {n} outside supported range {min}..={max}")]
    QubitCountOutOfRange { n: usize, min: usize, max: usize },
    #[error("qubit index {qubit} out of range for {n} qubits")]
    QubitOutOfRange { qubit: usize, n: usize },
    #[error("two-qubit gate needs distinct qubits, got {0} twice")]
    QubitCollision(usize),
    #[error("identity generator only contributes a global phase")]
    IdentityGenerator,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("parameter count mismatch: ansatz takes {expected}, got {found}")]
    ParameterCount { expected: usize, found: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("energy diverged: |E| = {0:e}")]
    Diverged(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
