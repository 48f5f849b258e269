//! Parameterized circuit families.
//!
//! Parameter order is layer-major. Within an HEA layer each qubit takes two
//! consecutive slots, Ry first and Rz second; an HVA layer takes one slot per
//! generator.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::pauli::{Hamiltonian, PauliString};
use crate::statevector::{Axis, StateVector};

#[derive(Debug, Clone, PartialEq)]
pub enum AnsatzSpec {
    /// Ry/Rz on every qubit followed by a linear CZ chain, repeated `layers` times.
    Hea { n: usize, layers: usize },
    /// `exp(-i theta_{k,l}/2 P_k)` over the generator list, repeated `layers` times.
    Hva {
        layers: usize,
        generators: Vec<PauliString>,
    },
    /// One exponential per generator, in listed order.
    PauliRotation { generators: Vec<PauliString> },
}

impl AnsatzSpec {
    pub fn hea(n: usize, layers: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::QubitCountOutOfRange { n, min: 1, max: crate::statevector::MAX_QUBITS });
        }
        Ok(AnsatzSpec::Hea { n, layers })
    }

    pub fn hva(layers: usize, generators: Vec<PauliString>) -> Result<Self> {
        check_generators(&generators)?;
        Ok(AnsatzSpec::Hva { layers, generators })
    }

    /// HVA whose generators are the non-identity terms of `h`, grouped by
    /// letter signature (all `ZZ` terms, then all `X` terms, ...) in order of
    /// first appearance.
    pub fn hva_for(h: &Hamiltonian, layers: usize) -> Result<Self> {
        Self::hva(layers, grouped_generators(h))
    }

    pub fn pauli_rotation(generators: Vec<PauliString>) -> Result<Self> {
        check_generators(&generators)?;
        Ok(AnsatzSpec::PauliRotation { generators })
    }

    pub fn num_qubits(&self) -> usize {
        match self {
            AnsatzSpec::Hea { n, .. } => *n,
            AnsatzSpec::Hva { generators, .. } | AnsatzSpec::PauliRotation { generators } => {
                generators[0].num_qubits()
            }
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            AnsatzSpec::Hea { n, layers } => 2 * n * layers,
            AnsatzSpec::Hva { layers, generators } => layers * generators.len(),
            AnsatzSpec::PauliRotation { generators } => generators.len(),
        }
    }

    /// `U(theta)|0...0>`.
    pub fn prepare_state(&self, theta: &[f64]) -> Result<StateVector> {
        let p = self.param_count();
        if theta.len() != p {
            return Err(Error::ParameterCount {
                expected: p,
                found: theta.len(),
            });
        }
        let mut psi = StateVector::zero(self.num_qubits())?;
        match self {
            AnsatzSpec::Hea { n, layers } => {
                let n = *n;
                for l in 0..*layers {
                    for q in 0..n {
                        let base = l * 2 * n + 2 * q;
                        psi.rotate(Axis::Y, q, theta[base])?;
                        psi.rotate(Axis::Z, q, theta[base + 1])?;
                    }
                    for q in 0..n.saturating_sub(1) {
                        psi.cz(q, q + 1)?;
                    }
                }
            }
            AnsatzSpec::Hva { layers, generators } => {
                let k = generators.len();
                for l in 0..*layers {
                    for (j, g) in generators.iter().enumerate() {
                        psi.apply_pauli_exponential(g, theta[l * k + j])?;
                    }
                }
            }
            AnsatzSpec::PauliRotation { generators } => {
                for (g, &a) in generators.iter().zip(theta) {
                    psi.apply_pauli_exponential(g, a)?;
                }
            }
        }
        Ok(psi)
    }
}

fn check_generators(generators: &[PauliString]) -> Result<()> {
    let first = generators.first().ok_or(Error::EmptyGenerators)?;
    let n = first.num_qubits();
    for (i, g) in generators.iter().enumerate() {
        if g.num_qubits() != n {
            return Err(Error::InconsistentWidth {
                line: i + 1,
                expected: n,
                found: g.num_qubits(),
            });
        }
        if g.is_identity() {
            return Err(Error::IdentityGenerator);
        }
    }
    Ok(())
}

fn grouped_generators(h: &Hamiltonian) -> Vec<PauliString> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<PauliString>> = HashMap::new();
    for t in h.terms().iter().filter(|t| !t.string.is_identity()) {
        let sig = t.string.letter_signature();
        groups
            .entry(sig.clone())
            .or_insert_with(|| {
                order.push(sig);
                Vec::new()
            })
            .push(t.string.clone());
    }
    order
        .into_iter()
        .flat_map(|s| groups.remove(&s).unwrap_or_default())
        .collect()
}

/// Parses one Pauli string per line (`#` comments and blank lines allowed).
pub fn load_generators_file(text: &str) -> Result<AnsatzSpec> {
    let mut generators: Vec<PauliString> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let g: PauliString = line.parse().map_err(|_| Error::InvalidPauli {
            line: idx + 1,
            token: line.to_string(),
        })?;
        if let Some(first) = generators.first() {
            if g.num_qubits() != first.num_qubits() {
                return Err(Error::InconsistentWidth {
                    line: idx + 1,
                    expected: first.num_qubits(),
                    found: g.num_qubits(),
                });
            }
        }
        if g.is_identity() {
            return Err(Error::IdentityGenerator);
        }
        generators.push(g);
    }
    AnsatzSpec::pauli_rotation(generators)
}
