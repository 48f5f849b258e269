//! Dense statevector simulator.
//!
//! Basis index bit `n - 1 - q` holds qubit `q`, so qubit 0 is the most
//! significant bit. All parameterized gates use the half-angle convention
//! `exp(-i angle/2 P)`.

use num_complex::Complex64;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::pauli::{Hamiltonian, PauliMasks, PauliString};
use crate::rng::rng_from_seed;

/// Default register cap (2^28 amplitudes is 4 GiB).
pub const MAX_QUBITS: usize = 28;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Global depolarizing strength and optional finite shot budget per term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    depolarizing: f64,
    shots_per_term: Option<u64>,
}

impl NoiseModel {
    pub fn new(depolarizing: f64, shots_per_term: Option<u64>) -> Result<Self> {
        if !(0.0..=1.0).contains(&depolarizing) {
            return Err(Error::InvalidConfig(format!(
                "depolarizing probability {depolarizing} outside [0, 1]"
            )));
        }
        if shots_per_term == Some(0) {
            return Err(Error::InvalidConfig("shots_per_term must be >= 1".into()));
        }
        Ok(NoiseModel {
            depolarizing,
            shots_per_term,
        })
    }

    pub fn noiseless() -> Self {
        NoiseModel {
            depolarizing: 0.0,
            shots_per_term: None,
        }
    }

    pub fn depolarizing(&self) -> f64 {
        self.depolarizing
    }

    pub fn shots_per_term(&self) -> Option<u64> {
        self.shots_per_term
    }

    pub fn is_noiseless(&self) -> bool {
        self.depolarizing == 0.0 && self.shots_per_term.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0...0>` on `n` qubits, `1 <= n <= MAX_QUBITS`.
    pub fn zero(n: usize) -> Result<Self> {
        Self::zero_with_cap(n, MAX_QUBITS)
    }

    pub fn zero_with_cap(n: usize, cap: usize) -> Result<Self> {
        if n == 0 || n > cap {
            return Err(Error::QubitCountOutOfRange { n, min: 1, max: cap });
        }
        let mut amps = vec![ZERO; 1usize << n];
        amps[0] = ONE;
        Ok(StateVector { n, amps })
    }

    /// Wraps raw amplitudes; the length must be a power of two.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::DimensionMismatch {
                expected: len.next_power_of_two().max(2),
                found: len,
            });
        }
        Ok(StateVector {
            n: len.trailing_zeros() as usize,
            amps,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn bit(&self, q: usize) -> Result<usize> {
        if q >= self.n {
            return Err(Error::QubitOutOfRange { qubit: q, n: self.n });
        }
        Ok(1usize << (self.n - 1 - q))
    }

    /// Applies a 2x2 matrix `[[a, b], [c, d]]` to qubit `q`.
    pub fn apply_single_qubit(&mut self, q: usize, m: [[Complex64; 2]; 2]) -> Result<()> {
        let bit = self.bit(q)?;
        for k in 0..self.amps.len() {
            if k & bit == 0 {
                let a0 = self.amps[k];
                let a1 = self.amps[k | bit];
                self.amps[k] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[k | bit] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
        Ok(())
    }

    pub fn rotate(&mut self, axis: Axis, q: usize, angle: f64) -> Result<()> {
        let (s, c) = (angle / 2.0).sin_cos();
        let m = match axis {
            Axis::X => [
                [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
                [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
            ],
            Axis::Y => [
                [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
            ],
            Axis::Z => [
                [Complex64::new(c, -s), ZERO],
                [ZERO, Complex64::new(c, s)],
            ],
        };
        self.apply_single_qubit(q, m)
    }

    pub fn cz(&mut self, q1: usize, q2: usize) -> Result<()> {
        let b1 = self.bit(q1)?;
        let b2 = self.bit(q2)?;
        if q1 == q2 {
            return Err(Error::QubitCollision(q1));
        }
        let both = b1 | b2;
        for (k, a) in self.amps.iter_mut().enumerate() {
            if k & both == both {
                *a = -*a;
            }
        }
        Ok(())
    }

    fn check_width(&self, found: usize) -> Result<()> {
        if found != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found,
            });
        }
        Ok(())
    }

    /// `psi <- P psi`.
    pub fn apply_pauli(&mut self, p: &PauliString) -> Result<()> {
        self.check_width(p.num_qubits())?;
        let m = p.masks();
        let phase = m.y_phase();
        let mut out = vec![ZERO; self.amps.len()];
        for (k, a) in self.amps.iter().enumerate() {
            out[k ^ m.x_mask] = phase * m.sign(k) * a;
        }
        self.amps = out;
        Ok(())
    }

    /// `psi <- cos(angle/2) psi - i sin(angle/2) P psi`.
    pub fn apply_pauli_exponential(&mut self, p: &PauliString, angle: f64) -> Result<()> {
        self.check_width(p.num_qubits())?;
        if p.is_identity() {
            return Err(Error::IdentityGenerator);
        }
        if angle == 0.0 {
            return Ok(());
        }
        let m = p.masks();
        let (s, c) = (angle / 2.0).sin_cos();
        // -i sin * i^num_y
        let f = Complex64::new(0.0, -s) * m.y_phase();
        if m.x_mask == 0 {
            for (k, a) in self.amps.iter_mut().enumerate() {
                *a = (c + f * m.sign(k)) * *a;
            }
            return Ok(());
        }
        let top = 1usize << (usize::BITS - 1 - m.x_mask.leading_zeros());
        for k in 0..self.amps.len() {
            if k & top == 0 {
                let j = k ^ m.x_mask;
                let ak = self.amps[k];
                let aj = self.amps[j];
                self.amps[k] = c * ak + f * m.sign(j) * aj;
                self.amps[j] = c * aj + f * m.sign(k) * ak;
            }
        }
        Ok(())
    }

    /// `<psi|P|psi>` as a complex number (real for Hermitian `P`).
    pub fn pauli_expectation(&self, m: &PauliMasks) -> Complex64 {
        let mut acc = ZERO;
        for (k, a) in self.amps.iter().enumerate() {
            acc += self.amps[k ^ m.x_mask].conj() * m.sign(k) * a;
        }
        acc * m.y_phase()
    }

    pub fn expectation(&self, h: &Hamiltonian) -> Result<f64> {
        self.check_width(h.num_qubits())?;
        let mut e = 0.0;
        for t in h.terms() {
            let v = self.pauli_expectation(&t.string.masks());
            debug_assert!(v.im.abs() <= 1e-12 * (1.0 + v.re.abs()));
            e += t.coeff * v.re;
        }
        Ok(e)
    }

    /// Shot-sampled expectation followed by the global depolarizing map
    /// `E <- (1 - q) E + q c_I`.
    pub fn noisy_expectation(&self, h: &Hamiltonian, noise: &NoiseModel, seed: u64) -> Result<f64> {
        let shots = match noise.shots_per_term {
            None => {
                let e = self.expectation(h)?;
                return Ok(depolarize(e, h.identity_coeff(), noise.depolarizing));
            }
            Some(s) => s,
        };
        self.check_width(h.num_qubits())?;
        let mut rng = rng_from_seed(seed);
        let mut e = 0.0;
        for t in h.terms() {
            if t.string.is_identity() {
                e += t.coeff;
                continue;
            }
            let v = self.pauli_expectation(&t.string.masks()).re;
            let p_plus = ((1.0 + v) / 2.0).clamp(0.0, 1.0);
            let dist = Binomial::new(shots, p_plus).expect("probability clamped to [0, 1]");
            let k = dist.sample(&mut rng);
            e += t.coeff * (2.0 * k as f64 / shots as f64 - 1.0);
        }
        Ok(depolarize(e, h.identity_coeff(), noise.depolarizing))
    }
}

fn depolarize(e: f64, c_identity: f64, q: f64) -> f64 {
    if q == 0.0 {
        e
    } else {
        (1.0 - q) * e + q * c_identity
    }
}
