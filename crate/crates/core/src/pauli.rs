//! Pauli-string algebra, model Hamiltonians and an exact ground-state oracle.
//!
//! Qubit 0 is the leftmost character of a Pauli string and the most
//! significant bit of a computational-basis index.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Largest register handled by [`exact_ground_energy`].
pub const EXACT_MAX_QUBITS: usize = 14;
/// Above this size the oracle switches from dense diagonalization to Lanczos.
pub const DENSE_MAX_QUBITS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Bit masks describing how a Pauli string acts on basis states:
/// `P|k> = i^num_y * (-1)^popcount(k & z_mask) |k ^ x_mask>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PauliMasks {
    pub x_mask: usize,
    pub z_mask: usize,
    pub num_y: u32,
}

impl PauliMasks {
    /// The global factor `i^num_y`.
    pub fn y_phase(&self) -> Complex64 {
        match self.num_y % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    #[inline]
    pub fn sign(&self, k: usize) -> f64 {
        if (k & self.z_mask).count_ones() & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    ops: Vec<Pauli>,
}

impl PauliString {
    pub fn new(ops: Vec<Pauli>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::Empty("Pauli string"));
        }
        Ok(PauliString { ops })
    }

    pub fn identity(n: usize) -> Self {
        PauliString {
            ops: vec![Pauli::I; n.max(1)],
        }
    }

    /// String with `op` on each listed qubit and identity elsewhere.
    pub fn with_ops(n: usize, placed: &[(usize, Pauli)]) -> Result<Self> {
        let mut ops = vec![Pauli::I; n];
        for &(q, p) in placed {
            if q >= n {
                return Err(Error::QubitOutOfRange { qubit: q, n });
            }
            ops[q] = p;
        }
        PauliString::new(ops)
    }

    pub fn num_qubits(&self) -> usize {
        self.ops.len()
    }

    pub fn ops(&self) -> &[Pauli] {
        &self.ops
    }

    pub fn is_identity(&self) -> bool {
        self.ops.iter().all(|&p| p == Pauli::I)
    }

    /// Number of non-identity factors.
    pub fn weight(&self) -> usize {
        self.ops.iter().filter(|&&p| p != Pauli::I).count()
    }

    pub fn masks(&self) -> PauliMasks {
        let n = self.ops.len();
        let mut m = PauliMasks {
            x_mask: 0,
            z_mask: 0,
            num_y: 0,
        };
        for (q, p) in self.ops.iter().enumerate() {
            let bit = 1usize << (n - 1 - q);
            match p {
                Pauli::I => {}
                Pauli::X => m.x_mask |= bit,
                Pauli::Y => {
                    m.x_mask |= bit;
                    m.z_mask |= bit;
                    m.num_y += 1;
                }
                Pauli::Z => m.z_mask |= bit,
            }
        }
        m
    }

    /// The non-identity letters in qubit order, e.g. `ZZ` for `IZZI`.
    pub fn letter_signature(&self) -> String {
        self.ops
            .iter()
            .filter(|&&p| p != Pauli::I)
            .map(|p| p.as_char())
            .collect()
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.ops {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let ops = s
            .chars()
            .map(|c| Pauli::from_char(c).ok_or(()))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::InvalidPauli {
                line: 0,
                token: s.to_string(),
            })?;
        PauliString::new(ops)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PauliTerm {
    pub coeff: f64,
    pub string: PauliString,
}

impl PauliTerm {
    pub fn new(coeff: f64, string: PauliString) -> Result<Self> {
        if !coeff.is_finite() {
            return Err(Error::NonFiniteCoefficient(coeff));
        }
        Ok(PauliTerm { coeff, string })
    }
}

/// A real-weighted sum of Pauli strings on `n` qubits.
///
/// Construction merges duplicate strings (summing their coefficients in
/// sorted order, so the result does not depend on input order) and drops
/// terms whose merged coefficient is exactly zero. Terms keep the order of
/// first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    n: usize,
    terms: Vec<PauliTerm>,
}

impl Hamiltonian {
    pub fn from_terms(terms: Vec<PauliTerm>) -> Result<Self> {
        let n = match terms.first() {
            Some(t) => t.string.num_qubits(),
            None => return Err(Error::EmptyHamiltonian),
        };
        let mut order: Vec<PauliString> = Vec::new();
        let mut coeffs: HashMap<PauliString, Vec<f64>> = HashMap::new();
        for (i, t) in terms.into_iter().enumerate() {
            if t.string.num_qubits() != n {
                return Err(Error::InconsistentWidth {
                    line: i + 1,
                    expected: n,
                    found: t.string.num_qubits(),
                });
            }
            if !t.coeff.is_finite() {
                return Err(Error::NonFiniteCoefficient(t.coeff));
            }
            coeffs
                .entry(t.string.clone())
                .or_insert_with(|| {
                    order.push(t.string.clone());
                    Vec::new()
                })
                .push(t.coeff);
        }
        let mut merged = Vec::with_capacity(order.len());
        for s in order {
            let mut cs = coeffs.remove(&s).unwrap_or_default();
            cs.sort_by(f64::total_cmp);
            let c: f64 = cs.iter().sum();
            if c != 0.0 {
                merged.push(PauliTerm {
                    coeff: c,
                    string: s,
                });
            }
        }
        if merged.is_empty() {
            return Err(Error::EmptyHamiltonian);
        }
        Ok(Hamiltonian { n, terms: merged })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    /// Coefficient of the all-identity string, or zero.
    pub fn identity_coeff(&self) -> f64 {
        self.terms
            .iter()
            .find(|t| t.string.is_identity())
            .map_or(0.0, |t| t.coeff)
    }

    /// Sum of two Hamiltonians on the same register.
    pub fn sum(&self, other: &Hamiltonian) -> Result<Hamiltonian> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Hamiltonian::from_terms(terms)
    }

    /// `out = H psi`, matrix-free.
    pub fn apply(&self, psi: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|a| *a = Complex64::new(0.0, 0.0));
        for t in &self.terms {
            let m = t.string.masks();
            let phase = m.y_phase() * t.coeff;
            for (k, amp) in psi.iter().enumerate() {
                out[k ^ m.x_mask] += phase * m.sign(k) * amp;
            }
        }
    }

    /// Canonical text form accepted by [`parse_hamiltonian_file`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in &self.terms {
            s.push_str(&format!("{} {}\n", t.coeff, t.string));
        }
        s
    }
}

/// Parses the line-oriented Hamiltonian format: `#` comments, blank lines,
/// and `<float> <pauli>` terms.
pub fn parse_hamiltonian_file(text: &str) -> Result<Hamiltonian> {
    let mut terms = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (coeff_tok, pauli_tok) = match (parts.next(), parts.next(), parts.next()) {
            (Some(c), Some(p), None) => (c, p),
            _ => {
                return Err(Error::MalformedCoefficient {
                    line: line_no,
                    token: line.to_string(),
                })
            }
        };
        let coeff: f64 = coeff_tok
            .parse()
            .ok()
            .filter(|c: &f64| c.is_finite())
            .ok_or_else(|| Error::MalformedCoefficient {
                line: line_no,
                token: coeff_tok.to_string(),
            })?;
        let string: PauliString = pauli_tok.parse().map_err(|_| Error::InvalidPauli {
            line: line_no,
            token: pauli_tok.to_string(),
        })?;
        match width {
            None => width = Some(string.num_qubits()),
            Some(w) if w != string.num_qubits() => {
                return Err(Error::InconsistentWidth {
                    line: line_no,
                    expected: w,
                    found: string.num_qubits(),
                })
            }
            _ => {}
        }
        terms.push(PauliTerm { coeff, string });
    }
    Hamiltonian::from_terms(terms)
}

fn chain_bond(n: usize, j: usize, p: Pauli) -> PauliString {
    let mut ops = vec![Pauli::I; n];
    ops[j] = p;
    ops[j + 1] = p;
    PauliString { ops }
}

fn site(n: usize, j: usize, p: Pauli) -> PauliString {
    let mut ops = vec![Pauli::I; n];
    ops[j] = p;
    PauliString { ops }
}

/// Open-boundary transverse-field Ising chain `-J sum Z_j Z_{j+1} - h sum X_j`.
pub fn build_tfim(n: usize, coupling: f64, field: f64) -> Result<Hamiltonian> {
    if n < 2 {
        return Err(Error::TooFewQubits(n));
    }
    let mut terms = Vec::with_capacity(2 * n - 1);
    for j in 0..n - 1 {
        terms.push(PauliTerm::new(-coupling, chain_bond(n, j, Pauli::Z))?);
    }
    for j in 0..n {
        terms.push(PauliTerm::new(-field, site(n, j, Pauli::X))?);
    }
    Hamiltonian::from_terms(terms)
}

/// Open-boundary Heisenberg chain
/// `-1/2 sum (Jx XX + Jy YY + Jz ZZ) - 1/2 sum h Z`.
pub fn build_heisenberg(n: usize, jx: f64, jy: f64, jz: f64, field: f64) -> Result<Hamiltonian> {
    if n < 2 {
        return Err(Error::TooFewQubits(n));
    }
    let mut terms = Vec::new();
    for j in 0..n - 1 {
        terms.push(PauliTerm::new(-0.5 * jx, chain_bond(n, j, Pauli::X))?);
        terms.push(PauliTerm::new(-0.5 * jy, chain_bond(n, j, Pauli::Y))?);
        terms.push(PauliTerm::new(-0.5 * jz, chain_bond(n, j, Pauli::Z))?);
    }
    for j in 0..n {
        terms.push(PauliTerm::new(-0.5 * field, site(n, j, Pauli::Z))?);
    }
    Hamiltonian::from_terms(terms)
}

/// Open-boundary bond-alternating XXZ chain. Bond `j` (1-indexed) carries
/// `J` when odd and `J'` when even, with terms `XX + YY + delta ZZ`.
pub fn build_xxz(n: usize, coupling: f64, coupling_even: f64, delta: f64) -> Result<Hamiltonian> {
    if n < 2 {
        return Err(Error::TooFewQubits(n));
    }
    let mut terms = Vec::new();
    for j in 0..n - 1 {
        let c = if (j + 1) % 2 == 1 {
            coupling
        } else {
            coupling_even
        };
        terms.push(PauliTerm::new(c, chain_bond(n, j, Pauli::X))?);
        terms.push(PauliTerm::new(c, chain_bond(n, j, Pauli::Y))?);
        terms.push(PauliTerm::new(c * delta, chain_bond(n, j, Pauli::Z))?);
    }
    Hamiltonian::from_terms(terms)
}

fn canonical_terms(h: &Hamiltonian) -> Vec<PauliTerm> {
    let mut terms = h.terms.clone();
    terms.sort_by(|a, b| a.string.cmp(&b.string));
    terms
}

/// Dense `2^n x 2^n` matrix of `h`, terms accumulated in canonical order.
pub fn dense_matrix(h: &Hamiltonian) -> DMatrix<Complex64> {
    let dim = 1usize << h.n;
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for t in canonical_terms(h) {
        let masks = t.string.masks();
        let phase = masks.y_phase() * t.coeff;
        for k in 0..dim {
            m[(k ^ masks.x_mask, k)] += phase * masks.sign(k);
        }
    }
    m
}

/// Minimal eigenvalue of `h` (dense for small registers, Lanczos beyond
/// [`DENSE_MAX_QUBITS`]).
pub fn exact_ground_energy(h: &Hamiltonian) -> Result<f64> {
    if h.n > EXACT_MAX_QUBITS {
        return Err(Error::QubitCountOutOfRange {
            n: h.n,
            min: 1,
            max: EXACT_MAX_QUBITS,
        });
    }
    if h.n <= DENSE_MAX_QUBITS {
        Ok(dense_ground_energy(h))
    } else {
        Ok(lanczos_ground_energy(h))
    }
}

pub fn dense_ground_energy(h: &Hamiltonian) -> f64 {
    let m = dense_matrix(h);
    let eig = SymmetricEigen::new(m);
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Lanczos with full reorthogonalization, matrix-free.
pub fn lanczos_ground_energy(h: &Hamiltonian) -> f64 {
    let canon = Hamiltonian {
        n: h.n,
        terms: canonical_terms(h),
    };
    let dim = 1usize << h.n;
    let max_krylov = dim.min(300);
    let zero = Complex64::new(0.0, 0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1a4c);
    let mut v: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    normalize(&mut v);

    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(max_krylov);
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![zero; dim];
    let mut best = f64::INFINITY;

    for k in 0..max_krylov {
        canon.apply(&v, &mut w);
        let alpha = dot(&v, &w).re;
        alphas.push(alpha);
        basis.push(v.clone());
        // Two passes of Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= c * bi;
                }
            }
        }
        let beta = norm(&w);

        let (theta, last_comp) = tridiagonal_min(&alphas, &betas);
        let residual = beta * last_comp.abs();
        let done = residual < 1e-11 || beta < 1e-12 || k + 1 == max_krylov;
        if done || (best - theta).abs() < 1e-14 && residual < 1e-10 {
            return theta;
        }
        best = theta;
        betas.push(beta);
        v = w.iter().map(|x| x / beta).collect();
    }
    best
}

fn tridiagonal_min(alphas: &[f64], betas: &[f64]) -> (f64, f64) {
    let m = alphas.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let (idx, val) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    (val, eig.eigenvectors[(m - 1, idx)])
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(a: &mut [Complex64]) {
    let n = norm(a);
    a.iter_mut().for_each(|x| *x /= n);
}
