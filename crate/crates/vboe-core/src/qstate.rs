//! Dense statevector kernel: `Rz` rotations, `CZ` entangling, rotated-basis
//! single-qubit measurement, and density-matrix utilities for blindness audits.
//!
//! Qubit `q` corresponds to bit `q` of the basis-state index (little-endian).
//! Measured qubits are removed from the register immediately, so a state only
//! ever holds the qubits that are still alive.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::RngCore;
use thiserror::Error;

use crate::angle::AngleIndex;

/// Tolerance for all kernel invariant checks.
pub const TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum QuantumError {
    #[error("qubit index {index} out of range for {n} qubits")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("entangling gate requires two distinct qubits, got {0}")]
    EqualIndices(usize),
    #[error("projection has zero norm; state is numerically corrupted")]
    ZeroNormProjection,
    #[error("operands have mismatched qubit counts ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("ensemble probabilities are negative or do not sum to one")]
    BadDistribution,
}

/// How a single qubit is prepared before being sent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum QubitKind {
    /// `(|0> + e^{i theta}|1>)/sqrt(2)`.
    PlusTheta(AngleIndex),
    /// Computational basis state `|d>`.
    Computational(u8),
}

/// Single-qubit Pauli operators. `Y` is fixed globally as the composition
/// `Z * X` (the global phase is irrelevant everywhere it is used).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn all() -> [Pauli; 4] {
        [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z]
    }

    /// The non-identity Paulis.
    pub fn nontrivial() -> [Pauli; 3] {
        [Pauli::X, Pauli::Y, Pauli::Z]
    }
}

/// Pure state over `n` qubits as `2^n` complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

/// Prepares a single qubit of the given kind.
pub fn prepare_qubit(kind: QubitKind) -> StateVector {
    match kind {
        QubitKind::PlusTheta(theta) => {
            let s = core::f64::consts::FRAC_1_SQRT_2;
            StateVector {
                n: 1,
                amps: vec![Complex64::new(s, 0.0), theta.phase() * s],
            }
        }
        QubitKind::Computational(d) => {
            let mut amps = vec![Complex64::ZERO; 2];
            amps[(d & 1) as usize] = Complex64::ONE;
            StateVector { n: 1, amps }
        }
    }
}

impl StateVector {
    /// `|0...0>` on `n` qubits.
    pub fn zero(n: usize) -> Self {
        assert!(n >= 1, "state needs at least one qubit");
        let mut amps = vec![Complex64::ZERO; 1 << n];
        amps[0] = Complex64::ONE;
        StateVector { n, amps }
    }

    /// `|+>^{tensor n}`.
    pub fn plus(n: usize) -> Self {
        assert!(n >= 1);
        let a = (1.0 / (1u64 << n) as f64).sqrt();
        StateVector {
            n,
            amps: vec![Complex64::new(a, 0.0); 1 << n],
        }
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Self {
        let n = amps.len().trailing_zeros() as usize;
        assert!(amps.len() == 1 << n && n >= 1, "length must be a power of two");
        StateVector { n, amps }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Tensor product `self (x) other`; `other`'s qubits come after `self`'s.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let mut amps = vec![Complex64::ZERO; 1 << (self.n + other.n)];
        for (j, b) in other.amps.iter().enumerate() {
            if *b == Complex64::ZERO {
                continue;
            }
            for (i, a) in self.amps.iter().enumerate() {
                amps[(j << self.n) | i] = a * b;
            }
        }
        StateVector {
            n: self.n + other.n,
            amps,
        }
    }

    fn check_index(&self, q: usize) -> Result<(), QuantumError> {
        if q >= self.n {
            Err(QuantumError::IndexOutOfRange { index: q, n: self.n })
        } else {
            Ok(())
        }
    }

    /// Controlled-Z between qubits `i` and `j` (self-inverse, symmetric).
    pub fn apply_cz(&self, i: usize, j: usize) -> Result<StateVector, QuantumError> {
        self.check_index(i)?;
        self.check_index(j)?;
        if i == j {
            return Err(QuantumError::EqualIndices(i));
        }
        let mask = (1usize << i) | (1 << j);
        let mut out = self.clone();
        for (idx, a) in out.amps.iter_mut().enumerate() {
            if idx & mask == mask {
                *a = -*a;
            }
        }
        Ok(out)
    }

    /// Z-rotation by a discrete angle: amplitudes with bit `q` set pick up `e^{i theta}`.
    pub fn apply_rz(&self, q: usize, theta: AngleIndex) -> Result<StateVector, QuantumError> {
        self.check_index(q)?;
        let phase = theta.phase();
        let bit = 1usize << q;
        let mut out = self.clone();
        for (idx, a) in out.amps.iter_mut().enumerate() {
            if idx & bit != 0 {
                *a *= phase;
            }
        }
        Ok(out)
    }

    /// Pauli X on qubit `q`.
    pub fn apply_x(&self, q: usize) -> Result<StateVector, QuantumError> {
        self.check_index(q)?;
        let bit = 1usize << q;
        let mut out = self.clone();
        for idx in 0..out.amps.len() {
            if idx & bit == 0 {
                out.amps.swap(idx, idx | bit);
            }
        }
        Ok(out)
    }

    /// Pauli Z on qubit `q`.
    pub fn apply_z(&self, q: usize) -> Result<StateVector, QuantumError> {
        self.apply_rz(q, crate::angle::PI)
    }

    /// Pauli Y on qubit `q`, fixed globally as the composition `Z * X`.
    pub fn apply_y(&self, q: usize) -> Result<StateVector, QuantumError> {
        self.apply_x(q)?.apply_z(q)
    }

    /// Applies a single-qubit Pauli.
    pub fn apply_pauli(&self, q: usize, p: Pauli) -> Result<StateVector, QuantumError> {
        match p {
            Pauli::I => {
                self.check_index(q)?;
                Ok(self.clone())
            }
            Pauli::X => self.apply_x(q),
            Pauli::Y => self.apply_y(q),
            Pauli::Z => self.apply_z(q),
        }
    }

    /// Hadamard on qubit `q`.
    pub fn apply_h(&self, q: usize) -> Result<StateVector, QuantumError> {
        self.check_index(q)?;
        let bit = 1usize << q;
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let mut out = self.clone();
        for idx in 0..out.amps.len() {
            if idx & bit == 0 {
                let a0 = out.amps[idx];
                let a1 = out.amps[idx | bit];
                out.amps[idx] = (a0 + a1) * s;
                out.amps[idx | bit] = (a0 - a1) * s;
            }
        }
        Ok(out)
    }

    /// CNOT with control `c` and target `t`.
    pub fn apply_cnot(&self, c: usize, t: usize) -> Result<StateVector, QuantumError> {
        self.check_index(c)?;
        self.check_index(t)?;
        if c == t {
            return Err(QuantumError::EqualIndices(c));
        }
        let cbit = 1usize << c;
        let tbit = 1usize << t;
        let mut out = self.clone();
        for idx in 0..out.amps.len() {
            if idx & cbit != 0 && idx & tbit == 0 {
                out.amps.swap(idx, idx | tbit);
            }
        }
        Ok(out)
    }

    /// Probability that measuring qubit `q` in the `delta`-rotated basis yields 1.
    ///
    /// Shares the projection arithmetic with [`StateVector::measure_rotated`]
    /// but leaves the state untouched.
    pub fn prob_one_rotated(&self, q: usize, delta: AngleIndex) -> Result<f64, QuantumError> {
        let (p1, _, _) = self.project_rotated(q, delta)?;
        Ok(p1)
    }

    fn project_rotated(
        &self,
        q: usize,
        delta: AngleIndex,
    ) -> Result<(f64, Vec<Complex64>, Vec<Complex64>), QuantumError> {
        self.check_index(q)?;
        let bit = 1usize << q;
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let conj_phase = delta.phase().conj();
        let half = self.amps.len() / 2;
        let mut plus = Vec::with_capacity(half);
        let mut minus = Vec::with_capacity(half);
        // Basis index with qubit q deleted: lower bits kept, upper bits shifted down.
        let low_mask = bit - 1;
        for rest in 0..half {
            let idx0 = (rest & low_mask) | ((rest & !low_mask) << 1);
            let idx1 = idx0 | bit;
            let a0 = self.amps[idx0];
            let a1 = self.amps[idx1] * conj_phase;
            plus.push((a0 + a1) * s);
            minus.push((a0 - a1) * s);
        }
        let p1: f64 = minus.iter().map(|a| a.norm_sqr()).sum();
        Ok((p1, plus, minus))
    }

    /// Measures qubit `q` in the basis `{|+_delta>, |-_delta>}` and removes it.
    ///
    /// Outcome 1 corresponds to `|-_delta>`. For a product qubit `|+_theta>`
    /// the outcome-1 probability is `sin^2((theta - delta)/2)`.
    pub fn measure_rotated(
        &self,
        q: usize,
        delta: AngleIndex,
        rng: &mut dyn RngCore,
    ) -> Result<(u8, Option<StateVector>), QuantumError> {
        let (p1, plus, minus) = self.project_rotated(q, delta)?;
        let u = rand::Rng::random::<f64>(rng);
        let bit = u8::from(u < p1);
        let (amps, p) = if bit == 1 { (minus, p1) } else { (plus, 1.0 - p1) };
        if p < TOL * TOL {
            return Err(QuantumError::ZeroNormProjection);
        }
        if self.n == 1 {
            return Ok((bit, None));
        }
        let scale = 1.0 / p.sqrt();
        let amps = amps.into_iter().map(|a| a * scale).collect();
        Ok((
            bit,
            Some(StateVector {
                n: self.n - 1,
                amps,
            }),
        ))
    }

    /// Both projective branches of a rotated measurement, with probabilities.
    /// The backbone of exact branch enumeration; states are normalized, and a
    /// branch with (numerically) zero probability is reported as `None`.
    pub fn measurement_branches(
        &self,
        q: usize,
        delta: AngleIndex,
    ) -> Result<[(f64, Option<StateVector>); 2], QuantumError> {
        let (p1, plus, minus) = self.project_rotated(q, delta)?;
        let p0 = 1.0 - p1;
        let make = |p: f64, amps: Vec<Complex64>| -> Option<StateVector> {
            if p < TOL * TOL || self.n == 1 {
                return None;
            }
            let scale = 1.0 / p.sqrt();
            Some(StateVector {
                n: self.n - 1,
                amps: amps.into_iter().map(|a| a * scale).collect(),
            })
        };
        Ok([(p0, make(p0, plus)), (p1, make(p1, minus))])
    }

    /// Measures qubit `q` in the computational basis and removes it.
    pub fn measure_computational(
        &self,
        q: usize,
        rng: &mut dyn RngCore,
    ) -> Result<(u8, Option<StateVector>), QuantumError> {
        // Z-basis readout is an H then X-basis readout at angle 0.
        self.apply_h(q)?.measure_rotated(q, AngleIndex::new(0), rng)
    }
}

/// Density matrix over `n` qubits, row-major `2^n x 2^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n: usize,
    entries: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn zeros(n: usize) -> Self {
        DensityMatrix {
            n,
            entries: vec![Complex64::ZERO; 1 << (2 * n)],
        }
    }

    pub fn from_pure(state: &StateVector) -> Self {
        let dim = 1 << state.n;
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(state.amps[i] * state.amps[j].conj());
            }
        }
        DensityMatrix {
            n: state.n,
            entries,
        }
    }

    /// `I / 2^n`.
    pub fn maximally_mixed(n: usize) -> Self {
        let dim = 1usize << n;
        let mut m = Self::zeros(n);
        for i in 0..dim {
            m.entries[i * dim + i] = Complex64::new(1.0 / dim as f64, 0.0);
        }
        m
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * (1 << self.n) + j]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn trace(&self) -> Complex64 {
        let dim = 1usize << self.n;
        (0..dim).map(|i| self.entries[i * dim + i]).sum()
    }

    /// Adds `weight * |psi><psi|` in place.
    pub fn accumulate_pure(&mut self, weight: f64, state: &StateVector) -> Result<(), QuantumError> {
        if state.n != self.n {
            return Err(QuantumError::DimensionMismatch(state.n, self.n));
        }
        let dim = 1usize << self.n;
        for i in 0..dim {
            let wi = state.amps[i] * weight;
            for j in 0..dim {
                self.entries[i * dim + j] += wi * state.amps[j].conj();
            }
        }
        Ok(())
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        assert_eq!(self.n, other.n);
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Checks Hermiticity, unit trace, and positive semidefiniteness
    /// (via a pivoted LDL factorization) within [`TOL`].
    pub fn validate(&self) -> Result<(), QuantumError> {
        let dim = 1usize << self.n;
        for i in 0..dim {
            for j in 0..=i {
                let d = (self.entries[i * dim + j] - self.entries[j * dim + i].conj()).norm();
                if d > TOL {
                    return Err(QuantumError::BadDistribution);
                }
            }
        }
        if (self.trace() - Complex64::ONE).norm() > TOL {
            return Err(QuantumError::BadDistribution);
        }
        if self.min_eigenvalue() < -TOL {
            return Err(QuantumError::BadDistribution);
        }
        Ok(())
    }

    /// Smallest eigenvalue, by cyclic Jacobi iteration on the Hermitian matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        let dim = 1usize << self.n;
        let mut m = self.entries.clone();
        for _ in 0..100 {
            let mut off = 0.0f64;
            for p in 0..dim {
                for q in (p + 1)..dim {
                    off += m[p * dim + q].norm_sqr();
                }
            }
            if off < 1e-24 {
                break;
            }
            for p in 0..dim {
                for q in (p + 1)..dim {
                    let apq = m[p * dim + q];
                    if apq.norm() < 1e-18 {
                        continue;
                    }
                    let app = m[p * dim + p].re;
                    let aqq = m[q * dim + q].re;
                    // Unitary 2x2 diagonalization of the (p,q) block.
                    let phi = apq.arg();
                    let tau = (aqq - app) / (2.0 * apq.norm());
                    let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s_mag = t * c;
                    let s = Complex64::from_polar(s_mag, phi);
                    for k in 0..dim {
                        let mkp = m[k * dim + p];
                        let mkq = m[k * dim + q];
                        m[k * dim + p] = mkp * c - mkq * s.conj();
                        m[k * dim + q] = mkp * s + mkq * c;
                    }
                    for k in 0..dim {
                        let mpk = m[p * dim + k];
                        let mqk = m[q * dim + k];
                        m[p * dim + k] = mpk * c - mqk * s;
                        m[q * dim + k] = mpk * s.conj() + mqk * c;
                    }
                }
            }
        }
        (0..dim).map(|i| m[i * dim + i].re).fold(f64::INFINITY, f64::min)
    }
}

/// `sum_i p_i |psi_i><psi_i|` for an ensemble of pure states.
pub fn average_density(ensemble: &[(f64, StateVector)]) -> Result<DensityMatrix, QuantumError> {
    let Some((_, first)) = ensemble.first() else {
        return Err(QuantumError::BadDistribution);
    };
    let total: f64 = ensemble.iter().map(|(p, _)| *p).sum();
    if ensemble.iter().any(|(p, _)| *p < 0.0) || (total - 1.0).abs() > TOL {
        return Err(QuantumError::BadDistribution);
    }
    let mut rho = DensityMatrix::zeros(first.num_qubits());
    for (p, psi) in ensemble {
        rho.accumulate_pure(*p, psi)?;
    }
    Ok(rho)
}
