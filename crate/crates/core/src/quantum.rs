//! Real-amplitude state vectors, product states and two-outcome projective
//! measurements.
//!
//! Basis ordering: qubit `i` (0-based, left to right in a bit string) maps to
//! bit `n - 1 - i` of the computational-basis index, so qubit 0 is the most
//! significant bit and the string `b_0 b_1 ... b_{n-1}` read as a binary
//! number is its own basis index.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used for normalization checks throughout the crate.
pub const NORM_TOL: f64 = 1e-12;

/// Default cap on the number of qubits for dense state-vector operations
/// (2^20 amplitudes, 8 MiB of `f64`).
pub const DEFAULT_MAX_DENSE_QUBITS: usize = 20;

/// Squared norms below this are treated as an empty overlap.
const DEGENERATE_NORM_SQ: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("rotation angle {theta} violates |theta| < pi/4")]
    AngleOutOfRange { theta: f64 },
    #[error("{n} qubits exceeds the dense state limit of {max}")]
    DenseLimit { n: usize, max: usize },
    #[error("state is not normalized (norm^2 = {norm_sq})")]
    NotNormalized { norm_sq: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("amplitude vector length {len} is not 2^{n}")]
    BadLength { len: usize, n: usize },
    #[error("invalid subspace: {0}")]
    InvalidSubspace(String),
    #[error("state does not factor into a product of single-qubit states")]
    NotProduct,
    #[error("a product state needs at least one qubit")]
    Empty,
}

/// Amplitudes `(c0, c1)` of a single real qubit `c0|0> + c1|1>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Qubit {
    pub c0: f64,
    pub c1: f64,
}

impl From<[f64; 2]> for Qubit {
    fn from(a: [f64; 2]) -> Self {
        Qubit { c0: a[0], c1: a[1] }
    }
}

impl From<Qubit> for [f64; 2] {
    fn from(q: Qubit) -> Self {
        [q.c0, q.c1]
    }
}

impl Qubit {
    pub const ZERO: Qubit = Qubit { c0: 1.0, c1: 0.0 };
    pub const ONE: Qubit = Qubit { c0: 0.0, c1: 1.0 };

    pub fn new(c0: f64, c1: f64) -> Self {
        Qubit { c0, c1 }
    }

    /// Computational basis state `|bit>`.
    pub fn basis(bit: bool) -> Self {
        if bit {
            Self::ONE
        } else {
            Self::ZERO
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.c0 * self.c0 + self.c1 * self.c1
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sq() - 1.0).abs() <= NORM_TOL
    }

    pub fn dot(&self, other: &Qubit) -> f64 {
        self.c0 * other.c0 + self.c1 * other.c1
    }

    pub fn amplitude(&self, bit: bool) -> f64 {
        if bit {
            self.c1
        } else {
            self.c0
        }
    }

    /// The orthogonal state `-c1|0> + c0|1>`.
    pub fn orthogonal(&self) -> Qubit {
        Qubit {
            c0: -self.c1,
            c1: self.c0,
        }
    }
}

/// `cos(theta)|bit> + sin(theta)|!bit>`, the sealing encoding of one bit.
pub fn make_qubit(bit: bool, theta: f64) -> Result<Qubit, QuantumError> {
    if !(theta.abs() < std::f64::consts::FRAC_PI_4) {
        return Err(QuantumError::AngleOutOfRange { theta });
    }
    Ok(rotated(bit, theta))
}

/// Same as [`make_qubit`] without the angle check.
pub(crate) fn rotated(bit: bool, theta: f64) -> Qubit {
    let (s, c) = theta.sin_cos();
    if bit {
        Qubit { c0: s, c1: c }
    } else {
        Qubit { c0: c, c1: s }
    }
}

/// Measures a single qubit in the computational basis. Returns the outcome and
/// the collapsed basis state.
pub fn measure_computational<R: Rng + ?Sized>(state: &Qubit, rng: &mut R) -> (bool, Qubit) {
    let p1 = state.c1 * state.c1 / state.norm_sq();
    let outcome = rng.random::<f64>() < p1;
    (outcome, Qubit::basis(outcome))
}

/// Two-outcome projective measurement `{|t><t|, 1 - |t><t|}`. On pass the
/// state becomes `target`, otherwise the state orthogonal to `target`.
pub fn project_onto_pure<R: Rng + ?Sized>(
    state: &Qubit,
    target: &Qubit,
    rng: &mut R,
) -> (bool, Qubit) {
    let overlap = state.dot(target);
    let p = (overlap * overlap).min(1.0);
    let pass = rng.random::<f64>() < p;
    if pass {
        (true, *target)
    } else {
        (false, target.orthogonal())
    }
}

/// Dense real state vector over `2^n` computational basis states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<f64>,
}

impl StateVector {
    pub fn from_amplitudes(n_qubits: usize, amplitudes: Vec<f64>) -> Result<Self, QuantumError> {
        if n_qubits >= usize::BITS as usize || amplitudes.len() != 1usize << n_qubits {
            return Err(QuantumError::BadLength {
                len: amplitudes.len(),
                n: n_qubits,
            });
        }
        let sv = StateVector {
            n_qubits,
            amplitudes,
        };
        let norm_sq = sv.norm_sq();
        if (norm_sq - 1.0).abs() > NORM_TOL {
            return Err(QuantumError::NotNormalized { norm_sq });
        }
        Ok(sv)
    }

    /// Computational basis state `|index>`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self, QuantumError> {
        check_dense(n_qubits, DEFAULT_MAX_DENSE_QUBITS)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(QuantumError::InvalidSubspace(format!(
                "index {index} outside [0, {dim})"
            )));
        }
        let mut amplitudes = vec![0.0; dim];
        amplitudes[index] = 1.0;
        Ok(StateVector {
            n_qubits,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: usize) -> f64 {
        self.amplitudes[index]
    }

    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.iter().map(|a| a * a).sum()
    }

    pub fn dot(&self, other: &StateVector) -> Result<f64, QuantumError> {
        if self.dim() != other.dim() {
            return Err(QuantumError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a * b)
            .sum())
    }

    /// Applies a real 2x2 matrix `[[m00, m01], [m10, m11]]` to one qubit.
    /// The caller is responsible for the matrix being orthogonal.
    pub fn apply_single_qubit(&mut self, qubit: usize, m: [[f64; 2]; 2]) {
        let bit = 1usize << (self.n_qubits - 1 - qubit);
        for idx in 0..self.dim() {
            if idx & bit == 0 {
                let a0 = self.amplitudes[idx];
                let a1 = self.amplitudes[idx | bit];
                self.amplitudes[idx] = m[0][0] * a0 + m[0][1] * a1;
                self.amplitudes[idx | bit] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    fn scaled(n_qubits: usize, amplitudes: Vec<f64>, norm_sq: f64) -> StateVector {
        let inv = norm_sq.sqrt().recip();
        StateVector {
            n_qubits,
            amplitudes: amplitudes.into_iter().map(|a| a * inv).collect(),
        }
    }
}

fn check_dense(n: usize, max: usize) -> Result<(), QuantumError> {
    if n > max {
        Err(QuantumError::DenseLimit { n, max })
    } else {
        Ok(())
    }
}

/// Unentangled n-qubit state stored factor by factor. No qubit-count cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductState {
    factors: Vec<Qubit>,
}

impl ProductState {
    pub fn new(factors: Vec<Qubit>) -> Result<Self, QuantumError> {
        if factors.is_empty() {
            return Err(QuantumError::Empty);
        }
        if let Some(q) = factors.iter().find(|q| !q.is_normalized()) {
            return Err(QuantumError::NotNormalized {
                norm_sq: q.norm_sq(),
            });
        }
        Ok(ProductState { factors })
    }

    pub fn n_qubits(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[Qubit] {
        &self.factors
    }

    pub fn factor(&self, i: usize) -> &Qubit {
        &self.factors[i]
    }

    pub fn set_factor(&mut self, i: usize, q: Qubit) {
        self.factors[i] = q;
    }

    /// `<v|Psi>` for a basis index, without building the dense vector.
    pub fn amplitude(&self, index: usize) -> f64 {
        let n = self.n_qubits();
        self.factors
            .iter()
            .enumerate()
            .map(|(i, q)| q.amplitude(index >> (n - 1 - i) & 1 == 1))
            .product()
    }

    /// Squared overlap of two product states, computed factor-wise.
    pub fn overlap_sq(&self, other: &ProductState) -> Result<f64, QuantumError> {
        if self.n_qubits() != other.n_qubits() {
            return Err(QuantumError::DimensionMismatch {
                left: self.n_qubits(),
                right: other.n_qubits(),
            });
        }
        let ip: f64 = self
            .factors
            .iter()
            .zip(&other.factors)
            .map(|(a, b)| a.dot(b))
            .product();
        Ok(ip * ip)
    }

    /// Recovers the factors of a dense state that is a product state.
    ///
    /// Factor signs are fixed so each factor's amplitude on the largest basis
    /// component is nonnegative, except that the first factor absorbs the
    /// global sign.
    pub fn contract(state: &StateVector) -> Result<ProductState, QuantumError> {
        let n = state.n_qubits();
        if n == 0 {
            return Err(QuantumError::Empty);
        }
        let (pivot, pivot_amp) = state
            .amplitudes()
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .expect("nonempty");
        let mut factors = Vec::with_capacity(n);
        for i in 0..n {
            let bit = 1usize << (n - 1 - i);
            let ratio = state.amplitude(pivot ^ bit) / pivot_amp;
            let scale = (1.0 + ratio * ratio).sqrt().recip();
            let (on, off) = (scale, ratio * scale);
            factors.push(if pivot & bit == 0 {
                Qubit::new(on, off)
            } else {
                Qubit::new(off, on)
            });
        }
        if pivot_amp < 0.0 {
            factors[0] = Qubit::new(-factors[0].c0, -factors[0].c1);
        }
        let product = ProductState { factors };
        let tol = 1e-10;
        let matches = state
            .amplitudes()
            .iter()
            .enumerate()
            .all(|(v, a)| (product.amplitude(v) - a).abs() <= tol);
        if matches {
            Ok(product)
        } else {
            Err(QuantumError::NotProduct)
        }
    }
}

/// Tensor product of the factors with the default dense cap.
pub fn expand(product: &ProductState) -> Result<StateVector, QuantumError> {
    expand_with_limit(product, DEFAULT_MAX_DENSE_QUBITS)
}

pub fn expand_with_limit(product: &ProductState, max: usize) -> Result<StateVector, QuantumError> {
    let n = product.n_qubits();
    check_dense(n, max)?;
    // Kronecker product, qubit 0 most significant.
    let mut amplitudes = vec![1.0];
    for q in product.factors() {
        let mut next = Vec::with_capacity(amplitudes.len() * 2);
        for a in &amplitudes {
            next.push(a * q.c0);
            next.push(a * q.c1);
        }
        amplitudes = next;
    }
    Ok(StateVector {
        n_qubits: n,
        amplitudes,
    })
}

/// Set of computational basis indices spanning a subspace `V`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subspace {
    n_qubits: usize,
    basis_indices: Vec<usize>,
}

impl Subspace {
    /// Sorts and deduplicates `indices`; rejects empty sets and out-of-range indices.
    pub fn new(n_qubits: usize, mut indices: Vec<usize>) -> Result<Self, QuantumError> {
        check_dense(n_qubits, DEFAULT_MAX_DENSE_QUBITS)?;
        let dim = 1usize << n_qubits;
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() {
            return Err(QuantumError::InvalidSubspace("empty subspace".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= dim) {
            return Err(QuantumError::InvalidSubspace(format!(
                "index {bad} outside [0, {dim})"
            )));
        }
        Ok(Subspace {
            n_qubits,
            basis_indices: indices,
        })
    }

    pub fn full(n_qubits: usize) -> Result<Self, QuantumError> {
        check_dense(n_qubits, DEFAULT_MAX_DENSE_QUBITS)?;
        Ok(Subspace {
            n_qubits,
            basis_indices: (0..1usize << n_qubits).collect(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn indices(&self) -> &[usize] {
        &self.basis_indices
    }

    /// Dimension `m`.
    pub fn dim(&self) -> usize {
        self.basis_indices.len()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.basis_indices.binary_search(&index).is_ok()
    }

    /// `sum_{v in V} <v|Psi>^2`.
    pub fn weight(&self, state: &StateVector) -> f64 {
        self.basis_indices
            .iter()
            .map(|&v| state.amplitude(v).powi(2))
            .sum()
    }
}

/// Outcome of [`project_onto_subspace`].
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceProjection {
    pub collapsed_into_v: bool,
    pub post_state: StateVector,
    /// `sum_{v in V} <v|Psi>^2`, the probability of collapsing into `V`.
    pub norm_in_v: f64,
}

/// Two-outcome measurement `{P_V, 1 - P_V}`.
///
/// On collapse the post-state is `P_V|Psi> / N`; otherwise it is the
/// renormalized component in the orthogonal complement. A branch whose weight
/// is below 1e-300 is never selected and never divided by.
pub fn project_onto_subspace<R: Rng + ?Sized>(
    state: &StateVector,
    subspace: &Subspace,
    rng: &mut R,
) -> Result<SubspaceProjection, QuantumError> {
    if state.n_qubits() != subspace.n_qubits() {
        return Err(QuantumError::DimensionMismatch {
            left: state.n_qubits(),
            right: subspace.n_qubits(),
        });
    }
    let norm_in_v = subspace.weight(state);
    let complement = (state.norm_sq() - norm_in_v).max(0.0);
    let collapsed = if norm_in_v < DEGENERATE_NORM_SQ {
        false
    } else if complement < DEGENERATE_NORM_SQ {
        true
    } else {
        rng.random::<f64>() < norm_in_v
    };
    let mut amps = state.amplitudes().to_vec();
    let (post, weight) = if collapsed {
        let mut inside = vec![0.0; amps.len()];
        for &v in subspace.indices() {
            inside[v] = amps[v];
        }
        (inside, norm_in_v)
    } else {
        for &v in subspace.indices() {
            amps[v] = 0.0;
        }
        (amps, complement)
    };
    Ok(SubspaceProjection {
        collapsed_into_v: collapsed,
        post_state: StateVector::scaled(state.n_qubits(), post, weight),
        norm_in_v,
    })
}

/// Measurement whose outcomes partition the basis into classes
/// (`class_of(v)` in `0..n_classes`). Returns the observed class, its
/// probability and the collapsed state.
pub fn measure_partition<R, F>(
    state: &StateVector,
    n_classes: usize,
    class_of: F,
    rng: &mut R,
) -> (usize, f64, StateVector)
where
    R: Rng + ?Sized,
    F: Fn(usize) -> usize,
{
    let mut weights = vec![0.0; n_classes];
    for (v, a) in state.amplitudes().iter().enumerate() {
        weights[class_of(v)] += a * a;
    }
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut chosen = None;
    for (c, &w) in weights.iter().enumerate() {
        if w < DEGENERATE_NORM_SQ {
            continue;
        }
        chosen = Some(c);
        if u < w {
            break;
        }
        u -= w;
    }
    let class = chosen.expect("normalized state has a nonzero class");
    let post: Vec<f64> = state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(v, &a)| if class_of(v) == class { a } else { 0.0 })
        .collect();
    let w = weights[class];
    (class, w, StateVector::scaled(state.n_qubits(), post, w))
}

/// Two-outcome projective measurement onto a dense pure `target`.
pub fn project_dense_onto_pure<R: Rng + ?Sized>(
    state: &StateVector,
    target: &StateVector,
    rng: &mut R,
) -> Result<(bool, StateVector), QuantumError> {
    let ip = state.dot(target)?;
    let p = (ip * ip).min(1.0);
    let rest = (1.0 - p).max(0.0);
    let pass = rest < DEGENERATE_NORM_SQ || (p >= DEGENERATE_NORM_SQ && rng.random::<f64>() < p);
    if pass {
        return Ok((true, target.clone()));
    }
    let residual: Vec<f64> = state
        .amplitudes()
        .iter()
        .zip(target.amplitudes())
        .map(|(s, t)| s - ip * t)
        .collect();
    let w: f64 = residual.iter().map(|a| a * a).sum();
    Ok((false, StateVector::scaled(state.n_qubits(), residual, w)))
}

/// `|<a|b>|^2`.
pub fn overlap_sq(a: &StateVector, b: &StateVector) -> Result<f64, QuantumError> {
    let ip = a.dot(b)?;
    Ok(ip * ip)
}
