//! Sealing, honest reading and checking of a bit string.
//!
//! A [`SealedString`] keeps Alice's secret record (bits and angles) apart
//! from the [`PublicState`] any reader may touch. Readers and adversaries are
//! written against `PublicState` alone; only [`check`] and test oracles look
//! at the [`AliceRecord`].

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};
use std::sync::atomic::{AtomicBool, Ordering};
use thiserror::Error;

use crate::quantum::{
    expand, make_qubit, measure_computational, project_dense_onto_pure, project_onto_pure,
    rotated, ProductState, QuantumError, Qubit, StateVector,
};
use crate::rng::TrialRng;

pub const RECORD_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("expected {expected} bits, got {got}")]
    BitLength { expected: usize, got: usize },
    #[error("angle {theta} outside [-{bound}, {bound}]")]
    AngleOutOfBound { theta: f64, bound: f64 },
    #[error("operation needs a product state but the public state is dense")]
    NotProduct,
    #[error("record: {0}")]
    Schema(String),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Public protocol constants: string length `n`, angle scale `Theta`,
/// exponent `alpha`, plus the seed used to derive randomness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub n: usize,
    #[serde(rename = "theta")]
    pub theta_max: f64,
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
}

static WIDE_THETA_WARNED: AtomicBool = AtomicBool::new(false);

impl ProtocolParams {
    pub fn new(n: usize, theta_max: f64, alpha: f64, seed: u64) -> Result<Self, ProtocolError> {
        let p = ProtocolParams {
            n,
            theta_max,
            alpha,
            seed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.n < 1 {
            return Err(ProtocolError::InvalidParams("n >= 1 violated".into()));
        }
        if !(self.theta_max > 0.0 && self.theta_max < FRAC_PI_4) {
            return Err(ProtocolError::InvalidParams(format!(
                "0 < Theta < pi/4 violated (Theta = {})",
                self.theta_max
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(ProtocolError::InvalidParams(format!(
                "0 < alpha < 1/2 violated (alpha = {})",
                self.alpha
            )));
        }
        if self.theta_max > FRAC_PI_8 && !WIDE_THETA_WARNED.swap(true, Ordering::Relaxed) {
            log::warn!(
                "Theta = {} exceeds pi/8; the protocol assumes Theta << pi/4",
                self.theta_max
            );
        }
        Ok(())
    }

    /// Half-width `Theta / n^alpha` of the interval the angles are drawn from.
    pub fn angle_bound(&self) -> f64 {
        self.theta_max / (self.n as f64).powf(self.alpha)
    }
}

/// The state any reader can act on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PublicState {
    Product { factors: Vec<Qubit> },
    Dense { n: usize, amplitudes: Vec<f64> },
}

impl PublicState {
    pub fn from_product(p: ProductState) -> Self {
        PublicState::Product {
            factors: p.factors().to_vec(),
        }
    }

    pub fn from_dense(sv: StateVector) -> Self {
        PublicState::Dense {
            n: sv.n_qubits(),
            amplitudes: sv.amplitudes().to_vec(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        match self {
            PublicState::Product { factors } => factors.len(),
            PublicState::Dense { n, .. } => *n,
        }
    }

    pub fn is_product(&self) -> bool {
        matches!(self, PublicState::Product { .. })
    }

    pub fn factors_mut(&mut self) -> Result<&mut [Qubit], ProtocolError> {
        match self {
            PublicState::Product { factors } => Ok(factors),
            PublicState::Dense { .. } => Err(ProtocolError::NotProduct),
        }
    }

    pub fn factors(&self) -> Result<&[Qubit], ProtocolError> {
        match self {
            PublicState::Product { factors } => Ok(factors),
            PublicState::Dense { .. } => Err(ProtocolError::NotProduct),
        }
    }

    /// Dense copy of the state (expanding a product state, subject to the dense cap).
    pub fn to_dense(&self) -> Result<StateVector, QuantumError> {
        match self {
            PublicState::Product { factors } => expand(&ProductState::new(factors.clone())?),
            PublicState::Dense { n, amplitudes } => {
                StateVector::from_amplitudes(*n, amplitudes.clone())
            }
        }
    }

    fn validate(&self) -> Result<(), QuantumError> {
        match self {
            PublicState::Product { factors } => ProductState::new(factors.clone()).map(|_| ()),
            PublicState::Dense { n, amplitudes } => {
                StateVector::from_amplitudes(*n, amplitudes.clone()).map(|_| ())
            }
        }
    }
}

/// Alice's secret record. Never consulted by reading or attack code.
#[derive(Debug, Clone, PartialEq)]
pub struct AliceRecord {
    bits: Vec<bool>,
    thetas: Vec<f64>,
}

impl AliceRecord {
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    /// Single-qubit state `psi_i` Alice projects onto when checking.
    pub fn target(&self, i: usize) -> Qubit {
        rotated(self.bits[i], self.thetas[i])
    }

    pub fn target_product(&self) -> ProductState {
        ProductState::new((0..self.bits.len()).map(|i| self.target(i)).collect())
            .expect("targets are normalized")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SealedString {
    params: ProtocolParams,
    alice: AliceRecord,
    public: PublicState,
}

impl SealedString {
    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    /// Alice's private record.
    pub fn alice(&self) -> &AliceRecord {
        &self.alice
    }

    pub fn public_state(&self) -> &PublicState {
        &self.public
    }

    pub fn public_state_mut(&mut self) -> &mut PublicState {
        &mut self.public
    }

    pub fn n(&self) -> usize {
        self.params.n
    }
}

/// Seals `bits`, drawing each angle uniformly from `[-Theta/n^alpha, Theta/n^alpha]`.
pub fn seal<R: Rng + ?Sized>(
    params: &ProtocolParams,
    bits: &[bool],
    rng: &mut R,
) -> Result<SealedString, ProtocolError> {
    params.validate()?;
    let bound = params.angle_bound();
    let thetas = (0..bits.len())
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    seal_with_thetas(params, bits, thetas)
}

/// Seals with every angle fixed to `theta`. Diagnostic only: a real sealer
/// must draw the angles at random.
pub fn seal_pinned(
    params: &ProtocolParams,
    bits: &[bool],
    theta: f64,
) -> Result<SealedString, ProtocolError> {
    params.validate()?;
    seal_with_thetas(params, bits, vec![theta; bits.len()])
}

/// Seals with explicitly chosen angles, each within the parameter bound.
pub fn seal_with_thetas(
    params: &ProtocolParams,
    bits: &[bool],
    thetas: Vec<f64>,
) -> Result<SealedString, ProtocolError> {
    if bits.len() != params.n {
        return Err(ProtocolError::BitLength {
            expected: params.n,
            got: bits.len(),
        });
    }
    if thetas.len() != params.n {
        return Err(ProtocolError::Schema(format!(
            "{} angles for {} bits",
            thetas.len(),
            params.n
        )));
    }
    let bound = params.angle_bound();
    if let Some(&theta) = thetas.iter().find(|t| !(t.abs() <= bound)) {
        return Err(ProtocolError::AngleOutOfBound { theta, bound });
    }
    let factors = bits
        .iter()
        .zip(&thetas)
        .map(|(&b, &t)| make_qubit(b, t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SealedString {
        params: *params,
        alice: AliceRecord {
            bits: bits.to_vec(),
            thetas,
        },
        public: PublicState::Product { factors },
    })
}

/// Measures every public qubit in the computational basis. The factors are
/// left in the observed basis states.
pub fn read_public<R: Rng + ?Sized>(
    public: &mut PublicState,
    rng: &mut R,
) -> Result<Vec<bool>, ProtocolError> {
    let factors = public.factors_mut()?;
    Ok(factors
        .iter_mut()
        .map(|q| {
            let (bit, post) = measure_computational(q, rng);
            *q = post;
            bit
        })
        .collect())
}

/// Honest reader: takes the measured string as the sealed string.
pub fn read_honest<R: Rng + ?Sized>(
    sealed: &mut SealedString,
    rng: &mut R,
) -> Result<Vec<bool>, ProtocolError> {
    read_public(&mut sealed.public, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Unread,
    Read,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CheckOptions {
    /// Stop at the first failing qubit.
    pub early_exit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    /// One entry per checked qubit; a single entry when the public state is dense.
    pub per_qubit_pass: Vec<bool>,
    pub verdict: Verdict,
    /// Stream id of the generator that drove the check, for replay.
    pub rng_stream: u64,
}

impl CheckReport {
    pub fn is_unread(&self) -> bool {
        self.verdict == Verdict::Unread
    }
}

/// Alice's check with default options.
pub fn check(sealed: &mut SealedString, rng: &mut TrialRng) -> Result<CheckReport, ProtocolError> {
    check_with(sealed, rng, CheckOptions::default())
}

/// Projects each qubit onto Alice's target state (or the whole dense state
/// onto the n-fold product target). Verdict is READ iff any projection fails.
pub fn check_with(
    sealed: &mut SealedString,
    rng: &mut TrialRng,
    opts: CheckOptions,
) -> Result<CheckReport, ProtocolError> {
    let rng_stream = rng.get_stream();
    let alice = &sealed.alice;
    let per_qubit_pass = match &mut sealed.public {
        PublicState::Product { factors } => {
            let mut results = Vec::with_capacity(factors.len());
            for (i, q) in factors.iter_mut().enumerate() {
                let (pass, post) = project_onto_pure(q, &alice.target(i), rng);
                *q = post;
                results.push(pass);
                if !pass && opts.early_exit {
                    break;
                }
            }
            results
        }
        dense @ PublicState::Dense { .. } => {
            let target = expand(&alice.target_product())?;
            let current = dense.to_dense()?;
            let (pass, post) = project_dense_onto_pure(&current, &target, rng)?;
            *dense = PublicState::from_dense(post);
            vec![pass]
        }
    };
    let verdict = if per_qubit_pass.iter().all(|&p| p) {
        Verdict::Unread
    } else {
        Verdict::Read
    };
    Ok(CheckReport {
        per_qubit_pass,
        verdict,
        rng_stream,
    })
}

/// Runs two checks back to back and reports whether the second reproduced
/// the first. Exercises the collapse rule: passed qubits sit in the target
/// state, failed ones in its orthogonal complement.
pub fn check_is_repeatable(
    sealed: &mut SealedString,
    rng: &mut TrialRng,
) -> Result<bool, ProtocolError> {
    let first = check(sealed, rng)?;
    let second = check(sealed, rng)?;
    Ok(first.per_qubit_pass == second.per_qubit_pass)
}

/// Packs bits most-significant-first into a hex string.
pub fn bits_to_hex(bits: &[bool]) -> String {
    let bytes: Vec<u8> = bits
        .chunks(8)
        .map(|chunk| {
            chunk
                .iter()
                .enumerate()
                .fold(0u8, |acc, (i, &b)| acc | ((b as u8) << (7 - i)))
        })
        .collect();
    hex::encode(bytes)
}

pub fn bits_from_hex(s: &str, n: usize) -> Result<Vec<bool>, ProtocolError> {
    let bytes = hex::decode(s).map_err(|e| ProtocolError::Schema(format!("bits: {e}")))?;
    if bytes.len() != n.div_ceil(8) {
        return Err(ProtocolError::Schema(format!(
            "bits: {} bytes cannot hold exactly {n} bits",
            bytes.len()
        )));
    }
    let bits: Vec<bool> = bytes
        .iter()
        .flat_map(|&byte| (0..8).map(move |i| byte >> (7 - i) & 1 == 1))
        .collect();
    if bits[n..].iter().any(|&b| b) {
        return Err(ProtocolError::Schema("bits: nonzero padding".into()));
    }
    Ok(bits[..n].to_vec())
}

/// Parses a string of `0`/`1` characters.
pub fn bits_from_binary(s: &str) -> Result<Vec<bool>, ProtocolError> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(ProtocolError::Schema(format!("bit string: bad char {other:?}"))),
        })
        .collect()
}

pub fn bits_to_binary(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Versioned on-disk form of a sealed string.
///
/// `bits` and `thetas` are Alice's private fields; they are listed in
/// `private_fields` and omitted from a public view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SealedRecord {
    pub version: u32,
    pub params: ProtocolParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bits: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thetas: Option<Vec<f64>>,
    pub state: PublicState,
    #[serde(default)]
    pub private_fields: Vec<String>,
}

impl SealedRecord {
    pub fn is_public_view(&self) -> bool {
        self.bits.is_none() && self.thetas.is_none()
    }
}

impl SealedString {
    pub fn to_record(&self) -> SealedRecord {
        SealedRecord {
            version: RECORD_VERSION,
            params: self.params,
            bits: Some(bits_to_hex(&self.alice.bits)),
            thetas: Some(self.alice.thetas.clone()),
            state: self.public.clone(),
            private_fields: vec!["bits".into(), "thetas".into()],
        }
    }

    /// Record with the private fields stripped.
    pub fn public_record(&self) -> SealedRecord {
        SealedRecord {
            bits: None,
            thetas: None,
            private_fields: Vec::new(),
            ..self.to_record()
        }
    }

    pub fn from_record(record: SealedRecord) -> Result<Self, ProtocolError> {
        if record.version != RECORD_VERSION {
            return Err(ProtocolError::Schema(format!(
                "unsupported version {}",
                record.version
            )));
        }
        record.params.validate()?;
        let n = record.params.n;
        let (Some(hex_bits), Some(thetas)) = (record.bits, record.thetas) else {
            return Err(ProtocolError::Schema(
                "public view lacks the private fields needed for checking".into(),
            ));
        };
        let bits = bits_from_hex(&hex_bits, n)?;
        let mut sealed = seal_with_thetas(&record.params, &bits, thetas)?;
        if record.state.n_qubits() != n {
            return Err(ProtocolError::Schema(format!(
                "state has {} qubits, params say {n}",
                record.state.n_qubits()
            )));
        }
        record.state.validate()?;
        sealed.public = record.state;
        Ok(sealed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_record()).expect("record serializes")
    }

    pub fn public_json(&self) -> String {
        serde_json::to_string_pretty(&self.public_record()).expect("record serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ProtocolError> {
        Self::from_record(serde_json::from_str(s)?)
    }
}
