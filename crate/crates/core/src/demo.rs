//! Sealing a single bit behind a sealed instruction string.
//!
//! Layout of the public register: the instruction text sealed with the string
//! protocol (8 bits per ASCII character, most significant bit first), then
//! `dummy_count` qubits in random computational states, then two payload
//! qubits prepared in the rotated basis
//! `{cos a|0> + sin a|1>, -sin a|0> + cos a|1>}`. The secret bit is the XOR
//! of the two payload labels. Alice only ever checks the instruction qubits;
//! the dummies are never checked.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_4, PI};
use thiserror::Error;

use crate::analytics;
use crate::protocol::{
    check, read_honest, seal, CheckReport, ProtocolError, ProtocolParams, SealedString, Verdict,
};
use crate::quantum::{measure_computational, project_onto_pure, rotated, Qubit};
use crate::rng::{trial_rng, TrialRng};

pub const DEFAULT_INSTRUCTION: &str = "Project the final pair of qubits onto the 15-degree rotated basis and XOR \
the two labels to get the sealed bit. Qubits between this text and that pair are padding; ignore them.";

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("invalid demo spec: {0}")]
    Invalid(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoSpec {
    pub secret_bit: bool,
    pub instruction_text: String,
    pub dummy_count: usize,
    /// Rotation of the payload basis in radians, in `(0, pi/4)`.
    pub payload_basis_angle: f64,
}

impl DemoSpec {
    pub fn new(secret_bit: bool) -> Self {
        DemoSpec {
            secret_bit,
            instruction_text: DEFAULT_INSTRUCTION.to_owned(),
            dummy_count: 16,
            payload_basis_angle: PI / 12.0,
        }
    }

    pub fn validate(&self) -> Result<(), DemoError> {
        if self.instruction_text.is_empty() || !self.instruction_text.is_ascii() {
            return Err(DemoError::Invalid(
                "instruction text must be nonempty ASCII".into(),
            ));
        }
        let a = self.payload_basis_angle;
        if !(a > 0.0 && a < FRAC_PI_4) {
            return Err(DemoError::Invalid(format!(
                "payload basis angle {a} outside (0, pi/4)"
            )));
        }
        Ok(())
    }
}

/// ASCII to bits, most significant bit first.
pub fn text_to_bits(text: &str) -> Vec<bool> {
    text.bytes()
        .flat_map(|b| (0..8).map(move |i| b >> (7 - i) & 1 == 1))
        .collect()
}

/// Inverse of [`text_to_bits`]; bytes that are not printable ASCII become `?`.
pub fn bits_to_text(bits: &[bool]) -> String {
    bits.chunks(8)
        .map(|c| {
            let byte = c.iter().fold(0u8, |acc, &b| acc << 1 | b as u8);
            if byte.is_ascii_graphic() || byte == b' ' {
                byte as char
            } else {
                '?'
            }
        })
        .collect()
}

/// The full public register plus Alice's bookkeeping.
#[derive(Debug, Clone)]
pub struct DemoSession {
    pub spec: DemoSpec,
    pub instructions: SealedString,
    pub dummies: Vec<Qubit>,
    pub payload: [Qubit; 2],
    payload_labels: [bool; 2],
    dummy_bits: Vec<bool>,
}

fn basis_state(angle: f64, label: bool) -> Qubit {
    let r0 = rotated(false, angle);
    if label {
        r0.orthogonal()
    } else {
        r0
    }
}

/// Prepares the register. Instruction angles follow `theta_max` and `alpha`
/// with `n` set to the instruction bit length.
pub fn prepare<R: Rng + ?Sized>(
    spec: &DemoSpec,
    theta_max: f64,
    alpha: f64,
    rng: &mut R,
) -> Result<DemoSession, DemoError> {
    spec.validate()?;
    let bits = text_to_bits(&spec.instruction_text);
    let params = ProtocolParams::new(bits.len(), theta_max, alpha, 0)?;
    let instructions = seal(&params, &bits, rng)?;
    let dummy_bits: Vec<bool> = (0..spec.dummy_count).map(|_| rng.random()).collect();
    let first: bool = rng.random();
    let labels = [first, first ^ spec.secret_bit];
    Ok(DemoSession {
        spec: spec.clone(),
        instructions,
        dummies: dummy_bits.iter().map(|&b| Qubit::basis(b)).collect(),
        payload: labels.map(|l| basis_state(spec.payload_basis_angle, l)),
        payload_labels: labels,
        dummy_bits,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decoded {
    pub instruction_bits: Vec<bool>,
    pub instruction_text: String,
    pub payload_labels: [bool; 2],
    pub secret_bit: bool,
}

/// Honest reader: reads the instruction string, then measures the two payload
/// qubits in the rotated basis and outputs the XOR of the labels.
///
/// The payload angle comes from the session spec; an honest reader would
/// take it from the decoded text.
pub fn honest_decode<R: Rng + ?Sized>(
    session: &mut DemoSession,
    rng: &mut R,
) -> Result<Decoded, DemoError> {
    let instruction_bits = read_honest(&mut session.instructions, rng)?;
    let r0 = rotated(false, session.spec.payload_basis_angle);
    let mut labels = [false; 2];
    for (slot, q) in session.payload.iter_mut().enumerate() {
        let (is_r0, post) = project_onto_pure(q, &r0, rng);
        *q = post;
        labels[slot] = !is_r0;
    }
    Ok(Decoded {
        instruction_text: bits_to_text(&instruction_bits),
        instruction_bits,
        payload_labels: labels,
        secret_bit: labels[0] ^ labels[1],
    })
}

/// Alice's check, restricted to the instruction qubits.
pub fn check_instructions(
    session: &mut DemoSession,
    rng: &mut TrialRng,
) -> Result<CheckReport, DemoError> {
    Ok(check(&mut session.instructions, rng)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoTranscript {
    pub spec: DemoSpec,
    pub seed: u64,
    pub theta_max: f64,
    pub alpha: f64,
    pub instruction_bits: usize,
    /// Alice's sealing angles for the instruction qubits.
    pub instruction_thetas: Vec<f64>,
    pub payload_labels: [bool; 2],
    pub dummy_bits: Vec<bool>,
    pub decoded: Option<Decoded>,
    /// Computational-basis readout of the dummy block, if anyone looked.
    pub dummy_readout: Option<Vec<bool>>,
    pub verdict: Verdict,
    pub failed_qubits: usize,
    /// Probability Alice flags READ given the recorded angles
    /// (`1 - prod(1 - sin^2(2 theta_i)/2)` after a read, otherwise 0).
    pub expected_read_probability: f64,
    pub steps: Vec<String>,
}

/// Runs the whole demo on stream 0 of `seed`: prepare, optionally decode
/// honestly, then let Alice check.
pub fn run_demo(
    spec: &DemoSpec,
    theta_max: f64,
    alpha: f64,
    seed: u64,
    read: bool,
) -> Result<DemoTranscript, DemoError> {
    let mut rng = trial_rng(seed, 0);
    let mut session = prepare(spec, theta_max, alpha, &mut rng)?;
    let thetas = session.instructions.alice().thetas().to_vec();
    let n = thetas.len();
    let mut steps = vec![
        format!(
            "sealed {} instruction characters as {n} qubits (Theta = {theta_max}, alpha = {alpha})",
            spec.instruction_text.len()
        ),
        format!(
            "appended {} dummy qubits in random computational states; Alice never checks them",
            spec.dummy_count
        ),
        format!(
            "appended 2 payload qubits in the basis rotated by {:.4} rad; labels XOR to the secret",
            spec.payload_basis_angle
        ),
    ];
    let (decoded, dummy_readout) = if read {
        let d = honest_decode(&mut session, &mut rng)?;
        steps.push(format!(
            "reader decoded instructions {:?} and secret bit {}",
            d.instruction_text, d.secret_bit as u8
        ));
        let readout: Vec<bool> = session
            .dummies
            .iter()
            .map(|q| measure_computational(q, &mut rng).0)
            .collect();
        (Some(d), Some(readout))
    } else {
        steps.push("nobody read the register".into());
        (None, None)
    };
    let report = check_instructions(&mut session, &mut rng)?;
    let failed_qubits = report.per_qubit_pass.iter().filter(|&&p| !p).count();
    steps.push(format!(
        "Alice checked the instruction qubits: {:?} ({failed_qubits} failed)",
        report.verdict
    ));
    let expected_read_probability = if read {
        1.0 - analytics::evade_prob_individual(&thetas).expect("sealing angles are in range")
    } else {
        0.0
    };
    Ok(DemoTranscript {
        spec: spec.clone(),
        seed,
        theta_max,
        alpha,
        instruction_bits: n,
        instruction_thetas: thetas,
        payload_labels: session.payload_labels,
        dummy_bits: session.dummy_bits,
        decoded,
        dummy_readout,
        verdict: report.verdict,
        failed_qubits,
        expected_read_probability,
        steps,
    })
}
