//! Simulation of quantum bit-string sealing.
//!
//! Alice seals an `n`-bit string by encoding bit `b_i` as
//! `cos(theta_i)|b_i> + sin(theta_i)|!b_i>` with secret angles drawn from
//! `[-Theta/n^alpha, Theta/n^alpha]`. Anyone can read the string by measuring
//! in the computational basis (per-bit error at most `sin^2(Theta/n^alpha)`),
//! and Alice detects reading by projecting back onto her states.
//!
//! Modules:
//! - [`quantum`]: real state vectors, product states, projective measurements.
//! - [`protocol`]: seal, read, check and the JSON record format.
//! - [`adversary`]: individual and collective dishonest readers.
//! - [`analytics`]: closed-form pass and evasion probabilities and bounds.
//! - [`experiments`]: Monte Carlo campaigns with sweeps and reports.
//! - [`demo`]: sealing one bit behind a sealed instruction string.

pub mod adversary;
pub mod analytics;
pub mod demo;
pub mod experiments;
pub mod protocol;
pub mod quantum;
pub mod rng;
pub mod stats;

pub use adversary::{
    attack_collective, attack_individual, evasion_probability_empirical, CollectiveAttack,
    FakePolicy, IndividualAttack, Strategy, SubspacePolicy,
};
pub use protocol::{
    check, check_is_repeatable, read_honest, seal, seal_pinned, CheckReport, ProtocolParams,
    PublicState, SealedString, Verdict,
};
pub use quantum::{ProductState, Qubit, StateVector, Subspace};
pub use rng::{trial_rng, TrialRng};
