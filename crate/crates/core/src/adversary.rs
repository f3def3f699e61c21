//! Dishonest readers.
//!
//! Every strategy here acts on the [`PublicState`] and the public protocol
//! parameters only. Nothing in this module may consult Alice's record; an
//! architecture test greps this file to keep it that way.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{info_bound, AnalyticsError};
use crate::protocol::{check, seal, ProtocolError, ProtocolParams, PublicState};
use crate::quantum::{
    make_qubit, measure_computational, measure_partition, project_onto_subspace, QuantumError,
    StateVector, Subspace, DEFAULT_MAX_DENSE_QUBITS,
};
use crate::rng::{trial_rng, TrialRng};
use crate::stats::Estimate;

#[derive(Debug, Error)]
pub enum AdversaryError {
    #[error("invalid attack: {0}")]
    Invalid(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
}

type Result<T> = std::result::Result<T, AdversaryError>;

/// What the reader puts back after measuring a qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FakePolicy {
    /// Leave the collapsed basis state.
    Leave,
    /// Re-prepare `cos(t')|b'> + sin(t')|!b'>` with one angle for every read qubit.
    Fake { theta_prime: f64 },
    /// Per-qubit angles, aligned with the read indices.
    FakeEach { theta_primes: Vec<f64> },
}

impl FakePolicy {
    fn angle(&self, slot: usize) -> Option<f64> {
        match self {
            FakePolicy::Leave => None,
            FakePolicy::Fake { theta_prime } => Some(*theta_prime),
            FakePolicy::FakeEach { theta_primes } => Some(theta_primes[slot]),
        }
    }

    fn validate(&self, slots: usize, bound: f64) -> Result<()> {
        let angles: Vec<f64> = match self {
            FakePolicy::Leave => return Ok(()),
            FakePolicy::Fake { theta_prime } => vec![*theta_prime],
            FakePolicy::FakeEach { theta_primes } => {
                if theta_primes.len() != slots {
                    return Err(AdversaryError::Invalid(format!(
                        "{} fake angles for {slots} read qubits",
                        theta_primes.len()
                    )));
                }
                theta_primes.clone()
            }
        };
        match angles.iter().find(|t| !(t.abs() <= bound)) {
            Some(t) => Err(AdversaryError::Invalid(format!(
                "|theta_prime| <= Theta/n^alpha violated ({t} > {bound})"
            ))),
            None => Ok(()),
        }
    }
}

/// Qubit-by-qubit reading of a chosen set of positions (0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct IndividualAttack {
    read_indices: Vec<usize>,
    fake: FakePolicy,
}

impl IndividualAttack {
    /// Reads the given positions; duplicates are dropped, order is kept.
    pub fn new(read_indices: Vec<usize>, fake: FakePolicy) -> Self {
        let mut seen = std::collections::HashSet::new();
        let read_indices = read_indices.into_iter().filter(|i| seen.insert(*i)).collect();
        IndividualAttack { read_indices, fake }
    }

    /// Reads positions `0..k`.
    pub fn first_k(k: usize, fake: FakePolicy) -> Self {
        IndividualAttack {
            read_indices: (0..k).collect(),
            fake,
        }
    }

    pub fn read_indices(&self) -> &[usize] {
        &self.read_indices
    }

    pub fn fake(&self) -> &FakePolicy {
        &self.fake
    }

    pub fn k(&self) -> usize {
        self.read_indices.len()
    }

    pub fn validate(&self, params: &ProtocolParams) -> Result<()> {
        if let Some(&i) = self.read_indices.iter().find(|&&i| i >= params.n) {
            return Err(AdversaryError::Invalid(format!(
                "read index {i} outside [0, {})",
                params.n
            )));
        }
        self.fake.validate(self.k(), params.angle_bound())
    }
}

/// Measures each indexed qubit in the computational basis and leaves or
/// fakes it. Returns the learned bits in `read_indices` order.
pub fn attack_individual<R: Rng + ?Sized>(
    public: &mut PublicState,
    params: &ProtocolParams,
    attack: &IndividualAttack,
    rng: &mut R,
) -> Result<Vec<bool>> {
    attack.validate(params)?;
    let factors = public.factors_mut()?;
    let mut learned = Vec::with_capacity(attack.k());
    for (slot, &i) in attack.read_indices.iter().enumerate() {
        let (bit, post) = measure_computational(&factors[i], rng);
        factors[i] = match attack.fake.angle(slot) {
            None => post,
            Some(t) => make_qubit(bit, t)?,
        };
        learned.push(bit);
    }
    Ok(learned)
}

/// How the collective reader picks the subspace `V` to collapse onto.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum SubspacePolicy {
    /// `m` basis vectors drawn uniformly without replacement; binary
    /// measurement `{P_V, 1 - P_V}`.
    Random { m: usize },
    /// Joint measurement of the first `j` bits; `V` is the class of the
    /// observed prefix (`m = 2^(n-j)`).
    Prefix { j: usize },
    /// Measurement of the string parity; `V` is the observed parity class
    /// (`m = 2^(n-1)`).
    Parity,
    /// A fixed subspace; binary measurement `{P_V, 1 - P_V}`.
    Explicit { indices: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectiveAttack {
    #[serde(flatten)]
    pub policy: SubspacePolicy,
    /// Re-preparation angle for the measured prefix qubits. Only meaningful
    /// with [`SubspacePolicy::Prefix`], where those qubits are definite after
    /// the collapse.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fake_prefix: Option<f64>,
}

impl CollectiveAttack {
    pub fn new(policy: SubspacePolicy) -> Self {
        CollectiveAttack {
            policy,
            fake_prefix: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollectiveOutcome {
    /// The subspace `V` the reader targeted (or observed, for partition policies).
    pub subspace: Subspace,
    /// Whether the state collapsed into `V`. Always true for partition policies.
    pub collapsed: bool,
    /// `sum_{v in V} <v|Psi>^2` before the collapse.
    pub weight_in_v: f64,
    /// `n - log2(m)`.
    pub info_bits: f64,
    /// Prefix bits learned by a `Prefix` attack.
    pub learned_prefix: Vec<bool>,
}

fn dense_public(public: &mut PublicState) -> Result<StateVector> {
    let n = public.n_qubits();
    if n > DEFAULT_MAX_DENSE_QUBITS {
        return Err(QuantumError::DenseLimit {
            n,
            max: DEFAULT_MAX_DENSE_QUBITS,
        }
        .into());
    }
    Ok(public.to_dense()?)
}

/// Collapses the whole register onto a computational-basis subspace.
/// The public state becomes dense.
pub fn attack_collective<R: Rng + ?Sized>(
    public: &mut PublicState,
    attack: &CollectiveAttack,
    rng: &mut R,
) -> Result<CollectiveOutcome> {
    let state = dense_public(public)?;
    let n = state.n_qubits();
    let dim = state.dim();
    if attack.fake_prefix.is_some() && !matches!(attack.policy, SubspacePolicy::Prefix { .. }) {
        return Err(AdversaryError::Invalid(
            "fake_prefix requires the prefix policy".into(),
        ));
    }
    let (subspace, collapsed, weight, post, learned_prefix) = match &attack.policy {
        SubspacePolicy::Random { m } => {
            if *m < 1 || *m > dim {
                return Err(AdversaryError::Invalid(format!(
                    "1 <= m <= 2^n violated (m = {m})"
                )));
            }
            let indices = rand::seq::index::sample(rng, dim, *m).into_vec();
            let sub = Subspace::new(n, indices)?;
            let proj = project_onto_subspace(&state, &sub, rng)?;
            (sub, proj.collapsed_into_v, proj.norm_in_v, proj.post_state, Vec::new())
        }
        SubspacePolicy::Explicit { indices } => {
            let sub = Subspace::new(n, indices.clone())?;
            let proj = project_onto_subspace(&state, &sub, rng)?;
            (sub, proj.collapsed_into_v, proj.norm_in_v, proj.post_state, Vec::new())
        }
        SubspacePolicy::Prefix { j } => {
            if *j > n {
                return Err(AdversaryError::Invalid(format!("prefix length {j} > n = {n}")));
            }
            let shift = n - j;
            let (prefix, weight, mut post) = measure_partition(&state, 1 << j, |v| v >> shift, rng);
            let learned: Vec<bool> = (0..*j).map(|i| prefix >> (j - 1 - i) & 1 == 1).collect();
            if let Some(t) = attack.fake_prefix {
                for (i, &bit) in learned.iter().enumerate() {
                    let fake = make_qubit(bit, t)?;
                    // Orthogonal map sending |bit> to the fake state.
                    let m = if bit {
                        [[fake.c1, fake.c0], [-fake.c0, fake.c1]]
                    } else {
                        [[fake.c0, -fake.c1], [fake.c1, fake.c0]]
                    };
                    post.apply_single_qubit(i, m);
                }
            }
            let sub = Subspace::new(n, ((prefix << shift)..((prefix + 1) << shift)).collect())?;
            (sub, true, weight, post, learned)
        }
        SubspacePolicy::Parity => {
            if n < 1 {
                return Err(AdversaryError::Invalid("parity needs n >= 1".into()));
            }
            let parity = |v: usize| (v.count_ones() & 1) as usize;
            let (class, weight, post) = measure_partition(&state, 2, parity, rng);
            let sub = Subspace::new(n, (0..dim).filter(|&v| parity(v) == class).collect())?;
            (sub, true, weight, post, Vec::new())
        }
    };
    let info_bits = info_bound(n, subspace.dim() as f64)?;
    *public = PublicState::from_dense(post);
    Ok(CollectiveOutcome {
        subspace,
        collapsed,
        weight_in_v: weight,
        info_bits,
        learned_prefix,
    })
}

/// A complete reader behavior, as written in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Strategy {
    /// Nobody touches the qubits.
    None,
    /// Reads every qubit and leaves the collapsed states.
    Honest,
    /// Reads `k` qubits (the first `k`, or the explicit `indices`), default all.
    Individual {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        indices: Option<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fake: Option<FakeSpec>,
    },
    Collective(CollectiveAttack),
}

/// `{"theta_prime": t}` or `{"theta_primes": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FakeSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_prime: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_primes: Option<Vec<f64>>,
}

impl FakeSpec {
    fn policy(&self) -> Result<FakePolicy> {
        match (self.theta_prime, &self.theta_primes) {
            (Some(t), None) => Ok(FakePolicy::Fake { theta_prime: t }),
            (None, Some(ts)) => Ok(FakePolicy::FakeEach {
                theta_primes: ts.clone(),
            }),
            _ => Err(AdversaryError::Invalid(
                "fake needs exactly one of theta_prime, theta_primes".into(),
            )),
        }
    }
}

impl Strategy {
    /// The individual attack this strategy amounts to on an `n`-qubit string.
    pub fn individual_attack(&self, n: usize) -> Result<Option<IndividualAttack>> {
        Ok(match self {
            Strategy::Honest => Some(IndividualAttack::first_k(n, FakePolicy::Leave)),
            Strategy::Individual { k, indices, fake } => {
                let fake = fake.as_ref().map(FakeSpec::policy).transpose()?.unwrap_or(FakePolicy::Leave);
                let attack = match (k, indices) {
                    (_, Some(idx)) => IndividualAttack::new(idx.clone(), fake),
                    (Some(k), None) => {
                        if *k > n {
                            return Err(AdversaryError::Invalid(format!("k = {k} > n = {n}")));
                        }
                        IndividualAttack::first_k(*k, fake)
                    }
                    (None, None) => IndividualAttack::first_k(n, fake),
                };
                Some(attack)
            }
            _ => None,
        })
    }
}

/// What a strategy did to one sealed string.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    /// Positions read and the bits learned there.
    pub learned: Vec<(usize, bool)>,
    /// False when a binary collective measurement missed its target `V`;
    /// such trials say nothing about evasion after collapse into `V`.
    pub counted: bool,
    pub info_bits: Option<f64>,
}

/// Applies `strategy` to a public state.
pub fn apply_strategy<R: Rng + ?Sized>(
    public: &mut PublicState,
    params: &ProtocolParams,
    strategy: &Strategy,
    rng: &mut R,
) -> Result<AttackOutcome> {
    match strategy {
        Strategy::None => Ok(AttackOutcome {
            learned: Vec::new(),
            counted: true,
            info_bits: Some(0.0),
        }),
        Strategy::Honest | Strategy::Individual { .. } => {
            let attack = strategy
                .individual_attack(params.n)?
                .expect("individual strategy");
            let bits = attack_individual(public, params, &attack, rng)?;
            Ok(AttackOutcome {
                learned: attack.read_indices().iter().copied().zip(bits).collect(),
                counted: true,
                info_bits: Some(attack.k() as f64),
            })
        }
        Strategy::Collective(attack) => {
            if let Some(t) = attack.fake_prefix {
                if !(t.abs() <= params.angle_bound()) {
                    return Err(AdversaryError::Invalid(format!(
                        "|theta_prime| <= Theta/n^alpha violated ({t})"
                    )));
                }
            }
            let out = attack_collective(public, attack, rng)?;
            Ok(AttackOutcome {
                learned: out.learned_prefix.into_iter().enumerate().collect(),
                counted: out.collapsed,
                info_bits: Some(out.info_bits),
            })
        }
    }
}

/// Fraction of seal, attack, check runs that Alice judges UNREAD, with a
/// Wilson 95% interval. Trial `t` runs on stream `t` of `seed`; trials where
/// a binary collective measurement misses its target are excluded.
pub fn evasion_probability_empirical(
    strategy: &Strategy,
    params: &ProtocolParams,
    trials: u64,
    seed: u64,
) -> Result<Estimate> {
    use rayon::prelude::*;
    if trials == 0 {
        return Err(AdversaryError::Invalid("trials >= 1 violated".into()));
    }
    params.validate()?;
    let (passes, counted) = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(u64, u64)> {
            let mut rng: TrialRng = trial_rng(seed, t);
            let bits: Vec<bool> = (0..params.n).map(|_| rng.random()).collect();
            let mut sealed = seal(params, &bits, &mut rng)?;
            let out = apply_strategy(sealed.public_state_mut(), params, strategy, &mut rng)?;
            if !out.counted {
                return Ok((0, 0));
            }
            let report = check(&mut sealed, &mut rng)?;
            Ok((report.is_unread() as u64, 1))
        })
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
    Ok(Estimate::from_counts(passes, counted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{evade_bound_collective, pass_prob_fake, pass_prob_no_fake};
    use crate::protocol::{check, seal_pinned, seal_with_thetas};
    use crate::quantum::{expand, overlap_sq};

    fn params(n: usize, theta_max: f64) -> ProtocolParams {
        ProtocolParams::new(n, theta_max, 0.25, 0).unwrap()
    }

    #[test]
    fn source_never_touches_alice_record() {
        let src = include_str!("adversary.rs");
        let code = src.split("#[cfg(test)]").next().unwrap();
        for needle in ["alice(", "AliceRecord", ".thetas()", ".bits()", "to_record", "private"] {
            let hits = code
                .lines()
                .filter(|l| !l.trim_start().starts_with("//"))
                .filter(|l| l.contains(needle))
                .count();
            assert_eq!(hits, 0, "adversary code mentions {needle}");
        }
    }

    #[test]
    fn zero_reads_leave_state_untouched() {
        let p = params(8, 0.3);
        let mut rng = trial_rng(1, 0);
        for _ in 0..200 {
            let mut s = seal(&p, &[true; 8], &mut rng).unwrap();
            let before = s.public_state().clone();
            let attack = IndividualAttack::first_k(0, FakePolicy::Leave);
            let learned = attack_individual(s.public_state_mut(), &p, &attack, &mut rng).unwrap();
            assert!(learned.is_empty());
            assert_eq!(s.public_state(), &before);
            assert!(check(&mut s, &mut rng).unwrap().is_unread());
        }
    }

    #[test]
    fn unindexed_qubits_untouched() {
        let p = params(6, 0.6);
        let mut rng = trial_rng(2, 0);
        let mut s = seal(&p, &[false; 6], &mut rng).unwrap();
        let before = s.public_state().factors().unwrap().to_vec();
        let attack = IndividualAttack::new(vec![4, 1, 4], FakePolicy::Fake { theta_prime: 0.1 });
        assert_eq!(attack.read_indices(), &[4, 1]);
        let learned = attack_individual(s.public_state_mut(), &p, &attack, &mut rng).unwrap();
        let after = s.public_state().factors().unwrap();
        for i in [0, 2, 3, 5] {
            assert_eq!(after[i], before[i]);
        }
        assert_eq!(after[4], make_qubit(learned[0], 0.1).unwrap());
        assert_eq!(after[1], make_qubit(learned[1], 0.1).unwrap());
    }

    #[test]
    fn invalid_attacks_rejected() {
        let p = params(4, 0.2);
        let mut rng = trial_rng(0, 0);
        let mut s = seal(&p, &[true; 4], &mut rng).unwrap();
        let bad_index = IndividualAttack::new(vec![4], FakePolicy::Leave);
        assert!(attack_individual(s.public_state_mut(), &p, &bad_index, &mut rng).is_err());
        let wide_fake = IndividualAttack::first_k(1, FakePolicy::Fake { theta_prime: 0.2 });
        assert!(attack_individual(s.public_state_mut(), &p, &wide_fake, &mut rng).is_err());
        let short = IndividualAttack::first_k(2, FakePolicy::FakeEach { theta_primes: vec![0.0] });
        assert!(attack_individual(s.public_state_mut(), &p, &short, &mut rng).is_err());
    }

    #[test]
    fn fake_single_qubit_matches_closed_form() {
        let (theta, tp) = (0.25, -0.15);
        let p = params(1, 0.3);
        let expected = pass_prob_fake(theta, tp).unwrap();
        let trials = 400_000;
        let mut rng = trial_rng(12, 0);
        let mut passes = 0u64;
        for _ in 0..trials {
            let mut s = seal_pinned(&p, &[true], theta).unwrap();
            let attack = IndividualAttack::first_k(1, FakePolicy::Fake { theta_prime: tp });
            attack_individual(s.public_state_mut(), &p, &attack, &mut rng).unwrap();
            passes += check(&mut s, &mut rng).unwrap().is_unread() as u64;
        }
        let est = Estimate::from_counts(passes, trials);
        assert!(est.within_sigmas(expected, 3.0), "{} vs {expected}", est.estimate);
    }

    #[test]
    fn leave_full_read_matches_product() {
        let (n, theta) = (6, 0.2);
        let p = params(n, 0.35);
        let expected = pass_prob_no_fake(theta).unwrap().powi(n as i32);
        let trials = 200_000;
        let mut rng = trial_rng(13, 0);
        let mut passes = 0u64;
        for _ in 0..trials {
            let mut s = seal_pinned(&p, &[false, true, true, false, true, false], theta).unwrap();
            let attack = IndividualAttack::first_k(n, FakePolicy::Leave);
            attack_individual(s.public_state_mut(), &p, &attack, &mut rng).unwrap();
            passes += check(&mut s, &mut rng).unwrap().is_unread() as u64;
        }
        let est = Estimate::from_counts(passes, trials);
        assert!(est.within_sigmas(expected, 3.0), "{} vs {expected}", est.estimate);
    }

    #[test]
    fn collective_trivial_policies() {
        let p = params(5, 0.3);
        let mut rng = trial_rng(3, 0);
        let mut s = seal(&p, &[true, false, false, true, true], &mut rng).unwrap();
        let original = s.public_state().to_dense().unwrap();
        let full = CollectiveAttack::new(SubspacePolicy::Prefix { j: 0 });
        let out = attack_collective(s.public_state_mut(), &full, &mut rng).unwrap();
        assert_eq!(out.info_bits, 0.0);
        assert!(out.collapsed);
        let after = s.public_state().to_dense().unwrap();
        assert!((overlap_sq(&after, &original).unwrap() - 1.0).abs() < 1e-12);

        let mut s = seal(&p, &[true, false, false, true, true], &mut rng).unwrap();
        let single = CollectiveAttack::new(SubspacePolicy::Explicit { indices: vec![19] });
        let out = attack_collective(s.public_state_mut(), &single, &mut rng).unwrap();
        assert_eq!(out.info_bits, 5.0);
    }

    #[test]
    fn collective_rejects_oversize_and_bad_policies() {
        let p = params(21, 0.3);
        let mut s = seal_pinned(&p, &[false; 21], 0.0).unwrap();
        let mut rng = trial_rng(0, 0);
        let attack = CollectiveAttack::new(SubspacePolicy::Parity);
        assert!(matches!(
            attack_collective(s.public_state_mut(), &attack, &mut rng),
            Err(AdversaryError::Quantum(QuantumError::DenseLimit { .. }))
        ));
        let p = params(3, 0.3);
        let mut s = seal_pinned(&p, &[false; 3], 0.0).unwrap();
        let bad = CollectiveAttack {
            policy: SubspacePolicy::Parity,
            fake_prefix: Some(0.01),
        };
        assert!(attack_collective(s.public_state_mut(), &bad, &mut rng).is_err());
        let bad = CollectiveAttack::new(SubspacePolicy::Random { m: 9 });
        assert!(attack_collective(s.public_state_mut(), &bad, &mut rng).is_err());
        let bad = CollectiveAttack::new(SubspacePolicy::Prefix { j: 4 });
        assert!(attack_collective(s.public_state_mut(), &bad, &mut rng).is_err());
    }

    #[test]
    fn prefix_collapse_equals_individual_reading() {
        // Collapsing the first j qubits of a product state is the same as
        // reading them one by one.
        let (n, j, theta) = (6, 3, 0.2);
        let p = params(n, 0.35);
        let exact = pass_prob_no_fake(theta).unwrap().powi(j as i32);
        let strategy = Strategy::Collective(CollectiveAttack::new(SubspacePolicy::Prefix { j }));
        let trials = 100_000;
        let mut passes = 0;
        for t in 0..trials {
            let mut rng = trial_rng(44, t);
            let mut s = seal_pinned(&p, &[true, false, true, true, false, false], theta).unwrap();
            let out = apply_strategy(s.public_state_mut(), &p, &strategy, &mut rng).unwrap();
            assert_eq!(out.info_bits, Some(j as f64));
            passes += check(&mut s, &mut rng).unwrap().is_unread() as u64;
        }
        let est = Estimate::from_counts(passes, trials);
        assert!(est.within_sigmas(exact, 3.0), "{} vs {exact}", est.estimate);
    }

    #[test]
    fn prefix_fake_prepares_fake_states() {
        let p = params(3, 0.5);
        let mut rng = trial_rng(8, 0);
        let mut s = seal_pinned(&p, &[true, false, true], 0.0).unwrap();
        let attack = CollectiveAttack {
            policy: SubspacePolicy::Prefix { j: 2 },
            fake_prefix: Some(0.1),
        };
        let out = attack_collective(s.public_state_mut(), &attack, &mut rng).unwrap();
        assert_eq!(out.learned_prefix, vec![true, false]);
        let expected = expand(
            &crate::quantum::ProductState::new(vec![
                make_qubit(true, 0.1).unwrap(),
                make_qubit(false, 0.1).unwrap(),
                make_qubit(true, 0.0).unwrap(),
            ])
            .unwrap(),
        )
        .unwrap();
        let got = s.public_state().to_dense().unwrap();
        assert!((overlap_sq(&got, &expected).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn collapse_identity_random_subspaces() {
        let mut rng = trial_rng(21, 0);
        let mut checked = 0;
        while checked < 100 {
            let n = rng.random_range(1..=12);
            let p = ProtocolParams::new(n, rng.random_range(0.05..0.7), rng.random_range(0.05..0.45), 0).unwrap();
            let bits: Vec<bool> = (0..n).map(|_| rng.random()).collect();
            let mut s = seal(&p, &bits, &mut rng).unwrap();
            let psi = s.public_state().to_dense().unwrap();
            let m = rng.random_range(1..=1usize << n);
            let attack = CollectiveAttack::new(SubspacePolicy::Random { m });
            let out = attack_collective(s.public_state_mut(), &attack, &mut rng).unwrap();
            if out.collapsed {
                let post = s.public_state().to_dense().unwrap();
                let direct = out.subspace.weight(&psi);
                assert!((overlap_sq(&psi, &post).unwrap() - direct).abs() <= 1e-10);
                checked += 1;
            }
        }
    }

    #[test]
    fn amplitude_bound_exhaustive() {
        let mut rng = trial_rng(22, 0);
        for n in 1..=10 {
            let p = ProtocolParams::new(n, 0.7, 0.05, 0).unwrap();
            let bits: Vec<bool> = (0..n).map(|_| rng.random()).collect();
            let s = seal(&p, &bits, &mut rng).unwrap();
            let psi = s.public_state().to_dense().unwrap();
            let bound = crate::analytics::per_v_amplitude_bound(s.alice().thetas()).unwrap();
            let max = psi.amplitudes().iter().map(|a| a * a).fold(0.0, f64::max);
            assert!(max <= bound + 1e-12);
        }
    }

    #[test]
    fn collective_evasion_under_bound_statistically() {
        // 1000 random cases; estimate the conditional pass rate and compare to
        // the collective bound plus 3 sigma.
        let mut rng = trial_rng(23, 0);
        let per_case = 200;
        for case in 0..1000u64 {
            let n = rng.random_range(2..=8);
            let p = ProtocolParams::new(n, rng.random_range(0.05..0.7), rng.random_range(0.05..0.45), 0).unwrap();
            let bits: Vec<bool> = (0..n).map(|_| rng.random()).collect();
            let thetas: Vec<f64> = (0..n)
                .map(|_| rng.random_range(-p.angle_bound()..=p.angle_bound()))
                .collect();
            let policy = match case % 3 {
                0 => SubspacePolicy::Parity,
                1 => SubspacePolicy::Prefix { j: rng.random_range(0..=n) },
                _ => SubspacePolicy::Random { m: rng.random_range(1..=1usize << n) },
            };
            let strategy = Strategy::Collective(CollectiveAttack::new(policy));
            let (mut passes, mut counted, mut info) = (0u64, 0u64, 0.0);
            for t in 0..per_case {
                let mut trng = trial_rng(1000 + case, t);
                let mut s = seal_with_thetas(&p, &bits, thetas.clone()).unwrap();
                let out = apply_strategy(s.public_state_mut(), &p, &strategy, &mut trng).unwrap();
                info = out.info_bits.unwrap();
                if out.counted {
                    counted += 1;
                    passes += check(&mut s, &mut trng).unwrap().is_unread() as u64;
                }
            }
            if counted == 0 {
                continue;
            }
            let bound = evade_bound_collective(&thetas, info).unwrap().raw;
            let est = Estimate::from_counts(passes, counted);
            let sigma = crate::stats::binomial_sigma(bound.min(1.0), counted);
            assert!(est.estimate <= bound + 3.0 * sigma + 1e-12, "case {case}");
        }
    }

    #[test]
    fn no_op_strategy_always_evades() {
        let p = params(16, 0.2);
        let est = evasion_probability_empirical(&Strategy::None, &p, 2000, 5).unwrap();
        assert_eq!(est.estimate, 1.0);
        assert_eq!((est.ci_high, est.successes), (1.0, 2000));
    }

    #[test]
    fn empirical_evasion_decreases_with_reads() {
        let p = ProtocolParams::new(32, 0.6, 0.1, 0).unwrap();
        let estimates: Vec<Estimate> = [0, 8, 16, 32]
            .iter()
            .map(|&k| {
                let s = Strategy::Individual { k: Some(k), indices: None, fake: None };
                evasion_probability_empirical(&s, &p, 20_000, 77).unwrap()
            })
            .collect();
        for w in estimates.windows(2) {
            assert!(w[1].ci_low <= w[0].ci_high);
            assert!(w[1].estimate <= w[0].estimate);
        }
    }

    #[test]
    fn strategy_serde_shapes() {
        let s: Strategy = serde_json::from_str(
            r#"{"type":"individual","k":3,"fake":{"theta_prime":0.01}}"#,
        )
        .unwrap();
        let attack = s.individual_attack(8).unwrap().unwrap();
        assert_eq!(attack.k(), 3);
        assert_eq!(attack.fake(), &FakePolicy::Fake { theta_prime: 0.01 });
        let s: Strategy = serde_json::from_str(r#"{"type":"collective","policy":"parity"}"#).unwrap();
        assert_eq!(s, Strategy::Collective(CollectiveAttack::new(SubspacePolicy::Parity)));
        let s: Strategy =
            serde_json::from_str(r#"{"type":"collective","policy":"random","m":16}"#).unwrap();
        assert_eq!(
            s,
            Strategy::Collective(CollectiveAttack::new(SubspacePolicy::Random { m: 16 }))
        );
        let bad: Strategy = serde_json::from_str(
            r#"{"type":"individual","fake":{"theta_prime":0.1,"theta_primes":[0.1]}}"#,
        )
        .unwrap();
        assert!(bad.individual_attack(4).is_err());
    }
}
