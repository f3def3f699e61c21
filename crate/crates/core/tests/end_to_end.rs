use qseal_core::adversary::{
    apply_strategy, evasion_probability_empirical, CollectiveAttack, Strategy, SubspacePolicy,
};
use qseal_core::analytics::{eps_bound, evade_prob_individual};
use qseal_core::experiments::{run, write_csv, write_jsonl, ExperimentConfig, TrialReport};
use qseal_core::protocol::{check, read_honest, seal, ProtocolParams, SealedRecord, SealedString};
use qseal_core::rng::{random_bit, trial_rng};
use qseal_core::stats::binomial_sigma;

fn params(n: usize) -> ProtocolParams {
    ProtocolParams::new(n, 0.3, 0.25, 0).unwrap()
}

#[test]
fn read_is_flagged_at_the_product_rate() {
    let p = params(12);
    let trials = 20_000;
    let mut reads = 0u64;
    let mut expected = 0.0;
    let mut variance = 0.0;
    for t in 0..trials {
        let mut rng = trial_rng(21, t);
        let bits: Vec<bool> = (0..p.n).map(|_| random_bit(&mut rng)).collect();
        let sealed = seal(&p, &bits, &mut rng).unwrap();
        // Round-trip through the file format between every phase.
        let mut sealed = SealedString::from_json(&sealed.to_json()).unwrap();
        read_honest(&mut sealed, &mut rng).unwrap();
        let mut sealed = SealedString::from_json(&sealed.to_json()).unwrap();
        let q = 1.0 - evade_prob_individual(sealed.alice().thetas()).unwrap();
        expected += q;
        variance += q * (1.0 - q);
        reads += !check(&mut sealed, &mut rng).unwrap().is_unread() as u64;
    }
    assert!(
        (reads as f64 - expected).abs() <= 3.0 * variance.sqrt(),
        "{reads} READ vs {expected:.1} +- {:.1}",
        variance.sqrt()
    );
}

#[test]
fn honest_read_error_stays_under_eps() {
    let p = params(64);
    let eps = eps_bound(p.theta_max, p.alpha, p.n).unwrap();
    let mut errors = 0u64;
    let mut total = 0u64;
    for t in 0..2_000 {
        let mut rng = trial_rng(22, t);
        let bits: Vec<bool> = (0..p.n).map(|_| random_bit(&mut rng)).collect();
        let mut sealed = seal(&p, &bits, &mut rng).unwrap();
        let read = read_honest(&mut sealed, &mut rng).unwrap();
        errors += read.iter().zip(&bits).filter(|(a, b)| a != b).count() as u64;
        total += p.n as u64;
    }
    let rate = errors as f64 / total as f64;
    assert!(rate <= eps + 3.0 * binomial_sigma(eps, total), "{rate} vs {eps}");
}

#[test]
fn public_view_cannot_be_checked() {
    let p = params(8);
    let mut rng = trial_rng(23, 0);
    let sealed = seal(&p, &[true, false, true, true, false, false, true, false], &mut rng).unwrap();
    let record: SealedRecord = serde_json::from_str(&sealed.public_json()).unwrap();
    assert!(record.is_public_view());
    assert!(SealedString::from_json(&sealed.public_json()).is_err());
}

#[test]
fn collective_attack_on_the_public_view() {
    let p = params(8);
    let mut rng = trial_rng(24, 0);
    let sealed = seal(&p, &[false; 8], &mut rng).unwrap();
    let record: SealedRecord = serde_json::from_str(&sealed.public_json()).unwrap();
    let mut public = record.state;
    let strategy = Strategy::Collective(CollectiveAttack::new(SubspacePolicy::Prefix { j: 3 }));
    let outcome = apply_strategy(&mut public, &p, &strategy, &mut rng).unwrap();
    assert_eq!(outcome.learned.len(), 3);
    assert_eq!(outcome.info_bits, Some(3.0));
    assert!(!public.is_product());
}

#[test]
fn reports_survive_serialization() {
    let config = ExperimentConfig::from_json(
        r#"{"params": {"n": 6, "theta": 0.3, "alpha": 0.25, "seed": 8},
            "strategy": {"type": "individual", "k": 3}, "trials": 300}"#,
    )
    .unwrap();
    let reports = run(&config).unwrap();
    let mut jsonl = Vec::new();
    write_jsonl(&reports, &mut jsonl).unwrap();
    let parsed: Vec<TrialReport> = String::from_utf8(jsonl)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(parsed, reports);

    let mut csv_out = Vec::new();
    write_csv(&reports, &mut csv_out).unwrap();
    let mut reader = csv::Reader::from_reader(csv_out.as_slice());
    let row = reader.records().next().unwrap().unwrap();
    let estimate: f64 = row[2].parse().unwrap();
    assert_eq!(estimate, reports[0].estimate);
}

#[test]
fn prefix_collapse_does_best_without_faking() {
    let p = params(8);
    let bound = p.angle_bound();
    let estimate = |fake_prefix: Option<f64>| {
        let strategy = Strategy::Collective(CollectiveAttack {
            policy: SubspacePolicy::Prefix { j: 4 },
            fake_prefix,
        });
        evasion_probability_empirical(&strategy, &p, 50_000, 25).unwrap()
    };
    let no_fake = estimate(None);
    for tp in [-bound, -bound / 2.0, bound / 4.0, bound / 2.0, bound] {
        let faked = estimate(Some(tp));
        let sigma = (binomial_sigma(no_fake.estimate, 50_000).powi(2)
            + binomial_sigma(faked.estimate, 50_000).powi(2))
        .sqrt();
        assert!(
            no_fake.estimate + 3.0 * sigma >= faked.estimate,
            "fake {tp}: {} beats no fake {}",
            faked.estimate,
            no_fake.estimate
        );
    }
}
