//! Monte Carlo campaigns: seal, attack, check, repeated over independent
//! random streams, with analytic reference values alongside.
//!
//! Config files are JSON or TOML (chosen by extension). Example:
//!
//! ```json
//! {
//!   "version": 1,
//!   "params": {"n": 64, "theta": 0.3, "alpha": 0.25, "seed": 7},
//!   "strategy": {"type": "individual"},
//!   "trials": 100000,
//!   "pin_theta": 0.1,
//!   "sweep": {"variable": "k", "values": [0, 8, 16, 24, 32]},
//!   "output": {"path": "decay.csv", "format": "csv"}
//! }
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

use crate::adversary::{apply_strategy, AdversaryError, FakePolicy, Strategy, SubspacePolicy};
use crate::analytics::{self, AnalyticsError};
use crate::protocol::{check, seal, seal_pinned, ProtocolError, ProtocolParams};
use crate::rng::{derive_seed, trial_rng};
use crate::stats::{linear_fit, Estimate, LinearFit};

pub const CONFIG_VERSION: u32 = 1;

/// Trial count below which assertion mode refuses to judge a report.
pub const MIN_ASSERT_TRIALS: u64 = 100;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
}

type Result<T> = std::result::Result<T, ExperimentError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepVariable {
    #[serde(rename = "n")]
    N,
    #[serde(rename = "Theta")]
    Theta,
    #[serde(rename = "alpha")]
    Alpha,
    #[serde(rename = "k")]
    K,
    #[serde(rename = "theta_prime")]
    ThetaPrime,
    #[serde(rename = "m")]
    M,
}

impl SweepVariable {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVariable::N => "n",
            SweepVariable::Theta => "Theta",
            SweepVariable::Alpha => "alpha",
            SweepVariable::K => "k",
            SweepVariable::ThetaPrime => "theta_prime",
            SweepVariable::M => "m",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub path: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
}

fn default_version() -> u32 {
    CONFIG_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub params: ProtocolParams,
    pub strategy: Strategy,
    pub trials: u64,
    /// Fix every sealing angle to this value (diagnostic, non-protocol mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pin_theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
    /// Replaces the computed analytic reference (used to exercise assertion mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic_ref_override: Option<f64>,
}

impl ExperimentConfig {
    pub fn new(params: ProtocolParams, strategy: Strategy, trials: u64) -> Self {
        ExperimentConfig {
            version: CONFIG_VERSION,
            params,
            strategy,
            trials,
            pin_theta: None,
            sweep: None,
            output: None,
            analytic_ref_override: None,
        }
    }

    pub fn with_sweep(mut self, variable: SweepVariable, values: Vec<f64>) -> Self {
        self.sweep = Some(Sweep { variable, values });
        self
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a `.toml` file as TOML and anything else as JSON.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
            path: path.to_owned(),
            source,
        })?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Self::from_toml(&text),
            _ => Self::from_json(&text),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(ExperimentError::Config(format!(
                "unsupported config version {}",
                self.version
            )));
        }
        if self.trials == 0 {
            return Err(ExperimentError::Config("trials >= 1 violated".into()));
        }
        for point in self.points()? {
            point.params.validate()?;
            if let Some(t) = point.pin_theta {
                check_pin(&point.params, t)?;
            }
            if let Some(attack) = point.strategy.individual_attack(point.params.n)? {
                attack.validate(&point.params)?;
            }
        }
        Ok(())
    }

    /// The configs of every sweep point (just `self` without a sweep).
    pub fn points(&self) -> Result<Vec<ExperimentConfig>> {
        let Some(sweep) = &self.sweep else {
            return Ok(vec![self.clone()]);
        };
        if sweep.values.is_empty() {
            return Err(ExperimentError::Config("sweep has no values".into()));
        }
        sweep
            .values
            .iter()
            .map(|&v| {
                let mut point = self.clone();
                point.sweep = None;
                point.output = None;
                apply_sweep(&mut point, sweep.variable, v)?;
                Ok(point)
            })
            .collect()
    }
}

fn as_count(variable: SweepVariable, v: f64) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v < usize::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(ExperimentError::Config(format!(
            "sweep {} needs nonnegative integers, got {v}",
            variable.name()
        )))
    }
}

fn apply_sweep(point: &mut ExperimentConfig, variable: SweepVariable, v: f64) -> Result<()> {
    let unsupported = || {
        ExperimentError::Config(format!(
            "sweep variable {} does not apply to this strategy",
            variable.name()
        ))
    };
    match variable {
        SweepVariable::N => point.params.n = as_count(variable, v)?,
        SweepVariable::Theta => point.params.theta_max = v,
        SweepVariable::Alpha => point.params.alpha = v,
        SweepVariable::K => {
            let k = as_count(variable, v)?;
            match &mut point.strategy {
                Strategy::Honest => {
                    point.strategy = Strategy::Individual {
                        k: Some(k),
                        indices: None,
                        fake: None,
                    }
                }
                Strategy::Individual { k: slot, indices, .. } => {
                    *slot = Some(k);
                    *indices = None;
                }
                Strategy::Collective(attack) => match &mut attack.policy {
                    SubspacePolicy::Prefix { j } => *j = k,
                    _ => return Err(unsupported()),
                },
                Strategy::None => return Err(unsupported()),
            }
        }
        SweepVariable::ThetaPrime => match &mut point.strategy {
            Strategy::Individual { fake, .. } => {
                *fake = Some(crate::adversary::FakeSpec {
                    theta_prime: Some(v),
                    theta_primes: None,
                })
            }
            Strategy::Collective(attack) if matches!(attack.policy, SubspacePolicy::Prefix { .. }) => {
                attack.fake_prefix = Some(v)
            }
            _ => return Err(unsupported()),
        },
        SweepVariable::M => {
            let m = as_count(variable, v)?;
            match &mut point.strategy {
                Strategy::Collective(attack) => attack.policy = SubspacePolicy::Random { m },
                _ => return Err(unsupported()),
            }
        }
    }
    Ok(())
}

fn check_pin(params: &ProtocolParams, theta: f64) -> Result<()> {
    let bound = params.angle_bound();
    if theta.abs() <= bound {
        Ok(())
    } else {
        Err(ExperimentError::Config(format!(
            "pinned theta {theta} outside [-{bound}, {bound}] (Theta/n^alpha)"
        )))
    }
}

/// Diagnostic variant of `config` that seals every qubit at `theta`.
pub fn pin_thetas(config: &ExperimentConfig, theta: f64) -> Result<ExperimentConfig> {
    let mut pinned = config.clone();
    pinned.pin_theta = Some(theta);
    for point in pinned.points()? {
        check_pin(&point.params, theta)?;
    }
    Ok(pinned)
}

/// Aggregated result of one config point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub config: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_variable: Option<SweepVariable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_value: Option<f64>,
    /// True when angles were pinned: not a faithful run of the protocol.
    pub diagnostic_mode: bool,
    pub trials: u64,
    /// Trials that entered the estimate (binary collective misses are dropped).
    pub counted_trials: u64,
    pub unread: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub analytic_ref: Option<f64>,
    /// Raw collective evasion bound, when the strategy is collective.
    pub analytic_bound: Option<f64>,
    pub bit_error_rate: Option<f64>,
    pub info_bits: Option<f64>,
    pub seed: u64,
    pub wall_time: f64,
}

impl TrialReport {
    /// `|estimate - analytic_ref| <= z sigma`, or `None` without a reference.
    pub fn agrees_with_reference(&self, z: f64) -> Option<bool> {
        let p = self.analytic_ref?;
        let est = Estimate::from_counts(self.unread, self.counted_trials);
        Some(est.within_sigmas(p, z))
    }

    /// Copy with `wall_time` zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> TrialReport {
        TrialReport {
            wall_time: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Tally {
    unread: u64,
    counted: u64,
    bit_errors: u64,
    bits_read: u64,
}

impl Tally {
    fn merge(self, o: Tally) -> Tally {
        Tally {
            unread: self.unread + o.unread,
            counted: self.counted + o.counted,
            bit_errors: self.bit_errors + o.bit_errors,
            bits_read: self.bits_read + o.bits_read,
        }
    }
}

fn simulate_trial(point: &ExperimentConfig, master: u64, t: u64) -> Result<(Tally, Option<f64>)> {
    let params = &point.params;
    let mut rng = trial_rng(master, t);
    let bits: Vec<bool> = (0..params.n).map(|_| rand::Rng::random(&mut rng)).collect();
    let mut sealed = match point.pin_theta {
        Some(theta) => seal_pinned(params, &bits, theta)?,
        None => seal(params, &bits, &mut rng)?,
    };
    let outcome = apply_strategy(sealed.public_state_mut(), params, &point.strategy, &mut rng)?;
    // The harness may compare against Alice's record; the strategy could not.
    let truth = sealed.alice().bits();
    let bit_errors = outcome
        .learned
        .iter()
        .filter(|(i, b)| truth[*i] != *b)
        .count() as u64;
    let mut tally = Tally {
        bit_errors,
        bits_read: outcome.learned.len() as u64,
        ..Tally::default()
    };
    if outcome.counted {
        tally.counted = 1;
        tally.unread = check(&mut sealed, &mut rng)?.is_unread() as u64;
    }
    Ok((tally, outcome.info_bits))
}

/// Expected UNREAD probability when one exists in closed form.
fn analytic_reference(point: &ExperimentConfig) -> Result<Option<f64>> {
    let params = &point.params;
    // Per-qubit pass probability for a read qubit with fake angle `tp` (0 = leave).
    let per_qubit = |tp: f64| -> Result<f64> {
        Ok(match point.pin_theta {
            Some(theta) => analytics::pass_prob_fake(theta, tp)?,
            None => analytics::avg_pass_prob_closed_form(params.theta_max, params.alpha, params.n, tp)?,
        })
    };
    let product = |fake: &FakePolicy, k: usize| -> Result<f64> {
        Ok(match fake {
            FakePolicy::Leave => per_qubit(0.0)?.powi(k as i32),
            FakePolicy::Fake { theta_prime } => per_qubit(*theta_prime)?.powi(k as i32),
            FakePolicy::FakeEach { theta_primes } => theta_primes
                .iter()
                .map(|&tp| per_qubit(tp))
                .product::<Result<f64>>()?,
        })
    };
    Ok(match &point.strategy {
        Strategy::None => Some(1.0),
        Strategy::Honest | Strategy::Individual { .. } => {
            let attack = point.strategy.individual_attack(params.n)?.expect("individual");
            Some(product(attack.fake(), attack.k())?)
        }
        Strategy::Collective(attack) => match attack.policy {
            SubspacePolicy::Prefix { j } => {
                let fake = attack
                    .fake_prefix
                    .map_or(FakePolicy::Leave, |t| FakePolicy::Fake { theta_prime: t });
                Some(product(&fake, j)?)
            }
            _ => None,
        },
    })
}

/// Raw collective bound `2^-k prod 2cos^2(theta_i)`, averaged over the angle
/// law when angles are sampled.
fn analytic_bound(point: &ExperimentConfig, info_bits: f64) -> Option<f64> {
    let Strategy::Collective(_) = point.strategy else {
        return None;
    };
    let params = &point.params;
    let n = params.n as f64;
    let log2_factor = match point.pin_theta {
        Some(theta) => (2.0 * theta.cos().powi(2)).log2(),
        None => {
            // E[2 cos^2 t] = 1 + sin(2a)/(2a) for t uniform on [-a, a].
            let a = params.angle_bound();
            (1.0 + (2.0 * a).sin() / (2.0 * a)).log2()
        }
    };
    Some((n * log2_factor - info_bits).exp2())
}

/// Runs every point of `config`.
pub fn run(config: &ExperimentConfig) -> Result<Vec<TrialReport>> {
    config.validate()?;
    let points = config.points()?;
    let sweep = config.sweep.as_ref();
    points
        .iter()
        .enumerate()
        .map(|(idx, point)| {
            let started = Instant::now();
            let master = derive_seed(config.params.seed, idx as u64);
            let (tally, info_bits) = (0..point.trials)
                .into_par_iter()
                .map(|t| simulate_trial(point, master, t))
                .try_reduce(
                    || (Tally::default(), None),
                    |a, b| Ok((a.0.merge(b.0), a.1.or(b.1))),
                )?;
            let est = Estimate::from_counts(tally.unread, tally.counted);
            let analytic_ref = match point.analytic_ref_override {
                Some(v) => Some(v),
                None => analytic_reference(point)?,
            };
            Ok(TrialReport {
                config: point.clone(),
                sweep_variable: sweep.map(|s| s.variable),
                sweep_value: sweep.map(|s| s.values[idx]),
                diagnostic_mode: point.pin_theta.is_some(),
                trials: point.trials,
                counted_trials: tally.counted,
                unread: tally.unread,
                estimate: est.estimate,
                ci_low: est.ci_low,
                ci_high: est.ci_high,
                analytic_ref,
                analytic_bound: info_bits.and_then(|k| analytic_bound(point, k)),
                bit_error_rate: (tally.bits_read > 0)
                    .then(|| tally.bit_errors as f64 / tally.bits_read as f64),
                info_bits,
                seed: config.params.seed,
                wall_time: started.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    #[serde(flatten)]
    pub fit: LinearFit,
    /// Points dropped because their estimate was not positive.
    pub excluded: usize,
}

/// Least-squares fit of `ln(estimate)` against the sweep value.
pub fn decay_fit(reports: &[TrialReport]) -> Result<DecayFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = 0;
    for r in reports {
        let x = r
            .sweep_value
            .ok_or_else(|| ExperimentError::Config("decay fit needs sweep reports".into()))?;
        if r.estimate > 0.0 {
            xs.push(x);
            ys.push(r.estimate.ln());
        } else {
            log::warn!("decay fit: dropping nonpositive estimate at {x}");
            excluded += 1;
        }
    }
    if xs.len() < 4 {
        return Err(ExperimentError::Config(format!(
            "decay fit needs >= 4 positive points, have {}",
            xs.len()
        )));
    }
    let fit = linear_fit(&xs, &ys)
        .ok_or_else(|| ExperimentError::Config("degenerate sweep values".into()))?;
    Ok(DecayFit { fit, excluded })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssertionFailure {
    pub index: usize,
    pub message: String,
}

/// Checks every report carrying an analytic reference at `z` sigma.
pub fn assert_reports(reports: &[TrialReport], z: f64) -> Vec<AssertionFailure> {
    let mut failures = Vec::new();
    for (index, r) in reports.iter().enumerate() {
        let Some(p) = r.analytic_ref else { continue };
        if r.counted_trials < MIN_ASSERT_TRIALS {
            failures.push(AssertionFailure {
                index,
                message: format!(
                    "only {} counted trials; assertions need >= {MIN_ASSERT_TRIALS}",
                    r.counted_trials
                ),
            });
        } else if r.agrees_with_reference(z) == Some(false) {
            failures.push(AssertionFailure {
                index,
                message: format!(
                    "estimate {} deviates from analytic {p} by more than {z} sigma",
                    r.estimate
                ),
            });
        }
    }
    failures
}

/// One JSON object per line.
pub fn write_jsonl<W: std::io::Write>(reports: &[TrialReport], mut out: W) -> Result<()> {
    for r in reports {
        serde_json::to_writer(&mut out, r)?;
        writeln!(out).map_err(|source| ExperimentError::Io {
            path: PathBuf::from("<output>"),
            source,
        })?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CsvRow<'a> {
    sweep_variable: &'a str,
    sweep_value: Option<f64>,
    estimate: f64,
    ci_low: f64,
    ci_high: f64,
    analytic_ref: Option<f64>,
    bit_error_rate: Option<f64>,
}

pub fn write_csv<W: std::io::Write>(reports: &[TrialReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(CsvRow {
            sweep_variable: r.sweep_variable.map_or("", |v| v.name()),
            sweep_value: r.sweep_value,
            estimate: r.estimate,
            ci_low: r.ci_low,
            ci_high: r.ci_high,
            analytic_ref: r.analytic_ref,
            bit_error_rate: r.bit_error_rate,
        })?;
    }
    w.flush().map_err(|source| ExperimentError::Io {
        path: PathBuf::from("<output>"),
        source,
    })?;
    Ok(())
}

pub fn write_reports(reports: &[TrialReport], spec: &OutputSpec) -> Result<()> {
    let file = std::fs::File::create(&spec.path).map_err(|source| ExperimentError::Io {
        path: spec.path.clone(),
        source,
    })?;
    let out = std::io::BufWriter::new(file);
    match spec.format {
        OutputFormat::Json => write_jsonl(reports, out),
        OutputFormat::Csv => write_csv(reports, out),
    }
}
