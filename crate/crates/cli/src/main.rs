//! `qseal`: seal/read/check walkthroughs, closed-form formulas, the
//! single-bit demo and Monte Carlo campaigns.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 assertion failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use qseal_core::analytics;
use qseal_core::demo::{run_demo, DemoSpec, DEFAULT_INSTRUCTION};
use qseal_core::experiments::{
    assert_reports, run, write_csv, write_jsonl, ExperimentConfig, OutputFormat, OutputSpec,
};
use qseal_core::protocol::{
    bits_from_binary, bits_to_binary, check_with, read_honest, seal, CheckOptions, ProtocolParams,
    SealedString,
};
use qseal_core::rng::trial_rng;

#[derive(Parser, Debug)]
#[command(name = "qseal", version, about = "Quantum bit-string sealing simulator")]
struct Cli {
    /// Master seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file (default: stdout, or in place for read/check).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Compare experiment estimates to their analytic references at 3 sigma.
    #[arg(long = "assert", global = true)]
    assert_mode: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Seal a bit string and write the sealed record.
    Seal {
        #[arg(long)]
        n: Option<usize>,
        /// Angle scale Theta (radians).
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        alpha: f64,
        /// Bits to seal as a 0/1 string; random when omitted.
        #[arg(long)]
        bits: Option<String>,
        /// Also write the public view (no secret bits or angles) here.
        #[arg(long)]
        public_out: Option<PathBuf>,
    },
    /// Measure every qubit of a sealed record in the computational basis.
    Read {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Run Alice's check on a sealed record.
    Check {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        early_exit: bool,
    },
    /// Evaluate a closed-form quantity: eps, eq1, eq2, eq3, eq4, eq5, eq9, eq10.
    Analytic {
        formula: String,
        #[arg(long, allow_hyphen_values = true)]
        theta: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        theta_prime: Option<f64>,
        /// Angle scale Theta.
        #[arg(long = "Theta", visible_alias = "big-theta")]
        theta_max: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        m: Option<f64>,
        #[arg(long)]
        k: Option<f64>,
        /// Comma-separated angle list.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        thetas: Option<Vec<f64>>,
    },
    /// Seal one bit behind a sealed instruction string and decode it honestly.
    Demo {
        #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
        bit: u8,
        #[arg(long, default_value = DEFAULT_INSTRUCTION)]
        text: String,
        #[arg(long, default_value_t = 16)]
        dummies: usize,
        #[arg(long, default_value_t = 15.0)]
        angle_deg: f64,
        #[arg(long, default_value_t = 0.2)]
        theta: f64,
        #[arg(long, default_value_t = 0.25)]
        alpha: f64,
        /// Skip the honest decode so Alice checks an untouched register.
        #[arg(long)]
        no_read: bool,
    },
    /// Run a Monte Carlo campaign from a JSON or TOML config.
    Experiment { config: PathBuf },
}

enum Failure {
    Usage(anyhow::Error),
    Assertion(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Assertion(msg)) => {
            eprintln!("assertion failed: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: &Cli) -> std::result::Result<(), Failure> {
    match &cli.command {
        Command::Seal {
            n,
            theta,
            alpha,
            bits,
            public_out,
        } => cmd_seal(cli, *n, *theta, *alpha, bits.as_deref(), public_out.as_deref())?,
        Command::Read { input } => cmd_read(cli, input)?,
        Command::Check { input, early_exit } => cmd_check(cli, input, *early_exit)?,
        Command::Analytic { formula, .. } => {
            let value = cmd_analytic(formula, &cli.command)?;
            emit(cli, &serde_json::to_string(&value).map_err(anyhow::Error::from)?)?;
        }
        Command::Demo {
            bit,
            text,
            dummies,
            angle_deg,
            theta,
            alpha,
            no_read,
        } => {
            let spec = DemoSpec {
                secret_bit: *bit == 1,
                instruction_text: text.clone(),
                dummy_count: *dummies,
                payload_basis_angle: angle_deg.to_radians(),
            };
            let transcript =
                run_demo(&spec, *theta, *alpha, cli.seed, !no_read).map_err(anyhow::Error::from)?;
            let text = serde_json::to_string_pretty(&transcript).map_err(anyhow::Error::from)?;
            emit(cli, &text)?;
        }
        Command::Experiment { config } => cmd_experiment(cli, config)?,
    }
    Ok(())
}

fn emit(cli: &Cli, text: &str) -> Result<()> {
    match &cli.out {
        Some(path) => fs::write(path, format!("{text}\n"))
            .with_context(|| format!("writing {}", path.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load_sealed(path: &Path) -> Result<SealedString> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    SealedString::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn store_sealed(cli: &Cli, input: &Path, sealed: &SealedString) -> Result<()> {
    let path = cli.out.as_deref().unwrap_or(input);
    fs::write(path, sealed.to_json()).with_context(|| format!("writing {}", path.display()))
}

fn cmd_seal(
    cli: &Cli,
    n: Option<usize>,
    theta: f64,
    alpha: f64,
    bits: Option<&str>,
    public_out: Option<&Path>,
) -> Result<()> {
    // Stream 0 picks random bits, stream 1 draws the angles.
    let bits = match bits {
        Some(s) => bits_from_binary(s)?,
        None => {
            let n = n.ok_or_else(|| anyhow!("--n or --bits is required"))?;
            let mut rng = trial_rng(cli.seed, 0);
            (0..n).map(|_| qseal_core::rng::random_bit(&mut rng)).collect()
        }
    };
    if let Some(n) = n {
        if n != bits.len() {
            bail!("--n {n} does not match {} bits given", bits.len());
        }
    }
    let params = ProtocolParams::new(bits.len(), theta, alpha, cli.seed)?;
    let sealed = seal(&params, &bits, &mut trial_rng(cli.seed, 1))?;
    emit(cli, &sealed.to_json())?;
    if let Some(path) = public_out {
        fs::write(path, sealed.public_json())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cmd_read(cli: &Cli, input: &Path) -> Result<()> {
    let mut sealed = load_sealed(input)?;
    let bits = read_honest(&mut sealed, &mut trial_rng(cli.seed, 2))?;
    println!("{}", bits_to_binary(&bits));
    store_sealed(cli, input, &sealed)
}

fn cmd_check(cli: &Cli, input: &Path, early_exit: bool) -> Result<()> {
    let mut sealed = load_sealed(input)?;
    let report = check_with(
        &mut sealed,
        &mut trial_rng(cli.seed, 3),
        CheckOptions { early_exit },
    )?;
    let failed: Vec<usize> = report
        .per_qubit_pass
        .iter()
        .enumerate()
        .filter(|(_, &p)| !p)
        .map(|(i, _)| i)
        .collect();
    println!(
        "{}",
        json!({
            "verdict": report.verdict,
            "per_qubit_pass": report.per_qubit_pass,
            "failed_qubits": failed,
            "rng_stream": report.rng_stream,
        })
    );
    store_sealed(cli, input, &sealed)
}

fn cmd_analytic(formula: &str, command: &Command) -> Result<Value> {
    let Command::Analytic {
        theta,
        theta_prime,
        theta_max,
        alpha,
        n,
        m,
        k,
        thetas,
        ..
    } = command
    else {
        unreachable!()
    };
    let mut inputs = Map::new();
    let mut need = |name: &str, v: Option<f64>| -> Result<f64> {
        let v = v.ok_or_else(|| anyhow!("{formula} needs --{name}"))?;
        inputs.insert(name.to_owned(), json!(v));
        Ok(v)
    };
    let mut extra = Map::new();
    let value = match formula {
        "eps" => {
            let (t, a, n) = (need("Theta", *theta_max)?, need("alpha", *alpha)?, need("n", n.map(|v| v as f64))?);
            analytics::eps_bound(t, a, n as usize)?
        }
        "eq1" => analytics::pass_prob_fake(need("theta", *theta)?, need("theta-prime", *theta_prime)?)?,
        "eq2" => {
            let (t, a, nn, tp) = (
                need("Theta", *theta_max)?,
                need("alpha", *alpha)?,
                need("n", n.map(|v| v as f64))?,
                need("theta-prime", *theta_prime)?,
            );
            extra.insert(
                "closed_form".into(),
                json!(analytics::avg_pass_prob_closed_form(t, a, nn as usize, tp)?),
            );
            analytics::avg_pass_prob(t, a, nn as usize, tp)?
        }
        "eq3" => analytics::pass_prob_no_fake(need("theta", *theta)?)?,
        "eq4" => {
            let list = angle_list(thetas, *theta, *k, &mut inputs)?;
            analytics::evade_prob_individual(&list)?
        }
        "eq5" => {
            let nn = need("n", n.map(|v| v as f64))?;
            analytics::info_bound(nn as usize, need("m", *m)?)?
        }
        "eq9" => {
            let list = angle_list(thetas, *theta, n.map(|v| v as f64), &mut inputs)?;
            analytics::per_v_amplitude_bound(&list)?
        }
        "eq10" => {
            let kk = k.ok_or_else(|| anyhow!("eq10 needs --k"))?;
            let list = angle_list(thetas, *theta, n.map(|v| v as f64), &mut inputs)?;
            inputs.insert("k".into(), json!(kk));
            let b = analytics::evade_bound_collective(&list, kk)?;
            extra.insert("clamped".into(), json!(b.clamped));
            b.raw
        }
        other => bail!(
            "unknown formula {other:?} (expected eps, eq1, eq2, eq3, eq4, eq5, eq9, eq10)"
        ),
    };
    let mut out = Map::new();
    out.insert("formula".into(), json!(formula));
    out.insert("inputs".into(), Value::Object(inputs));
    out.insert("value".into(), json!(value));
    out.extend(extra);
    Ok(Value::Object(out))
}

/// `--thetas a,b,c`, or `--theta t` repeated `count` times.
fn angle_list(
    thetas: &Option<Vec<f64>>,
    theta: Option<f64>,
    count: Option<f64>,
    inputs: &mut Map<String, Value>,
) -> Result<Vec<f64>> {
    if let Some(list) = thetas {
        inputs.insert("thetas".into(), json!(list));
        return Ok(list.clone());
    }
    match (theta, count) {
        (Some(t), Some(c)) if c >= 0.0 && c.fract() == 0.0 => {
            inputs.insert("theta".into(), json!(t));
            inputs.insert("count".into(), json!(c));
            Ok(vec![t; c as usize])
        }
        _ => bail!("give --thetas, or --theta with a count (--k for eq4, --n for eq9/eq10)"),
    }
}

fn cmd_experiment(cli: &Cli, path: &Path) -> std::result::Result<(), Failure> {
    let config = ExperimentConfig::load(path)
        .with_context(|| format!("loading {}", path.display()))?;
    let reports = run(&config).map_err(anyhow::Error::from)?;
    let format = match cli.format {
        Some(Format::Csv) => OutputFormat::Csv,
        Some(Format::Json) => OutputFormat::Json,
        None => config.output.as_ref().map(|o| o.format).unwrap_or_default(),
    };
    let target = cli
        .out
        .clone()
        .or_else(|| config.output.as_ref().map(|o| o.path.clone()));
    match target {
        Some(path) => qseal_core::experiments::write_reports(&reports, &OutputSpec { path, format })
            .map_err(anyhow::Error::from)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            match format {
                OutputFormat::Json => write_jsonl(&reports, &mut lock),
                OutputFormat::Csv => write_csv(&reports, &mut lock),
            }
            .map_err(anyhow::Error::from)?;
            lock.flush().map_err(anyhow::Error::from)?;
        }
    }
    for r in &reports {
        eprintln!(
            "{} = {}: estimate {:.6} [{:.6}, {:.6}] analytic {}",
            r.sweep_variable.map_or("point", |v| v.name()),
            r.sweep_value.map_or("-".to_owned(), |v| v.to_string()),
            r.estimate,
            r.ci_low,
            r.ci_high,
            r.analytic_ref.map_or("n/a".to_owned(), |v| format!("{v:.6}")),
        );
    }
    if cli.assert_mode {
        let failures = assert_reports(&reports, 3.0);
        if !failures.is_empty() {
            let msg = failures
                .iter()
                .map(|f| format!("report {}: {}", f.index, f.message))
                .collect::<Vec<_>>()
                .join("; ");
            return Err(Failure::Assertion(msg));
        }
    }
    Ok(())
}
