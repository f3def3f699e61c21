//! Closed-form security quantities of the sealing protocol.
//!
//! These are the reference values the simulators are compared against:
//! reading error bound, single-qubit check-pass probabilities (with and
//! without a fake re-preparation), their average over the uniform angle
//! law, detection-evasion probabilities for individual and collective
//! readers, and the information yield of a subspace collapse.

use serde::Serialize;
use std::f64::consts::FRAC_PI_4;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("input out of range: {0}")]
    OutOfRange(String),
    #[error("quadrature did not reach tolerance {tol} (estimate {estimate})")]
    Quadrature { tol: f64, estimate: f64 },
}

type Result<T> = std::result::Result<T, AnalyticsError>;

/// Absolute tolerance of the averaged pass-probability quadrature.
pub const QUADRATURE_TOL: f64 = 1e-10;

fn check_angle(name: &str, theta: f64) -> Result<()> {
    if theta.abs() < FRAC_PI_4 {
        Ok(())
    } else {
        Err(AnalyticsError::OutOfRange(format!(
            "|{name}| < pi/4 violated ({name} = {theta})"
        )))
    }
}

fn check_params(theta_max: f64, alpha: f64, n: usize) -> Result<()> {
    if !(theta_max > 0.0 && theta_max < FRAC_PI_4) {
        return Err(AnalyticsError::OutOfRange(format!(
            "0 < Theta < pi/4 violated (Theta = {theta_max})"
        )));
    }
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(AnalyticsError::OutOfRange(format!(
            "0 < alpha < 1/2 violated (alpha = {alpha})"
        )));
    }
    if n == 0 {
        return Err(AnalyticsError::OutOfRange("n >= 1 violated".into()));
    }
    Ok(())
}

fn angle_bound(theta_max: f64, alpha: f64, n: usize) -> f64 {
    theta_max / (n as f64).powf(alpha)
}

/// Per-bit reading error bound `sin^2(Theta / n^alpha)`.
pub fn eps_bound(theta_max: f64, alpha: f64, n: usize) -> Result<f64> {
    check_params(theta_max, alpha, n)?;
    Ok(angle_bound(theta_max, alpha, n).sin().powi(2))
}

/// Probability that a qubit sealed at `theta`, measured and replaced by the
/// fake `cos(theta')|b'> + sin(theta')|!b'>`, passes Alice's projection.
pub fn pass_prob_fake(theta: f64, theta_prime: f64) -> Result<f64> {
    check_angle("theta", theta)?;
    check_angle("theta_prime", theta_prime)?;
    let (c, s) = (theta.cos(), theta.sin());
    Ok(c * c * (theta - theta_prime).cos().powi(2) + s * s * (theta + theta_prime).sin().powi(2))
}

/// Pass probability when the reader leaves the measured qubit as is:
/// `1 - sin^2(2 theta) / 2`.
pub fn pass_prob_no_fake(theta: f64) -> Result<f64> {
    check_angle("theta", theta)?;
    Ok(1.0 - 0.5 * (2.0 * theta).sin().powi(2))
}

/// Average of [`pass_prob_fake`] over `theta` uniform on
/// `[-Theta/n^alpha, Theta/n^alpha]`, by adaptive Simpson quadrature.
pub fn avg_pass_prob(theta_max: f64, alpha: f64, n: usize, theta_prime: f64) -> Result<f64> {
    check_params(theta_max, alpha, n)?;
    check_angle("theta_prime", theta_prime)?;
    let a = angle_bound(theta_max, alpha, n);
    let f = |t: f64| {
        let (c, s) = (t.cos(), t.sin());
        c * c * (t - theta_prime).cos().powi(2) + s * s * (t + theta_prime).sin().powi(2)
    };
    // Dividing by 2a scales the error, so integrate to tol * 2a.
    let integral = adaptive_simpson(f, -a, a, QUADRATURE_TOL * 2.0 * a)?;
    Ok(integral / (2.0 * a))
}

/// Closed form of [`avg_pass_prob`].
///
/// The integrand expands to `1/2 + sin(2t) sin(2t')/2 + cos^2(2t) cos(2t')/2`;
/// the odd term averages out and `cos^2(2t)` averages to
/// `1/2 + sin(4a) / (8a)` on `[-a, a]`.
pub fn avg_pass_prob_closed_form(
    theta_max: f64,
    alpha: f64,
    n: usize,
    theta_prime: f64,
) -> Result<f64> {
    check_params(theta_max, alpha, n)?;
    check_angle("theta_prime", theta_prime)?;
    let a = angle_bound(theta_max, alpha, n);
    let mean_cos_sq = 0.5 + (4.0 * a).sin() / (8.0 * a);
    Ok(0.5 + 0.5 * (2.0 * theta_prime).cos() * mean_cos_sq)
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> std::result::Result<f64, f64> {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        if depth == 0 {
            return Err(left + right + delta / 15.0);
        }
        let l = recurse(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)?;
        let r = recurse(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)?;
        Ok(l + r)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(&f, a, fa, b, fb);
    recurse(&f, a, fa, b, fb, m, fm, whole, tol, 48)
        .map_err(|estimate| AnalyticsError::Quadrature { tol, estimate })
}

/// Probability that reading the qubits with the given angles (leaving each
/// in its measured basis state) goes undetected: `prod (1 - sin^2(2 theta_i)/2)`.
/// Unread qubits pass with certainty and do not appear in the product.
pub fn evade_prob_individual(thetas: &[f64]) -> Result<f64> {
    thetas
        .iter()
        .map(|&t| pass_prob_no_fake(t))
        .product::<Result<f64>>()
}

/// Information `n - log2(m)` in bits revealed by a collapse onto an
/// `m`-dimensional computational-basis subspace. `m` may be any real in `[1, 2^n]`.
pub fn info_bound(n: usize, m: f64) -> Result<f64> {
    let max = (n as f64).exp2();
    if !(m >= 1.0 && m <= max) {
        return Err(AnalyticsError::OutOfRange(format!(
            "1 <= m <= 2^n violated (m = {m}, n = {n})"
        )));
    }
    Ok(n as f64 - m.log2())
}

/// Largest possible `<v|Psi>^2` over computational basis vectors: `prod cos^2(theta_i)`.
pub fn per_v_amplitude_bound(thetas: &[f64]) -> Result<f64> {
    thetas
        .iter()
        .map(|&t| {
            check_angle("theta", t)?;
            Ok(t.cos().powi(2))
        })
        .product()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollectiveBound {
    /// `2^-k prod 2 cos^2(theta_i)`; may exceed 1 for small `k`.
    pub raw: f64,
    /// `min(raw, 1)`.
    pub clamped: f64,
}

/// Upper bound on the probability that a collective reader extracting `k`
/// bits escapes detection.
pub fn evade_bound_collective(thetas: &[f64], k: f64) -> Result<CollectiveBound> {
    let n = thetas.len() as f64;
    if !(k >= 0.0 && k <= n) {
        return Err(AnalyticsError::OutOfRange(format!(
            "0 <= k <= n violated (k = {k}, n = {n})"
        )));
    }
    // Sum logs so that large n neither overflows 2^n nor underflows the product.
    let mut log2_prod = -k;
    for &t in thetas {
        check_angle("theta", t)?;
        log2_prod += (2.0 * t.cos().powi(2)).log2();
    }
    let raw = log2_prod.exp2();
    Ok(CollectiveBound {
        raw,
        clamped: raw.min(1.0),
    })
}
