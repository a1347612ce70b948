//! Scalar special functions used by the closed-form statistics and the
//! probability limits: Γ, the Kummer function ₁F₁, the Hurwitz sum ζ_s(x),
//! the logistic series S^(m)_γ(x), and normal-distribution helpers.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Lanczos sum for Γ(z + 1), valid for z ≥ -0.5.
fn lanczos(z: f64) -> f64 {
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * acc
}

/// Γ(x) for x > 0.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("gamma_fn requires x > 0, got {x}")));
    }
    if x < 0.5 {
        // reflection
        Ok(PI / ((PI * x).sin() * lanczos(-x)))
    } else {
        Ok(lanczos(x - 1.0))
    }
}

/// ln Γ(x) for x > 0, stable for large arguments.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("ln_gamma requires x > 0, got {x}")));
    }
    if x < 0.5 {
        return Ok((PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x)?);
    }
    let z = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    Ok(0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + acc.ln())
}

const SERIES_BUDGET: usize = 100_000;
const SERIES_REL_TOL: f64 = 1e-15;

fn is_nonpositive_integer(b: f64) -> bool {
    b <= 0.0 && b == b.floor()
}

/// Confluent hypergeometric (Kummer) function ₁F₁(a; b; x).
///
/// The power series is summed directly for x ≥ -1. For x < -1 the Kummer
/// transformation ₁F₁(a,b,x) = eˣ ₁F₁(b−a,b,−x) avoids the alternating-sign
/// cancellation, and for x < -60 the large-argument expansion is used.
pub fn kummer_1f1(a: f64, b: f64, x: f64) -> Result<f64> {
    if is_nonpositive_integer(b) {
        return Err(Error::Domain(format!(
            "kummer_1f1: b must not be a non-positive integer, got {b}"
        )));
    }
    if !a.is_finite() || !x.is_finite() {
        return Err(Error::Domain("kummer_1f1: non-finite argument".into()));
    }
    if x == 0.0 || a == 0.0 {
        return Ok(1.0);
    }
    if x >= -1.0 {
        return kummer_series(a, b, x);
    }
    let z = -x;
    if z > 60.0 && !is_nonpositive_integer(b - a) {
        if let Some(v) = kummer_asymptotic_negative(a, b, z)? {
            return Ok(v);
        }
    }
    Ok(x.exp() * kummer_series(b - a, b, z)?)
}

fn kummer_series(a: f64, b: f64, x: f64) -> Result<f64> {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..SERIES_BUDGET {
        let kf = k as f64;
        let ratio = (a + kf) * x / ((b + kf) * (kf + 1.0));
        term *= ratio;
        sum += term;
        if term == 0.0 {
            return Ok(sum);
        }
        // Once the ratio is below one in magnitude and shrinking, the
        // geometric tail term·r/(1−r) bounds what remains.
        let next_ratio = ((a + kf + 1.0) * x / ((b + kf + 1.0) * (kf + 2.0))).abs();
        if next_ratio < 1.0 && kf > (a.abs() + b.abs()) {
            let tail = term.abs() * next_ratio / (1.0 - next_ratio);
            if term.abs() + tail <= SERIES_REL_TOL * sum.abs() {
                return Ok(sum);
            }
        }
    }
    Err(Error::NoConvergence {
        what: format!("kummer_1f1 series (a={a}, b={b}, x={x})"),
        partial: sum,
    })
}

/// ₁F₁(a, b, −z) for large z > 0 via
/// Γ(b)/Γ(b−a) · z^{−a} Σ_s (a)_s (a−b+1)_s / s! · z^{−s}; the exponentially
/// small companion series is dropped. Returns `None` if the asymptotic
/// series does not reach full precision before its terms start to grow.
fn kummer_asymptotic_negative(a: f64, b: f64, z: f64) -> Result<Option<f64>> {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut converged = false;
    for s in 0..200 {
        let sf = s as f64;
        let next = term * (a + sf) * (a - b + 1.0 + sf) / ((sf + 1.0) * z);
        if next.abs() > term.abs() && s > 2 {
            break;
        }
        term = next;
        sum += term;
        if term.abs() <= 1e-16 * sum.abs() {
            converged = true;
            break;
        }
    }
    if !converged {
        return Ok(None);
    }
    let prefactor = gamma_ratio(b, b - a)? * z.powf(-a);
    Ok(Some(prefactor * sum))
}

/// Γ(p)/Γ(q) for real p, q that are not non-positive integers.
fn gamma_ratio(p: f64, q: f64) -> Result<f64> {
    Ok(signed_gamma(p)? / signed_gamma(q)?)
}

fn signed_gamma(x: f64) -> Result<f64> {
    if x > 0.0 {
        gamma_fn(x)
    } else if is_nonpositive_integer(x) {
        Err(Error::Domain(format!("gamma pole at {x}")))
    } else {
        Ok(PI / ((PI * x).sin() * gamma_fn(1.0 - x)?))
    }
}

const BERNOULLI_2J: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

/// Hurwitz sum ζ_s(x) = Σ_{k≥0} (k+x)^{−s} for s > 1, x > 0.
///
/// Direct summation of the first N terms followed by the Euler–Maclaurin
/// remainder, with N chosen so that the correction series is well inside its
/// region of rapid decay.
pub fn hurwitz_sum(s: f64, x: f64) -> Result<f64> {
    if !(s > 1.0) {
        return Err(Error::Domain(format!(
            "hurwitz_sum diverges for s <= 1 (s = {s})"
        )));
    }
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("hurwitz_sum requires x > 0, got {x}")));
    }
    let n = (s + 12.0 - x).ceil().max(12.0) as usize;
    let mut head = 0.0;
    for k in (0..n).rev() {
        head += (k as f64 + x).powf(-s);
    }
    let y = n as f64 + x;
    let mut tail = y.powf(1.0 - s) / (s - 1.0) + 0.5 * y.powf(-s);
    // B_{2j}/(2j)! · s(s+1)…(s+2j−2) · y^{−s−2j+1}
    let mut rising = s; // s(s+1)…(s+2j−2), starts at j = 1
    let mut fact = 2.0; // (2j)!
    let mut ypow = y.powf(-s - 1.0);
    for (j, b2j) in BERNOULLI_2J.iter().enumerate() {
        let term = b2j / fact * rising * ypow;
        tail += term;
        if term.abs() < 1e-17 * (head + tail).abs() {
            break;
        }
        let jf = (j + 1) as f64;
        rising *= (s + 2.0 * jf - 1.0) * (s + 2.0 * jf);
        fact *= (2.0 * jf + 1.0) * (2.0 * jf + 2.0);
        ypow /= y * y;
    }
    Ok(head + tail)
}

/// Parameters of the series S^(m)_γ(x).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesParams {
    pub order: u32,
    pub gamma: f64,
    pub x: f64,
}

impl SeriesParams {
    pub fn new(order: u32, gamma: f64, x: f64) -> Result<Self> {
        if !(order == 1 || order == 2) {
            return Err(Error::Domain(format!("series order must be 1 or 2, got {order}")));
        }
        if !(gamma > 0.0) || !x.is_finite() {
            return Err(Error::Domain(format!(
                "series requires gamma > 0 and finite x (gamma={gamma}, x={x})"
            )));
        }
        Ok(Self { order, gamma, x })
    }
}

/// S^(m)_γ(x) = Σ_{k≥0} [ (x/2π)² + ((γ+π)/(2π) + k)² ]^{−m}.
///
/// The first N terms are summed directly; the remainder is expanded in the
/// binomial series in a² = (x/2π)², each coefficient being a Hurwitz sum.
pub fn s_series(p: SeriesParams) -> f64 {
    let m = p.order as i32;
    let a = p.x / (2.0 * PI);
    let a2 = a * a;
    let c = (p.gamma + PI) / (2.0 * PI);
    if a2 == 0.0 {
        return hurwitz_sum(2.0 * m as f64, c).expect("c > 0");
    }
    let n = (2.0 * a.abs() + 10.0 - c).ceil().max(0.0) as usize;
    let mut head = 0.0;
    for k in (0..n).rev() {
        let y = c + k as f64;
        head += (a2 + y * y).powi(-m);
    }
    // Σ_{k≥n} (y²)^{−m}(1 + a²/y²)^{−m} = Σ_j C(−m, j) a^{2j} ζ_{2m+2j}(c+n)
    let y0 = c + n as f64;
    let mut tail = 0.0;
    let mut binom = 1.0; // C(−m, j)
    let mut a2j = 1.0;
    for j in 0..200 {
        let jf = j as f64;
        let z = hurwitz_sum(2.0 * m as f64 + 2.0 * jf, y0).expect("s > 1, y0 > 0");
        let term = binom * a2j * z;
        tail += term;
        if term.abs() < 1e-17 * (head + tail).abs() {
            break;
        }
        binom *= (-(m as f64) - jf) / (jf + 1.0);
        a2j *= a2;
    }
    head + tail
}

/// Standard normal density.
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF Φ(x), accurate in both tails.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// ln Φ(x), finite for all finite x.
pub fn normal_log_cdf(x: f64) -> f64 {
    if x > -30.0 {
        return normal_cdf(x).ln();
    }
    // Mills-ratio asymptotics: Φ(x) ≈ φ(x)/|x| · (1 − 1/x² + 3/x⁴ − 15/x⁶ + 105/x⁸)
    let x2 = x * x;
    let corr = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2) + 105.0 / (x2 * x2 * x2 * x2);
    -0.5 * x2 - (-x).ln() - 0.5 * (2.0 * PI).ln() + corr.ln()
}

/// E|X₁ − X₂|^γ for independent standard normals.
pub fn normal_pair_abs_moment(gamma: f64) -> Result<f64> {
    Ok(2f64.powf(gamma) / PI.sqrt() * gamma_fn((1.0 + gamma) / 2.0)?)
}

/// E|x − X|^γ for X standard normal, via ₁F₁(−γ/2, 1/2, −x²/2).
pub fn normal_abs_moment_about(x: f64, gamma: f64) -> Result<f64> {
    let pref = 2f64.powf(gamma / 2.0) / PI.sqrt() * gamma_fn((1.0 + gamma) / 2.0)?;
    Ok(pref * kummer_1f1(-gamma / 2.0, 0.5, -0.5 * x * x)?)
}

/// The same expectation through the e^{−x²/2}·₁F₁((1+γ)/2, 1/2, x²/2) form.
pub fn normal_abs_moment_about_alt(x: f64, gamma: f64) -> Result<f64> {
    let pref = 2f64.powf(gamma / 2.0) / PI.sqrt() * gamma_fn((1.0 + gamma) / 2.0)?;
    let half = 0.5 * x * x;
    // evaluate e^{−x²/2}·₁F₁(a, 1/2, x²/2) without overflowing the series
    let series = kummer_series(0.5 + gamma / 2.0, 0.5, half)?;
    Ok(pref * (-half).exp() * series)
}
