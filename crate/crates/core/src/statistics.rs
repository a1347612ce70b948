//! Finite-sample test statistics, their direct-integration counterparts and
//! a null-distribution simulator.
//!
//! Every statistic has the form n∫|φ_n(t) − φ₀(t)|² w(t) dt on standardized
//! data (or n∫(|φ_n|² − C_n)² w dt for the exponential tests), with w the
//! weight attached to the [`TestSpec`]. Sample spreads use the 1/n divisor.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::{Estimator, NullModel};
use crate::quadrature::{integrate2_over, integrate_with, IntegrationDomain, QuadOptions};
use crate::slopes::{Hypothesis, TestFamily, TestSpec};
use crate::special::{gamma_fn, hurwitz_sum, kummer_1f1, s_series, SeriesParams};
use crate::spectral::{WeightFamily, WeightFunction};
use crate::{Error, Result};

/// Observations of dimension 1 or 2, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    data: Vec<f64>,
    dim: usize,
}

impl Sample {
    pub fn univariate(xs: Vec<f64>) -> Result<Self> {
        Self::check(xs, 1)
    }

    pub fn bivariate(points: &[[f64; 2]]) -> Result<Self> {
        Self::check(points.iter().flatten().copied().collect(), 2)
    }

    fn check(data: Vec<f64>, dim: usize) -> Result<Self> {
        let n = data.len() / dim;
        if n < 3 {
            return Err(Error::Degenerate(format!("need at least 3 observations, got {n}")));
        }
        if let Some(x) = data.iter().find(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("non-finite observation {x}")));
        }
        Ok(Self { data, dim })
    }

    pub fn n(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Applies x ↦ a + b·x coordinatewise.
    pub fn affine(&self, a: f64, b: f64) -> Self {
        Self { data: self.data.iter().map(|x| a + b * x).collect(), dim: self.dim }
    }

    fn require_dim(&self, d: usize, what: &str) -> Result<()> {
        if self.dim != d {
            return Err(Error::Domain(format!("{what} needs {d}-dimensional data, got dimension {}", self.dim)));
        }
        Ok(())
    }
}

fn mean_sd(x: &[f64]) -> Result<(f64, f64)> {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    if !(v > 0.0) {
        return Err(Error::Degenerate("sample variance is zero".into()));
    }
    Ok((m, v.sqrt()))
}

/// Scaled residuals (x − X̄)/S.
pub fn standardize(s: &Sample) -> Result<Vec<f64>> {
    s.require_dim(1, "standardization")?;
    let (m, sd) = mean_sd(s.values())?;
    Ok(s.values().iter().map(|x| (x - m) / sd).collect())
}

/// Bivariate standardization for the given null hypothesis. Under
/// [`Hypothesis::Simple`] the data are used as they are; otherwise the
/// sample mean is removed.
pub fn standardize2(s: &Sample, hyp: Option<Hypothesis>) -> Result<Vec<[f64; 2]>> {
    s.require_dim(2, "bivariate standardization")?;
    let n = s.n();
    let pts: Vec<[f64; 2]> = (0..n).map(|i| [s.point(i)[0], s.point(i)[1]]).collect();
    if hyp == Some(Hypothesis::Simple) {
        return Ok(pts);
    }
    let nf = n as f64;
    let m = [pts.iter().map(|p| p[0]).sum::<f64>() / nf, pts.iter().map(|p| p[1]).sum::<f64>() / nf];
    let centered: Vec<[f64; 2]> = pts.iter().map(|p| [p[0] - m[0], p[1] - m[1]]).collect();
    if hyp == Some(Hypothesis::Mean) {
        return Ok(centered);
    }
    // Z = L⁻¹(X − X̄) with S = LLᵀ
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for p in &centered {
        a += p[0] * p[0];
        b += p[0] * p[1];
        c += p[1] * p[1];
    }
    let (a, b, c) = (a / nf, b / nf, c / nf);
    let det = a * c - b * b;
    if !(a > 0.0) || !(det > 1e-14 * a * c) {
        return Err(Error::Degenerate("sample covariance is singular".into()));
    }
    let l11 = a.sqrt();
    let l21 = b / l11;
    let l22 = (c - l21 * l21).sqrt();
    Ok(centered
        .iter()
        .map(|p| {
            let z0 = p[0] / l11;
            [z0, (p[1] - l21 * z0) / l22]
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Normality

/// E|x − X|^γ for X ~ N(0, I_d).
fn normal_abs_moment(d: usize, gamma: f64, r2: f64) -> Result<f64> {
    let h = d as f64 / 2.0;
    Ok(2f64.powf(gamma / 2.0) * gamma_fn(h + gamma / 2.0)? / gamma_fn(h)? * kummer_1f1(-gamma / 2.0, h, -r2 / 2.0)?)
}

fn energy_sum(z: &[Vec<f64>], gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 2.0) {
        return Err(Error::Domain(format!("energy statistic needs 0 < γ < 2, got {gamma}")));
    }
    let d = z[0].len();
    let n = z.len() as f64;
    let h = d as f64 / 2.0;
    let pair = 2f64.powf(gamma) * gamma_fn(h + gamma / 2.0)? / gamma_fn(h)?;
    let mut one = 0.0;
    for zj in z {
        one += normal_abs_moment(d, gamma, zj.iter().map(|v| v * v).sum())?;
    }
    let mut within = 0.0;
    for (j, zj) in z.iter().enumerate() {
        for zk in &z[..j] {
            let r2: f64 = zj.iter().zip(zk).map(|(a, b)| (a - b) * (a - b)).sum();
            within += r2.powf(gamma / 2.0);
        }
    }
    Ok(2.0 * one - n * pair - 2.0 * within / n)
}

/// Generalized energy statistic with the normalized weight |t|^{−1−γ}.
pub fn energy_stat(s: &Sample, gamma: f64) -> Result<f64> {
    let z = standardize(s)?;
    energy_sum(&z.iter().map(|&v| vec![v]).collect::<Vec<_>>(), gamma)
}

/// Energy statistic for bivariate data; γ ∈ (0, 2).
pub fn energy_stat2(s: &Sample, gamma: f64, hyp: Option<Hypothesis>) -> Result<f64> {
    let z = standardize2(s, hyp)?;
    energy_sum(&z.iter().map(|p| p.to_vec()).collect::<Vec<_>>(), gamma)
}

fn bhep_sum(z: &[Vec<f64>], gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Domain(format!("BHEP statistic needs γ > 0, got {gamma}")));
    }
    let d = z[0].len() as f64;
    let n = z.len() as f64;
    let mut pairs = n; // diagonal terms
    for (j, zj) in z.iter().enumerate() {
        for zk in &z[..j] {
            let r2: f64 = zj.iter().zip(zk).map(|(a, b)| (a - b) * (a - b)).sum();
            pairs += 2.0 * (-r2 / (4.0 * gamma)).exp();
        }
    }
    let cross: f64 = z.iter().map(|zj| (-zj.iter().map(|v| v * v).sum::<f64>() / (2.0 + 4.0 * gamma)).exp()).sum();
    Ok((PI / gamma).powf(d / 2.0) * pairs / n + n * (PI / (1.0 + gamma)).powf(d / 2.0)
        - 2.0 * (2.0 * PI / (1.0 + 2.0 * gamma)).powf(d / 2.0) * cross)
}

/// BHEP statistic with weight e^{−γt²}.
pub fn bhep_stat(s: &Sample, gamma: f64) -> Result<f64> {
    let z = standardize(s)?;
    bhep_sum(&z.iter().map(|&v| vec![v]).collect::<Vec<_>>(), gamma)
}

/// Bivariate BHEP statistic. `None` standardizes by the sample mean and
/// covariance, `Some(Mean)` only centres, `Some(Simple)` uses raw data.
pub fn bhep_stat2(s: &Sample, gamma: f64, hyp: Option<Hypothesis>) -> Result<f64> {
    let z = standardize2(s, hyp)?;
    bhep_sum(&z.iter().map(|p| p.to_vec()).collect::<Vec<_>>(), gamma)
}

// ---------------------------------------------------------------------------
// Logistic

const ML_SCORE_TOL: f64 = 1e-12;
const ML_MAX_ITER: usize = 200;

/// Location and scale estimates of a logistic sample.
pub fn logistic_estimates(s: &Sample, est: Estimator) -> Result<(f64, f64)> {
    s.require_dim(1, "logistic estimation")?;
    let x = s.values();
    let (m, sd) = mean_sd(x)?;
    let moments = (m, 3f64.sqrt() / PI * sd);
    match est {
        Estimator::LogisticMoments => Ok(moments),
        Estimator::LogisticMl => logistic_ml(x, moments),
        other => Err(Error::Config(format!("{} is not a logistic estimator", other.id()))),
    }
}

/// Solves Σtanh(z/2) = 0, Σz·tanh(z/2) = n by damped Newton.
fn logistic_ml(x: &[f64], start: (f64, f64)) -> Result<(f64, f64)> {
    let n = x.len() as f64;
    let eval = |mu: f64, sigma: f64| {
        let mut f = [0.0, -n];
        let mut j = [[0.0; 2]; 2];
        for &xi in x {
            let z = (xi - mu) / sigma;
            let t = (z / 2.0).tanh();
            let dt = 0.5 * (1.0 - t * t);
            f[0] += t;
            f[1] += z * t;
            j[0][0] -= dt / sigma;
            j[0][1] -= z * dt / sigma;
            let g = t + z * dt;
            j[1][0] -= g / sigma;
            j[1][1] -= z * g / sigma;
        }
        (f, j)
    };
    let norm = |f: [f64; 2]| f[0].abs().max(f[1].abs()) / n;
    let (mut mu, mut sigma) = start;
    let (mut f, mut j) = eval(mu, sigma);
    for _ in 0..ML_MAX_ITER {
        if norm(f) < ML_SCORE_TOL {
            return Ok((mu, sigma));
        }
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let dmu = (f[0] * j[1][1] - f[1] * j[0][1]) / det;
        let dsig = (j[0][0] * f[1] - j[1][0] * f[0]) / det;
        let mut step = 1.0;
        loop {
            let (m2, s2) = (mu - step * dmu, sigma - step * dsig);
            if s2 > 0.0 {
                let (f2, j2) = eval(m2, s2);
                if norm(f2) < norm(f) || step < 1e-6 {
                    (mu, sigma, f, j) = (m2, s2, f2, j2);
                    break;
                }
            }
            step /= 2.0;
            if step < 1e-6 {
                return Err(Error::NoConvergence { what: "logistic ML estimation".into(), partial: norm(f) });
            }
        }
    }
    if norm(f) < ML_SCORE_TOL {
        return Ok((mu, sigma));
    }
    Err(Error::NoConvergence { what: "logistic ML estimation".into(), partial: norm(f) })
}

/// Logistic test statistic with weight e^{−γ|t|}.
pub fn logistic_stat(s: &Sample, gamma: f64, est: Estimator) -> Result<f64> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Domain(format!("logistic statistic needs γ > 0, got {gamma}")));
    }
    let (mu, sigma) = logistic_estimates(s, est)?;
    let z: Vec<f64> = s.values().iter().map(|x| (x - mu) / sigma).collect();
    let n = z.len() as f64;
    let mut pairs = n / (gamma * gamma);
    for (j, &zj) in z.iter().enumerate() {
        for &zk in &z[..j] {
            pairs += 2.0 / (gamma * gamma + (zj - zk) * (zj - zk));
        }
    }
    let mut cross = 0.0;
    for &zj in &z {
        let s1 = s_series(SeriesParams::new(1, gamma, zj)?);
        let s2 = s_series(SeriesParams::new(2, gamma, zj)?);
        cross += s1 - zj * zj / (2.0 * PI * PI) * s2;
    }
    let c = 1.0 + gamma / (2.0 * PI);
    let constant = 2.0 * hurwitz_sum(2.0, c)? - gamma / PI * hurwitz_sum(3.0, c)?;
    Ok(2.0 * gamma / n * pairs - 2.0 * cross / PI + n / PI * constant)
}

// ---------------------------------------------------------------------------
// Exponentiality

/// Sample sizes up to this use the closed pairwise/triple/quadruple sums;
/// larger samples integrate over t directly since the sums cost O(n⁴).
pub const EXP_CLOSED_MAX_N: usize = 40;

/// ∫cos(at)w(t)dt over the line.
fn cos_transform(w: &WeightFunction, a: f64) -> Result<f64> {
    let g = w.gamma;
    let v = match w.family {
        WeightFamily::ExpAbs => 2.0 * g / (g * g + a * a),
        WeightFamily::Gauss => (PI / g).sqrt() * (-a * a / (4.0 * g)).exp(),
        WeightFamily::ExpAbsPow { beta: 1.0 } => 2.0 * g / (g * g + a * a),
        WeightFamily::ExpAbsPow { beta: 2.0 } => (PI / g).sqrt() * (-a * a / (4.0 * g)).exp(),
        _ => return Err(Error::Config("exponentiality statistic needs weight e^{−γ|t|} or e^{−γt²}".into())),
    };
    Ok(w.scale * v)
}

fn scaled_by_mean(s: &Sample) -> Result<Vec<f64>> {
    s.require_dim(1, "exponentiality statistic")?;
    if let Some(x) = s.values().iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::Domain(format!("exponentiality statistic needs positive observations, got {x}")));
    }
    let m = s.values().iter().sum::<f64>() / s.n() as f64;
    Ok(s.values().iter().map(|x| x / m).collect())
}

fn exp_weight(gamma: f64, beta: u32) -> Result<WeightFunction> {
    match beta {
        1 => WeightFunction::exp_abs(gamma),
        2 => WeightFunction::gauss(gamma),
        _ => Err(Error::Domain(format!("β must be 1 or 2, got {beta}"))),
    }
}

/// n∫(|φ_n(t)|² − C_n(t))² e^{−γ|t|^β} dt on Z_j = X_j/X̄, β ∈ {1, 2}.
pub fn exp_stat(s: &Sample, gamma: f64, beta: u32) -> Result<f64> {
    exp_stat_with(s, &exp_weight(gamma, beta)?)
}

fn exp_stat_with(s: &Sample, w: &WeightFunction) -> Result<f64> {
    let z = scaled_by_mean(s)?;
    if z.len() <= EXP_CLOSED_MAX_N {
        exp_closed(&z, w)
    } else {
        exp_integral(&z, w)
    }
}

/// Expands the square into cosines of ±Z combinations:
/// |φ_n|⁴ → Z_j−Z_k+Z_l−Z_m, |φ_n|²C_n → Z_j−Z_k+Z_l, C_n² → Z_j±Z_k.
fn exp_closed(z: &[f64], w: &WeightFunction) -> Result<f64> {
    let n = z.len();
    let nf = n as f64;
    let i = |a: f64| cos_transform(w, a);
    i(0.0)?; // validates the weight family
    let mut quad = 0.0;
    for &a in z {
        for &b in z {
            let ab = a - b;
            for &c in z {
                let abc = ab + c;
                for &d in z {
                    quad += i(abc - d)?;
                }
            }
        }
    }
    let mut triple = 0.0;
    for &a in z {
        for &b in z {
            for &c in z {
                triple += i(a - b + c)?;
            }
        }
    }
    let mut double = 0.0;
    for &a in z {
        for &b in z {
            double += i(a + b)? + i(a - b)?;
        }
    }
    Ok(nf * (quad / nf.powi(4) - 2.0 * triple / nf.powi(3) + double / (2.0 * nf * nf)))
}

fn exp_integrand(z: &[f64], t: f64) -> f64 {
    let (mut c, mut s) = (0.0, 0.0);
    for &x in z {
        let (sn, cs) = (t * x).sin_cos();
        c += cs;
        s += sn;
    }
    let n = z.len() as f64;
    let (c, s) = (c / n, s / n);
    let d = c * c + s * s - c;
    d * d
}

/// Upper limit beyond which the weight is below e^{−40} of its peak.
fn weight_cutoff(w: &WeightFunction) -> f64 {
    match w.family {
        WeightFamily::Gauss => (40.0 / w.gamma).sqrt(),
        WeightFamily::ExpAbsPow { beta } => (40.0 / w.gamma).powf(1.0 / beta),
        _ => 40.0 / w.gamma,
    }
}

/// Panel breaks roughly one oscillation period apart.
fn panels(t_max: f64, freq: f64) -> Vec<f64> {
    panels_between(0.0, t_max, freq)
}

fn exp_integral(z: &[f64], w: &WeightFunction) -> Result<f64> {
    let n = z.len() as f64;
    let zmax = z.iter().fold(0.0f64, |m, &x| m.max(x));
    let t_max = weight_cutoff(w);
    let dom = IntegrationDomain::bounded(0.0, t_max).with_singular(&panels(t_max, 2.0 * zmax));
    let r = integrate_with(|t| exp_integrand(z, t) * w.at_radius(t), &dom, QuadOptions::rel(1e-15, 1e-11))?;
    Ok(2.0 * n * r.value)
}

// ---------------------------------------------------------------------------
// Dispatch and direct integration

/// Real and imaginary parts of the null characteristic function at t.
fn null_cf(null: NullModel, t: &[f64]) -> (f64, f64) {
    match null {
        NullModel::Normal | NullModel::BinormalSimple | NullModel::BinormalMean => {
            ((-0.5 * t.iter().map(|v| v * v).sum::<f64>()).exp(), 0.0)
        }
        NullModel::Logistic => {
            let a = PI * t[0];
            if a == 0.0 {
                (1.0, 0.0)
            } else {
                (a / a.sinh(), 0.0)
            }
        }
        NullModel::Exponential => {
            let d = 1.0 + t[0] * t[0];
            (1.0 / d, t[0] / d)
        }
    }
}

fn bivariate_hyp(fam: TestFamily) -> Option<Hypothesis> {
    match fam {
        TestFamily::BivBhep { hyp, .. } | TestFamily::BivEnergy { hyp, .. } => Some(hyp),
        _ => None,
    }
}

/// Standardized data as the test uses them.
fn prepared(test: &TestSpec, s: &Sample) -> Result<Vec<Vec<f64>>> {
    Ok(match test.family {
        TestFamily::Energy { .. } | TestFamily::Bhep { .. } => standardize(s)?.into_iter().map(|v| vec![v]).collect(),
        TestFamily::Logistic { est, .. } => {
            let (mu, sigma) = logistic_estimates(s, est)?;
            s.values().iter().map(|x| vec![(x - mu) / sigma]).collect()
        }
        TestFamily::ExpW1 { .. } | TestFamily::ExpW2 { .. } => scaled_by_mean(s)?.into_iter().map(|v| vec![v]).collect(),
        TestFamily::BivBhep { .. } | TestFamily::BivEnergy { .. } => {
            standardize2(s, bivariate_hyp(test.family))?.into_iter().map(|p| p.to_vec()).collect()
        }
    })
}

/// The statistic of `test` on `s`, via its closed form.
pub fn statistic(test: &TestSpec, s: &Sample) -> Result<f64> {
    let g = test.family.gamma();
    let c = test.weight.scale;
    let v = match test.family {
        TestFamily::Energy { .. } => energy_stat(s, g)?,
        TestFamily::Bhep { .. } => bhep_stat(s, g)?,
        TestFamily::Logistic { est, .. } => logistic_stat(s, g, est)?,
        TestFamily::ExpW1 { .. } | TestFamily::ExpW2 { .. } => return exp_stat_with(s, &test.weight),
        TestFamily::BivBhep { hyp, .. } => bhep_stat2(s, g, Some(hyp))?,
        TestFamily::BivEnergy { hyp, .. } => energy_stat2(s, g, Some(hyp))?,
    };
    Ok(c * v)
}

/// The statistic of `test` on `s` by numerical integration of its defining
/// integral over t. Slow; meant for checking the closed forms.
pub fn statistic_by_quadrature(test: &TestSpec, s: &Sample) -> Result<f64> {
    let z = prepared(test, s)?;
    let n = z.len() as f64;
    let w = &test.weight;
    let exp_form = matches!(test.family, TestFamily::ExpW1 { .. } | TestFamily::ExpW2 { .. });
    let gap = |t: &[f64]| -> f64 {
        let (mut c, mut sn) = (0.0, 0.0);
        for zj in &z {
            let (a, b) = zj.iter().zip(t).map(|(x, y)| x * y).sum::<f64>().sin_cos();
            c += b;
            sn += a;
        }
        let (c, sn) = (c / n, sn / n);
        if exp_form {
            let d = c * c + sn * sn - c;
            return d * d;
        }
        let (r, i) = null_cf(test.null, t);
        (c - r) * (c - r) + (sn - i) * (sn - i)
    };
    let zmax = z.iter().flatten().fold(0.0f64, |m, &x| m.max(x.abs()));
    let freq = 4.0 * zmax + 1.0;
    let d = test.dimension();
    let (t_max, tail) = match w.family {
        WeightFamily::Energy if d == 2 => {
            return Err(Error::Config("no quadrature form for the bivariate energy statistic".into()));
        }
        // Beyond the cutoff φ₀ is negligible and |φ_n|² is a finite cosine
        // sum, integrated against the power weight in closed form.
        WeightFamily::Energy => {
            let l = ENERGY_CUTOFF;
            let p = 1.0 + w.gamma;
            let c = w.scale / WeightFunction::energy_constant(1, w.gamma);
            let mut osc = 0.0;
            for (j, zj) in z.iter().enumerate() {
                for zk in &z[..j] {
                    osc += cos_power_tail((zj[0] - zk[0]).abs(), p, l)?;
                }
            }
            (l, 2.0 * c * (cos_power_tail(0.0, p, l)? / n + 2.0 * osc / (n * n)))
        }
        _ => (weight_cutoff(w), 0.0),
    };
    let radial = IntegrationDomain::bounded(0.0, t_max).with_singular(&panels(t_max, freq));
    let v = match d {
        1 => 2.0 * integrate_with(|t| gap(&[t]) * w.at_radius(t), &radial, QuadOptions::rel(1e-15, 1e-12))?.value,
        _ => {
            // polar coordinates; the integrand is even under t ↦ −t
            let angle = IntegrationDomain::bounded(0.0, PI).with_singular(&panels(PI, freq * t_max / 4.0));
            2.0 * integrate2_over(
                |phi, r| {
                    let t = [r * phi.cos(), r * phi.sin()];
                    gap(&t) * w.at_radius(r) * r
                },
                &angle,
                &radial,
                QuadOptions::rel(1e-14, 1e-10).with_budget(200_000_000),
            )?
            .value
        }
    };
    Ok(n * (v + tail))
}

/// Truncation point of the energy-weight integral.
const ENERGY_CUTOFF: f64 = 50.0;

/// ∫_L^∞ cos(at) t^{−p} dt for p > 1, a ≥ 0.
///
/// Numerical up to aT = 80, then the asymptotic series
/// ∫_X^∞ e^{iu}u^{−p}du ~ i e^{iX} X^{−p} Σ_k (p)_k (−i/X)^k.
fn cos_power_tail(a: f64, p: f64, l: f64) -> Result<f64> {
    if a * l < 1e-300 || a == 0.0 {
        return Ok(l.powf(1.0 - p) / (p - 1.0));
    }
    let x0 = (a * l).max(80.0);
    let t0 = x0 / a;
    let mut head = 0.0;
    if t0 > l {
        let dom = IntegrationDomain::bounded(l, t0).with_singular(&panels_between(l, t0, a));
        head = integrate_with(|t| (a * t).cos() * t.powf(-p), &dom, QuadOptions::rel(1e-15, 1e-12))?.value;
    }
    // Σ (p)_k (−i/X)^k, multiplied by i e^{iX}
    let (mut re, mut im) = (0.0, 0.0);
    let (mut tr, mut ti) = (1.0, 0.0);
    for k in 0..30 {
        re += tr;
        im += ti;
        let f = (p + k as f64) / x0;
        // (tr + i·ti)·(−i f)
        (tr, ti) = (ti * f, -tr * f);
        if tr.abs() + ti.abs() < 1e-17 {
            break;
        }
    }
    let (sn, cs) = x0.sin_cos();
    // Re[i(cs + i sn)(re + i im)] = −(sn·re + cs·im)
    let series = -(sn * re + cs * im) * x0.powf(-p);
    Ok(head + a.powf(p - 1.0) * series)
}

fn panels_between(lo: f64, hi: f64, freq: f64) -> Vec<f64> {
    let k = (((hi - lo) * freq / PI).ceil() as usize).clamp(1, 50_000);
    (1..k).map(|i| lo + (hi - lo) * i as f64 / k as f64).collect()
}

// ---------------------------------------------------------------------------
// Null simulation

/// Minimum number of replications accepted by [`simulate_null`].
pub const MIN_REPS: usize = 100;

/// Empirical null distribution of a statistic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullSummary {
    pub test: String,
    pub gamma: f64,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub mean: f64,
    pub variance: f64,
    /// Standard errors of `mean` and `variance`.
    pub mean_se: f64,
    pub variance_se: f64,
    /// (probability, quantile) pairs.
    pub quantiles: Vec<(f64, f64)>,
    #[serde(skip)]
    pub values: Vec<f64>,
}

pub const SUMMARY_PROBS: [f64; 5] = [0.5, 0.9, 0.95, 0.975, 0.99];

/// Draws a sample of size n from the null model of `test`.
pub fn draw_null(null: NullModel, n: usize, rng: &mut impl Rng) -> Result<Sample> {
    match null {
        NullModel::Normal => Sample::univariate((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()),
        NullModel::Logistic => Sample::univariate(
            (0..n)
                .map(|_| {
                    let u: f64 = rng.random_range(f64::EPSILON..1.0);
                    (u / (1.0 - u)).ln()
                })
                .collect(),
        ),
        NullModel::Exponential => Sample::univariate((0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect()),
        NullModel::BinormalSimple | NullModel::BinormalMean => {
            let pts: Vec<[f64; 2]> =
                (0..n).map(|_| [rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)]).collect();
            Sample::bivariate(&pts)
        }
    }
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Simulates the statistic under the null. Replication r draws from
/// ChaCha8 seeded with `seed` on stream r, so results do not depend on the
/// thread count.
pub fn simulate_null(test: &TestSpec, n: usize, reps: usize, seed: u64) -> Result<NullSummary> {
    if reps < MIN_REPS {
        return Err(Error::Config(format!("need at least {MIN_REPS} replications, got {reps}")));
    }
    if n < 3 {
        return Err(Error::Config(format!("sample size must be at least 3, got {n}")));
    }
    let values = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let s = draw_null(test.null, n, &mut rng)?;
            statistic(test, &s)
        })
        .collect::<Result<Vec<f64>>>()?;
    let k = reps as f64;
    let mean = values.iter().sum::<f64>() / k;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k;
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / k;
    let variance = m2 * k / (k - 1.0);
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(NullSummary {
        test: test.family.id(),
        gamma: test.family.gamma(),
        n,
        reps,
        seed,
        mean,
        variance,
        mean_se: (variance / k).sqrt(),
        variance_se: ((m4 - m2 * m2).max(0.0) / k).sqrt(),
        quantiles: SUMMARY_PROBS.iter().map(|&p| (p, quantile(&sorted, p))).collect(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(id: &str, g: f64) -> TestSpec {
        TestSpec::new(TestFamily::parse(id, g).unwrap()).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    fn fixed(n: usize, null: NullModel) -> Sample {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        draw_null(null, n, &mut rng).unwrap()
    }

    #[test]
    fn closed_forms_match_quadrature_univariate() {
        let cases = [
            ("energy", 1.0),
            ("energy", 0.5),
            ("energy", 1.7),
            ("bhep", 1.0),
            ("bhep", 0.1),
            ("logistic_ml", 1.0),
            ("logistic_moments", 0.3),
            ("exp_w1", 1.0),
            ("exp_w2", 2.0),
        ];
        for (id, g) in cases {
            let t = spec(id, g);
            for n in [3, 4, 5] {
                let s = fixed(n, t.null);
                let a = statistic(&t, &s).unwrap();
                let b = statistic_by_quadrature(&t, &s).unwrap_or_else(|e| panic!("{id} γ={g} n={n}: {e}"));
                assert!(close(a, b, 1e-8), "{id} γ={g} n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn symmetric_three_point_energy() {
        let s = Sample::univariate(vec![-1.0, 0.0, 1.0]).unwrap();
        let t = spec("energy", 1.0);
        let a = energy_stat(&s, 1.0).unwrap();
        let b = statistic_by_quadrature(&t, &s).unwrap();
        assert!(close(a, b, 1e-9), "{a} vs {b}");
        let a = bhep_stat(&s, 1.0).unwrap();
        let b = statistic_by_quadrature(&spec("bhep", 1.0), &s).unwrap();
        assert!(close(a, b, 1e-10), "{a} vs {b}");
    }

    #[test]
    fn exponential_closed_and_integral_paths_agree() {
        let s = Sample::univariate(vec![1.0, 2.0, 3.0]).unwrap();
        let a = exp_stat(&s, 1.0, 1).unwrap();
        let z = scaled_by_mean(&s).unwrap();
        let w = exp_weight(1.0, 1).unwrap();
        assert!(close(a, exp_integral(&z, &w).unwrap(), 1e-9));
        let s = fixed(30, NullModel::Exponential);
        let z = scaled_by_mean(&s).unwrap();
        for (g, beta) in [(1.0, 1), (0.5, 2), (10.0, 1)] {
            let w = exp_weight(g, beta).unwrap();
            let a = exp_closed(&z, &w).unwrap();
            let b = exp_integral(&z, &w).unwrap();
            assert!(close(a, b, 1e-8), "γ={g} β={beta}: {a} vs {b}");
        }
    }

    #[test]
    fn bivariate_matches_quadrature() {
        for (id, g) in [("biv_bhep_simple", 0.5), ("biv_bhep_mean", 2.0)] {
            let t = spec(id, g);
            let s = fixed(5, t.null);
            let a = statistic(&t, &s).unwrap();
            let b = statistic_by_quadrature(&t, &s).unwrap_or_else(|e| panic!("{id}: {e}"));
            assert!(close(a, b, 1e-6), "{id}: {a} vs {b}");
        }
        // fully standardized variant
        let s = fixed(5, NullModel::BinormalSimple);
        let z = standardize2(&s, None).unwrap();
        let mean: f64 = z.iter().map(|p| p[0] + p[1]).sum();
        assert!(mean.abs() < 1e-12);
        let a = bhep_stat2(&s, 1.0, None).unwrap();
        let zs = Sample::bivariate(&z).unwrap();
        let b = statistic_by_quadrature(&spec("biv_bhep_simple", 1.0), &zs).unwrap();
        assert!(close(a, b, 1e-6), "{a} vs {b}");
    }

    #[test]
    fn bivariate_normal_abs_moment() {
        // E|x − X|^γ by polar quadrature around x
        for (g, x) in [(1.0, [0.3, -1.2]), (0.5, [2.0, 0.0]), (1.5, [0.0, 0.0])] {
            let r2 = x[0] * x[0] + x[1] * x[1];
            let f = |phi: f64, r: f64| {
                let y = [x[0] + r * phi.cos(), x[1] + r * phi.sin()];
                r.powf(g) * (-(y[0] * y[0] + y[1] * y[1]) / 2.0).exp() / (2.0 * PI) * r
            };
            let q = integrate2_over(f, &IntegrationDomain::bounded(0.0, 2.0 * PI), &IntegrationDomain::half_line(0.0), QuadOptions::rel(1e-13, 1e-11)).unwrap();
            let a = normal_abs_moment(2, g, r2).unwrap();
            assert!(close(a, q.value, 1e-9), "{a} vs {}", q.value);
        }
    }

    #[test]
    fn cos_power_tail_values() {
        // reference values from an oscillatory-quadrature routine at 30 digits
        let cases = [
            (1.0, 2.0, 1.0, -0.0844109505595738868890317703736),
            (0.3, 1.5, 50.0, -0.00672598507469741978255486655712),
            (2.5, 2.9, 50.0, 0.00000299938446339384694093959462959),
            (0.05, 2.0, 50.0, -0.00563667997849217257667104802115),
        ];
        for (a, p, l, want) in cases {
            let v = cos_power_tail(a, p, l).unwrap();
            assert!((v - want).abs() < 1e-13 + 1e-11 * want.abs(), "a={a} p={p}: {v} vs {want}");
        }
        assert!((cos_power_tail(0.0, 2.0, 4.0).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn invariance() {
        let s = fixed(25, NullModel::Normal);
        let t = s.affine(3.7, 2.5);
        for g in [0.5, 1.0, 1.5] {
            assert!(close(energy_stat(&s, g).unwrap(), energy_stat(&t, g).unwrap(), 1e-12));
            assert!(close(bhep_stat(&s, g).unwrap(), bhep_stat(&t, g).unwrap(), 1e-12));
        }
        for est in [Estimator::LogisticMl, Estimator::LogisticMoments] {
            assert!(close(logistic_stat(&s, 1.0, est).unwrap(), logistic_stat(&t, 1.0, est).unwrap(), 1e-10));
        }
        let e = fixed(25, NullModel::Exponential);
        for beta in [1, 2] {
            assert!(close(exp_stat(&e, 1.0, beta).unwrap(), exp_stat(&e.affine(0.0, 4.2), 1.0, beta).unwrap(), 1e-12));
        }
        let b = fixed(20, NullModel::BinormalSimple);
        let pts: Vec<[f64; 2]> = (0..20).map(|i| {
            let p = b.point(i);
            [1.0 + 2.0 * p[0] - p[1], -3.0 + 0.5 * p[0] + 1.5 * p[1]]
        }).collect();
        let b2 = Sample::bivariate(&pts).unwrap();
        assert!(close(bhep_stat2(&b, 1.0, None).unwrap(), bhep_stat2(&b2, 1.0, None).unwrap(), 1e-11));
    }

    #[test]
    fn ml_solves_score_equations() {
        let s = fixed(50, NullModel::Logistic);
        let (mu, sigma) = logistic_estimates(&s, Estimator::LogisticMl).unwrap();
        let (mut a, mut b) = (0.0, 0.0);
        for x in s.values() {
            let z = (x - mu) / sigma;
            a += (z / 2.0).tanh();
            b += z * (z / 2.0).tanh();
        }
        assert!(a.abs() < 1e-10 && (b - 50.0).abs() < 1e-10);
    }

    #[test]
    fn errors() {
        assert!(matches!(Sample::univariate(vec![1.0, 2.0]), Err(Error::Degenerate(_))));
        assert!(matches!(Sample::univariate(vec![1.0, f64::NAN, 2.0]), Err(Error::Domain(_))));
        let flat = Sample::univariate(vec![2.0; 5]).unwrap();
        assert!(matches!(energy_stat(&flat, 1.0), Err(Error::Degenerate(_))));
        let neg = Sample::univariate(vec![1.0, -2.0, 3.0]).unwrap();
        assert!(matches!(exp_stat(&neg, 1.0, 1), Err(Error::Domain(_))));
        assert!(matches!(exp_stat(&flat, 1.0, 3), Err(Error::Domain(_))));
        assert!(simulate_null(&spec("bhep", 1.0), 20, 50, 1).is_err());
    }

    #[test]
    fn nonnegative_and_deterministic() {
        let t = spec("bhep", 1.0);
        let a = simulate_null(&t, 20, 200, 7).unwrap();
        let b = simulate_null(&t, 20, 200, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.values.iter().all(|&v| v >= 0.0));
        let c = simulate_null(&t, 20, 200, 8).unwrap();
        assert_ne!(a.values, c.values);
    }
}
